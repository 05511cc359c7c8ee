//! Moments, total Sobol indices and the evaluation-cost model.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::orthopoly::binomial;
use crate::quadrature::{monte_carlo, tensor_gauss_rule, McOptions};
use crate::regression::PceSurrogate;
use crate::space::StochasticSpace;

/// Default surrogate Monte Carlo sample count for higher moments.
pub const DEFAULT_SURROGATE_SAMPLES: usize = 1_000_000;

/// Largest dimension handled by exact tensor quadrature in [`HigherMomentScheme::Auto`].
pub const MAX_TENSOR_DIM: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Segpc,
    Wlsq,
    Smolyak,
    Mc,
}

impl Method {
    pub const ALL_FITS: [Method; 3] = [Method::Segpc, Method::Wlsq, Method::Smolyak];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Segpc => "segpc",
            Method::Wlsq => "wlsq",
            Method::Smolyak => "smolyak",
            Method::Mc => "mc",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "segpc" => Ok(Method::Segpc),
            "wlsq" => Ok(Method::Wlsq),
            "smolyak" => Ok(Method::Smolyak),
            "mc" => Ok(Method::Mc),
            other => Err(invalid(format!("unknown method '{other}' (expected segpc, wlsq, smolyak or mc)"))),
        }
    }
}

/// First four moments of a QoI plus where they came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentsReport {
    pub method: Method,
    pub m: usize,
    pub p: usize,
    pub evaluation_count: usize,
    pub mean: f64,
    pub variance: f64,
    pub std: f64,
    /// `None` when undefined (zero variance, or p < 2 for a surrogate).
    pub skewness: Option<f64>,
    pub kurtosis: Option<f64>,
}

/// Reference moments for error columns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceMoments {
    pub mean: f64,
    pub std: f64,
    #[serde(default)]
    pub skewness: Option<f64>,
    #[serde(default)]
    pub kurtosis: Option<f64>,
}

/// Relative errors against a reference; absolute for a zero reference value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentErrors {
    pub mean: f64,
    pub std: f64,
    pub skewness: Option<f64>,
    pub kurtosis: Option<f64>,
}

fn rel_err(got: f64, want: f64) -> f64 {
    if want == 0.0 {
        (got - want).abs()
    } else {
        ((got - want) / want).abs()
    }
}

fn opt_cell(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

impl MomentsReport {
    pub const CSV_HEADER: &'static str =
        "method,m,p,evaluation_count,mean,std,skewness,kurtosis,err_mean,err_std,err_skewness,err_kurtosis";

    pub fn errors(&self, reference: &ReferenceMoments) -> MomentErrors {
        MomentErrors {
            mean: rel_err(self.mean, reference.mean),
            std: rel_err(self.std, reference.std),
            skewness: self.skewness.zip(reference.skewness).map(|(a, b)| (a - b).abs()),
            kurtosis: self.kurtosis.zip(reference.kurtosis).map(|(a, b)| rel_err(a, b)),
        }
    }

    /// One row matching [`Self::CSV_HEADER`]; undefined cells are empty.
    pub fn csv_row(&self, reference: Option<&ReferenceMoments>) -> String {
        let errs = reference.map(|r| self.errors(r));
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.method,
            self.m,
            self.p,
            self.evaluation_count,
            self.mean,
            self.std,
            opt_cell(self.skewness),
            opt_cell(self.kurtosis),
            opt_cell(errs.map(|e| e.mean)),
            opt_cell(errs.map(|e| e.std)),
            opt_cell(errs.and_then(|e| e.skewness)),
            opt_cell(errs.and_then(|e| e.kurtosis)),
        )
    }
}

/// Mean `c⁰` and variance `Σ_{i≥1} (cⁱ)²` of an orthonormal expansion.
pub fn moments_from_coefficients(surrogate: &PceSurrogate) -> (f64, f64) {
    (surrogate.mean(), surrogate.variance())
}

/// How third and fourth moments of a surrogate are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HigherMomentScheme {
    /// Tensor Gauss when m ≤ 4, otherwise surrogate Monte Carlo.
    Auto { samples: usize, seed: u64 },
    /// Exact tensor Gauss with ⌈(4p + 1)/2⌉ nodes per dimension.
    TensorGauss,
    /// Antithetic surrogate Monte Carlo.
    SurrogateMc { samples: usize, seed: u64 },
}

impl Default for HigherMomentScheme {
    fn default() -> Self {
        HigherMomentScheme::Auto { samples: DEFAULT_SURROGATE_SAMPLES, seed: 0 }
    }
}

/// Full moment report of a fitted surrogate.
///
/// Skewness and kurtosis need p ≥ 2 and a positive variance; otherwise they
/// are `None`. Third and fourth central moments are integrated around the
/// exact mean `c⁰`, and the variance is the Parseval value.
pub fn higher_moments(
    surrogate: &PceSurrogate,
    space: &StochasticSpace,
    scheme: HigherMomentScheme,
    method: Method,
) -> Result<MomentsReport> {
    let basis = &surrogate.basis;
    if space.dim() != basis.dim() || space.families() != basis.families() {
        return Err(invalid("space does not match the surrogate basis"));
    }
    let (mean, variance) = moments_from_coefficients(surrogate);
    let std = variance.sqrt();
    let mut report = MomentsReport {
        method,
        m: basis.dim(),
        p: basis.order(),
        evaluation_count: surrogate.fit_report.evaluations,
        mean,
        variance,
        std,
        skewness: None,
        kurtosis: None,
    };
    if basis.order() < 2 || !(variance > 0.0) {
        return Ok(report);
    }
    let scheme = match scheme {
        HigherMomentScheme::Auto { samples, seed } if basis.dim() > MAX_TENSOR_DIM => {
            HigherMomentScheme::SurrogateMc { samples, seed }
        }
        HigherMomentScheme::Auto { .. } => HigherMomentScheme::TensorGauss,
        s => s,
    };
    let (c3, c4) = match scheme {
        HigherMomentScheme::TensorGauss => {
            let n = (4 * basis.order() + 2) / 2;
            let rule = tensor_gauss_rule(basis.families(), n)?;
            let c3 = rule.integrate(|xi| (surrogate.eval(xi).expect("dimension checked") - mean).powi(3));
            let c4 = rule.integrate(|xi| (surrogate.eval(xi).expect("dimension checked") - mean).powi(4));
            (c3, c4)
        }
        HigherMomentScheme::SurrogateMc { samples, seed } => {
            let central = |k: i32| {
                let opts = McOptions { n: samples, seed, antithetic: true, keep_trace: false };
                monte_carlo(space, opts, |xi| Ok((surrogate.eval(xi)? - mean).powi(k))).map(|e| e.mean)
            };
            (central(3)?, central(4)?)
        }
        HigherMomentScheme::Auto { .. } => unreachable!("resolved above"),
    };
    report.skewness = Some(c3 / (variance * std));
    report.kurtosis = Some(c4 / (variance * variance));
    Ok(report)
}

/// Total Sobol indices of each input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolReport {
    pub total_indices: Vec<f64>,
}

/// `S_i = Σ_{α_i > 0} (c^α)² / Σ_{α ≠ 0} (c^α)²`.
pub fn sobol_total(surrogate: &PceSurrogate) -> Result<SobolReport> {
    let set = surrogate.basis.index_set();
    let var = surrogate.variance();
    if !(var > 0.0) {
        return Err(invalid("Sobol indices are undefined for zero variance"));
    }
    let mut partial = vec![0.0; set.dim()];
    for (j, c) in surrogate.coefficients.iter().enumerate().skip(1) {
        for (k, &a) in set.get(j).iter().enumerate() {
            if a > 0 {
                partial[k] += c * c;
            }
        }
    }
    Ok(SobolReport { total_indices: partial.iter().map(|s| s / var).collect() })
}

/// Predicted number of model evaluations at oversampling 1.
///
/// se-gPC: `2⌈(P+1)/(m+1)⌉`; WLSQ: `P+1`; Smolyak: `C(2m+p, p)`, which gives
/// `2m+1` at p = 1 and `(m+1)(2m+1)` at p = 2.
pub fn predicted_cost(method: Method, m: usize, p: usize) -> Result<usize> {
    if m == 0 {
        return Err(invalid("dimension must be ≥ 1"));
    }
    let overflow = || Error::SizeOverflow(format!("cost of {method} at m={m}, p={p}"));
    let terms = || binomial(m + p, p).ok_or_else(overflow);
    match method {
        Method::Segpc => terms()?.div_ceil(m + 1).checked_mul(2).ok_or_else(overflow),
        Method::Wlsq => terms(),
        Method::Smolyak => binomial(2 * m + p, p).ok_or_else(overflow),
        Method::Mc => Err(invalid("Monte Carlo cost is the sample count")),
    }
}

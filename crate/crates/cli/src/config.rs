//! JSON run configuration merged with command-line overrides.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use segpc::models::burgers::NOMINAL_COEFFICIENTS;
use segpc::{
    BurgersModel, BurgersSolver, IshigamiModel, Method, Model, OdeModel, ReferenceMoments, StochasticSpace,
};

use crate::{CliError, Overrides};

pub const DEFAULT_POOL: usize = 10_000;
pub const DEFAULT_MC_SAMPLES: usize = 100_000;

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSpec {
    Ode {
        #[serde(default)]
        t: Option<f64>,
        /// Fit once per time and report curves against the closed forms.
        #[serde(default)]
        times: Option<Vec<f64>>,
    },
    Ishigami {
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default = "default_beta")]
        beta: f64,
    },
    Burgers {
        #[serde(default = "default_grid")]
        grid: usize,
        #[serde(default = "default_re")]
        re: f64,
        #[serde(default)]
        means: Option<Vec<f64>>,
        #[serde(default = "default_rel_std")]
        rel_std: f64,
    },
}

fn default_alpha() -> f64 {
    7.0
}
fn default_beta() -> f64 {
    0.1
}
fn default_grid() -> usize {
    31
}
fn default_re() -> f64 {
    250.0
}
fn default_rel_std() -> f64 {
    0.2
}

/// Reference moments: inline values or a file written by `mc`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ReferenceSpec {
    Inline(ReferenceMoments),
    File(PathBuf),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub model: Option<ModelSpec>,
    /// Replaces the model's default input space.
    pub space: Option<StochasticSpace>,
    pub method: Option<String>,
    pub methods: Option<Vec<String>>,
    pub order: Option<usize>,
    pub orders: Option<Vec<usize>>,
    pub pool: Option<usize>,
    pub seed: Option<u64>,
    pub oversample: Option<f64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub samples: Option<usize>,
    pub trace: Option<bool>,
    /// Surrogate samples for higher moments when m > 4.
    pub moment_samples: Option<usize>,
    pub reference: Option<ReferenceSpec>,
}

/// Fully resolved settings.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub space: Option<StochasticSpace>,
    pub methods: Vec<Method>,
    pub orders: Vec<usize>,
    pub pool: usize,
    pub seed: u64,
    pub oversample: f64,
    pub workers: usize,
    pub out: PathBuf,
    pub samples: usize,
    pub trace: bool,
    pub moment_samples: usize,
    pub reference: Option<ReferenceSpec>,
}

fn parse_methods(names: &[String]) -> Result<Vec<Method>, CliError> {
    names
        .iter()
        .flat_map(|n| n.split(','))
        .map(|n| n.trim().parse::<Method>().map_err(|e| CliError::Config(format!("method: {e}"))))
        .collect()
}

pub fn load(path: Option<&Path>, o: &Overrides) -> Result<RunConfig, CliError> {
    let file = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            serde_json::from_str::<FileConfig>(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
        }
        None => FileConfig::default(),
    };
    let model = o
        .model
        .as_deref()
        .map(|name| {
            serde_json::from_value::<ModelSpec>(serde_json::json!({ "name": name }))
                .map_err(|e| CliError::Config(format!("--model: {e}")))
        })
        .transpose()?
        .or(file.model)
        .ok_or_else(|| CliError::Config("no model given (config field `model` or --model)".into()))?;

    let methods = match (&o.method, &file.methods, &file.method) {
        (Some(m), _, _) => parse_methods(std::slice::from_ref(m))?,
        (None, Some(ms), _) => parse_methods(ms)?,
        (None, None, Some(m)) => parse_methods(std::slice::from_ref(m))?,
        (None, None, None) => Vec::new(),
    };
    let orders = match (&o.orders, o.order, &file.orders, file.order) {
        (Some(list), _, _, _) => list.clone(),
        (None, Some(p), _, _) => vec![p],
        (None, None, Some(list), _) => list.clone(),
        (None, None, None, Some(p)) => vec![p],
        _ => Vec::new(),
    };
    let seed = o
        .seed
        .or(file.seed)
        .ok_or_else(|| CliError::Config("a seed is required (config field `seed` or --seed)".into()))?;
    let oversample = o.oversample.or(file.oversample).unwrap_or(1.0);
    if !(oversample >= 1.0) {
        return Err(CliError::Config(format!("oversample must be ≥ 1, got {oversample}")));
    }
    let reference = match &o.reference {
        Some(p) => Some(ReferenceSpec::File(p.clone())),
        None => file.reference,
    };
    Ok(RunConfig {
        model,
        space: file.space,
        methods,
        orders,
        pool: o.pool.or(file.pool).unwrap_or(DEFAULT_POOL),
        seed,
        oversample,
        workers: o.workers.or(file.workers).unwrap_or(1),
        out: o.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from(".")),
        samples: o.samples.or(file.samples).unwrap_or(DEFAULT_MC_SAMPLES),
        trace: file.trace.unwrap_or(true),
        moment_samples: file.moment_samples.unwrap_or(segpc::postproc::DEFAULT_SURROGATE_SAMPLES),
        reference,
    })
}

impl RunConfig {
    /// Times for an ODE model, or `[None]` for any other model.
    pub fn ode_times(&self) -> Result<Vec<Option<f64>>, CliError> {
        match &self.model {
            ModelSpec::Ode { t, times } => match (t, times) {
                (_, Some(ts)) if !ts.is_empty() => Ok(ts.iter().map(|&t| Some(t)).collect()),
                (Some(t), _) => Ok(vec![Some(*t)]),
                _ => Err(CliError::Config("ode model needs `t` or `times`".into())),
            },
            _ => Ok(vec![None]),
        }
    }

    /// Build the model; `t` selects the ODE time.
    pub fn build_model(&self, t: Option<f64>) -> Result<Box<dyn Model>, CliError> {
        let model: Box<dyn Model> = match &self.model {
            ModelSpec::Ode { .. } => {
                let t = t.ok_or_else(|| CliError::Config("ode model needs `t`".into()))?;
                let mut m = OdeModel::new(t).map_err(CliError::from_config)?;
                if let Some(space) = &self.space {
                    m = m.with_space(space.clone()).map_err(CliError::from_config)?;
                }
                Box::new(m)
            }
            ModelSpec::Ishigami { alpha, beta } => {
                let mut m = IshigamiModel::new(*alpha, *beta).map_err(CliError::from_config)?;
                if let Some(space) = &self.space {
                    m = m.with_space(space.clone()).map_err(CliError::from_config)?;
                }
                Box::new(m)
            }
            ModelSpec::Burgers { grid, re, means, rel_std } => {
                let means = means.clone().unwrap_or_else(|| NOMINAL_COEFFICIENTS.to_vec());
                let solver = BurgersSolver::new(*grid, *re).map_err(CliError::from_config)?;
                let mut m = BurgersModel::new(&means, *rel_std, solver).map_err(CliError::from_config)?;
                if let Some(space) = &self.space {
                    if space.dim() != means.len() {
                        return Err(CliError::Config("space dimension differs from burgers means".into()));
                    }
                    m = m.with_space(space.clone());
                }
                Box::new(m)
            }
        };
        Ok(model)
    }

    /// Closed-form reference moments, when the model has them.
    pub fn analytic_reference(&self, t: Option<f64>) -> Option<ReferenceMoments> {
        if self.space.is_some() {
            return None;
        }
        match &self.model {
            ModelSpec::Ode { .. } => t.map(|t| ReferenceMoments {
                mean: OdeModel::exact_mean(t),
                std: OdeModel::exact_variance(t).sqrt(),
                skewness: None,
                kurtosis: None,
            }),
            ModelSpec::Ishigami { alpha, beta } => {
                let m = IshigamiModel::new(*alpha, *beta).ok()?;
                let reference_kurtosis =
                    (*alpha == 7.0 && *beta == 0.1).then_some(segpc::models::ISHIGAMI_REFERENCE_KURTOSIS);
                Some(ReferenceMoments {
                    mean: m.exact_mean(),
                    std: m.exact_variance().sqrt(),
                    skewness: Some(0.0),
                    kurtosis: reference_kurtosis,
                })
            }
            ModelSpec::Burgers { .. } => None,
        }
    }

    /// Reference from the config or file, falling back to closed forms.
    pub fn reference(&self, t: Option<f64>) -> Result<Option<ReferenceMoments>, CliError> {
        match &self.reference {
            Some(ReferenceSpec::Inline(r)) => Ok(Some(*r)),
            Some(ReferenceSpec::File(p)) => read_reference(p).map(Some),
            None => Ok(self.analytic_reference(t)),
        }
    }
}

/// Read reference moments from an `mc` JSON report or CSV file.
pub fn read_reference(path: &Path) -> Result<ReferenceMoments, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("reference {}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e == "json") {
        return serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("reference {}: {e}", path.display())));
    }
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| CliError::Config(format!("reference {}: {e}", path.display())))?
        .clone();
    let record = rdr
        .records()
        .next()
        .ok_or_else(|| CliError::Config(format!("reference {}: no data row", path.display())))?
        .map_err(|e| CliError::Config(format!("reference {}: {e}", path.display())))?;
    let field = |name: &str| -> Result<Option<f64>, CliError> {
        let Some(i) = headers.iter().position(|h| h == name) else {
            return Ok(None);
        };
        let cell = record.get(i).unwrap_or("");
        if cell.is_empty() {
            return Ok(None);
        }
        cell.parse::<f64>()
            .map(Some)
            .map_err(|e| CliError::Config(format!("reference {}: column {name}: {e}", path.display())))
    };
    let required = |name: &str| {
        field(name)?.ok_or_else(|| CliError::Config(format!("reference {}: missing {name}", path.display())))
    };
    Ok(ReferenceMoments {
        mean: required("mean")?,
        std: required("std")?,
        skewness: field("skewness")?,
        kurtosis: field("kurtosis")?,
    })
}

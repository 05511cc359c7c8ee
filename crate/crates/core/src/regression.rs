//! Weighted least-squares chaos fits, plain and sensitivity-enhanced.
//!
//! Both paths minimize `‖W^{1/2}(g − φ c)‖₂` through a QR factorization of the
//! weighted rectangular matrix; the normal equations are never formed.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::design::{point_weight, DesignPlan};
use crate::error::{invalid, Error, Result};
use crate::exec;
use crate::linalg::{lstsq, lstsq_graded};
use crate::models::{Model, ModelEvaluation};
use crate::orthopoly::ChaosBasis;
use crate::space::SamplePool;

/// Diagnostics of a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub n_points: usize,
    pub n_equations: usize,
    /// ‖W^{1/2}(g − φĉ)‖₂.
    pub residual_norm: f64,
    /// 2-norm condition number of the weighted rectangular matrix, over its
    /// retained singular values when rank deficient.
    pub cond_number: f64,
    /// Numerical rank of the weighted matrix; below P+1 only under
    /// [`RankPolicy::GradedMinNorm`].
    pub rank: usize,
    /// Model evaluation units spent (direct solves plus adjoint solves).
    pub evaluations: usize,
}

/// A fitted chaos expansion. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PceSurrogate {
    pub basis: ChaosBasis,
    pub coefficients: Vec<f64>,
    pub fit_report: FitReport,
}

impl PceSurrogate {
    pub fn new(basis: ChaosBasis, coefficients: Vec<f64>, fit_report: FitReport) -> Result<Self> {
        if coefficients.len() != basis.len() {
            return Err(invalid(format!(
                "expected {} coefficients, got {}",
                basis.len(),
                coefficients.len()
            )));
        }
        Ok(Self { basis, coefficients, fit_report })
    }

    pub fn eval(&self, xi: &[f64]) -> Result<f64> {
        self.basis.expand(&self.coefficients, xi)
    }

    /// Surrogate gradient with respect to ξ.
    pub fn grad(&self, xi: &[f64]) -> Result<Vec<f64>> {
        let g = self.basis.grad(xi)?;
        Ok((0..g.nrows())
            .map(|k| g.row(k).iter().zip(&self.coefficients).map(|(a, c)| a * c).sum())
            .collect())
    }

    pub fn mean(&self) -> f64 {
        self.coefficients[0]
    }

    pub fn variance(&self) -> f64 {
        self.coefficients[1..].iter().map(|c| c * c).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("surrogate serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(text).map_err(|e| invalid(e.to_string()))?;
        Self::new(s.basis, s.coefficients, s.fit_report)
    }
}

/// What to do when the weighted matrix has condition number above 1e12.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RankPolicy {
    /// Fail with [`Error::RankDeficient`].
    #[default]
    Error,
    /// Take the least-squares solution with the smallest highest-degree
    /// coefficients, then the smallest next-degree coefficients, and so on.
    ///
    /// Gradient-enhanced designs with fewer than m + 1 points cannot
    /// separate quadratics that vanish to first order at every point, so
    /// some tie-break is needed there; this one recovers any QoI of lower
    /// degree exactly.
    GradedMinNorm,
}

/// Value rows followed by one block per input dimension.
#[derive(Debug, Clone)]
pub struct AugmentedSystem {
    /// Observations: values, then ∂/∂ξ_1 at every point, then ∂/∂ξ_2, ...
    pub g: DVector<f64>,
    pub phi: DMatrix<f64>,
    /// Square-root weights, the point weights repeated once per block.
    pub w_block: Vec<f64>,
    pub n_points: usize,
}

impl AugmentedSystem {
    pub fn n_equations(&self) -> usize {
        self.g.len()
    }

    /// Weighted least-squares solution: coefficients, residual norm,
    /// condition number and rank. `grades` gives the total degree of each
    /// column for the graded policy.
    pub fn solve(&self, policy: RankPolicy, grades: &[usize]) -> Result<(Vec<f64>, f64, f64, usize)> {
        let wa = DMatrix::from_fn(self.phi.nrows(), self.phi.ncols(), |i, j| {
            self.w_block[i] * self.phi[(i, j)]
        });
        let wb = DVector::from_fn(self.g.len(), |i, _| self.w_block[i] * self.g[i]);
        match lstsq(&wa, &wb) {
            Ok(sol) => Ok((sol.x.iter().copied().collect(), sol.residual_norm, sol.cond, wa.ncols())),
            Err(Error::RankDeficient { .. }) if policy == RankPolicy::GradedMinNorm => {
                let sol = lstsq_graded(&wa, &wb, grades)?;
                Ok((sol.x.iter().copied().collect(), sol.residual_norm, sol.cond, sol.rank))
            }
            Err(Error::InsufficientSamples { .. }) if policy == RankPolicy::GradedMinNorm => {
                let sol = lstsq_graded(&wa, &wb, grades)?;
                Ok((sol.x.iter().copied().collect(), sol.residual_norm, sol.cond, sol.rank))
            }
            Err(e) => Err(e),
        }
    }
}

fn check_points(basis: &ChaosBasis, points: &[Vec<f64>], weights: &[f64]) -> Result<()> {
    if points.len() != weights.len() {
        return Err(invalid("one weight per point required"));
    }
    if let Some(p) = points.iter().find(|p| p.len() != basis.dim()) {
        return Err(invalid(format!("point of dimension {} in a {}-dimensional basis", p.len(), basis.dim())));
    }
    Ok(())
}

/// Assemble the augmented system. `gradients` is either empty (value rows
/// only) or holds one m-vector per point in standard coordinates.
pub fn build_augmented(
    basis: &ChaosBasis,
    points: &[Vec<f64>],
    weights: &[f64],
    values: &[f64],
    gradients: &[Vec<f64>],
) -> Result<AugmentedSystem> {
    check_points(basis, points, weights)?;
    let q = points.len();
    let m = basis.dim();
    if values.len() != q {
        return Err(invalid("one value per point required"));
    }
    let blocks = if gradients.is_empty() {
        0
    } else {
        if gradients.len() != q {
            return Err(invalid("one gradient per point required"));
        }
        if let Some(g) = gradients.iter().find(|g| g.len() != m) {
            return Err(invalid(format!("gradient of length {} for {} inputs", g.len(), m)));
        }
        m
    };
    let rows = q * (1 + blocks);
    let n = basis.len();
    let mut phi = DMatrix::zeros(rows, n);
    let mut g = DVector::zeros(rows);
    let mut w_block = vec![0.0; rows];
    for (j, xi) in points.iter().enumerate() {
        let vals = basis.eval(xi)?;
        for (c, v) in vals.iter().enumerate() {
            phi[(j, c)] = *v;
        }
        g[j] = values[j];
        w_block[j] = weights[j];
        if blocks > 0 {
            let grad = basis.grad(xi)?;
            for k in 0..m {
                let row = (k + 1) * q + j;
                for c in 0..n {
                    phi[(row, c)] = grad[(k, c)];
                }
                g[row] = gradients[j][k];
                w_block[row] = weights[j];
            }
        }
    }
    Ok(AugmentedSystem { g, phi, w_block, n_points: q })
}

/// Plain weighted least-squares fit on values only.
pub fn fit_wlsq(
    basis: &ChaosBasis,
    points: &[Vec<f64>],
    weights: &[f64],
    values: &[f64],
) -> Result<PceSurrogate> {
    if points.len() < basis.len() {
        return Err(Error::InsufficientSamples { needed: basis.len(), got: points.len() });
    }
    let sys = build_augmented(basis, points, weights, values, &[])?;
    let surrogate = fit_augmented(basis, &sys, RankPolicy::Error)?;
    let mut report = surrogate.fit_report;
    report.evaluations = points.len();
    PceSurrogate::new(surrogate.basis, surrogate.coefficients, report)
}

/// Solve an assembled system. `evaluations` is filled with one unit per value
/// row plus one per point when gradient blocks are present.
pub fn fit_augmented(basis: &ChaosBasis, sys: &AugmentedSystem, policy: RankPolicy) -> Result<PceSurrogate> {
    if sys.phi.ncols() != basis.len() {
        return Err(invalid("system column count differs from basis size"));
    }
    let grades: Vec<usize> =
        basis.index_set().indices().iter().map(|a| a.iter().map(|&d| d as usize).sum()).collect();
    let (coefficients, residual_norm, cond_number, rank) = sys.solve(policy, &grades)?;
    let has_grad = sys.n_equations() > sys.n_points;
    let report = FitReport {
        n_points: sys.n_points,
        n_equations: sys.n_equations(),
        residual_norm,
        cond_number,
        rank,
        evaluations: sys.n_points * if has_grad { 2 } else { 1 },
    };
    PceSurrogate::new(basis.clone(), coefficients, report)
}

/// Number of se-gPC points `⌈oversample · (P+1) / (m+1)⌉`.
pub fn segpc_point_count(basis: &ChaosBasis, oversample: f64) -> Result<usize> {
    if !(oversample >= 1.0) || !oversample.is_finite() {
        return Err(invalid(format!("oversampling ratio must be ≥ 1, got {oversample}")));
    }
    let exact = oversample * basis.len() as f64 / (basis.dim() + 1) as f64;
    // guard against 3.0000000000000004-style round-up
    Ok(((exact - 1e-9).ceil() as usize).max(1))
}

/// Number of WLSQ points `⌈oversample · (P+1)⌉`.
pub fn wlsq_point_count(basis: &ChaosBasis, oversample: f64) -> Result<usize> {
    if !(oversample >= 1.0) || !oversample.is_finite() {
        return Err(invalid(format!("oversampling ratio must be ≥ 1, got {oversample}")));
    }
    Ok(((oversample * basis.len() as f64 - 1e-9).ceil() as usize).max(1))
}

/// Evaluate `model` at standard points, in parallel, preserving order.
pub fn evaluate_model(
    model: &dyn Model,
    points: &[Vec<f64>],
    with_gradient: bool,
) -> Result<Vec<ModelEvaluation>> {
    if with_gradient && !model.supports_gradient() {
        return Err(Error::UnsupportedModel(format!("{} provides no gradient", model.name())));
    }
    exec::map_slice(points, |xi| model.evaluate(xi, with_gradient)).into_iter().collect()
}

/// Sensitivity-enhanced fit at the first `n_points` ranked plan points.
///
/// Rank deficiency of the augmented system is resolved by
/// [`RankPolicy::GradedMinNorm`] and shows up as `fit_report.rank < P+1`.
pub fn fit_segpc(
    basis: &ChaosBasis,
    plan: &[usize],
    pool: &SamplePool,
    model: &dyn Model,
    n_points: usize,
) -> Result<PceSurrogate> {
    if model.dim() != basis.dim() {
        return Err(invalid("model dimension differs from basis dimension"));
    }
    if !model.supports_gradient() {
        return Err(Error::UnsupportedModel(format!("{} provides no gradient", model.name())));
    }
    if plan.len() < n_points {
        return Err(invalid(format!("plan has {} points, {} required", plan.len(), n_points)));
    }
    let points: Vec<Vec<f64>> = plan[..n_points].iter().map(|&i| pool.point(i).to_vec()).collect();
    let weights = points
        .iter()
        .map(|xi| point_weight(model.space(), xi))
        .collect::<Result<Vec<_>>>()?;
    let evals = evaluate_model(model, &points, true)?;
    let values: Vec<f64> = evals.iter().map(|e| e.value).collect();
    let grads: Vec<Vec<f64>> = evals.iter().map(|e| e.gradient.clone()).collect();
    let sys = build_augmented(basis, &points, &weights, &values, &grads)?;
    let mut s = fit_augmented(basis, &sys, RankPolicy::GradedMinNorm)?;
    s.fit_report.evaluations = evals.iter().map(|e| e.cost_units as usize).sum();
    Ok(s)
}

/// Plain WLSQ fit of `model` at the first `n_points` ranked plan points.
pub fn fit_wlsq_model(
    basis: &ChaosBasis,
    plan: &[usize],
    pool: &SamplePool,
    model: &dyn Model,
    n_points: usize,
) -> Result<PceSurrogate> {
    if model.dim() != basis.dim() {
        return Err(invalid("model dimension differs from basis dimension"));
    }
    if plan.len() < n_points {
        return Err(invalid(format!("plan has {} points, {} required", plan.len(), n_points)));
    }
    let points: Vec<Vec<f64>> = plan[..n_points].iter().map(|&i| pool.point(i).to_vec()).collect();
    let weights = points
        .iter()
        .map(|xi| point_weight(model.space(), xi))
        .collect::<Result<Vec<_>>>()?;
    let evals = evaluate_model(model, &points, false)?;
    let values: Vec<f64> = evals.iter().map(|e| e.value).collect();
    fit_wlsq(basis, &points, &weights, &values)
}

/// Pool indices of successive selection rounds, in rank order.
pub fn ranked_points(plans: &[DesignPlan]) -> Vec<usize> {
    plans.iter().flat_map(|p| p.selected.iter().copied()).collect()
}

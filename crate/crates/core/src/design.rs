//! Coherence-optimal weights, measurement matrices and greedy D-optimal
//! point selection by pivoted QR.
//!
//! Selection always runs on the transposed weighted measurement matrix
//! `(W^{1/2} ψ)ᵀ` of the plain least-squares problem. Each pool point is a
//! column; the pivot order ranks the points and the product of the |R_kk|
//! equals |det| of the selected weighted square submatrix.

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
use crate::exec;
use crate::linalg::{self, pivoted_qr};
use crate::orthopoly::ChaosBasis;
use crate::space::{Marginal, SamplePool, StochasticSpace};

/// Pivots below this fraction of |R_11| count as rank deficiency.
pub const RANK_TOL: f64 = 1e-12;

/// Default candidate pool size.
pub const DEFAULT_POOL: usize = 10_000;

/// Square-root weights `w^{1/2}(ξ)` for every pool point.
///
/// Gaussian coordinates contribute `exp(-‖ξ_G‖² / 4)` (norm over the Gaussian
/// coordinates only); each uniform coordinate contributes `(1 - ξ_k²)^{1/4}`.
/// A uniform coordinate exactly at ±1 gives weight 0.
pub fn coherence_weights(space: &StochasticSpace, pool: &SamplePool) -> Result<Vec<f64>> {
    if pool.dim() != space.dim() {
        return Err(invalid("pool dimension differs from space dimension"));
    }
    pool.rows().map(|xi| point_weight(space, xi)).collect()
}

/// Square-root weight of a single standard point.
pub fn point_weight(space: &StochasticSpace, xi: &[f64]) -> Result<f64> {
    let mut gauss_sq = 0.0;
    let mut w = 1.0;
    for (m, &x) in space.marginals().iter().zip(xi) {
        match m {
            Marginal::Gaussian { .. } => gauss_sq += x * x,
            Marginal::Uniform { .. } => {
                if x.abs() > 1.0 {
                    return Err(invalid(format!("uniform coordinate {x} outside [-1, 1]")));
                }
                w *= (1.0 - x * x).sqrt().sqrt();
            }
        }
    }
    Ok(w * (-gauss_sq / 4.0).exp())
}

/// Unweighted measurement matrix ψ over a pool, kept alongside the
/// square-root weights.
#[derive(Debug, Clone)]
pub struct WeightedMeasurement {
    /// q × (P + 1), row i = basis values at pool point i.
    pub psi: DMatrix<f64>,
    pub w_sqrt: Vec<f64>,
    pub pool_seed: u64,
}

impl WeightedMeasurement {
    pub fn nrows(&self) -> usize {
        self.psi.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.psi.ncols()
    }

    /// `W^{1/2} ψ` restricted to `rows`, in the given order.
    pub fn weighted_rows(&self, rows: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), self.ncols(), |i, j| {
            self.w_sqrt[rows[i]] * self.psi[(rows[i], j)]
        })
    }
}

pub fn build_measurement(
    basis: &ChaosBasis,
    pool: &SamplePool,
    w_sqrt: &[f64],
) -> Result<WeightedMeasurement> {
    if pool.is_empty() {
        return Err(invalid("measurement needs at least one pool point"));
    }
    if pool.dim() != basis.dim() {
        return Err(invalid("pool dimension differs from basis dimension"));
    }
    if w_sqrt.len() != pool.len() {
        return Err(invalid("one weight per pool point required"));
    }
    let n = basis.len();
    let rows: Vec<Vec<f64>> =
        exec::map_range(pool.len(), |i| basis.eval(pool.point(i)).expect("dimension checked"));
    let psi = DMatrix::from_fn(pool.len(), n, |i, j| rows[i][j]);
    Ok(WeightedMeasurement { psi, w_sqrt: w_sqrt.to_vec(), pool_seed: pool.seed() })
}

/// Ranked QR selection.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignPlan {
    /// Pool row indices in pivot order.
    pub selected: Vec<usize>,
    /// |R_kk| of the selected pivots, non-increasing.
    pub r_diag: Vec<f64>,
    /// Condition number of the selected weighted square matrix; only set when
    /// `selected.len() == P + 1`.
    pub cond_number: Option<f64>,
}

impl DesignPlan {
    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }

    /// Top `n` ranked pool indices.
    pub fn top(&self, n: usize) -> &[usize] {
        &self.selected[..n.min(self.selected.len())]
    }
}

/// Greedy D-optimal selection of `n_sel` pool points.
pub fn qr_select(meas: &WeightedMeasurement, n_sel: usize) -> Result<DesignPlan> {
    let all: Vec<usize> = (0..meas.nrows()).collect();
    qr_select_among(meas, &all, n_sel)
}

fn qr_select_among(
    meas: &WeightedMeasurement,
    candidates: &[usize],
    n_sel: usize,
) -> Result<DesignPlan> {
    let n = meas.ncols();
    if n_sel == 0 || n_sel > candidates.len().min(n) {
        return Err(invalid(format!(
            "n_sel = {n_sel} must lie in [1, min(q = {}, P + 1 = {n})]",
            candidates.len()
        )));
    }
    let mut cols = vec![0.0; candidates.len() * n];
    for (c, &row) in candidates.iter().enumerate() {
        let w = meas.w_sqrt[row];
        for j in 0..n {
            cols[c * n + j] = w * meas.psi[(row, j)];
        }
    }
    let qr = pivoted_qr(cols, n, n_sel)?;
    let r = qr.r_diag();
    let found = r.iter().take_while(|&&d| d >= RANK_TOL * r[0]).count();
    if r.is_empty() || found < n_sel {
        return Err(Error::RankDeficientPool { found, requested: n_sel });
    }
    let selected: Vec<usize> = qr.permutation()[..n_sel].iter().map(|&c| candidates[c]).collect();
    let cond_number = (n_sel == n).then(|| linalg::condition_number(&meas.weighted_rows(&selected)));
    Ok(DesignPlan { selected, r_diag: r[..n_sel].to_vec(), cond_number })
}

/// Select `n` points in successive QR rounds when `n` exceeds what a single
/// round can rank (P + 1). Each round runs on the points not chosen so far.
pub fn qr_select_rounds(meas: &WeightedMeasurement, n: usize) -> Result<Vec<DesignPlan>> {
    if n > meas.nrows() {
        return Err(invalid(format!("requested {n} points from a pool of {}", meas.nrows())));
    }
    let mut taken = vec![false; meas.nrows()];
    let mut plans = Vec::new();
    let mut remaining = n;
    while remaining > 0 {
        let candidates: Vec<usize> = (0..meas.nrows()).filter(|&i| !taken[i]).collect();
        let take = remaining.min(meas.ncols()).min(candidates.len());
        let plan = qr_select_among(meas, &candidates, take)?;
        for &i in &plan.selected {
            taken[i] = true;
        }
        remaining -= take;
        plans.push(plan);
    }
    Ok(plans)
}

/// Conditioning of a complete (P + 1 point) plan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionReport {
    pub cond_number: f64,
    /// |det(P W^{1/2} ψ)| as the product of |R_kk|.
    pub det_magnitude: f64,
}

pub fn condition_diagnostics(
    meas: &WeightedMeasurement,
    plan: &DesignPlan,
) -> Result<ConditionReport> {
    if plan.len() != meas.ncols() {
        return Err(invalid(format!(
            "diagnostics need P + 1 = {} selected points, plan has {}",
            meas.ncols(),
            plan.len()
        )));
    }
    let cond_number = match plan.cond_number {
        Some(c) => c,
        None => linalg::condition_number(&meas.weighted_rows(&plan.selected)),
    };
    Ok(ConditionReport { cond_number, det_magnitude: plan.r_diag.iter().product() })
}

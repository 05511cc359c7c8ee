//! End-to-end fits by method, convergence studies and CSV output.

use std::io::Write;

use crate::design::{build_measurement, coherence_weights, qr_select_rounds, DesignPlan, WeightedMeasurement};
use crate::error::{invalid, Result};
use crate::models::Model;
use crate::orthopoly::ChaosBasis;
use crate::postproc::{higher_moments, HigherMomentScheme, Method, MomentsReport, ReferenceMoments};
use crate::quadrature::{quadrature_fit, smolyak_rule};
use crate::regression::{
    fit_segpc, fit_wlsq_model, ranked_points, segpc_point_count, wlsq_point_count, PceSurrogate,
};
use crate::space::{sample_pool, SamplePool, StochasticSpace};

/// Version tag written in the first line of every CSV output.
pub const CSV_SCHEMA: &str = "segpc-csv/1";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub method: Method,
    pub order: usize,
    pub pool: usize,
    pub oversample: f64,
    pub seed: u64,
}

/// Ranked selection over a seeded pool.
#[derive(Debug, Clone)]
pub struct PointSelection {
    pub basis: ChaosBasis,
    pub pool: SamplePool,
    pub measurement: WeightedMeasurement,
    pub plans: Vec<DesignPlan>,
}

impl PointSelection {
    /// Ranked pool indices across all rounds.
    pub fn ranked(&self) -> Vec<usize> {
        ranked_points(&self.plans)
    }
}

/// Draw a pool and rank `n_points` of it by pivoted QR.
pub fn select_points(
    space: &StochasticSpace,
    order: usize,
    pool_size: usize,
    n_points: usize,
    seed: u64,
) -> Result<PointSelection> {
    let basis = ChaosBasis::for_space(space, order)?;
    let pool = sample_pool(space, pool_size, seed)?;
    let w = coherence_weights(space, &pool)?;
    let measurement = build_measurement(&basis, &pool, &w)?;
    let plans = qr_select_rounds(&measurement, n_points)?;
    Ok(PointSelection { basis, pool, measurement, plans })
}

/// Fitted surrogate and, for regression methods, the points used.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub surrogate: PceSurrogate,
    pub selection: Option<PointSelection>,
}

/// Fit `model` by the chosen method.
pub fn fit_model(model: &dyn Model, opts: &FitOptions) -> Result<FitOutcome> {
    let space = model.space();
    let basis = ChaosBasis::for_space(space, opts.order)?;
    match opts.method {
        Method::Segpc => {
            let n = segpc_point_count(&basis, opts.oversample)?;
            let sel = select_points(space, opts.order, opts.pool, n, opts.seed)?;
            let s = fit_segpc(&basis, &sel.ranked(), &sel.pool, model, n)?;
            Ok(FitOutcome { surrogate: s, selection: Some(sel) })
        }
        Method::Wlsq => {
            let n = wlsq_point_count(&basis, opts.oversample)?;
            let sel = select_points(space, opts.order, opts.pool, n, opts.seed)?;
            let s = fit_wlsq_model(&basis, &sel.ranked(), &sel.pool, model, n)?;
            Ok(FitOutcome { surrogate: s, selection: Some(sel) })
        }
        Method::Smolyak => {
            let rule = smolyak_rule(basis.families(), opts.order + 1)?;
            let s = quadrature_fit(&basis, &rule, model)?;
            Ok(FitOutcome { surrogate: s, selection: None })
        }
        Method::Mc => Err(invalid("Monte Carlo is not a surrogate fit")),
    }
}

/// Fit and report moments.
pub fn fit_and_report(
    model: &dyn Model,
    opts: &FitOptions,
    scheme: HigherMomentScheme,
) -> Result<(FitOutcome, MomentsReport)> {
    let out = fit_model(model, opts)?;
    let report = higher_moments(&out.surrogate, model.space(), scheme, opts.method)?;
    Ok((out, report))
}

/// One report per (method, order), methods outermost.
pub fn convergence_study(
    model: &dyn Model,
    methods: &[Method],
    orders: &[usize],
    base: &FitOptions,
    scheme: HigherMomentScheme,
) -> Result<Vec<MomentsReport>> {
    let mut rows = Vec::with_capacity(methods.len() * orders.len());
    for &method in methods {
        for &order in orders {
            let opts = FitOptions { method, order, ..*base };
            rows.push(fit_and_report(model, &opts, scheme)?.1);
        }
    }
    Ok(rows)
}

/// Moment rows under a versioned `#` header line.
pub fn write_moments_csv<W: Write>(
    mut out: W,
    kind: &str,
    rows: &[MomentsReport],
    reference: Option<&ReferenceMoments>,
) -> std::io::Result<()> {
    writeln!(out, "# {CSV_SCHEMA} {kind}")?;
    writeln!(out, "{}", MomentsReport::CSV_HEADER)?;
    for r in rows {
        writeln!(out, "{}", r.csv_row(reference))?;
    }
    Ok(())
}

/// Ranked points with their pivots; the condition number of the first
/// complete round goes in a trailing comment line.
pub fn write_selection_csv<W: Write>(mut out: W, sel: &PointSelection) -> std::io::Result<()> {
    let m = sel.pool.dim();
    writeln!(out, "# {CSV_SCHEMA} select-points")?;
    let cols: Vec<String> = (1..=m).map(|k| format!("xi_{k}")).collect();
    writeln!(out, "rank,pool_index,{},weight,r_diag,round", cols.join(","))?;
    let mut rank = 1;
    for (round, plan) in sel.plans.iter().enumerate() {
        for (&idx, &r) in plan.selected.iter().zip(&plan.r_diag) {
            let xs: Vec<String> = sel.pool.point(idx).iter().map(|x| x.to_string()).collect();
            writeln!(
                out,
                "{rank},{idx},{},{},{r},{}",
                xs.join(","),
                sel.measurement.w_sqrt[idx],
                round + 1
            )?;
            rank += 1;
        }
    }
    if let Some(c) = sel.plans.first().and_then(|p| p.cond_number) {
        writeln!(out, "# cond_number={c}")?;
    }
    Ok(())
}

//! Gauss, tensor Gauss and Smolyak rules, projection fits, and seeded
//! streaming Monte Carlo.

use std::collections::HashMap;
use std::io::Write;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::exec;
use crate::models::Model;
use crate::orthopoly::{binomial, ChaosBasis, PolyFamily, MAX_TERMS};
use crate::regression::{FitReport, PceSurrogate};
use crate::space::StochasticSpace;

/// Samples per Monte Carlo chunk; chunk `c` draws from stream `c` of the seed.
pub const MC_CHUNK: usize = 4096;

/// Nodes closer than this in every coordinate are merged.
pub const MERGE_TOL: f64 = 1e-12;

/// Gauss rule with `n` nodes for a probability measure: nodes ascending,
/// weights summing to 1. Golub–Welsch on the Jacobi matrix.
pub fn gauss_rule(family: PolyFamily, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(invalid("Gauss rule needs at least one node"));
    }
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j {
            family.recurrence_coeff(j)
        } else if j + 1 == i {
            family.recurrence_coeff(i)
        } else {
            0.0
        }
    });
    let eig = jacobi.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // both measures are symmetric: enforce it exactly
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let j = n - 1 - i;
        nodes[i] = 0.5 * (pairs[i].0 - pairs[j].0);
        weights[i] = 0.5 * (pairs[i].1 + pairs[j].1);
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok((nodes, weights))
}

/// Nodes (row-major, `dim` columns) and weights.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    dim: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// Human-readable construction tag, e.g. `smolyak level=3`.
    pub label: String,
}

impl QuadratureRule {
    pub fn new(dim: usize, nodes: Vec<f64>, weights: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if dim == 0 || nodes.len() != dim * weights.len() {
            return Err(invalid("quadrature nodes must be weights.len() rows of dim coordinates"));
        }
        Ok(Self { dim, nodes, weights, label: label.into() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Σ w_n f(ξ_n), evaluated in parallel and summed in node order.
    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64 + Sync + Send) -> f64 {
        let vals = exec::map_range(self.len(), |i| f(self.node(i)));
        vals.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    /// Merge coincident nodes (within [`MERGE_TOL`]), summing weights. Keeps
    /// first-occurrence order.
    pub fn merged(&self) -> Self {
        let mut index: HashMap<Vec<i64>, usize> = HashMap::new();
        let mut nodes = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for i in 0..self.len() {
            let key: Vec<i64> = self.node(i).iter().map(|x| (x / MERGE_TOL).round() as i64).collect();
            match index.get(&key) {
                Some(&k) => weights[k] += self.weights[i],
                None => {
                    index.insert(key, weights.len());
                    nodes.extend_from_slice(self.node(i));
                    weights.push(self.weights[i]);
                }
            }
        }
        Self { dim: self.dim, nodes, weights, label: self.label.clone() }
    }

    /// CSV with columns `xi_1..xi_m,weight`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let header: Vec<String> = (1..=self.dim).map(|k| format!("xi_{k}")).collect();
        writeln!(out, "{},weight", header.join(","))?;
        for i in 0..self.len() {
            let row: Vec<String> = self.node(i).iter().map(|x| x.to_string()).collect();
            writeln!(out, "{},{}", row.join(","), self.weights[i])?;
        }
        Ok(())
    }
}

fn tensor(rules: &[(Vec<f64>, Vec<f64>)], coef: f64, nodes: &mut Vec<f64>, weights: &mut Vec<f64>) {
    let m = rules.len();
    let mut idx = vec![0usize; m];
    loop {
        let mut w = coef;
        for (k, &i) in idx.iter().enumerate() {
            nodes.push(rules[k].0[i]);
            w *= rules[k].1[i];
        }
        weights.push(w);
        let mut k = 0;
        loop {
            if k == m {
                return;
            }
            idx[k] += 1;
            if idx[k] < rules[k].0.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

fn checked_product(mut counts: impl Iterator<Item = usize>) -> Option<usize> {
    counts.try_fold(1usize, |acc, c| acc.checked_mul(c))
}

/// Full tensor Gauss rule with `n` nodes per dimension.
pub fn tensor_gauss_rule(families: &[PolyFamily], n: usize) -> Result<QuadratureRule> {
    if families.is_empty() {
        return Err(invalid("tensor rule needs at least one dimension"));
    }
    let total = checked_product(families.iter().map(|_| n)).filter(|&t| t <= MAX_TERMS);
    let Some(total) = total else {
        return Err(Error::SizeOverflow(format!("{n}^{} tensor nodes", families.len())));
    };
    let rules = families.iter().map(|&f| gauss_rule(f, n)).collect::<Result<Vec<_>>>()?;
    let mut nodes = Vec::with_capacity(total * families.len());
    let mut weights = Vec::with_capacity(total);
    tensor(&rules, 1.0, &mut nodes, &mut weights);
    QuadratureRule::new(families.len(), nodes, weights, format!("tensor-gauss n={n}"))
}

/// Visit all k ∈ ℕ^m with lo ≤ |k| ≤ hi.
fn for_each_level(m: usize, lo: usize, hi: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(k: &mut Vec<usize>, pos: usize, used: usize, lo: usize, hi: usize, f: &mut impl FnMut(&[usize])) {
        if pos == k.len() {
            if used >= lo {
                f(k);
            }
            return;
        }
        for v in 0..=hi - used {
            k[pos] = v;
            rec(k, pos + 1, used + v, lo, hi, f);
        }
        k[pos] = 0;
    }
    let mut k = vec![0; m];
    rec(&mut k, 0, 0, lo, hi, f);
}

/// Smolyak combination rule over Gauss rules with `2ℓ - 1` nodes at level ℓ.
/// Level 1 is the one-point rule; chaos order p maps to level p + 1.
pub fn smolyak_rule(families: &[PolyFamily], level: usize) -> Result<QuadratureRule> {
    let m = families.len();
    if m == 0 {
        return Err(invalid("Smolyak rule needs at least one dimension"));
    }
    if level == 0 {
        return Err(invalid("Smolyak level must be ≥ 1"));
    }
    let hi = level - 1;
    let lo = level.saturating_sub(m);
    // term count: number of k with lo ≤ |k| ≤ hi
    let terms = binomial(m + hi, m).filter(|&t| t <= MAX_TERMS);
    if terms.is_none() {
        return Err(Error::SizeOverflow(format!("Smolyak m={m} level={level}")));
    }
    let mut raw_nodes = 0usize;
    let mut overflow = false;
    for_each_level(m, lo, hi, &mut |k| {
        match checked_product(k.iter().map(|&ki| 2 * ki + 1)).and_then(|c| raw_nodes.checked_add(c)) {
            Some(t) if t <= MAX_TERMS => raw_nodes = t,
            _ => overflow = true,
        }
    });
    if overflow {
        return Err(Error::SizeOverflow(format!("Smolyak m={m} level={level}")));
    }
    let mut cache: HashMap<(PolyFamily, usize), (Vec<f64>, Vec<f64>)> = HashMap::new();
    for &f in families {
        for k in 0..=hi {
            cache.insert((f, k), gauss_rule(f, 2 * k + 1)?);
        }
    }
    let mut nodes = Vec::with_capacity(raw_nodes * m);
    let mut weights = Vec::with_capacity(raw_nodes);
    for_each_level(m, lo, hi, &mut |k| {
        let total: usize = k.iter().sum();
        let j = hi - total;
        let coef = binomial(m - 1, j).expect("bounded by term count") as f64;
        let coef = if j % 2 == 0 { coef } else { -coef };
        let rules: Vec<(Vec<f64>, Vec<f64>)> =
            k.iter().zip(families).map(|(&ki, &f)| cache[&(f, ki)].clone()).collect();
        tensor(&rules, coef, &mut nodes, &mut weights);
    });
    Ok(QuadratureRule::new(m, nodes, weights, format!("smolyak level={level}"))?.merged())
}

/// Spectral projection `c_i = Σ w_n f_n Ψ_i(ξ_n)` of given node values.
pub fn project(basis: &ChaosBasis, rule: &QuadratureRule, values: &[f64]) -> Result<Vec<f64>> {
    if rule.dim() != basis.dim() {
        return Err(invalid("rule dimension differs from basis dimension"));
    }
    if values.len() != rule.len() {
        return Err(invalid("one value per node required"));
    }
    let mut c = vec![0.0; basis.len()];
    let mut psi = vec![0.0; basis.len()];
    for i in 0..rule.len() {
        basis.eval_into(rule.node(i), &mut psi)?;
        let wf = rule.weights()[i] * values[i];
        for (ci, p) in c.iter_mut().zip(&psi) {
            *ci += wf * p;
        }
    }
    Ok(c)
}

/// Non-intrusive projection fit of `model` on the nodes of `rule`.
pub fn quadrature_fit(basis: &ChaosBasis, rule: &QuadratureRule, model: &dyn Model) -> Result<PceSurrogate> {
    if model.dim() != basis.dim() || rule.dim() != basis.dim() {
        return Err(invalid("model, rule and basis dimensions differ"));
    }
    let values = exec::map_range(rule.len(), |i| model.evaluate(rule.node(i), false).map(|e| e.value))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let c = project(basis, rule, &values)?;
    // projection is not a regression: report the nodal misfit and a unit condition number
    let residual_norm = (0..rule.len())
        .map(|i| (basis.expand(&c, rule.node(i)).expect("dimension checked") - values[i]).powi(2))
        .sum::<f64>()
        .sqrt();
    let report = FitReport {
        n_points: rule.len(),
        n_equations: rule.len(),
        residual_norm,
        cond_number: 1.0,
        rank: basis.len(),
        evaluations: rule.len(),
    };
    PceSurrogate::new(basis.clone(), c, report)
}

/// Single-pass, mergeable accumulator of the first four central moments.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MomentAccumulator {
    n: u64,
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl MomentAccumulator {
    pub fn push(&mut self, x: f64) {
        let n1 = self.n as f64;
        self.n += 1;
        let n = self.n as f64;
        let delta = x - self.mean;
        let dn = delta / n;
        let dn2 = dn * dn;
        let t1 = delta * dn * n1;
        self.mean += dn;
        self.m4 += t1 * dn2 * (n * n - 3.0 * n + 3.0) + 6.0 * dn2 * self.m2 - 4.0 * dn * self.m3;
        self.m3 += t1 * dn * (n - 2.0) - 3.0 * dn * self.m2;
        self.m2 += t1;
    }

    pub fn merge(&mut self, other: &Self) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        let d = other.mean - self.mean;
        let d2 = d * d;
        let m2 = self.m2 + other.m2 + d2 * na * nb / n;
        let m3 = self.m3
            + other.m3
            + d * d2 * na * nb * (na - nb) / (n * n)
            + 3.0 * d * (na * other.m2 - nb * self.m2) / n;
        let m4 = self.m4
            + other.m4
            + d2 * d2 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n)
            + 6.0 * d2 * (na * na * other.m2 + nb * nb * self.m2) / (n * n)
            + 4.0 * d * (na * other.m3 - nb * self.m3) / n;
        self.mean += d * nb / n;
        self.m2 = m2;
        self.m3 = m3;
        self.m4 = m4;
        self.n += other.n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased variance; 0 for fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    /// Population skewness; `None` for zero spread.
    pub fn skewness(&self) -> Option<f64> {
        let n = self.n as f64;
        (self.m2 > 0.0).then(|| n.sqrt() * self.m3 / self.m2.powf(1.5))
    }

    /// Population (non-excess) kurtosis; `None` for zero spread.
    pub fn kurtosis(&self) -> Option<f64> {
        let n = self.n as f64;
        (self.m2 > 0.0).then(|| n * self.m4 / (self.m2 * self.m2))
    }
}

/// Monte Carlo moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub std: f64,
    pub skewness: Option<f64>,
    pub kurtosis: Option<f64>,
    /// Per-sample values in sample order, when requested.
    pub trace: Option<Vec<f64>>,
}

impl McEstimate {
    fn from_acc(acc: &MomentAccumulator, trace: Option<Vec<f64>>) -> Self {
        let variance = acc.variance();
        Self {
            n: acc.count() as usize,
            mean: acc.mean(),
            variance,
            std: variance.sqrt(),
            skewness: acc.skewness(),
            kurtosis: acc.kurtosis(),
            trace,
        }
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        self.std / (self.n as f64).sqrt()
    }
}

/// Sampling options for [`monte_carlo`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McOptions {
    pub n: usize,
    pub seed: u64,
    /// Use ξ and -ξ in pairs (valid for symmetric standard marginals).
    pub antithetic: bool,
    pub keep_trace: bool,
}

/// Seeded Monte Carlo of `f` over the standard space. Chunk `c` of
/// [`MC_CHUNK`] samples draws from `ChaCha8Rng` stream `c` of `seed`, and
/// chunk accumulators are merged in chunk order, so the result does not
/// depend on the worker count.
pub fn monte_carlo<F>(space: &StochasticSpace, opts: McOptions, f: F) -> Result<McEstimate>
where
    F: Fn(&[f64]) -> Result<f64> + Sync + Send,
{
    if opts.n < 2 {
        return Err(invalid(format!("Monte Carlo needs n ≥ 2, got {}", opts.n)));
    }
    let m = space.dim();
    let chunks = opts.n.div_ceil(MC_CHUNK);
    let results = exec::map_range(chunks, |c| -> Result<(MomentAccumulator, Vec<f64>)> {
        let len = MC_CHUNK.min(opts.n - c * MC_CHUNK);
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(c as u64);
        let mut acc = MomentAccumulator::default();
        let mut trace = Vec::with_capacity(if opts.keep_trace { len } else { 0 });
        let mut xi = vec![0.0; m];
        let mut neg = vec![0.0; m];
        let mut i = 0;
        while i < len {
            space.draw(&mut rng, &mut xi);
            let v = f(&xi)?;
            acc.push(v);
            if opts.keep_trace {
                trace.push(v);
            }
            i += 1;
            if opts.antithetic && i < len {
                neg.iter_mut().zip(&xi).for_each(|(n, x)| *n = -x);
                let v = f(&neg)?;
                acc.push(v);
                if opts.keep_trace {
                    trace.push(v);
                }
                i += 1;
            }
        }
        Ok((acc, trace))
    });
    let mut total = MomentAccumulator::default();
    let mut trace = opts.keep_trace.then(|| Vec::with_capacity(opts.n));
    for r in results {
        let (acc, t) = r?;
        total.merge(&acc);
        if let Some(tr) = trace.as_mut() {
            tr.extend(t);
        }
    }
    Ok(McEstimate::from_acc(&total, trace))
}

/// Monte Carlo of a model's QoI (value-only evaluations).
pub fn monte_carlo_moments(model: &dyn Model, n: usize, seed: u64, keep_trace: bool) -> Result<McEstimate> {
    let opts = McOptions { n, seed, antithetic: false, keep_trace };
    monte_carlo(model.space(), opts, |xi| model.evaluate(xi, false).map(|e| e.value))
}

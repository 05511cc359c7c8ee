//! Input probability space: independent Gaussian/uniform marginals, their
//! affine maps to standard variables, and seeded candidate pools.
//!
//! All fitting happens in standard coordinates: N(0, 1) for Gaussian
//! marginals and U(-1, 1) for uniform ones. Models see physical coordinates
//! through [`StochasticSpace::destandardize`].
//!
//! Random draws use ChaCha8 (`rand_chacha`) seeded with `seed_from_u64`.
//! Gaussian variates come from the ziggurat sampler of `rand_distr`
//! (`StandardNormal`); uniform variates are `2u - 1` with `u` uniform on
//! `[0, 1)`. Pools are filled row by row, dimension by dimension, from a
//! single stream, so a given seed always reproduces the same pool.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::orthopoly::PolyFamily;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// One independent input variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Marginal {
    Gaussian { mean: f64, std: f64 },
    Uniform { lower: f64, upper: f64 },
}

impl Marginal {
    pub fn gaussian(mean: f64, std: f64) -> Result<Self> {
        if !(std > 0.0) || !mean.is_finite() || !std.is_finite() {
            return Err(invalid(format!("gaussian marginal needs std > 0, got {std}")));
        }
        Ok(Marginal::Gaussian { mean, std })
    }

    pub fn uniform(lower: f64, upper: f64) -> Result<Self> {
        if !(upper > lower) || !lower.is_finite() || !upper.is_finite() {
            return Err(invalid(format!(
                "uniform marginal needs upper > lower, got [{lower}, {upper}]"
            )));
        }
        Ok(Marginal::Uniform { lower, upper })
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Marginal::Gaussian { mean, std } => Marginal::gaussian(mean, std).map(|_| ()),
            Marginal::Uniform { lower, upper } => Marginal::uniform(lower, upper).map(|_| ()),
        }
    }

    /// Orthonormal polynomial family matching this marginal.
    pub fn family(&self) -> PolyFamily {
        match self {
            Marginal::Gaussian { .. } => PolyFamily::Hermite,
            Marginal::Uniform { .. } => PolyFamily::Legendre,
        }
    }

    pub fn standardize(&self, x: f64) -> f64 {
        match *self {
            Marginal::Gaussian { mean, std } => (x - mean) / std,
            Marginal::Uniform { lower, upper } => 2.0 * (x - lower) / (upper - lower) - 1.0,
        }
    }

    pub fn destandardize(&self, xi: f64) -> f64 {
        match *self {
            Marginal::Gaussian { mean, std } => mean + std * xi,
            Marginal::Uniform { lower, upper } => lower + 0.5 * (xi + 1.0) * (upper - lower),
        }
    }

    /// dx/dξ of the affine map.
    pub fn scale(&self) -> f64 {
        match *self {
            Marginal::Gaussian { std, .. } => std,
            Marginal::Uniform { lower, upper } => 0.5 * (upper - lower),
        }
    }

    /// Density of the standard variable at `xi`.
    pub fn standard_pdf(&self, xi: f64) -> f64 {
        match self {
            Marginal::Gaussian { .. } => INV_SQRT_2PI * (-0.5 * xi * xi).exp(),
            Marginal::Uniform { .. } => {
                if (-1.0..=1.0).contains(&xi) {
                    0.5
                } else {
                    0.0
                }
            }
        }
    }

    pub fn in_standard_domain(&self, xi: f64) -> bool {
        match self {
            Marginal::Gaussian { .. } => xi.is_finite(),
            Marginal::Uniform { .. } => (-1.0..=1.0).contains(&xi),
        }
    }

    fn draw_standard<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Marginal::Gaussian { .. } => rng.sample(StandardNormal),
            Marginal::Uniform { .. } => 2.0 * rng.random::<f64>() - 1.0,
        }
    }
}

/// Product space of `m >= 1` independent marginals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Marginal>", into = "Vec<Marginal>")]
pub struct StochasticSpace {
    marginals: Vec<Marginal>,
}

impl TryFrom<Vec<Marginal>> for StochasticSpace {
    type Error = crate::Error;

    fn try_from(marginals: Vec<Marginal>) -> Result<Self> {
        StochasticSpace::new(marginals)
    }
}

impl From<StochasticSpace> for Vec<Marginal> {
    fn from(space: StochasticSpace) -> Self {
        space.marginals
    }
}

impl StochasticSpace {
    pub fn new(marginals: Vec<Marginal>) -> Result<Self> {
        if marginals.is_empty() {
            return Err(invalid("stochastic space needs at least one marginal"));
        }
        for m in &marginals {
            m.validate()?;
        }
        Ok(Self { marginals })
    }

    /// `m` i.i.d. standard normal variables.
    pub fn standard_gaussian(m: usize) -> Result<Self> {
        Self::new(vec![Marginal::Gaussian { mean: 0.0, std: 1.0 }; m])
    }

    /// `m` i.i.d. variables uniform on [-1, 1].
    pub fn standard_uniform(m: usize) -> Result<Self> {
        Self::new(vec![Marginal::Uniform { lower: -1.0, upper: 1.0 }; m])
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    pub fn marginals(&self) -> &[Marginal] {
        &self.marginals
    }

    pub fn families(&self) -> Vec<PolyFamily> {
        self.marginals.iter().map(Marginal::family).collect()
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(invalid(format!(
                "point has {len} coordinates, space has dimension {}",
                self.dim()
            )));
        }
        Ok(())
    }

    pub fn standardize(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x.len())?;
        Ok(self.marginals.iter().zip(x).map(|(m, &v)| m.standardize(v)).collect())
    }

    pub fn destandardize(&self, xi: &[f64]) -> Result<Vec<f64>> {
        self.check_len(xi.len())?;
        Ok(self.marginals.iter().zip(xi).map(|(m, &v)| m.destandardize(v)).collect())
    }

    /// Per-dimension dx/dξ, used to chain-rule physical gradients.
    pub fn scales(&self) -> Vec<f64> {
        self.marginals.iter().map(Marginal::scale).collect()
    }

    /// Joint density of the standard variables; zero outside a uniform domain.
    pub fn joint_pdf(&self, xi: &[f64]) -> Result<f64> {
        self.check_len(xi.len())?;
        Ok(self.marginals.iter().zip(xi).map(|(m, &v)| m.standard_pdf(v)).product())
    }

    /// Draw one standard point from `rng`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for (o, m) in out.iter_mut().zip(&self.marginals) {
            *o = m.draw_standard(rng);
        }
    }
}

/// Seeded pool of `q` candidate points in standard coordinates (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePool {
    points: Vec<f64>,
    dim: usize,
    seed: u64,
}

impl SamplePool {
    /// Wrap explicit standard points (row-major, `dim` columns).
    pub fn from_points(points: Vec<f64>, dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 || points.is_empty() || points.len() % dim != 0 {
            return Err(invalid("pool needs a non-empty row-major point array"));
        }
        Ok(Self { points, dim, seed })
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.points
    }

    /// New pool holding the given rows, in the given order.
    pub fn subset(&self, rows: &[usize]) -> SamplePool {
        let mut points = Vec::with_capacity(rows.len() * self.dim);
        for &r in rows {
            points.extend_from_slice(self.point(r));
        }
        SamplePool { points, dim: self.dim, seed: self.seed }
    }
}

/// Draw `q` independent standard points from `space` with a ChaCha8 stream.
pub fn sample_pool(space: &StochasticSpace, q: usize, seed: u64) -> Result<SamplePool> {
    if q == 0 {
        return Err(invalid("pool size q must be at least 1"));
    }
    let m = space.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = vec![0.0; q * m];
    for row in points.chunks_exact_mut(m) {
        space.draw(&mut rng, row);
    }
    Ok(SamplePool { points, dim: m, seed })
}

use crate::error::{invalid, Result};
use crate::models::Model;
use crate::space::{Marginal, StochasticSpace};

/// `du/dt = -k u`, `u(0) = 1` with `k ~ U(0, 1)`; QoI `u(t; k) = e^{-kt}`.
#[derive(Debug, Clone)]
pub struct OdeModel {
    t: f64,
    space: StochasticSpace,
}

impl OdeModel {
    pub fn new(t: f64) -> Result<Self> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(invalid(format!("time must be >= 0, got {t}")));
        }
        let space = StochasticSpace::new(vec![Marginal::uniform(0.0, 1.0)?])?;
        Ok(Self { t, space })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    /// Replace the decay-rate distribution (must stay one-dimensional).
    pub fn with_space(mut self, space: StochasticSpace) -> Result<Self> {
        if space.dim() != 1 {
            return Err(invalid("the ODE model has exactly one stochastic input"));
        }
        self.space = space;
        Ok(self)
    }

    /// Exact mean `(1 - e^{-t}) / t` for k ~ U(0, 1).
    pub fn exact_mean(t: f64) -> f64 {
        if t == 0.0 {
            1.0
        } else {
            -(-t).exp_m1() / t
        }
    }

    /// Exact variance `(1 - e^{-2t}) / (2t) - mean²` for k ~ U(0, 1).
    pub fn exact_variance(t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        if t < 1e-3 {
            // series: t²/12 - t³/12 + 17t⁴/360 - 7t⁵/360
            let t2 = t * t;
            return t2 / 12.0 - t2 * t / 12.0 + 17.0 * t2 * t2 / 360.0 - 7.0 * t2 * t2 * t / 360.0;
        }
        let m = Self::exact_mean(t);
        -(-2.0 * t).exp_m1() / (2.0 * t) - m * m
    }
}

impl Model for OdeModel {
    fn name(&self) -> &str {
        "ode"
    }

    fn space(&self) -> &StochasticSpace {
        &self.space
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok((-x[0] * self.t).exp())
    }

    fn supports_gradient(&self) -> bool {
        true
    }

    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let u = (-x[0] * self.t).exp();
        Ok((u, vec![-self.t * u]))
    }
}

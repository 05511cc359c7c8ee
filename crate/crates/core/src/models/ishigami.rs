use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::models::Model;
use crate::space::{Marginal, StochasticSpace};

/// `Y = sin X₁ + α sin² X₂ + β X₃⁴ sin X₁` with `X_i ~ U(-π, π)`.
#[derive(Debug, Clone)]
pub struct IshigamiModel {
    pub alpha: f64,
    pub beta: f64,
    space: StochasticSpace,
}

/// Reference kurtosis for α = 7, β = 0.1 from the UQ literature.
pub const ISHIGAMI_REFERENCE_KURTOSIS: f64 = 3.5072;

impl IshigamiModel {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let space = StochasticSpace::new(vec![Marginal::uniform(-PI, PI)?; 3])?;
        Ok(Self { alpha, beta, space })
    }

    pub fn with_space(mut self, space: StochasticSpace) -> Result<Self> {
        if space.dim() != 3 {
            return Err(invalid("the Ishigami function has three inputs"));
        }
        self.space = space;
        Ok(self)
    }

    pub fn exact_mean(&self) -> f64 {
        self.alpha / 2.0
    }

    fn partial_variances(&self) -> (f64, f64, f64) {
        let (a, b) = (self.alpha, self.beta);
        let pi4 = PI.powi(4);
        let pi8 = PI.powi(8);
        let v1 = 0.5 * (1.0 + b * pi4 / 5.0).powi(2);
        let v2 = a * a / 8.0;
        let v13 = b * b * pi8 * 8.0 / 225.0;
        (v1, v2, v13)
    }

    pub fn exact_variance(&self) -> f64 {
        let (v1, v2, v13) = self.partial_variances();
        v1 + v2 + v13
    }

    /// Exact total Sobol indices (for the default U(-π, π) inputs).
    pub fn exact_total_sobol(&self) -> [f64; 3] {
        let (v1, v2, v13) = self.partial_variances();
        let v = v1 + v2 + v13;
        [(v1 + v13) / v, v2 / v, v13 / v]
    }
}

impl Model for IshigamiModel {
    fn name(&self) -> &str {
        "ishigami"
    }

    fn space(&self) -> &StochasticSpace {
        &self.space
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        let s2 = x[1].sin();
        Ok(x[0].sin() * (1.0 + self.beta * x[2].powi(4)) + self.alpha * s2 * s2)
    }

    fn supports_gradient(&self) -> bool {
        true
    }

    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (s1, c1) = x[0].sin_cos();
        let (s2, c2) = x[1].sin_cos();
        let x3 = x[2];
        let value = s1 * (1.0 + self.beta * x3.powi(4)) + self.alpha * s2 * s2;
        let grad = vec![
            c1 * (1.0 + self.beta * x3.powi(4)),
            2.0 * self.alpha * s2 * c2,
            4.0 * self.beta * x3.powi(3) * s1,
        ];
        Ok((value, grad))
    }
}

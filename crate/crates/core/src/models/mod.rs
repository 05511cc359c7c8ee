//! The QoI evaluation contract and the built-in model problems.
//!
//! A [`Model`] works in physical coordinates; [`Model::evaluate`] takes a
//! standard point, destandardizes it through the model's space and applies
//! the chain rule `dM/dξ_k = dM/dx_k · dx_k/dξ_k` to the gradient.

pub mod burgers;
mod ishigami;
mod ode;

pub use burgers::{BurgersModel, BurgersSolver, BurgersState};
pub use ishigami::{IshigamiModel, ISHIGAMI_REFERENCE_KURTOSIS};
pub use ode::OdeModel;

use crate::error::{invalid, Error, Result};
use crate::space::StochasticSpace;

/// One model evaluation in standard coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelEvaluation {
    pub value: f64,
    /// dM/dξ in standard coordinates; empty for value-only evaluations.
    pub gradient: Vec<f64>,
    /// 1 for a value-only run, 2 for value plus adjoint.
    pub cost_units: u32,
}

pub trait Model: Sync {
    fn name(&self) -> &str;

    fn space(&self) -> &StochasticSpace;

    fn dim(&self) -> usize {
        self.space().dim()
    }

    /// QoI at a physical point.
    fn value(&self, x: &[f64]) -> Result<f64>;

    /// QoI and its gradient with respect to the physical coordinates.
    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let _ = x;
        Err(Error::UnsupportedModel(format!("{} provides no gradient", self.name())))
    }

    fn supports_gradient(&self) -> bool {
        false
    }

    /// Evaluate at a standard point, optionally with the gradient.
    fn evaluate(&self, xi: &[f64], with_gradient: bool) -> Result<ModelEvaluation> {
        let space = self.space();
        let x = space.destandardize(xi)?;
        if !with_gradient {
            return Ok(ModelEvaluation { value: self.value(&x)?, gradient: Vec::new(), cost_units: 1 });
        }
        let (value, grad) = self.value_and_gradient(&x)?;
        if grad.len() != space.dim() {
            return Err(invalid(format!(
                "{} returned a gradient of length {}, expected {}",
                self.name(),
                grad.len(),
                space.dim()
            )));
        }
        let gradient = grad.iter().zip(space.scales()).map(|(g, s)| g * s).collect();
        Ok(ModelEvaluation { value, gradient, cost_units: 2 })
    }
}

type ValueFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// Adapter turning closures into a [`Model`].
pub struct FnModel {
    name: String,
    space: StochasticSpace,
    value: Box<ValueFn>,
    gradient: Option<Box<GradFn>>,
}

impl FnModel {
    pub fn new(
        name: impl Into<String>,
        space: StochasticSpace,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { name: name.into(), space, value: Box::new(value), gradient: None }
    }

    /// Attach a physical-coordinate gradient.
    pub fn with_gradient(mut self, g: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.gradient = Some(Box::new(g));
        self
    }
}

impl Model for FnModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn space(&self) -> &StochasticSpace {
        &self.space
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok((self.value)(x))
    }

    fn supports_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        match &self.gradient {
            Some(g) => Ok(((self.value)(x), g(x))),
            None => Err(Error::UnsupportedModel(format!("{} provides no gradient", self.name))),
        }
    }
}

//! Sensitivity-enhanced generalized polynomial chaos.
//!
//! Builds orthonormal chaos surrogates of a scalar QoI from a few model runs,
//! each contributing its value and (adjoint) gradient, at points chosen
//! greedily from a random pool by pivoted QR. Plain weighted least squares,
//! Smolyak projection and Monte Carlo are provided as baselines.
//!
//! ```
//! use segpc::{fit_model, FitOptions, IshigamiModel, Method, sobol_total};
//!
//! let model = IshigamiModel::new(7.0, 0.1).unwrap();
//! let opts = FitOptions { method: Method::Segpc, order: 4, pool: 2000, oversample: 1.0, seed: 1 };
//! let fit = fit_model(&model, &opts).unwrap();
//! assert_eq!(fit.surrogate.fit_report.evaluations, 18);
//! let s = sobol_total(&fit.surrogate).unwrap();
//! assert_eq!(s.total_indices.len(), 3);
//! ```

pub mod design;
pub mod error;
pub mod exec;
pub mod linalg;
pub mod models;
pub mod orthopoly;
pub mod pipeline;
pub mod postproc;
pub mod quadrature;
pub mod regression;
pub mod space;

pub use design::{
    build_measurement, coherence_weights, condition_diagnostics, point_weight, qr_select,
    qr_select_rounds, DesignPlan, WeightedMeasurement,
};
pub use error::{Error, Result};
pub use models::{BurgersModel, BurgersSolver, BurgersState, FnModel, IshigamiModel, Model, ModelEvaluation, OdeModel};
pub use orthopoly::{build_index_set, univariate_eval, ChaosBasis, MultiIndexSet, PolyFamily};
pub use pipeline::{fit_model, select_points, FitOptions, FitOutcome, PointSelection};
pub use postproc::{
    higher_moments, moments_from_coefficients, predicted_cost, sobol_total, HigherMomentScheme, Method,
    MomentsReport, ReferenceMoments, SobolReport,
};
pub use quadrature::{gauss_rule, monte_carlo, monte_carlo_moments, smolyak_rule, tensor_gauss_rule, QuadratureRule};
pub use regression::{build_augmented, fit_segpc, fit_wlsq, AugmentedSystem, FitReport, PceSurrogate};
pub use space::{sample_pool, Marginal, SamplePool, StochasticSpace};

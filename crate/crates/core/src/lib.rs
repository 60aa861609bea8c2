//! Local surrogate explanations for univariate one-step-ahead forecasters.
//!
//! A queried window is perturbed with a moving block bootstrap, the black box
//! is evaluated on every sample, and a distance-weighted linear model over
//! interpretable lag / rolling-window / expanding-window features is fitted
//! to mimic it. Fidelity tooling, a hyperparameter grid and a rank test for
//! study analysis sit on top.

pub mod error;
pub mod evaluation;
pub mod features;
pub mod forecasters;
mod linalg;
pub mod perturbation;
pub mod series;
pub mod surrogate;
pub mod synthetic;

pub use error::{Error, Result};
pub use features::{FeatureFamily, FeatureKind, FeatureMatrix, FeatureSpec};
pub use forecasters::{Forecaster, ModelSpec};
pub use linalg::{weighted_ridge, LinearFit};
pub use perturbation::{PerturbationConfig, SampleSet};
pub use series::{NormalizationState, Series};
pub use surrogate::{explain, Explanation, KernelConfig, KernelKind, SurrogateModel};

//! Distance-weighted linear surrogate fitted on bootstrap samples.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{build_feature_matrix, feature_row, validate_specs, FeatureMatrix, FeatureSpec};
use crate::forecasters::Forecaster;
use crate::linalg::weighted_ridge;
use crate::perturbation::{generate_samples, PerturbationConfig};

pub const DEFAULT_RIDGE: f64 = 1e-8;

/// Text shown next to signed coefficients.
pub const SIGN_RULE: &str = "If a lag has a positive contribution, increasing its value will raise the predicted output by the model, while decreasing it will lower the output. Conversely, if a lag has a negative contribution, increasing its value will lower the predicted output, and decreasing it will raise the output.";

pub fn euclidean_distance(window: &[f64], sample: &[f64]) -> Result<f64> {
    if window.len() != sample.len() {
        return Err(Error::Dimension {
            expected: window.len(),
            actual: sample.len(),
        });
    }
    Ok(window
        .iter()
        .zip(sample)
        .map(|(o, b)| (o - b) * (o - b))
        .sum::<f64>()
        .sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Exponential,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub kind: KernelKind,
    /// `None` selects the median positive distance.
    pub bandwidth: Option<f64>,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self::exponential()
    }
}

impl KernelConfig {
    pub fn exponential() -> Self {
        Self {
            kind: KernelKind::Exponential,
            bandwidth: None,
        }
    }

    pub fn uniform() -> Self {
        Self {
            kind: KernelKind::None,
            bandwidth: None,
        }
    }

    pub fn with_bandwidth(mut self, sigma: f64) -> Self {
        self.bandwidth = Some(sigma);
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.bandwidth {
            Some(s) if !(s > 0.0 && s.is_finite()) => {
                Err(Error::Config(format!("kernel bandwidth must be positive, got {s}")))
            }
            _ => Ok(()),
        }
    }

    /// Bandwidth actually used for `distances`.
    pub fn resolve_bandwidth(&self, distances: &[f64]) -> f64 {
        if let Some(s) = self.bandwidth {
            return s;
        }
        let mut positive: Vec<f64> = distances.iter().copied().filter(|d| *d > 0.0).collect();
        if positive.is_empty() {
            return 1.0;
        }
        positive.sort_by(f64::total_cmp);
        let n = positive.len();
        if n % 2 == 1 {
            positive[n / 2]
        } else {
            0.5 * (positive[n / 2 - 1] + positive[n / 2])
        }
    }
}

/// `exp(-d^2 / sigma^2)` for the exponential kernel, all ones otherwise.
/// Weights are floored at the smallest positive double so the weighted fit
/// never sees a zero weight.
pub fn kernel_weights(distances: &[f64], cfg: &KernelConfig) -> Vec<f64> {
    match cfg.kind {
        KernelKind::None => vec![1.0; distances.len()],
        KernelKind::Exponential => {
            let sigma = cfg.resolve_bandwidth(distances);
            distances
                .iter()
                .map(|d| (-(d * d) / (sigma * sigma)).exp().max(f64::MIN_POSITIVE))
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub feature_specs: Vec<FeatureSpec>,
    pub kernel: KernelConfig,
    pub ridge: f64,
    /// In-sample weighted RMSE of the fit.
    pub weighted_rmse: f64,
}

impl SurrogateModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(row).map(|(c, x)| c * x).sum::<f64>()
    }
}

/// Weighted ridge fit with intercept. The kernel is recorded for provenance only.
pub fn fit_wls(x: &FeatureMatrix, y: &[f64], weights: &[f64], ridge: f64, kernel: KernelConfig) -> Result<SurrogateModel> {
    let fit = weighted_ridge(&x.rows, y, weights, ridge)?;
    let wsum: f64 = weights.iter().sum();
    let sse: f64 = x
        .rows
        .iter()
        .zip(y)
        .zip(weights)
        .map(|((row, yi), wi)| {
            let r = yi - fit.intercept - fit.coefficients.iter().zip(row).map(|(c, v)| c * v).sum::<f64>();
            wi * r * r
        })
        .sum();
    Ok(SurrogateModel {
        coefficients: fit.coefficients,
        intercept: fit.intercept,
        feature_specs: x.specs.clone(),
        kernel,
        ridge,
        weighted_rmse: (sse / wsum).sqrt(),
    })
}

/// `g(window)`: the surrogate applied to the window's features at `q + 1`.
pub fn surrogate_predict(g: &SurrogateModel, window: &[f64]) -> Result<f64> {
    validate_specs(&g.feature_specs, window.len())?;
    let row = feature_row(window, &g.feature_specs)?;
    Ok(g.predict_row(&row))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainConfig {
    pub features: Vec<FeatureSpec>,
    pub perturbation: PerturbationConfig,
    pub kernel: KernelConfig,
    pub ridge: f64,
}

impl ExplainConfig {
    pub fn new(features: Vec<FeatureSpec>, perturbation: PerturbationConfig, kernel: KernelConfig) -> Self {
        Self {
            features,
            perturbation,
            kernel,
            ridge: DEFAULT_RIDGE,
        }
    }

    pub fn with_ridge(mut self, ridge: f64) -> Self {
        self.ridge = ridge;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Positive,
    Negative,
    Zero,
}

impl Sign {
    pub fn of(x: f64) -> Self {
        if x > 0.0 {
            Sign::Positive
        } else if x < 0.0 {
            Sign::Negative
        } else {
            Sign::Zero
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureContribution {
    pub feature_label: String,
    pub coefficient: f64,
    pub sign: Sign,
}

/// The artifact handed to users and serialized by the CLI and service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub features: Vec<FeatureContribution>,
    pub intercept: f64,
    pub black_box_prediction: f64,
    pub surrogate_prediction: f64,
    pub black_box: String,
    pub feature_specs: Vec<FeatureSpec>,
    pub perturbation: PerturbationConfig,
    pub kernel: KernelConfig,
    /// Bandwidth used after auto-selection (absent for the uniform kernel).
    pub resolved_bandwidth: Option<f64>,
    pub ridge: f64,
    pub weighted_rmse: f64,
    pub sample_fingerprint: String,
}

impl Explanation {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Intermediate quantities of one explanation run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplainTrace {
    pub distances: Vec<f64>,
    pub weights: Vec<f64>,
    pub targets: Vec<f64>,
    pub sample_fingerprint: u64,
}

/// Samples, distances, black-box targets, features, weighted fit; in that order.
pub fn explain(window: &[f64], f: &dyn Forecaster, cfg: &ExplainConfig) -> Result<(SurrogateModel, Explanation)> {
    explain_traced(window, f, cfg).map(|(g, e, _)| (g, e))
}

pub fn explain_traced(
    window: &[f64],
    f: &dyn Forecaster,
    cfg: &ExplainConfig,
) -> Result<(SurrogateModel, Explanation, ExplainTrace)> {
    cfg.kernel.validate()?;
    validate_specs(&cfg.features, window.len())?;

    let samples = generate_samples(window, &cfg.perturbation)?;
    let distances = samples
        .samples
        .iter()
        .map(|b| euclidean_distance(window, b))
        .collect::<Result<Vec<_>>>()?;
    let targets = samples
        .samples
        .par_iter()
        .map(|b| f.predict(b))
        .collect::<Result<Vec<_>>>()?;
    let x = build_feature_matrix(&samples.samples, &cfg.features)?;
    let weights = kernel_weights(&distances, &cfg.kernel);
    let g = fit_wls(&x, &targets, &weights, cfg.ridge, cfg.kernel)?;

    let black_box_prediction = f.predict(window)?;
    let surrogate_prediction = surrogate_predict(&g, window)?;
    let resolved_bandwidth = match cfg.kernel.kind {
        KernelKind::Exponential => Some(cfg.kernel.resolve_bandwidth(&distances)),
        KernelKind::None => None,
    };
    let fingerprint = samples.fingerprint();
    let explanation = Explanation {
        features: g
            .feature_specs
            .iter()
            .zip(&g.coefficients)
            .map(|(s, &c)| FeatureContribution {
                feature_label: s.label.clone(),
                coefficient: c,
                sign: Sign::of(c),
            })
            .collect(),
        intercept: g.intercept,
        black_box_prediction,
        surrogate_prediction,
        black_box: f.describe(),
        feature_specs: g.feature_specs.clone(),
        perturbation: cfg.perturbation,
        kernel: cfg.kernel,
        resolved_bandwidth,
        ridge: cfg.ridge,
        weighted_rmse: g.weighted_rmse,
        sample_fingerprint: format!("{fingerprint:016x}"),
    };
    let trace = ExplainTrace {
        distances,
        weights,
        targets,
        sample_fingerprint: fingerprint,
    };
    Ok((g, explanation, trace))
}

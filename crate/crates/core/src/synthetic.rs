//! Synthetic benchmark: a nonlinear seasonal autoregression and a series generator.

use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecasters::Forecaster;
use crate::series::Series;

/// `y_{t} = c + a1 y_{t-1} + a2 y_{t-2} + b (y_{t-1} - center)^2 + g y_{t-period}`.
///
/// Deterministic one-step map used both as a nonlinear black box and as the
/// skeleton of [`synthetic_series`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonlinearSeasonalAr {
    pub intercept: f64,
    pub ar1: f64,
    pub ar2: f64,
    pub quadratic: f64,
    pub center: f64,
    pub seasonal: f64,
    pub period: usize,
}

impl Default for NonlinearSeasonalAr {
    fn default() -> Self {
        Self {
            intercept: 0.14,
            ar1: 0.5,
            ar2: -0.2,
            quadratic: 1.2,
            center: 0.5,
            seasonal: 0.3,
            period: 12,
        }
    }
}

impl NonlinearSeasonalAr {
    fn step(&self, history: &[f64]) -> f64 {
        let n = history.len();
        let y1 = history[n - 1];
        let y2 = history[n - 2];
        let ys = history[n - self.period];
        self.intercept
            + self.ar1 * y1
            + self.ar2 * y2
            + self.quadratic * (y1 - self.center).powi(2)
            + self.seasonal * ys
    }
}

impl Forecaster for NonlinearSeasonalAr {
    fn predict(&self, window: &[f64]) -> Result<f64> {
        let needed = self.period.max(2);
        if window.len() < needed {
            return Err(Error::Dimension {
                expected: needed,
                actual: window.len(),
            });
        }
        Ok(self.step(window))
    }

    fn describe(&self) -> String {
        format!(
            "synth(c={}, ar=({}, {}), quad={}@{}, seasonal={}@{})",
            self.intercept, self.ar1, self.ar2, self.quadratic, self.center, self.seasonal, self.period
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub length: usize,
    pub noise_sd: f64,
    /// Amplitude of the sinusoidal annual forcing.
    pub forcing: f64,
    pub seed: u64,
    pub process: NonlinearSeasonalAr,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            length: 120,
            noise_sd: 0.03,
            forcing: 0.06,
            seed: 7,
            process: NonlinearSeasonalAr::default(),
        }
    }
}

/// Monthly series starting 2014-01 driven by the nonlinear map plus annual
/// forcing and Gaussian noise. Deterministic in the seed.
pub fn synthetic_series(cfg: &SyntheticConfig) -> Result<Series> {
    let p = cfg.process;
    if cfg.length < p.period + 2 {
        return Err(Error::Config(format!(
            "synthetic series needs at least {} points",
            p.period + 2
        )));
    }
    let noise = Normal::new(0.0, cfg.noise_sd)
        .map_err(|e| Error::Config(format!("invalid noise level: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let season = |t: usize| {
        cfg.forcing * (2.0 * std::f64::consts::PI * t as f64 / p.period as f64).sin()
    };
    let burn_in = 4 * p.period;
    let mut y: Vec<f64> = (0..p.period).map(|t| 0.5 + season(t)).collect();
    while y.len() < burn_in + cfg.length {
        let t = y.len();
        let next = p.step(&y) + season(t) + noise.sample(&mut rng);
        y.push(next);
    }
    let values = y.split_off(burn_in);
    Series::monthly(NaiveDate::from_ymd_opt(2014, 1, 1).unwrap(), values)
}

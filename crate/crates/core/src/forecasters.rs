//! One-step-ahead black-box forecasters.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::str::FromStr;
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{feature_row, FeatureSpec};
use crate::linalg::weighted_ridge;
use crate::synthetic::NonlinearSeasonalAr;

/// A black box that maps a window of recent values to the next value.
///
/// Implementations must be deterministic: the same window yields the same
/// prediction.
pub trait Forecaster: Send + Sync {
    fn predict(&self, window: &[f64]) -> Result<f64>;

    /// Short human-readable description for provenance records.
    fn describe(&self) -> String;
}

impl<F: Forecaster + ?Sized> Forecaster for Box<F> {
    fn predict(&self, window: &[f64]) -> Result<f64> {
        (**self).predict(window)
    }

    fn describe(&self) -> String {
        (**self).describe()
    }
}

impl<F: Forecaster + ?Sized> Forecaster for std::sync::Arc<F> {
    fn predict(&self, window: &[f64]) -> Result<f64> {
        (**self).predict(window)
    }

    fn describe(&self) -> String {
        (**self).describe()
    }
}

// ---------------------------------------------------------------------------
// Autoregressive model

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArModel {
    /// `coefficients[i]` multiplies `y_{t-1-i}`.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
}

impl ArModel {
    pub fn order(&self) -> usize {
        self.coefficients.len()
    }
}

/// Ordinary least squares of `y_t` on `y_{t-1} .. y_{t-order}` plus intercept.
pub fn ar_fit(train: &[f64], order: usize) -> Result<ArModel> {
    if order == 0 {
        return Err(Error::Config("AR order must be positive".into()));
    }
    if train.len() <= order + 1 {
        return Err(Error::Fit(format!(
            "AR({order}) needs more than {} training points, got {}",
            order + 1,
            train.len()
        )));
    }
    let rows: Vec<Vec<f64>> = (order..train.len())
        .map(|t| (1..=order).map(|i| train[t - i]).collect())
        .collect();
    let y = &train[order..];
    let weights = vec![1.0; y.len()];
    match weighted_ridge(&rows, y, &weights, 0.0) {
        Ok(fit) => Ok(ArModel {
            coefficients: fit.coefficients,
            intercept: fit.intercept,
        }),
        // A flat history carries no lag information: the best predictor is its mean.
        Err(Error::Singular) if rows.iter().all(|r| r == &rows[0]) => Ok(ArModel {
            coefficients: vec![0.0; order],
            intercept: y.iter().sum::<f64>() / y.len() as f64,
        }),
        Err(Error::Singular) => Err(Error::Fit(format!(
            "singular AR({order}) design; the training series is too regular for this order"
        ))),
        Err(e) => Err(e),
    }
}

pub fn ar_predict(model: &ArModel, window: &[f64]) -> Result<f64> {
    let p = model.order();
    if window.len() < p {
        return Err(Error::Dimension {
            expected: p,
            actual: window.len(),
        });
    }
    let q = window.len();
    Ok(model.intercept
        + model
            .coefficients
            .iter()
            .enumerate()
            .map(|(i, c)| c * window[q - 1 - i])
            .sum::<f64>())
}

impl Forecaster for ArModel {
    fn predict(&self, window: &[f64]) -> Result<f64> {
        ar_predict(self, window)
    }

    fn describe(&self) -> String {
        format!("ar:{}", self.order())
    }
}

// ---------------------------------------------------------------------------
// Additive Holt-Winters

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoltWintersParams {
    pub alpha: f64,
    pub beta: f64,
    /// `None` disables the seasonal component.
    pub gamma: Option<f64>,
    pub season_length: usize,
}

impl HoltWintersParams {
    fn validate(&self) -> Result<()> {
        let inside = |x: f64| x > 0.0 && x < 1.0;
        if !inside(self.alpha) || !inside(self.beta) || self.gamma.is_some_and(|g| !inside(g)) {
            return Err(Error::Config(
                "Holt-Winters smoothing factors must lie strictly inside (0, 1)".into(),
            ));
        }
        if self.season_length == 0 || (self.gamma.is_some() && self.season_length < 2) {
            return Err(Error::Config("season length must be at least 2".into()));
        }
        Ok(())
    }
}

/// Smoothing parameters plus the initial state derived from a training series.
///
/// `predict` runs the recursion over the supplied window starting from that
/// initial state, with the window's first observation at seasonal index
/// `phase`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoltWintersModel {
    pub params: HoltWintersParams,
    pub level: f64,
    pub trend: f64,
    pub seasonals: Vec<f64>,
    pub phase: usize,
}

impl HoltWintersModel {
    /// Standard initialization: level = first-season mean, trend = difference of
    /// the first two season means per step, seasonals = first-season deviations.
    pub fn fit(train: &[f64], params: HoltWintersParams) -> Result<Self> {
        params.validate()?;
        let l = params.season_length;
        if train.len() < 2 * l {
            return Err(Error::Fit(format!(
                "Holt-Winters needs at least two seasons ({} points), got {}",
                2 * l,
                train.len()
            )));
        }
        let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
        let first = mean(&train[..l]);
        let second = mean(&train[l..2 * l]);
        let seasonals = if params.gamma.is_some() {
            train[..l].iter().map(|y| y - first).collect()
        } else {
            vec![0.0; l]
        };
        Ok(Self {
            params,
            level: first,
            trend: (second - first) / l as f64,
            seasonals,
            phase: 0,
        })
    }

    pub fn with_phase(mut self, phase: usize) -> Self {
        self.phase = phase % self.params.season_length;
        self
    }

    /// Smooths `history` from the initial state and returns the one-step forecast.
    pub fn forecast_after(&self, history: &[f64]) -> f64 {
        let HoltWintersParams { alpha, beta, gamma, season_length: l } = self.params;
        let mut level = self.level;
        let mut trend = self.trend;
        let mut seasonals = self.seasonals.clone();
        for (t, &y) in history.iter().enumerate() {
            let idx = (self.phase + t) % l;
            let s_prev = seasonals[idx];
            let prev_level = level;
            level = alpha * (y - s_prev) + (1.0 - alpha) * (level + trend);
            trend = beta * (level - prev_level) + (1.0 - beta) * trend;
            if let Some(g) = gamma {
                seasonals[idx] = g * (y - level) + (1.0 - g) * s_prev;
            }
        }
        level + trend + seasonals[(self.phase + history.len()) % l]
    }
}

impl Forecaster for HoltWintersModel {
    fn predict(&self, window: &[f64]) -> Result<f64> {
        if window.is_empty() {
            return Err(Error::Dimension {
                expected: 1,
                actual: 0,
            });
        }
        Ok(self.forecast_after(window))
    }

    fn describe(&self) -> String {
        let p = &self.params;
        format!(
            "hw:{},{},{},{}",
            p.alpha,
            p.beta,
            p.gamma.unwrap_or(0.0),
            p.season_length
        )
    }
}

/// Fits on `train` and forecasts the step after `window`.
pub fn hw_fit_predict(train: &[f64], params: HoltWintersParams, window: &[f64]) -> Result<f64> {
    HoltWintersModel::fit(train, params)?.predict(window)
}

// ---------------------------------------------------------------------------
// Linear function of auxiliary features

/// `intercept + sum_j weights[j] * feature_j(window at q + 1)`.
///
/// Useful as a black box with known ground-truth explanation, and as the
/// last-value forecaster (`lag:1` with weight 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFeatureForecaster {
    pub specs: Vec<FeatureSpec>,
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LinearFeatureForecaster {
    pub fn new(specs: Vec<FeatureSpec>, weights: Vec<f64>, intercept: f64) -> Result<Self> {
        if specs.len() != weights.len() {
            return Err(Error::Dimension {
                expected: specs.len(),
                actual: weights.len(),
            });
        }
        Ok(Self {
            specs,
            weights,
            intercept,
        })
    }

    pub fn last_value() -> Self {
        Self {
            specs: vec![FeatureSpec::lag(1)],
            weights: vec![1.0],
            intercept: 0.0,
        }
    }
}

impl Forecaster for LinearFeatureForecaster {
    fn predict(&self, window: &[f64]) -> Result<f64> {
        let row = feature_row(window, &self.specs)?;
        Ok(self.intercept + row.iter().zip(&self.weights).map(|(x, w)| x * w).sum::<f64>())
    }

    fn describe(&self) -> String {
        let terms: Vec<String> = self
            .specs
            .iter()
            .zip(&self.weights)
            .map(|(s, w)| format!("{w}*{}", s.label))
            .collect();
        format!("linear({} + {})", self.intercept, terms.join(" + "))
    }
}

// ---------------------------------------------------------------------------
// External process adapter

/// Line protocol over the child's standard streams: one request line of
/// comma-separated reals, one response line holding a single real. A response
/// starting with `ERR ` reports an adapter-side failure. Calls on one adapter
/// are serialized.
pub struct ExternalForecaster {
    command: String,
    timeout: Duration,
    process: Mutex<Option<AdapterProcess>>,
}

struct AdapterProcess {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

impl Drop for AdapterProcess {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

pub const DEFAULT_ADAPTER_TIMEOUT: Duration = Duration::from_secs(10);

impl ExternalForecaster {
    pub fn new(command: impl Into<String>) -> Self {
        Self::with_timeout(command, DEFAULT_ADAPTER_TIMEOUT)
    }

    pub fn with_timeout(command: impl Into<String>, timeout: Duration) -> Self {
        Self {
            command: command.into(),
            timeout,
            process: Mutex::new(None),
        }
    }

    fn spawn(&self) -> Result<AdapterProcess> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&self.command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Adapter(format!("cannot start `{}`: {e}", self.command)))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            let mut reader = BufReader::new(stdout);
            loop {
                let mut line = String::new();
                match reader.read_line(&mut line) {
                    Ok(0) => break,
                    Ok(_) => {
                        if tx.send(Ok(line)).is_err() {
                            break;
                        }
                    }
                    Err(e) => {
                        let _ = tx.send(Err(e));
                        break;
                    }
                }
            }
        });
        Ok(AdapterProcess {
            child,
            stdin,
            lines: rx,
        })
    }

    fn exchange(&self, proc_: &mut AdapterProcess, request: &str) -> Result<f64> {
        proc_
            .stdin
            .write_all(request.as_bytes())
            .and_then(|_| proc_.stdin.flush())
            .map_err(|e| Error::Adapter(format!("write to adapter failed: {e}")))?;
        let line = match proc_.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => line,
            Ok(Err(e)) => return Err(Error::Adapter(format!("read from adapter failed: {e}"))),
            Err(RecvTimeoutError::Timeout) => return Err(Error::AdapterTimeout(self.timeout)),
            Err(RecvTimeoutError::Disconnected) => {
                let status = proc_
                    .child
                    .wait()
                    .map(|s| s.to_string())
                    .unwrap_or_else(|e| e.to_string());
                return Err(Error::Adapter(format!(
                    "adapter exited without responding ({status})"
                )));
            }
        };
        parse_adapter_response(&line)
    }
}

pub fn format_adapter_request(window: &[f64]) -> String {
    let mut s = window
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",");
    s.push('\n');
    s
}

pub fn parse_adapter_response(line: &str) -> Result<f64> {
    let line = line.trim_end_matches(['\n', '\r']);
    if let Some(msg) = line.strip_prefix("ERR ") {
        return Err(Error::Adapter(format!("adapter reported: {msg}")));
    }
    match line.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Adapter(format!("malformed response `{line}`"))),
    }
}

impl Forecaster for ExternalForecaster {
    fn predict(&self, window: &[f64]) -> Result<f64> {
        let request = format_adapter_request(window);
        let mut guard = self.process.lock().unwrap_or_else(|p| p.into_inner());
        if guard.is_none() {
            *guard = Some(self.spawn()?);
        }
        let result = self.exchange(guard.as_mut().unwrap(), &request);
        if result.is_err() {
            // Resynchronizing a line protocol after a failure is not possible;
            // the next call starts a fresh process.
            *guard = None;
        }
        result
    }

    fn describe(&self) -> String {
        format!("ext:{}", self.command)
    }
}

// ---------------------------------------------------------------------------
// Model spec mini-language

/// `ar:p`, `hw:alpha,beta,gamma,season` (gamma 0 disables seasonality),
/// `ext:command line`, `last` (last-value), `synth` (the synthetic nonlinear
/// benchmark process).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelSpec {
    Ar { order: usize },
    HoltWinters(HoltWintersParams),
    External { command: String },
    LastValue,
    Synthetic,
}

impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, rest) = s.split_once(':').unwrap_or((s, ""));
        match head {
            "ar" => {
                let order = rest
                    .trim()
                    .parse::<usize>()
                    .ok()
                    .filter(|p| *p > 0)
                    .ok_or_else(|| Error::Config(format!("bad AR order in `{s}`")))?;
                Ok(ModelSpec::Ar { order })
            }
            "hw" => {
                let parts: Vec<&str> = rest.split(',').map(str::trim).collect();
                if parts.len() != 4 {
                    return Err(Error::Config(format!(
                        "`{s}`: expected hw:alpha,beta,gamma,season"
                    )));
                }
                let real = |x: &str| {
                    x.parse::<f64>()
                        .map_err(|_| Error::Config(format!("`{s}`: `{x}` is not a number")))
                };
                let gamma = real(parts[2])?;
                let params = HoltWintersParams {
                    alpha: real(parts[0])?,
                    beta: real(parts[1])?,
                    gamma: (gamma != 0.0).then_some(gamma),
                    season_length: parts[3]
                        .parse()
                        .map_err(|_| Error::Config(format!("`{s}`: bad season length")))?,
                };
                params.validate()?;
                Ok(ModelSpec::HoltWinters(params))
            }
            "ext" if !rest.trim().is_empty() => Ok(ModelSpec::External {
                command: rest.trim().to_string(),
            }),
            "last" => Ok(ModelSpec::LastValue),
            "synth" => Ok(ModelSpec::Synthetic),
            _ => Err(Error::Config(format!(
                "unrecognised model `{s}`; expected ar:p, hw:a,b,g,season, ext:cmd, last or synth"
            ))),
        }
    }
}

impl ModelSpec {
    /// Builds the forecaster; fitted models learn from `train`.
    pub fn build(&self, train: &[f64], adapter_timeout: Duration) -> Result<Box<dyn Forecaster>> {
        Ok(match self {
            ModelSpec::Ar { order } => Box::new(ar_fit(train, *order)?),
            ModelSpec::HoltWinters(p) => Box::new(HoltWintersModel::fit(train, *p)?),
            ModelSpec::External { command } => {
                Box::new(ExternalForecaster::with_timeout(command.clone(), adapter_timeout))
            }
            ModelSpec::LastValue => Box::new(LinearFeatureForecaster::last_value()),
            ModelSpec::Synthetic => Box::new(NonlinearSeasonalAr::default()),
        })
    }
}

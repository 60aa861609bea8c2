//! Python module `tsfl`: perturbation, features, surrogate explanations,
//! fidelity and the rank test. Black boxes are either built-in models
//! (`Forecaster.from_spec`) or any Python callable taking a list of floats.

use std::sync::Arc;
use std::time::Duration;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use tsfl_core::evaluation::{self, FidelityReport};
use tsfl_core::features::{self, parse_feature_specs};
use tsfl_core::perturbation;
use tsfl_core::surrogate::{self, ExplainConfig};
use tsfl_core::synthetic::{synthetic_series as synth, SyntheticConfig};
use tsfl_core::{FeatureFamily, FeatureSpec, KernelKind};

fn to_py(e: tsfl_core::Error) -> PyErr {
    if e.is_validation() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

#[pyclass(name = "PerturbationConfig", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyPerturbationConfig(perturbation::PerturbationConfig);

#[pymethods]
impl PyPerturbationConfig {
    #[new]
    #[pyo3(signature = (block_length=5, block_swap=2, sample_count=1000, ma_window=3, seed=42))]
    fn new(block_length: usize, block_swap: usize, sample_count: usize, ma_window: usize, seed: u64) -> Self {
        Self(perturbation::PerturbationConfig {
            block_length,
            block_swap,
            sample_count,
            ma_window,
            seed,
        })
    }

    #[getter]
    fn block_length(&self) -> usize {
        self.0.block_length
    }
    #[getter]
    fn block_swap(&self) -> usize {
        self.0.block_swap
    }
    #[getter]
    fn sample_count(&self) -> usize {
        self.0.sample_count
    }
    #[getter]
    fn ma_window(&self) -> usize {
        self.0.ma_window
    }
    #[getter]
    fn seed(&self) -> u64 {
        self.0.seed
    }

    fn __repr__(&self) -> String {
        let c = self.0;
        format!(
            "PerturbationConfig(block_length={}, block_swap={}, sample_count={}, ma_window={}, seed={})",
            c.block_length, c.block_swap, c.sample_count, c.ma_window, c.seed
        )
    }
}

#[pyclass(name = "KernelConfig", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyKernelConfig(surrogate::KernelConfig);

#[pymethods]
impl PyKernelConfig {
    /// `kind` is "exponential" or "none"; `bandwidth=None` uses the median distance.
    #[new]
    #[pyo3(signature = (kind="exponential", bandwidth=None))]
    fn new(kind: &str, bandwidth: Option<f64>) -> PyResult<Self> {
        let kind = match kind {
            "exponential" => KernelKind::Exponential,
            "none" => KernelKind::None,
            other => return Err(PyValueError::new_err(format!("unknown kernel `{other}`"))),
        };
        let cfg = surrogate::KernelConfig { kind, bandwidth };
        cfg.validate().map_err(to_py)?;
        Ok(Self(cfg))
    }

    #[getter]
    fn kind(&self) -> &'static str {
        match self.0.kind {
            KernelKind::Exponential => "exponential",
            KernelKind::None => "none",
        }
    }

    #[getter]
    fn bandwidth(&self) -> Option<f64> {
        self.0.bandwidth
    }

    fn __repr__(&self) -> String {
        format!("KernelConfig(kind={:?}, bandwidth={:?})", self.kind(), self.0.bandwidth)
    }
}

/// Adapts a Python callable `f(window: list[float]) -> float`.
struct CallableForecaster(Py<PyAny>);

impl tsfl_core::Forecaster for CallableForecaster {
    fn predict(&self, window: &[f64]) -> tsfl_core::Result<f64> {
        Python::attach(|py| {
            self.0
                .call1(py, (window.to_vec(),))
                .and_then(|v| v.extract::<f64>(py))
                .map_err(|e| tsfl_core::Error::Adapter(format!("python forecaster failed: {e}")))
        })
    }

    fn describe(&self) -> String {
        Python::attach(|py| {
            self.0
                .bind(py)
                .repr()
                .map(|r| format!("python:{r}"))
                .unwrap_or_else(|_| "python".into())
        })
    }
}

#[pyclass(name = "Forecaster", frozen, skip_from_py_object)]
struct PyForecaster(Arc<dyn tsfl_core::Forecaster>);

#[pymethods]
impl PyForecaster {
    /// `ar:p`, `hw:alpha,beta,gamma,season`, `ext:command`, `last` or `synth`;
    /// fitted models learn from `train`.
    #[staticmethod]
    #[pyo3(signature = (spec, train=Vec::new(), adapter_timeout=10.0))]
    fn from_spec(spec: &str, train: Vec<f64>, adapter_timeout: f64) -> PyResult<Self> {
        let spec: tsfl_core::ModelSpec = spec.parse().map_err(to_py)?;
        if !(adapter_timeout > 0.0 && adapter_timeout.is_finite()) {
            return Err(PyValueError::new_err("adapter_timeout must be positive"));
        }
        let f = spec
            .build(&train, Duration::from_secs_f64(adapter_timeout))
            .map_err(to_py)?;
        Ok(Self(Arc::from(f)))
    }

    /// Exact linear function of features, e.g. `linear("lag:1,rw:1:3", [0.3, 0.7])`.
    #[staticmethod]
    #[pyo3(signature = (features, weights, intercept=0.0))]
    fn linear(features: &str, weights: Vec<f64>, intercept: f64) -> PyResult<Self> {
        let specs = parse_feature_specs(features).map_err(to_py)?;
        let f = tsfl_core::forecasters::LinearFeatureForecaster::new(specs, weights, intercept).map_err(to_py)?;
        Ok(Self(Arc::new(f)))
    }

    #[staticmethod]
    fn from_callable(f: Py<PyAny>) -> Self {
        Self(Arc::new(CallableForecaster(f)))
    }

    fn predict(&self, py: Python<'_>, window: Vec<f64>) -> PyResult<f64> {
        let f = self.0.clone();
        py.detach(move || f.predict(&window)).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("Forecaster({})", self.0.describe())
    }
}

fn forecaster_arg(obj: &Bound<'_, PyAny>) -> PyResult<Arc<dyn tsfl_core::Forecaster>> {
    if let Ok(f) = obj.cast::<PyForecaster>() {
        return Ok(f.get().0.clone());
    }
    if obj.is_callable() {
        return Ok(Arc::new(CallableForecaster(obj.clone().unbind())));
    }
    Err(PyValueError::new_err("model must be a Forecaster or a callable"))
}

fn explain_config(
    window_len: usize,
    features: Option<&str>,
    perturbation: Option<PyRef<'_, PyPerturbationConfig>>,
    kernel: Option<PyRef<'_, PyKernelConfig>>,
    ridge: f64,
) -> PyResult<ExplainConfig> {
    let specs = match features {
        Some(s) => parse_feature_specs(s).map_err(to_py)?,
        None => FeatureFamily::Lag.default_specs(window_len),
    };
    Ok(ExplainConfig::new(
        specs,
        perturbation.map(|p| p.0).unwrap_or_default(),
        kernel.map(|k| k.0).unwrap_or_default(),
    )
    .with_ridge(ridge))
}

#[pyclass(name = "Explanation", frozen, skip_from_py_object)]
struct PyExplanation(surrogate::Explanation);

#[pymethods]
impl PyExplanation {
    /// `[(label, coefficient, sign), ...]`
    #[getter]
    fn features(&self) -> Vec<(String, f64, &'static str)> {
        self.0
            .features
            .iter()
            .map(|c| {
                let sign = match c.sign {
                    surrogate::Sign::Positive => "positive",
                    surrogate::Sign::Negative => "negative",
                    surrogate::Sign::Zero => "zero",
                };
                (c.feature_label.clone(), c.coefficient, sign)
            })
            .collect()
    }

    #[getter]
    fn coefficients(&self) -> Vec<f64> {
        self.0.features.iter().map(|c| c.coefficient).collect()
    }

    #[getter]
    fn intercept(&self) -> f64 {
        self.0.intercept
    }

    #[getter]
    fn black_box_prediction(&self) -> f64 {
        self.0.black_box_prediction
    }

    #[getter]
    fn surrogate_prediction(&self) -> f64 {
        self.0.surrogate_prediction
    }

    #[getter]
    fn weighted_rmse(&self) -> f64 {
        self.0.weighted_rmse
    }

    fn to_json(&self) -> PyResult<String> {
        self.0.to_json().map_err(to_py)
    }

    fn __repr__(&self) -> String {
        let terms: Vec<String> = self
            .0
            .features
            .iter()
            .map(|c| format!("{}={:.6}", c.feature_label, c.coefficient))
            .collect();
        format!("Explanation({}, intercept={:.6})", terms.join(", "), self.0.intercept)
    }
}

/// Surrogate explanation of `model` around `window`. Feature specs use the
/// `lag:k,rw:k:w,ew:w` syntax; the default is every lag of the window.
#[pyfunction]
#[pyo3(signature = (window, model, features=None, perturbation=None, kernel=None, ridge=surrogate::DEFAULT_RIDGE))]
fn explain(
    py: Python<'_>,
    window: Vec<f64>,
    model: &Bound<'_, PyAny>,
    features: Option<&str>,
    perturbation: Option<PyRef<'_, PyPerturbationConfig>>,
    kernel: Option<PyRef<'_, PyKernelConfig>>,
    ridge: f64,
) -> PyResult<PyExplanation> {
    let f = forecaster_arg(model)?;
    let cfg = explain_config(window.len(), features, perturbation, kernel, ridge)?;
    let (_, e) = py
        .detach(move || surrogate::explain(&window, f.as_ref(), &cfg))
        .map_err(to_py)?;
    Ok(PyExplanation(e))
}

/// MBB samples around `window`, one list per sample.
#[pyfunction]
#[pyo3(signature = (window, config=None))]
fn generate_samples(
    py: Python<'_>,
    window: Vec<f64>,
    config: Option<PyRef<'_, PyPerturbationConfig>>,
) -> PyResult<Vec<Vec<f64>>> {
    let cfg = config.map(|c| c.0).unwrap_or_default();
    py.detach(move || perturbation::generate_samples(&window, &cfg))
        .map(|s| s.samples)
        .map_err(to_py)
}

/// Feature values at `t = len(window) + 1`.
#[pyfunction]
fn feature_row(window: Vec<f64>, features: &str) -> PyResult<Vec<f64>> {
    let specs = parse_feature_specs(features).map_err(to_py)?;
    features::feature_row(&window, &specs).map_err(to_py)
}

/// Labels of the parsed feature specs, in order.
#[pyfunction]
fn feature_labels(features: &str) -> PyResult<Vec<String>> {
    Ok(parse_feature_specs(features)
        .map_err(to_py)?
        .into_iter()
        .map(|s: FeatureSpec| s.label)
        .collect())
}

/// `y_{t-k}` with 1-based `t`, or None when undefined.
#[pyfunction]
fn lag(values: Vec<f64>, t: usize, k: usize) -> Option<f64> {
    features::lag(&values, t, k)
}

#[pyfunction]
fn rolling_window(values: Vec<f64>, t: usize, k: usize, w: usize) -> Option<f64> {
    features::rolling_window(&values, t, k, w)
}

#[pyfunction]
fn expanding_window(values: Vec<f64>, t: usize, w: usize) -> Option<f64> {
    features::expanding_window(&values, t, w)
}

/// Mean fidelity over `iterations` runs: `{"mae": .., "rmse": .., "mape": ..}`.
#[pyfunction]
#[pyo3(signature = (model, queries, features=None, perturbation=None, kernel=None, iterations=1, ridge=surrogate::DEFAULT_RIDGE))]
#[allow(clippy::too_many_arguments)]
fn evaluate_fidelity(
    py: Python<'_>,
    model: &Bound<'_, PyAny>,
    queries: Vec<Vec<f64>>,
    features: Option<&str>,
    perturbation: Option<PyRef<'_, PyPerturbationConfig>>,
    kernel: Option<PyRef<'_, PyKernelConfig>>,
    iterations: usize,
    ridge: f64,
) -> PyResult<std::collections::BTreeMap<&'static str, f64>> {
    let f = forecaster_arg(model)?;
    let q = queries.first().map_or(0, Vec::len);
    let cfg = explain_config(q, features, perturbation, kernel, ridge)?;
    let report: FidelityReport = py
        .detach(move || evaluation::evaluate_fidelity(f.as_ref(), &queries, &cfg, iterations))
        .map_err(to_py)?;
    let m = report.metrics;
    Ok([("mae", m.mae), ("rmse", m.rmse), ("mape", m.mape)].into_iter().collect())
}

/// `(u_a, u_b, z, p)`: two-sided normal approximation with tie correction.
#[pyfunction]
fn mann_whitney_u(a: Vec<f64>, b: Vec<f64>) -> PyResult<(f64, f64, f64, f64)> {
    let r = evaluation::mann_whitney_u(&a, &b).map_err(to_py)?;
    Ok((r.u_a, r.u_b, r.z, r.p_value))
}

/// The synthetic nonlinear seasonal benchmark series.
#[pyfunction]
#[pyo3(signature = (length=120, seed=7))]
fn synthetic_series(length: usize, seed: u64) -> PyResult<Vec<f64>> {
    let cfg = SyntheticConfig {
        length,
        seed,
        ..SyntheticConfig::default()
    };
    Ok(synth(&cfg).map_err(to_py)?.values().to_vec())
}

#[pymodule]
pub fn tsfl(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPerturbationConfig>()?;
    m.add_class::<PyKernelConfig>()?;
    m.add_class::<PyForecaster>()?;
    m.add_class::<PyExplanation>()?;
    m.add_function(wrap_pyfunction!(explain, m)?)?;
    m.add_function(wrap_pyfunction!(generate_samples, m)?)?;
    m.add_function(wrap_pyfunction!(feature_row, m)?)?;
    m.add_function(wrap_pyfunction!(feature_labels, m)?)?;
    m.add_function(wrap_pyfunction!(lag, m)?)?;
    m.add_function(wrap_pyfunction!(rolling_window, m)?)?;
    m.add_function(wrap_pyfunction!(expanding_window, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_fidelity, m)?)?;
    m.add_function(wrap_pyfunction!(mann_whitney_u, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic_series, m)?)?;
    m.add("SIGN_RULE", surrogate::SIGN_RULE)?;
    Ok(())
}

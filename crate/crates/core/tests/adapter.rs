use std::path::PathBuf;
use std::time::{Duration, Instant};

use tsfl_core::forecasters::ExternalForecaster;
use tsfl_core::surrogate::{explain, ExplainConfig};
use tsfl_core::{Error, FeatureSpec, Forecaster, KernelConfig, PerturbationConfig};

fn echo_last() -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../adapters/echo_last.sh");
    format!("sh '{}'", p.canonicalize().unwrap().display())
}

#[test]
fn reference_adapter_returns_last_value() {
    let f = ExternalForecaster::new(echo_last());
    assert_eq!(f.predict(&[1.0, 2.5, -3.25]).unwrap(), -3.25);
    assert_eq!(f.predict(&[0.1, 1e-7]).unwrap(), 1e-7);
    // Same process serves repeated calls.
    for i in 0..50 {
        let w = [0.0, i as f64 * 0.5];
        assert_eq!(f.predict(&w).unwrap(), i as f64 * 0.5);
    }
}

#[test]
fn reference_adapter_drives_an_explanation() {
    let f = ExternalForecaster::new(echo_last());
    let window: Vec<f64> = (0..12).map(|t| 0.4 + 0.03 * t as f64 + 0.05 * (t as f64).sin()).collect();
    let pc = PerturbationConfig { sample_count: 200, ..Default::default() };
    let cfg = ExplainConfig::new(vec![FeatureSpec::lag(1), FeatureSpec::lag(2)], pc, KernelConfig::exponential()).with_ridge(0.0);
    let (g, e) = explain(&window, &f, &cfg).unwrap();
    assert_eq!(e.black_box_prediction, window[11]);
    assert!((g.coefficients[0] - 1.0).abs() < 1e-6, "{:?}", g.coefficients);
    assert!(g.coefficients[1].abs() < 1e-6);
}

#[test]
fn non_numeric_response_is_adapter_error() {
    let f = ExternalForecaster::new("while read l; do echo banana; done");
    assert!(matches!(f.predict(&[1.0]), Err(Error::Adapter(m)) if m.contains("banana")));
    let f = ExternalForecaster::new("while read l; do echo 'ERR model not loaded'; done");
    assert!(matches!(f.predict(&[1.0]), Err(Error::Adapter(m)) if m.contains("model not loaded")));
    let f = ExternalForecaster::new("while read l; do echo nan; done");
    assert!(matches!(f.predict(&[1.0]), Err(Error::Adapter(_))));
}

#[test]
fn slow_adapter_times_out() {
    let f = ExternalForecaster::with_timeout("while read l; do sleep 5; echo 1; done", Duration::from_millis(200));
    let start = Instant::now();
    assert!(matches!(f.predict(&[1.0]), Err(Error::AdapterTimeout(_))));
    assert!(start.elapsed() < Duration::from_secs(3));
}

#[test]
fn exiting_adapter_is_reported() {
    let f = ExternalForecaster::new("exit 3");
    assert!(matches!(f.predict(&[1.0]), Err(Error::Adapter(_))));
    let f = ExternalForecaster::new("/nonexistent/model --serve");
    assert!(matches!(f.predict(&[1.0]), Err(Error::Adapter(_))));
}

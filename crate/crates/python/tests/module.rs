use std::ffi::CString;

use pyo3::prelude::*;
use pyo3::types::PyDict;

fn run(code: &str) {
    Python::attach(|py| {
        let module = pyo3::wrap_pymodule!(tsfl::tsfl)(py);
        let sys = py.import("sys").unwrap();
        sys.getattr("modules").unwrap().set_item("tsfl", module).unwrap();
        let globals = PyDict::new(py);
        let code = CString::new(code).unwrap();
        if let Err(e) = py.run(&code, Some(&globals), None) {
            e.print(py);
            panic!("python snippet failed");
        }
    });
}

#[test]
fn table_values_through_python() {
    run(r#"
import tsfl
y = [10.0, 20.0, 30.0, 40.0, 50.0, 60.0]
assert tsfl.lag(y, 6, 5) == 10.0
assert tsfl.lag(y, 5, 5) is None
assert tsfl.rolling_window(y, 6, 3, 3) == 20.0
assert tsfl.expanding_window(y, 6, 5) == 30.0
assert tsfl.feature_labels("lag:1,rw:1:3,ew:5") == ["Lag_1", "RollingWindow_1,3", "ExpandingWindow_5"]
assert tsfl.feature_row(y, "lag:1,ew:2") == [60.0, 55.0]
"#);
}

#[test]
fn linear_oracle_through_python() {
    run(r#"
import tsfl
series = tsfl.synthetic_series()
window = series[-12:]
f = tsfl.Forecaster.linear("lag:1,rw:1:3", [0.3, 0.7])
for kernel in (tsfl.KernelConfig("none"), tsfl.KernelConfig()):
    e = tsfl.explain(window, f, "lag:1,rw:1:3", tsfl.PerturbationConfig(), kernel)
    c = e.coefficients
    assert abs(c[0] - 0.3) < 1e-6 and abs(c[1] - 0.7) < 1e-6, c
    assert abs(e.intercept) < 1e-6
    assert abs(e.black_box_prediction - f.predict(window)) == 0.0
queries = [series[i:i + 12] for i in range(100, 105)]
m = tsfl.evaluate_fidelity(f, queries, "lag:1,rw:1:3", tsfl.PerturbationConfig(sample_count=200))
assert m["rmse"] < 1e-6 and m["rmse"] >= m["mae"], m
"#);
}

#[test]
fn python_callable_as_black_box() {
    run(r#"
import json, tsfl
calls = []
def last(w):
    calls.append(1)
    return w[-1]
window = [0.1 * i + 0.05 * (i % 3) for i in range(12)]
e = tsfl.explain(window, last, "lag:1,lag:2", tsfl.PerturbationConfig(sample_count=150), ridge=0.0)
assert abs(e.coefficients[0] - 1.0) < 1e-9 and abs(e.coefficients[1]) < 1e-9, e.coefficients
assert len(calls) == 151
doc = json.loads(e.to_json())
assert doc["features"][0]["feature_label"] == "Lag_1"
assert doc["features"][0]["sign"] == "positive"
def broken(w):
    raise KeyError("nope")
try:
    tsfl.explain(window, broken, "lag:1")
except RuntimeError as err:
    assert "nope" in str(err)
else:
    raise AssertionError("expected RuntimeError")
"#);
}

#[test]
fn samples_models_and_errors() {
    run(r#"
import tsfl
w = [float(i % 5) for i in range(12)]
cfg = tsfl.PerturbationConfig(sample_count=50, seed=3)
a = tsfl.generate_samples(w, cfg)
assert len(a) == 50 and all(len(s) == 12 for s in a)
assert a == tsfl.generate_samples(w, cfg)
assert tsfl.generate_samples(w, tsfl.PerturbationConfig(block_swap=0, sample_count=3)) == [w] * 3
ar = tsfl.Forecaster.from_spec("ar:1", [1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125])
assert abs(ar.predict([0.5]) - 0.25) < 1e-9
assert "ar" in repr(ar)
for bad in (lambda: tsfl.Forecaster.from_spec("arima:2"),
            lambda: tsfl.explain(w, ar, "lag:13"),
            lambda: tsfl.KernelConfig("triangle"),
            lambda: tsfl.generate_samples(w, tsfl.PerturbationConfig(ma_window=4))):
    try:
        bad()
    except ValueError:
        pass
    else:
        raise AssertionError("expected ValueError")
u_a, u_b, z, p = tsfl.mann_whitney_u([1.0, 2.0, 3.0], [4.0, 5.0])
assert (u_a, u_b) == (0.0, 6.0) and 0.0 < p < 1.0
assert tsfl.SIGN_RULE.startswith("If a lag has a positive contribution")
"#);
}

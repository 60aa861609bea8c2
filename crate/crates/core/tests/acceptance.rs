//! Exit criteria. Each test prints one `[PASS]` / `[FAIL]` line; run with
//! `cargo test -p tsfl-core --test acceptance -- --nocapture` to see them.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tsfl_core::evaluation::{
    distance_ablation, evaluate_fidelity, holdout_queries, mann_whitney_p, mann_whitney_u, run_grid,
    select_best, FidelityReport, GridSpec, Metric,
};
use tsfl_core::features::{expanding_window, lag, rolling_window};
use tsfl_core::forecasters::LinearFeatureForecaster;
use tsfl_core::perturbation::{decompose, generate_samples};
use tsfl_core::surrogate::{explain, fit_wls, ExplainConfig};
use tsfl_core::synthetic::{synthetic_series, NonlinearSeasonalAr, SyntheticConfig};
use tsfl_core::{FeatureFamily, FeatureMatrix, FeatureSpec, KernelConfig, PerturbationConfig};

fn verdict(name: &str, ok: bool, detail: impl AsRef<str>) {
    println!("[{}] {name}: {}", if ok { "PASS" } else { "FAIL" }, detail.as_ref());
    assert!(ok, "{name}: {}", detail.as_ref());
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn rmse_not_below_mae(r: &FidelityReport) -> bool {
    r.metrics.rmse >= r.metrics.mae && r.iteration_metrics.iter().all(|m| m.rmse >= m.mae)
}

// ---------------------------------------------------------------------------

/// Toy series 10..60, transcribed cell by cell; `None` is a "-" cell.
/// Columns: Lag k=1..5, RollingWindow k=1..3 (w=3), ExpandingWindow w=1..5.
#[rustfmt::skip]
const TOY_TABLE: [[Option<f64>; 13]; 6] = {
    const N: Option<f64> = None;
    const fn s(v: f64) -> Option<f64> { Some(v) }
    [
        [N,       N,       N,       N,       N,       N,       N,       N,       N,       N,       N,       N,       N],
        [s(10.0), N,       N,       N,       N,       N,       N,       N,       s(10.0), N,       N,       N,       N],
        [s(20.0), s(10.0), N,       N,       N,       N,       N,       N,       s(20.0), s(15.0), N,       N,       N],
        [s(30.0), s(20.0), s(10.0), N,       N,       s(20.0), N,       N,       s(30.0), s(25.0), s(20.0), N,       N],
        [s(40.0), s(30.0), s(20.0), s(10.0), N,       s(30.0), s(20.0), N,       s(40.0), s(35.0), s(30.0), s(25.0), N],
        [s(50.0), s(40.0), s(30.0), s(20.0), s(10.0), s(40.0), s(30.0), s(20.0), s(50.0), s(45.0), s(40.0), s(35.0), s(30.0)],
    ]
};

#[test]
fn toy_feature_table_reproduction() {
    let start = Instant::now();
    let y = [10.0, 20.0, 30.0, 40.0, 50.0, 60.0];
    let mut defined = 0;
    let mut undefined = 0;
    let mut mismatches = Vec::new();
    for t in 1..=6 {
        let row = &TOY_TABLE[t - 1];
        let got: Vec<Option<f64>> = (1..=5)
            .map(|k| lag(&y, t, k))
            .chain((1..=3).map(|k| rolling_window(&y, t, k, 3)))
            .chain((1..=5).map(|w| expanding_window(&y, t, w)))
            .collect();
        for (col, (want, have)) in row.iter().zip(&got).enumerate() {
            match want {
                Some(_) => defined += 1,
                None => undefined += 1,
            }
            if want != have {
                mismatches.push(format!("t={t} col={col}: want {want:?} got {have:?}"));
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        "toy feature table reproduction",
        mismatches.is_empty() && defined + undefined == 78 && elapsed < Duration::from_secs(1),
        format!("{defined} defined and {undefined} undefined cells exact, {} mismatches, {elapsed:?}", mismatches.len()),
    );
}

#[test]
fn mbb_invariants() {
    let start = Instant::now();
    let window: Vec<f64> = (0..12)
        .map(|t| 0.45 + 0.04 * t as f64 + 0.15 * (t as f64 * 1.3).sin())
        .collect();
    let cfg = PerturbationConfig { block_length: 5, block_swap: 2, sample_count: 1000, ma_window: 3, seed: 42 };
    let set = generate_samples(&window, &cfg).unwrap();
    let d = decompose(&window, cfg.ma_window).unwrap();
    let mut want = d.residual.clone();
    want.sort_by(f64::total_cmp);

    let lengths_ok = set.len() == 1000 && set.samples.iter().all(|s| s.len() == 12);
    let multiset_ok = set.samples.iter().all(|s| {
        let mut r: Vec<f64> = s.iter().zip(&d.moving_average).map(|(b, m)| b - m).collect();
        r.sort_by(f64::total_cmp);
        r.iter().zip(&want).all(|(a, b)| (a - b).abs() <= 1e-12)
    });
    let perturbed = set.samples.iter().filter(|s| **s != window).count();
    let identity = generate_samples(&window, &PerturbationConfig { block_swap: 0, ..cfg }).unwrap();
    let identity_ok = identity.samples.iter().all(|s| *s == window);
    let again = generate_samples(&window, &cfg).unwrap();
    let bitwise_ok = set
        .samples
        .iter()
        .flatten()
        .zip(again.samples.iter().flatten())
        .all(|(a, b)| a.to_bits() == b.to_bits());
    let elapsed = start.elapsed();
    verdict(
        "MBB invariants",
        lengths_ok && multiset_ok && identity_ok && bitwise_ok && perturbed > 0 && elapsed < Duration::from_secs(5),
        format!(
            "lengths={lengths_ok} multiset={multiset_ok} identity={identity_ok} bitwise={bitwise_ok} perturbed={perturbed}/1000 {elapsed:?}"
        ),
    );
}

#[test]
fn linear_oracle_recovery() {
    let start = Instant::now();
    let specs = vec![FeatureSpec::lag(1), FeatureSpec::rolling(1, 3)];
    let f = LinearFeatureForecaster::new(specs.clone(), vec![0.3, 0.7], 0.0).unwrap();
    let series = synthetic_series(&SyntheticConfig::default()).unwrap();
    let queries = holdout_queries(series.values(), 12, 10).unwrap();
    let pc = PerturbationConfig::default();

    let mut worst_coef: f64 = 0.0;
    let mut worst_metric: f64 = 0.0;
    let mut algebra = true;
    for kernel in [KernelConfig::uniform(), KernelConfig::exponential()] {
        let cfg = ExplainConfig::new(specs.clone(), pc, kernel);
        let (g, _) = explain(&queries[9], &f, &cfg).unwrap();
        worst_coef = worst_coef
            .max((g.coefficients[0] - 0.3).abs())
            .max((g.coefficients[1] - 0.7).abs())
            .max(g.intercept.abs());
        let report = evaluate_fidelity(&f, &queries, &cfg, 2).unwrap();
        algebra &= rmse_not_below_mae(&report);
        worst_metric = worst_metric
            .max(report.metrics.mae)
            .max(report.metrics.rmse)
            .max(report.metrics.mape);
    }
    let elapsed = start.elapsed();
    verdict(
        "Linear-oracle recovery",
        worst_coef < 1e-6 && worst_metric < 1e-6 && algebra && elapsed < Duration::from_secs(10),
        format!("max coefficient error {worst_coef:.2e}, max metric {worst_metric:.2e}, {elapsed:?}"),
    );
}

/// Solves the full (k+1)x(k+1) weighted ridge normal equations, intercept unpenalized.
fn brute_force_wls(rows: &[Vec<f64>], y: &[f64], w: &[f64], lambda: f64) -> Vec<f64> {
    let n = rows.len();
    let k = rows[0].len();
    let x = DMatrix::from_fn(n, k + 1, |i, j| if j == 0 { 1.0 } else { rows[i][j - 1] });
    let wm = DMatrix::from_diagonal(&DVector::from_column_slice(w));
    let mut a = x.transpose() * &wm * &x;
    for j in 1..=k {
        a[(j, j)] += lambda;
    }
    let b = x.transpose() * &wm * DVector::from_column_slice(y);
    a.lu().solve(&b).expect("oracle system solvable").iter().copied().collect()
}

#[test]
fn wls_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let k = rng.gen_range(1..=3);
        let p = rng.gen_range(k + 2..=10);
        let rows: Vec<Vec<f64>> = (0..p).map(|_| (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let y: Vec<f64> = (0..p).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let w: Vec<f64> = (0..p).map(|_| rng.gen_range(0.05..2.0)).collect();
        let lambda = if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(0.0..0.5) };
        let x = FeatureMatrix { rows: rows.clone(), specs: (1..=k).map(FeatureSpec::lag).collect() };
        let g = fit_wls(&x, &y, &w, lambda, KernelConfig::uniform()).unwrap();
        let oracle = brute_force_wls(&rows, &y, &w, lambda);
        worst = worst.max((g.intercept - oracle[0]).abs());
        for (c, o) in g.coefficients.iter().zip(&oracle[1..]) {
            worst = worst.max((c - o).abs());
        }
    }
    verdict("WLS oracle equivalence", worst < 1e-8, format!("100 instances, max abs deviation {worst:.2e}"));
}

#[test]
fn distance_ablation_direction() {
    let start = Instant::now();
    let series = synthetic_series(&SyntheticConfig::default()).unwrap();
    let queries = holdout_queries(series.values(), 12, 20).unwrap();
    let f = NonlinearSeasonalAr::default();
    let mut lines = Vec::new();
    let mut ok = true;
    for family in FeatureFamily::ALL {
        let specs = family.default_specs(12);
        let (mut none, mut dist) = (Vec::new(), Vec::new());
        for seed in 0..5u64 {
            let pc = PerturbationConfig { seed, ..Default::default() };
            let cfg = ExplainConfig::new(specs.clone(), pc, KernelConfig::exponential());
            let r = distance_ablation("synthetic", &f, &queries, &[(family, specs.clone())], &cfg, KernelConfig::exponential(), 1)
                .unwrap();
            ok &= rmse_not_below_mae(&r.rows[0].without_distance) && rmse_not_below_mae(&r.rows[0].with_distance);
            none.push(r.rows[0].without_distance.metrics.rmse);
            dist.push(r.rows[0].with_distance.metrics.rmse);
        }
        let (mn, md) = (median(none), median(dist));
        ok &= md <= mn;
        lines.push(format!("{family} none={mn:.3e} distance={md:.3e}"));
    }
    let elapsed = start.elapsed();
    verdict(
        "Distance-ablation direction",
        ok && elapsed < Duration::from_secs(120),
        format!("{} ({elapsed:?})", lines.join("; ")),
    );
}

#[test]
fn grid_harness_shape() {
    let series = synthetic_series(&SyntheticConfig::default()).unwrap();
    let queries = holdout_queries(series.values(), 12, 4).unwrap();
    let f = NonlinearSeasonalAr::default();
    let pc = PerturbationConfig { sample_count: 200, ..Default::default() };
    let template = ExplainConfig::new(vec![], pc, KernelConfig::exponential());
    let grid = run_grid("synthetic", &f, &queries, &template, &GridSpec::default()).unwrap();

    let mut ok = grid.cells.len() == 27;
    for l in [3, 4, 5] {
        for s in [2, 3, 4] {
            for fam in FeatureFamily::ALL {
                ok &= grid.cell(l, s, fam).is_some_and(|c| {
                    let m = c.metrics;
                    [m.mae, m.rmse, m.mape].iter().all(|v| v.is_finite() && *v >= 0.0)
                });
            }
        }
    }
    // Independent argmin with the documented tie-break (smaller swap, then smaller length).
    for fam in FeatureFamily::ALL {
        for metric in Metric::ALL {
            let cells: Vec<_> = grid.cells.iter().filter(|c| c.family == fam).collect();
            let min = cells.iter().map(|c| c.metrics.get(metric)).fold(f64::INFINITY, f64::min);
            let want = cells
                .iter()
                .filter(|c| c.metrics.get(metric) == min)
                .map(|c| (c.block_swap, c.block_length))
                .min()
                .unwrap();
            let got = grid.best_for(fam, metric).unwrap();
            ok &= (got.block_swap, got.block_length) == want && got.value == min;
        }
    }
    ok &= select_best(&[(5, 3, 1.0), (4, 2, 1.0), (3, 2, 1.0)]) == Some((3, 2, 1.0));
    let mut csv = Vec::new();
    grid.write_csv(&mut csv).unwrap();
    let rows = String::from_utf8(csv).unwrap().lines().count() - 1;
    ok &= rows == 27;
    let lag_best = grid.best_for(FeatureFamily::Lag, Metric::Rmse).unwrap();
    verdict(
        "Grid harness shape",
        ok,
        format!("27 cells x 3 metrics, {rows} CSV rows; Lag RMSE best at l={}, s={}", lag_best.block_length, lag_best.block_swap),
    );
}

/// Pairs with a > b plus half of ties.
fn pair_count(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .flat_map(|x| b.iter().map(move |y| if x > y { 1.0 } else if x == y { 0.5 } else { 0.0 }))
        .sum()
}

#[test]
fn mann_whitney_checks() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut cases = 0;
    let mut ok = true;
    let mut sums_ok = true;
    while cases < 600 {
        let n1 = rng.gen_range(1..=8);
        let n2 = rng.gen_range(1..=8);
        let a: Vec<f64> = (0..n1).map(|_| rng.gen_range(0..6) as f64).collect();
        let b: Vec<f64> = (0..n2).map(|_| rng.gen_range(0..6) as f64).collect();
        let Ok(r) = mann_whitney_u(&a, &b) else { continue };
        ok &= r.u_a == pair_count(&a, &b);
        sums_ok &= r.u_a + r.u_b == (n1 * n2) as f64;
        cases += 1;
    }
    let (_, p_cs) = mann_whitney_p(794.0, 40, 40, 0.0).unwrap();
    let (_, p_noncs) = mann_whitney_p(559.0, 40, 40, 0.0).unwrap();
    ok &= (p_cs - 0.958).abs() <= 0.02 && p_noncs < 0.05;
    verdict(
        "Mann-Whitney",
        ok && sums_ok,
        format!("{cases} exhaustive pair-count cases; U=794 -> p={p_cs:.4}; U=559 -> p={p_noncs:.4}"),
    );
}

#[test]
fn metric_algebra() {
    let series = synthetic_series(&SyntheticConfig::default()).unwrap();
    let queries = holdout_queries(series.values(), 12, 6).unwrap();
    let f = NonlinearSeasonalAr::default();
    let mut ok = true;
    let mut reports = 0;
    for (l, s) in [(3, 2), (5, 2), (4, 4)] {
        for kernel in [KernelConfig::uniform(), KernelConfig::exponential()] {
            let pc = PerturbationConfig { block_length: l, block_swap: s, sample_count: 200, ..Default::default() };
            let cfg = ExplainConfig::new(FeatureFamily::Lag.default_specs(12), pc, kernel);
            let r = evaluate_fidelity(&f, &queries, &cfg, 3).unwrap();
            ok &= rmse_not_below_mae(&r);
            reports += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut tests = 0;
    for _ in 0..200 {
        let a: Vec<f64> = (0..rng.gen_range(1..30)).map(|_| rng.gen_range(0..9) as f64).collect();
        let b: Vec<f64> = (0..rng.gen_range(1..30)).map(|_| rng.gen_range(0..9) as f64).collect();
        if let Ok(r) = mann_whitney_u(&a, &b) {
            ok &= r.u_a + r.u_b == (a.len() * b.len()) as f64;
            tests += 1;
        }
    }
    verdict("Metric algebra", ok, format!("RMSE >= MAE on {reports} reports; U_a + U_b = n1*n2 on {tests} tests"));
}

#[test]
fn primary_suite_is_standalone() {
    let manifest = include_str!("../Cargo.toml");
    let ok = !manifest.contains("webui") && !manifest.contains("tsfl-service");
    verdict("Primary suite without secondary component", ok, "tsfl-core builds and tests with no UI dependency");
}

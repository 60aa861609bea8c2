//! Fidelity of surrogates against their black box, block-bootstrap
//! hyperparameter grids, the kernel ablation, and the Mann-Whitney U test.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::features::{FeatureFamily, FeatureSpec};
use crate::forecasters::Forecaster;
use crate::series::csv_io;
use crate::surrogate::{explain_traced, ExplainConfig, KernelConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    Mae,
    Rmse,
    Mape,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Mae, Metric::Rmse, Metric::Mape];
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Mae => "MAE",
            Metric::Rmse => "RMSE",
            Metric::Mape => "MAPE",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mae" => Ok(Metric::Mae),
            "rmse" => Ok(Metric::Rmse),
            "mape" => Ok(Metric::Mape),
            _ => Err(Error::Config(format!("unknown metric `{s}`"))),
        }
    }
}

/// Disagreement between black-box values `f` and surrogate values `g` over
/// `(f, g)` pairs. MAPE is relative to `f` and reported in percent.
pub fn fidelity(pairs: &[(f64, f64)], metric: Metric) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::UndefinedMetric("no prediction pairs".into()));
    }
    let n = pairs.len() as f64;
    Ok(match metric {
        Metric::Mae => pairs.iter().map(|(f, g)| (f - g).abs()).sum::<f64>() / n,
        Metric::Rmse => (pairs.iter().map(|(f, g)| (f - g).powi(2)).sum::<f64>() / n).sqrt(),
        Metric::Mape => {
            if pairs.iter().any(|(f, _)| *f == 0.0) {
                return Err(Error::UndefinedMetric(
                    "MAPE needs non-zero black-box values".into(),
                ));
            }
            100.0 * pairs.iter().map(|(f, g)| ((f - g) / f).abs()).sum::<f64>() / n
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mae: f64,
    pub rmse: f64,
    /// Percent.
    pub mape: f64,
}

impl Metrics {
    pub fn of(pairs: &[(f64, f64)]) -> Result<Self> {
        Ok(Self {
            mae: fidelity(pairs, Metric::Mae)?,
            rmse: fidelity(pairs, Metric::Rmse)?,
            mape: fidelity(pairs, Metric::Mape)?,
        })
    }

    pub fn get(&self, m: Metric) -> f64 {
        match m {
            Metric::Mae => self.mae,
            Metric::Rmse => self.rmse,
            Metric::Mape => self.mape,
        }
    }

    fn mean(all: &[Metrics]) -> Metrics {
        let n = all.len() as f64;
        Metrics {
            mae: all.iter().map(|m| m.mae).sum::<f64>() / n,
            rmse: all.iter().map(|m| m.rmse).sum::<f64>() / n,
            mape: all.iter().map(|m| m.mape).sum::<f64>() / n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityRecord {
    pub query_id: usize,
    pub iteration: usize,
    pub seed: u64,
    pub black_box: f64,
    pub surrogate: f64,
    pub sample_fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    /// Pooled over every record.
    pub metrics: Metrics,
    /// One entry per iteration, pooled over queries.
    pub iteration_metrics: Vec<Metrics>,
    pub records: Vec<FidelityRecord>,
    pub config: ExplainConfig,
    pub iterations: usize,
    pub master_seed: u64,
}

impl FidelityReport {
    /// Mean of the per-iteration metrics.
    pub fn mean_over_iterations(&self) -> Metrics {
        Metrics::mean(&self.iteration_metrics)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for one (query, iteration) surrogate, derived from the master seed only.
pub fn derive_seed(master: u64, query_id: usize, iteration: usize) -> u64 {
    splitmix64(splitmix64(master ^ splitmix64(query_id as u64)) ^ iteration as u64)
}

/// Fits one surrogate per query and iteration and compares `g(O_i)` with
/// `f(O_i)`. The master seed is `cfg.perturbation.seed`.
pub fn evaluate_fidelity(
    f: &dyn Forecaster,
    queries: &[Vec<f64>],
    cfg: &ExplainConfig,
    iterations: usize,
) -> Result<FidelityReport> {
    if iterations == 0 {
        return Err(Error::Config("iterations must be at least 1".into()));
    }
    if queries.is_empty() {
        return Err(Error::Config("no query windows".into()));
    }
    let master = cfg.perturbation.seed;
    let jobs: Vec<(usize, usize)> = (0..iterations)
        .flat_map(|it| (0..queries.len()).map(move |q| (q, it)))
        .collect();
    let records = jobs
        .par_iter()
        .map(|&(qid, it)| {
            let mut local = cfg.clone();
            local.perturbation.seed = derive_seed(master, qid, it);
            let (_, e, trace) = explain_traced(&queries[qid], f, &local).map_err(|e| Error::Query {
                id: qid,
                source: Box::new(e),
            })?;
            Ok(FidelityRecord {
                query_id: qid,
                iteration: it,
                seed: local.perturbation.seed,
                black_box: e.black_box_prediction,
                surrogate: e.surrogate_prediction,
                sample_fingerprint: format!("{:016x}", trace.sample_fingerprint),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let pairs: Vec<(f64, f64)> = records.iter().map(|r| (r.black_box, r.surrogate)).collect();
    let metrics = Metrics::of(&pairs)?;
    let iteration_metrics = pairs
        .chunks(queries.len())
        .map(Metrics::of)
        .collect::<Result<Vec<_>>>()?;
    Ok(FidelityReport {
        metrics,
        iteration_metrics,
        records,
        config: cfg.clone(),
        iterations,
        master_seed: master,
    })
}

/// The final `count` windows of length `q` (each ending one step later than the previous).
pub fn holdout_queries(values: &[f64], q: usize, count: usize) -> Result<Vec<Vec<f64>>> {
    let needed = q + count - 1;
    if q == 0 || count == 0 {
        return Err(Error::Config("window length and query count must be positive".into()));
    }
    if values.len() < needed {
        return Err(Error::InsufficientHistory {
            needed,
            available: values.len(),
        });
    }
    let first = values.len() - needed;
    Ok((0..count).map(|i| values[first + i..first + i + q].to_vec()).collect())
}

// ---------------------------------------------------------------------------
// Hyperparameter grid

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub block_lengths: Vec<usize>,
    pub block_swaps: Vec<usize>,
    pub families: Vec<FeatureFamily>,
    pub iterations: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            block_lengths: vec![3, 4, 5],
            block_swaps: vec![2, 3, 4],
            families: FeatureFamily::ALL.to_vec(),
            iterations: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub block_length: usize,
    pub block_swap: usize,
    pub family: FeatureFamily,
    /// Mean over iterations.
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestCell {
    pub family: FeatureFamily,
    pub metric: Metric,
    pub block_length: usize,
    pub block_swap: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub dataset: String,
    pub cells: Vec<GridCell>,
    pub best: Vec<BestCell>,
}

impl GridResult {
    pub fn cell(&self, l: usize, s: usize, family: FeatureFamily) -> Option<&GridCell> {
        self.cells
            .iter()
            .find(|c| c.block_length == l && c.block_swap == s && c.family == family)
    }

    pub fn best_for(&self, family: FeatureFamily, metric: Metric) -> Option<&BestCell> {
        self.best.iter().find(|b| b.family == family && b.metric == metric)
    }

    /// Columns `dataset, block_length, block_swap, family, MAE, RMSE, MAPE, best`;
    /// `best` lists the metrics (`;`-separated) for which the row is its family's minimum.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["dataset", "block_length", "block_swap", "family", "MAE", "RMSE", "MAPE", "best"])
            .map_err(csv_io)?;
        for c in &self.cells {
            let best: Vec<String> = self
                .best
                .iter()
                .filter(|b| b.family == c.family && b.block_length == c.block_length && b.block_swap == c.block_swap)
                .map(|b| b.metric.to_string())
                .collect();
            out.write_record([
                self.dataset.clone(),
                c.block_length.to_string(),
                c.block_swap.to_string(),
                c.family.to_string(),
                c.metrics.mae.to_string(),
                c.metrics.rmse.to_string(),
                c.metrics.mape.to_string(),
                best.join(";"),
            ])
            .map_err(csv_io)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Argmin over `(l, s, value)`; ties go to the smaller swap, then the smaller block length.
pub fn select_best(candidates: &[(usize, usize, f64)]) -> Option<(usize, usize, f64)> {
    candidates.iter().copied().min_by(|a, b| {
        a.2.total_cmp(&b.2)
            .then(a.1.cmp(&b.1))
            .then(a.0.cmp(&b.0))
    })
}

/// Evaluates every `(block_length, block_swap, family)` cell. Feature sets
/// come from [`FeatureFamily::default_specs`]; all other settings from `template`.
pub fn run_grid(
    dataset: &str,
    f: &dyn Forecaster,
    queries: &[Vec<f64>],
    template: &ExplainConfig,
    grid: &GridSpec,
) -> Result<GridResult> {
    let q = queries
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::Config("no query windows".into()))?;
    let mut keyed: BTreeMap<(FeatureFamily, usize, usize), Metrics> = BTreeMap::new();
    for &family in &grid.families {
        let specs = family.default_specs(q);
        for &l in &grid.block_lengths {
            for &s in &grid.block_swaps {
                let mut cfg = template.clone();
                cfg.features = specs.clone();
                cfg.perturbation.block_length = l;
                cfg.perturbation.block_swap = s;
                let report = evaluate_fidelity(f, queries, &cfg, grid.iterations)?;
                keyed.insert((family, l, s), report.mean_over_iterations());
            }
        }
    }

    let mut cells = Vec::with_capacity(keyed.len());
    for &l in &grid.block_lengths {
        for &s in &grid.block_swaps {
            for &family in &grid.families {
                cells.push(GridCell {
                    block_length: l,
                    block_swap: s,
                    family,
                    metrics: keyed[&(family, l, s)],
                });
            }
        }
    }
    let mut best = Vec::new();
    for &family in &grid.families {
        for metric in Metric::ALL {
            let cands: Vec<(usize, usize, f64)> = cells
                .iter()
                .filter(|c| c.family == family)
                .map(|c| (c.block_length, c.block_swap, c.metrics.get(metric)))
                .collect();
            if let Some((l, s, value)) = select_best(&cands) {
                best.push(BestCell {
                    family,
                    metric,
                    block_length: l,
                    block_swap: s,
                    value,
                });
            }
        }
    }
    Ok(GridResult {
        dataset: dataset.to_string(),
        cells,
        best,
    })
}

// ---------------------------------------------------------------------------
// Kernel ablation

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub family: FeatureFamily,
    pub without_distance: FidelityReport,
    pub with_distance: FidelityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationResult {
    pub dataset: String,
    pub rows: Vec<AblationRow>,
}

impl AblationResult {
    /// Columns `dataset, family, none_MAE, none_RMSE, none_MAPE, distance_MAE, distance_RMSE, distance_MAPE`.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "dataset",
            "family",
            "none_MAE",
            "none_RMSE",
            "none_MAPE",
            "distance_MAE",
            "distance_RMSE",
            "distance_MAPE",
        ])
        .map_err(csv_io)?;
        for r in &self.rows {
            let a = r.without_distance.mean_over_iterations();
            let b = r.with_distance.mean_over_iterations();
            out.write_record([
                self.dataset.clone(),
                r.family.to_string(),
                a.mae.to_string(),
                a.rmse.to_string(),
                a.mape.to_string(),
                b.mae.to_string(),
                b.rmse.to_string(),
                b.mape.to_string(),
            ])
            .map_err(csv_io)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Runs each family under the uniform kernel and under `kernel`, with
/// identical seeds so both arms see the same samples.
pub fn distance_ablation(
    dataset: &str,
    f: &dyn Forecaster,
    queries: &[Vec<f64>],
    families: &[(FeatureFamily, Vec<FeatureSpec>)],
    template: &ExplainConfig,
    kernel: KernelConfig,
    iterations: usize,
) -> Result<AblationResult> {
    let mut rows = Vec::with_capacity(families.len());
    for (family, specs) in families {
        let mut none = template.clone();
        none.features = specs.clone();
        none.kernel = KernelConfig::uniform();
        let mut dist = none.clone();
        dist.kernel = kernel;
        let without_distance = evaluate_fidelity(f, queries, &none, iterations)?;
        let with_distance = evaluate_fidelity(f, queries, &dist, iterations)?;
        let paired = without_distance
            .records
            .iter()
            .zip(&with_distance.records)
            .all(|(a, b)| a.sample_fingerprint == b.sample_fingerprint);
        if !paired {
            return Err(Error::Fit("ablation arms diverged in their sample sets".into()));
        }
        rows.push(AblationRow {
            family: *family,
            without_distance,
            with_distance,
        });
    }
    Ok(AblationResult {
        dataset: dataset.to_string(),
        rows,
    })
}

// ---------------------------------------------------------------------------
// Mann-Whitney U

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// Pairs where `a > b`, plus half the ties.
    pub u_a: f64,
    pub u_b: f64,
    pub n1: usize,
    pub n2: usize,
    pub z: f64,
    /// Two-sided, normal approximation with tie and continuity corrections.
    pub p_value: f64,
}

/// Midranks (1-based) of `values`, and the tie term `sum(t^3 - t)` over tie groups.
fn midranks(values: &[f64]) -> (Vec<f64>, f64) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    (ranks, tie_term)
}

/// Two-sided p-value for `u` under the normal approximation.
/// `tie_term` is `sum(t^3 - t)` over tie groups of the pooled sample (0 without ties).
pub fn mann_whitney_p(u: f64, n1: usize, n2: usize, tie_term: f64) -> Result<(f64, f64)> {
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let n = n1f + n2f;
    let mean = n1f * n2f / 2.0;
    let var = n1f * n2f / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if !(var > 0.0) {
        return Err(Error::DegenerateVariance);
    }
    let dev = ((u - mean).abs() - 0.5).max(0.0);
    let z = dev / var.sqrt();
    let normal = Normal::standard();
    let p = (2.0 * normal.sf(z)).min(1.0);
    Ok((z, p))
}

pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Config("Mann-Whitney needs two non-empty samples".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Config("Mann-Whitney samples must be finite".into()));
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, tie_term) = midranks(&pooled);
    let (n1, n2) = (a.len(), b.len());
    let rank_sum_a: f64 = ranks[..n1].iter().sum();
    let u_a = rank_sum_a - (n1 * (n1 + 1)) as f64 / 2.0;
    let u_b = (n1 * n2) as f64 - u_a;
    let (z, p_value) = mann_whitney_p(u_a, n1, n2, tie_term)?;
    Ok(MannWhitney {
        u_a,
        u_b,
        n1,
        n2,
        z,
        p_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecasters::LinearFeatureForecaster;
    use crate::perturbation::PerturbationConfig;

    #[test]
    fn metric_values() {
        let same = [(1.0, 1.0), (2.0, 2.0)];
        for m in Metric::ALL {
            assert_eq!(fidelity(&same, m).unwrap(), 0.0);
        }
        let diffs = [(0.0, 3.0), (0.0, 4.0)];
        assert_eq!(fidelity(&diffs, Metric::Mae).unwrap(), 3.5);
        assert!((fidelity(&diffs, Metric::Rmse).unwrap() - 12.5f64.sqrt()).abs() < 1e-15);
        assert!(matches!(fidelity(&diffs, Metric::Mape), Err(Error::UndefinedMetric(_))));
        assert!((fidelity(&[(10.0, 11.0)], Metric::Mape).unwrap() - 10.0).abs() < 1e-12);
        assert!(fidelity(&[], Metric::Mae).is_err());
    }

    #[test]
    fn best_cell_tie_breaking() {
        let c = [(5, 3, 0.1), (4, 2, 0.1), (3, 2, 0.1), (3, 4, 0.2)];
        assert_eq!(select_best(&c), Some((3, 2, 0.1)));
        let c = [(5, 2, 0.05), (3, 2, 0.1)];
        assert_eq!(select_best(&c), Some((5, 2, 0.05)));
    }

    #[test]
    fn seeds_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for q in 0..20 {
            for it in 0..5 {
                assert!(seen.insert(derive_seed(42, q, it)));
            }
        }
    }

    #[test]
    fn holdout_windows() {
        let v: Vec<f64> = (0..20).map(f64::from).collect();
        let qs = holdout_queries(&v, 12, 3).unwrap();
        assert_eq!(qs.len(), 3);
        assert_eq!(qs[2].last(), Some(&19.0));
        assert_eq!(qs[0][0], 6.0);
        assert!(holdout_queries(&v, 12, 10).is_err());
    }

    fn queries(n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| {
                (0..12)
                    .map(|t| 0.5 + 0.2 * ((t + i) as f64 * 0.7).sin() + 0.01 * i as f64)
                    .collect()
            })
            .collect()
    }

    #[test]
    fn report_cardinality_and_determinism() {
        let f = LinearFeatureForecaster::last_value();
        let pc = PerturbationConfig { sample_count: 100, ..Default::default() };
        let cfg = ExplainConfig::new(vec![FeatureSpec::lag(1), FeatureSpec::lag(2)], pc, KernelConfig::exponential());
        let a = evaluate_fidelity(&f, &queries(10), &cfg, 5).unwrap();
        assert_eq!(a.records.len(), 50);
        assert_eq!(a.iteration_metrics.len(), 5);
        let b = evaluate_fidelity(&f, &queries(10), &cfg, 5).unwrap();
        assert_eq!(a, b);
        assert!(a.metrics.rmse >= a.metrics.mae);
    }

    #[test]
    fn query_errors_carry_id() {
        let f = LinearFeatureForecaster::last_value();
        let mut qs = queries(3);
        qs[1].truncate(4); // too short for block length 5 with swaps
        let cfg = ExplainConfig::new(vec![FeatureSpec::lag(1)], PerturbationConfig::default(), KernelConfig::exponential());
        match evaluate_fidelity(&f, &qs, &cfg, 1) {
            Err(Error::Query { id, .. }) => assert_eq!(id, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn small_grid_shape() {
        let f = LinearFeatureForecaster::last_value();
        let pc = PerturbationConfig { sample_count: 60, ..Default::default() };
        let cfg = ExplainConfig::new(vec![], pc, KernelConfig::exponential());
        let grid = GridSpec { block_lengths: vec![5], block_swaps: vec![2], iterations: 2, ..Default::default() };
        let r = run_grid("toy", &f, &queries(3), &cfg, &grid).unwrap();
        assert_eq!(r.cells.len(), 3);
        assert_eq!(r.best.len(), 9);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("dataset,block_length,block_swap,family,MAE,RMSE,MAPE,best"));
    }

    #[test]
    fn ablation_none_arm_matches_plain_evaluation() {
        let f = crate::synthetic::NonlinearSeasonalAr::default();
        let pc = PerturbationConfig { sample_count: 80, ..Default::default() };
        let specs = FeatureFamily::Lag.default_specs(12);
        let cfg = ExplainConfig::new(specs.clone(), pc, KernelConfig::exponential());
        let r = distance_ablation("s", &f, &queries(4), &[(FeatureFamily::Lag, specs.clone())], &cfg, KernelConfig::exponential(), 2).unwrap();
        let mut plain = cfg.clone();
        plain.kernel = KernelConfig::uniform();
        let direct = evaluate_fidelity(&f, &queries(4), &plain, 2).unwrap();
        assert_eq!(r.rows[0].without_distance, direct);
    }

    /// Count of pairs with a > b plus half of the ties.
    fn pair_count(a: &[f64], b: &[f64]) -> f64 {
        let mut u = 0.0;
        for x in a {
            for y in b {
                if x > y {
                    u += 1.0;
                } else if x == y {
                    u += 0.5;
                }
            }
        }
        u
    }

    #[test]
    fn complete_separation() {
        let r = mann_whitney_u(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(r.u_a, 0.0);
        assert_eq!(r.u_b, 4.0);
    }

    #[test]
    fn identical_values_are_degenerate() {
        assert!(matches!(mann_whitney_u(&[2.0, 2.0], &[2.0]), Err(Error::DegenerateVariance)));
        assert!(mann_whitney_u(&[], &[1.0]).is_err());
    }

    #[test]
    fn ties_use_midranks() {
        let a = [1.0, 2.0, 2.0, 3.0];
        let b = [2.0, 3.0, 3.0];
        let r = mann_whitney_u(&a, &b).unwrap();
        assert_eq!(r.u_a, pair_count(&a, &b));
        let (ranks, tie) = midranks(&[1.0, 2.0, 2.0, 3.0, 2.0, 3.0, 3.0]);
        assert_eq!(ranks, vec![1.0, 3.0, 3.0, 6.0, 3.0, 6.0, 6.0]);
        assert_eq!(tie, 48.0);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(500))]
        #[test]
        fn u_matches_pair_count(
            a in proptest::collection::vec(0i32..6, 1..=8),
            b in proptest::collection::vec(0i32..6, 1..=8),
        ) {
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = b.into_iter().map(f64::from).collect();
            match mann_whitney_u(&a, &b) {
                Ok(r) => {
                    proptest::prop_assert_eq!(r.u_a, pair_count(&a, &b));
                    proptest::prop_assert_eq!(r.u_a + r.u_b, (a.len() * b.len()) as f64);
                    proptest::prop_assert!((0.0..=1.0).contains(&r.p_value));
                }
                Err(Error::DegenerateVariance) => {
                    proptest::prop_assert!(a.iter().chain(&b).all(|v| *v == a[0]));
                }
                Err(e) => proptest::prop_assert!(false, "{e}"),
            }
        }
    }
}

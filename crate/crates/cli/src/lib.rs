//! `tsfl` command line. Exit codes: 0 success, 1 validation error (bad flags,
//! bad config, undefined features), 2 runtime error.

mod config;
mod svg;

use std::ffi::OsString;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use tsfl_core::evaluation::{
    distance_ablation, evaluate_fidelity, holdout_queries, mann_whitney_u, run_grid, GridSpec, MannWhitney,
};
use tsfl_core::features::{parse_feature_specs, validate_specs};
use tsfl_core::forecasters::HoltWintersModel;
use tsfl_core::perturbation::generate_samples;
use tsfl_core::series::{load_csv, resample_monthly, write_csv};
use tsfl_core::surrogate::{explain, ExplainConfig};
use tsfl_core::synthetic::{synthetic_series, SyntheticConfig};
use tsfl_core::{
    FeatureFamily, FeatureSpec, Forecaster, KernelConfig, KernelKind, ModelSpec, NormalizationState,
    PerturbationConfig, Series,
};

use config::{overlay, FileConfig};

pub use svg::coefficient_chart;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<tsfl_core::Error> for CliError {
    fn from(e: tsfl_core::Error) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn invalid(e: impl std::fmt::Display) -> CliError {
    CliError::Validation(e.to_string())
}

type CliResult<T> = Result<T, CliError>;

// ---------------------------------------------------------------------------
// Arguments

#[derive(Debug, Parser)]
#[command(name = "tsfl", version, about = "Local surrogate explanations for univariate forecasters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Explain the forecast for one window; writes Explanation JSON.
    Explain(ExplainArgs),
    /// Write the MBB samples around one window as CSV.
    Perturb(PerturbArgs),
    /// Surrogate fidelity (MAE, RMSE, MAPE) over held-out windows; writes JSON.
    Fidelity(EvalArgs),
    /// Block length x block swap x feature family grid; writes CSV.
    Grid(EvalArgs),
    /// Uniform vs distance-weighted kernel per feature family; writes CSV.
    Ablation(EvalArgs),
    /// Start the HTTP service.
    Serve(ServeArgs),
    /// Mann-Whitney U tests on an exported session CSV.
    Analyze(AnalyzeArgs),
    /// Generate the synthetic nonlinear seasonal benchmark series as CSV.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Args)]
struct DataArgs {
    /// CSV file with a date column and a value column.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    time_col: Option<String>,
    #[arg(long)]
    value_col: Option<String>,
    /// Leading share of the series used to fit the model and the min-max scaling.
    #[arg(long)]
    train_fraction: Option<f64>,
    /// Model raw values instead of min-max scaled ones.
    #[arg(long)]
    no_normalize: bool,
    /// Query window length q.
    #[arg(long)]
    window: Option<usize>,
}

#[derive(Debug, Clone, Args)]
struct ModelArgs {
    /// ar:p | hw:alpha,beta,gamma,season | ext:command | last | synth
    #[arg(long)]
    model: Option<String>,
    /// Seconds to wait for an external adapter response.
    #[arg(long)]
    adapter_timeout: Option<f64>,
}

#[derive(Debug, Clone, Args)]
struct MbbArgs {
    #[arg(long)]
    block_length: Option<usize>,
    #[arg(long)]
    block_swap: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    /// Odd moving-average window used by the decomposition.
    #[arg(long)]
    ma_window: Option<usize>,
    #[arg(long, env = "TSFL_SEED")]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
struct KernelArgs {
    /// exponential | none
    #[arg(long)]
    kernel: Option<String>,
    /// Kernel width; defaults to the median sample distance.
    #[arg(long)]
    bandwidth: Option<f64>,
    #[arg(long)]
    ridge: Option<f64>,
}

#[derive(Debug, Clone, Args)]
struct ExplainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Comma-separated lag:k, rw:k:w, ew:w. Defaults to every lag in the window.
    #[arg(long)]
    features: Option<String>,
    #[command(flatten)]
    mbb: MbbArgs,
    #[command(flatten)]
    kernel: KernelArgs,
    /// 1-based index of the last observation in the window (default: series end).
    #[arg(long)]
    end: Option<usize>,
    /// Write the coefficient bar chart here.
    #[arg(long)]
    svg: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
struct PerturbArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    mbb: MbbArgs,
    #[arg(long)]
    end: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
struct EvalArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Feature specs (fidelity only; grid and ablation use each family's defaults).
    #[arg(long)]
    features: Option<String>,
    #[command(flatten)]
    mbb: MbbArgs,
    #[command(flatten)]
    kernel: KernelArgs,
    /// Number of held-out windows at the end of the series.
    #[arg(long)]
    queries: Option<usize>,
    /// Repetitions with fresh seeds per window.
    #[arg(long)]
    iterations: Option<usize>,
    /// Dataset name written to the CSV (default: input file stem).
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
struct ServeArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    features: Option<String>,
    #[command(flatten)]
    mbb: MbbArgs,
    #[command(flatten)]
    kernel: KernelArgs,
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Append-only session log.
    #[arg(long, default_value = "sessions.jsonl")]
    store: PathBuf,
    /// Directory with the web UI, served for non-API paths.
    #[arg(long)]
    static_dir: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
struct AnalyzeArgs {
    /// CSV produced by GET /api/export.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 120)]
    length: usize,
    #[arg(long, env = "TSFL_SEED")]
    seed: Option<u64>,
    #[arg(long, default_value_t = 0.03)]
    noise_sd: f64,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

// ---------------------------------------------------------------------------
// Resolved settings

struct Settings {
    input: Option<PathBuf>,
    time_col: String,
    value_col: String,
    train_fraction: f64,
    normalize: bool,
    window: usize,
    model: ModelSpec,
    adapter_timeout: Duration,
    features: Option<Vec<FeatureSpec>>,
    perturbation: PerturbationConfig,
    kernel: KernelConfig,
    ridge: f64,
    queries: usize,
    iterations: usize,
    dataset: Option<String>,
    output: Option<PathBuf>,
}

#[derive(Default)]
struct Raw {
    data: Option<DataArgs>,
    model: Option<ModelArgs>,
    features: Option<String>,
    mbb: Option<MbbArgs>,
    kernel: Option<KernelArgs>,
    queries: Option<usize>,
    iterations: Option<usize>,
    dataset: Option<String>,
    output: Option<PathBuf>,
    config: Option<PathBuf>,
}

impl Settings {
    /// Applies the config file, fills defaults and validates everything that
    /// does not need the data.
    fn resolve(raw: Raw) -> CliResult<Self> {
        let file = match &raw.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let mut data = raw.data.unwrap_or(DataArgs {
            input: None,
            time_col: None,
            value_col: None,
            train_fraction: None,
            no_normalize: false,
            window: None,
        });
        let mut model = raw.model.unwrap_or(ModelArgs { model: None, adapter_timeout: None });
        let mut mbb = raw.mbb.unwrap_or(MbbArgs {
            block_length: None,
            block_swap: None,
            samples: None,
            ma_window: None,
            seed: None,
        });
        let mut kernel = raw.kernel.unwrap_or(KernelArgs { kernel: None, bandwidth: None, ridge: None });
        let (mut features, mut queries, mut iterations, mut dataset, mut output) =
            (raw.features, raw.queries, raw.iterations, raw.dataset, raw.output);

        overlay(&mut data.input, &file.input);
        overlay(&mut data.time_col, &file.time_col);
        overlay(&mut data.value_col, &file.value_col);
        overlay(&mut data.train_fraction, &file.train_fraction);
        overlay(&mut data.window, &file.window);
        if let Some(v) = file.no_normalize {
            data.no_normalize = v;
        }
        overlay(&mut model.model, &file.model);
        overlay(&mut model.adapter_timeout, &file.adapter_timeout);
        overlay(&mut features, &file.features);
        overlay(&mut mbb.block_length, &file.block_length);
        overlay(&mut mbb.block_swap, &file.block_swap);
        overlay(&mut mbb.samples, &file.samples);
        overlay(&mut mbb.ma_window, &file.ma_window);
        overlay(&mut mbb.seed, &file.seed);
        overlay(&mut kernel.kernel, &file.kernel);
        overlay(&mut kernel.bandwidth, &file.bandwidth);
        overlay(&mut kernel.ridge, &file.ridge);
        overlay(&mut queries, &file.queries);
        overlay(&mut iterations, &file.iterations);
        overlay(&mut dataset, &file.dataset);
        overlay(&mut output, &file.output);

        let window = data.window.unwrap_or(12);
        if window == 0 {
            return Err(invalid("--window must be positive"));
        }
        let train_fraction = data.train_fraction.unwrap_or(0.8);
        if !(train_fraction > 0.0 && train_fraction <= 1.0) {
            return Err(invalid(format!("--train-fraction must be in (0, 1], got {train_fraction}")));
        }
        let model_spec: ModelSpec = model.model.as_deref().unwrap_or("ar:1").parse()?;
        let adapter_timeout = model.adapter_timeout.unwrap_or(10.0);
        if !(adapter_timeout > 0.0 && adapter_timeout.is_finite()) {
            return Err(invalid("--adapter-timeout must be positive"));
        }
        let features = match features.as_deref() {
            Some(s) => {
                let specs = parse_feature_specs(s)?;
                validate_specs(&specs, window)?;
                Some(specs)
            }
            None => None,
        };
        let defaults = PerturbationConfig::default();
        let perturbation = PerturbationConfig {
            block_length: mbb.block_length.unwrap_or(defaults.block_length),
            block_swap: mbb.block_swap.unwrap_or(defaults.block_swap),
            sample_count: mbb.samples.unwrap_or(defaults.sample_count),
            ma_window: mbb.ma_window.unwrap_or(defaults.ma_window),
            seed: mbb.seed.unwrap_or(defaults.seed),
        };
        perturbation.validate(window)?;
        let kind = match kernel.kernel.as_deref().unwrap_or("exponential") {
            "exponential" | "exp" => KernelKind::Exponential,
            "none" | "uniform" => KernelKind::None,
            other => return Err(invalid(format!("unknown kernel `{other}`; expected exponential or none"))),
        };
        let kcfg = KernelConfig {
            kind,
            bandwidth: kernel.bandwidth,
        };
        kcfg.validate()?;
        let ridge = kernel.ridge.unwrap_or(tsfl_core::surrogate::DEFAULT_RIDGE);
        if !(ridge >= 0.0 && ridge.is_finite()) {
            return Err(invalid("--ridge must be >= 0"));
        }
        let queries = queries.unwrap_or(20);
        let iterations = iterations.unwrap_or(5);
        if queries == 0 || iterations == 0 {
            return Err(invalid("--queries and --iterations must be positive"));
        }
        Ok(Self {
            input: data.input,
            time_col: data.time_col.unwrap_or_else(|| "date".into()),
            value_col: data.value_col.unwrap_or_else(|| "value".into()),
            train_fraction,
            normalize: !data.no_normalize,
            window,
            model: model_spec,
            adapter_timeout: Duration::from_secs_f64(adapter_timeout),
            features,
            perturbation,
            kernel: kcfg,
            ridge,
            queries,
            iterations,
            dataset,
            output,
        })
    }

    fn explain_config(&self, features: Vec<FeatureSpec>) -> ExplainConfig {
        ExplainConfig::new(features, self.perturbation, self.kernel).with_ridge(self.ridge)
    }

    fn features_or_lags(&self) -> Vec<FeatureSpec> {
        self.features
            .clone()
            .unwrap_or_else(|| FeatureFamily::Lag.default_specs(self.window))
    }

    fn dataset_name(&self) -> String {
        self.dataset.clone().unwrap_or_else(|| {
            self.input
                .as_ref()
                .and_then(|p| p.file_stem())
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".into())
        })
    }
}

/// Loaded series in modelling units plus the training split.
struct Prepared {
    series: Series,
    train_len: usize,
    normalization: Option<NormalizationState>,
}

impl Prepared {
    fn load(s: &Settings) -> CliResult<Self> {
        let path = s.input.as_ref().ok_or_else(|| invalid("--input is required"))?;
        if !path.is_file() {
            return Err(runtime(format!("{}: no such file", path.display())));
        }
        let raw = load_csv(path, &s.time_col, &s.value_col)?;
        let raw = resample_monthly(&raw)?;
        let train_len = ((raw.len() as f64) * s.train_fraction).floor() as usize;
        if train_len < 2 {
            return Err(invalid(format!(
                "training portion has {train_len} observations; need at least 2"
            )));
        }
        let (series, normalization) = if s.normalize {
            let state = NormalizationState::fit(&raw.values()[..train_len])?;
            (state.normalize(&raw), Some(state))
        } else {
            (raw, None)
        };
        Ok(Self {
            series,
            train_len,
            normalization,
        })
    }

    fn train(&self) -> &[f64] {
        &self.series.values()[..self.train_len]
    }

    /// Black box fitted on the training portion. `window_start` aligns the
    /// Holt-Winters seasonal index with the first observation of the window.
    fn forecaster(&self, s: &Settings, window_start: usize) -> CliResult<Box<dyn Forecaster>> {
        if let ModelSpec::HoltWinters(p) = &s.model {
            let m = HoltWintersModel::fit(self.train(), *p)?;
            return Ok(Box::new(m.with_phase(window_start % p.season_length.max(1))));
        }
        Ok(s.model.build(self.train(), s.adapter_timeout)?)
    }

    /// `(start, window)` for a window ending at 1-based index `end`.
    fn window(&self, q: usize, end: Option<usize>) -> CliResult<(usize, Vec<f64>)> {
        let n = self.series.len();
        let end = end.unwrap_or(n);
        if end > n || end < q {
            return Err(invalid(format!(
                "window of {q} ending at {end} does not fit a series of {n} observations"
            )));
        }
        Ok((end - q, self.series.values()[end - q..end].to_vec()))
    }
}

// ---------------------------------------------------------------------------
// Output

fn emit(output: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match output {
        Some(p) => std::fs::write(p, bytes).map_err(|e| runtime(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes).and_then(|_| out.flush()).map_err(runtime)
        }
    }
}

fn json_bytes<T: Serialize>(v: &T) -> CliResult<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(v).map_err(runtime)?;
    s.push('\n');
    Ok(s.into_bytes())
}

// ---------------------------------------------------------------------------
// Commands

/// Explanation fields first, then where the window sits and how it was scaled.
#[derive(Serialize)]
struct ExplainOutput<'a> {
    #[serde(flatten)]
    explanation: &'a tsfl_core::Explanation,
    window_start: String,
    window_end: String,
    normalization: Option<NormalizationState>,
}

fn cmd_explain(a: ExplainArgs) -> CliResult<()> {
    let s = Settings::resolve(Raw {
        data: Some(a.data),
        model: Some(a.model),
        features: a.features,
        mbb: Some(a.mbb),
        kernel: Some(a.kernel),
        output: a.output,
        config: a.config,
        ..Default::default()
    })?;
    let prep = Prepared::load(&s)?;
    let (start, window) = prep.window(s.window, a.end)?;
    let f = prep.forecaster(&s, start)?;
    let (_, e) = explain(&window, f.as_ref(), &s.explain_config(s.features_or_lags()))?;
    let dates = &prep.series.timestamps()[start..start + s.window];
    let doc = ExplainOutput {
        explanation: &e,
        window_start: dates[0].to_string(),
        window_end: dates[s.window - 1].to_string(),
        normalization: prep.normalization,
    };
    if let Some(path) = &a.svg {
        std::fs::write(path, coefficient_chart(&e)).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
    }
    emit(s.output.as_deref(), &json_bytes(&doc)?)
}

fn cmd_perturb(a: PerturbArgs) -> CliResult<()> {
    let s = Settings::resolve(Raw {
        data: Some(a.data),
        mbb: Some(a.mbb),
        output: a.output,
        config: a.config,
        ..Default::default()
    })?;
    let prep = Prepared::load(&s)?;
    let (_, window) = prep.window(s.window, a.end)?;
    let set = generate_samples(&window, &s.perturbation)?;
    let mut buf = Vec::new();
    set.write_csv(&mut buf)?;
    emit(s.output.as_deref(), &buf)
}

fn eval_setup(a: EvalArgs) -> CliResult<(Settings, Prepared, Box<dyn Forecaster>, Vec<Vec<f64>>)> {
    let s = Settings::resolve(Raw {
        data: Some(a.data),
        model: Some(a.model),
        features: a.features,
        mbb: Some(a.mbb),
        kernel: Some(a.kernel),
        queries: a.queries,
        iterations: a.iterations,
        dataset: a.dataset,
        output: a.output,
        config: a.config,
    })?;
    let prep = Prepared::load(&s)?;
    let queries = holdout_queries(prep.series.values(), s.window, s.queries)?;
    let first_start = prep.series.len() - (s.window + s.queries - 1);
    let f = prep.forecaster(&s, first_start)?;
    Ok((s, prep, f, queries))
}

fn cmd_fidelity(a: EvalArgs) -> CliResult<()> {
    let (s, _, f, queries) = eval_setup(a)?;
    let report = evaluate_fidelity(f.as_ref(), &queries, &s.explain_config(s.features_or_lags()), s.iterations)?;
    emit(s.output.as_deref(), &json_bytes(&report)?)
}

fn cmd_grid(a: EvalArgs) -> CliResult<()> {
    let (s, _, f, queries) = eval_setup(a)?;
    let grid = GridSpec {
        iterations: s.iterations,
        ..GridSpec::default()
    };
    for l in &grid.block_lengths {
        PerturbationConfig { block_length: *l, ..s.perturbation }.validate(s.window)?;
    }
    let result = run_grid(&s.dataset_name(), f.as_ref(), &queries, &s.explain_config(vec![]), &grid)?;
    let mut buf = Vec::new();
    result.write_csv(&mut buf)?;
    emit(s.output.as_deref(), &buf)
}

fn cmd_ablation(a: EvalArgs) -> CliResult<()> {
    let (s, _, f, queries) = eval_setup(a)?;
    let families: Vec<_> = FeatureFamily::ALL
        .iter()
        .map(|fam| (*fam, fam.default_specs(s.window)))
        .collect();
    let kernel = match s.kernel.kind {
        KernelKind::Exponential => s.kernel,
        KernelKind::None => KernelConfig::exponential(),
    };
    let result = distance_ablation(
        &s.dataset_name(),
        f.as_ref(),
        &queries,
        &families,
        &s.explain_config(vec![]),
        kernel,
        s.iterations,
    )?;
    let mut buf = Vec::new();
    result.write_csv(&mut buf)?;
    emit(s.output.as_deref(), &buf)
}

fn cmd_serve(a: ServeArgs) -> CliResult<()> {
    let s = Settings::resolve(Raw {
        data: Some(a.data),
        model: Some(a.model),
        features: a.features,
        mbb: Some(a.mbb),
        kernel: Some(a.kernel),
        config: a.config,
        ..Default::default()
    })?;
    if s.window != tsfl_service::session::WINDOW {
        return Err(invalid(format!(
            "the exercise service shows {}-month windows",
            tsfl_service::session::WINDOW
        )));
    }
    let prep = Prepared::load(&s)?;
    let f: Arc<dyn Forecaster> = Arc::from(prep.forecaster(&s, 0)?);
    let mut engine = tsfl_service::Engine::new(prep.series.clone(), f);
    engine.explain = s.explain_config(s.features_or_lags());
    engine.master_seed = s.perturbation.seed;
    let (store, history) = tsfl_service::Store::open(&a.store).map_err(runtime)?;
    let state = tsfl_service::AppState::with_history(engine, store, history).map_err(runtime)?;
    let rt = tokio::runtime::Runtime::new().map_err(runtime)?;
    rt.block_on(tsfl_service::serve(state, a.addr, a.static_dir))
        .map_err(runtime)
}

#[derive(Debug, Serialize)]
struct Comparison {
    comparison: String,
    n1: usize,
    n2: usize,
    u: f64,
    z: f64,
    p: f64,
}

/// Rows: CS vs NonCS within each group, then Treatment vs Control overall.
pub fn analyze_export<R: std::io::Read>(reader: R) -> Result<Vec<(String, Result<MannWhitney, tsfl_core::Error>)>, String> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers().map_err(|e| e.to_string())?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| format!("missing column `{name}`"))
    };
    let (gi, bi, si) = (col("group")?, col("background")?, col("score")?);
    let mut rows: Vec<(String, String, f64)> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| format!("row {}: {e}", i + 1))?;
        let score: f64 = rec[si]
            .parse()
            .map_err(|_| format!("row {}: score `{}` is not a number", i + 1, &rec[si]))?;
        rows.push((rec[gi].to_string(), rec[bi].to_string(), score));
    }
    let pick = |g: Option<&str>, b: Option<&str>| -> Vec<f64> {
        rows.iter()
            .filter(|(rg, rb, _)| g.is_none_or(|g| g == rg) && b.is_none_or(|b| b == rb))
            .map(|r| r.2)
            .collect()
    };
    let mut out = Vec::new();
    for g in ["Control", "Treatment"] {
        out.push((
            format!("{g}: CS vs NonCS"),
            mann_whitney_u(&pick(Some(g), Some("CS")), &pick(Some(g), Some("NonCS"))),
        ));
    }
    out.push((
        "Treatment vs Control".to_string(),
        mann_whitney_u(&pick(Some("Treatment"), None), &pick(Some("Control"), None)),
    ));
    Ok(out)
}

fn cmd_analyze(a: AnalyzeArgs) -> CliResult<()> {
    let file = std::fs::File::open(&a.input).map_err(|e| runtime(format!("{}: {e}", a.input.display())))?;
    let results = analyze_export(file).map_err(invalid)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for (name, r) in results {
        match r {
            Ok(mw) => w
                .serialize(Comparison {
                    comparison: name,
                    n1: mw.n1,
                    n2: mw.n2,
                    u: mw.u_a,
                    z: mw.z,
                    p: mw.p_value,
                })
                .map_err(runtime)?,
            Err(e) => eprintln!("{name}: skipped ({e})"),
        }
    }
    let buf = w.into_inner().map_err(runtime)?;
    let buf = if buf.is_empty() {
        b"comparison,n1,n2,u,z,p\n".to_vec()
    } else {
        buf
    };
    emit(a.output.as_deref(), &buf)
}

fn cmd_synth(a: SynthArgs) -> CliResult<()> {
    let defaults = SyntheticConfig::default();
    if !(a.noise_sd >= 0.0 && a.noise_sd.is_finite()) {
        return Err(invalid("--noise-sd must be >= 0"));
    }
    let cfg = SyntheticConfig {
        length: a.length,
        noise_sd: a.noise_sd,
        seed: a.seed.unwrap_or(defaults.seed),
        ..defaults
    };
    let series = synthetic_series(&cfg)?;
    let mut buf = Vec::new();
    write_csv(&series, &mut buf)?;
    emit(a.output.as_deref(), &buf)
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Explain(a) => cmd_explain(a),
        Command::Perturb(a) => cmd_perturb(a),
        Command::Fidelity(a) => cmd_fidelity(a),
        Command::Grid(a) => cmd_grid(a),
        Command::Ablation(a) => cmd_ablation(a),
        Command::Serve(a) => cmd_serve(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Synth(a) => cmd_synth(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("tsfl: {e}");
            e.exit_code()
        }
    }
}

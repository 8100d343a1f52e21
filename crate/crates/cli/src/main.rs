use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use segdp::amplify::{hockey_stick_with_tail, AmplifyParams, TRUNCATION_TAIL};
use segdp::data::quotas;
use segdp::experiment::{run_experiment, DatasetKind, DeltaRule, ExperimentSpec, MSweep, Method, SweepKeyword};
use segdp::optimize::{optimize_parameters, optimize_with_trace, SegmentedConfig};
use segdp::protocol::run_protocol;

const EXPERIMENT_HELP: &str = "\
Runs every method x m x trial of an experiment spec and writes CSV.

Spec: TOML with keys dataset (\"msnbc\" | \"synthetic\"), path (msnbc only,
relative to the spec file), d (synthetic only), s, n, levels, segmentation,
segmentation_label, delta (number or \"<c>/n\", default \"0.01/n\"),
m (list or \"auto\"), methods (segmented, uniform_mm, sepmm,
weighted_sepmm), trials, seed, grid_points.

CSV columns:
  method, dataset, d, s, n, segmentation, m, trial, seed, mse,
  runtime_ms, lambdas, privacy_audit
One row per trial, then one row per (method, m) with trial = \"mean\" and
an empty seed. mse is sum_j (w_hat_j - w_j)^2. lambdas are the per-level
(or per-segment) rates joined by ';'. privacy_audit is pass, fail or
infeasible. With --out FILE a FILE.meta.json sidecar records the resolved
spec, delta and padding rule.";

#[derive(Parser, Debug)]
#[command(name = "segdp", version, about = "Segmented differential privacy in the multi-message shuffle model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Hockey-stick divergence between the two count-pair families.
    Amplify(AmplifyArgs),
    /// Blanket rate and per-level Poisson rates minimizing the MSE bound.
    Optimize(OptimizeArgs),
    /// One protocol run: per-item estimates against the truth.
    Simulate(SimulateArgs),
    #[command(about = "MSE-versus-m sweep written as CSV", long_about = EXPERIMENT_HELP)]
    Experiment(ExperimentArgs),
}

#[derive(Args, Debug)]
struct AmplifyArgs {
    /// Variation ratio (> 1, or "inf").
    #[arg(long, default_value = "inf")]
    p: f64,
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    q: f64,
    #[arg(long)]
    blanket_trials: u64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long)]
    epsilon: f64,
    /// Truncation tail added to the result.
    #[arg(long, default_value_t = TRUNCATION_TAIL)]
    tail: f64,
}

/// Spec file plus per-field overrides.
#[derive(Args, Debug, Default)]
struct SpecArgs {
    /// TOML experiment spec.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// "msnbc" or "synthetic".
    #[arg(long)]
    dataset: Option<String>,
    /// MSNBC session file.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    s: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated privacy levels, strictest first.
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<f64>>,
    /// Comma-separated fraction of users per level.
    #[arg(long, value_delimiter = ',')]
    fractions: Option<Vec<f64>>,
    /// Number or "<c>/n".
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    grid_points: Option<usize>,
}

#[derive(Args, Debug)]
struct OptimizeArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// Fix the blanket rate instead of searching.
    #[arg(long)]
    m: Option<f64>,
    /// Also print every grid point.
    #[arg(long)]
    trace: bool,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long)]
    m: Option<f64>,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// Comma-separated blanket rates, or "auto".
    #[arg(long)]
    m: Option<String>,
    /// Comma-separated methods.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    #[arg(long)]
    trials: Option<usize>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Lib(segdp::Error),
}

impl From<segdp::Error> for Failure {
    fn from(e: segdp::Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Lib(e) if e.is_infeasible() => 2,
            Failure::Lib(segdp::Error::UndefinedObjective) => 2,
            Failure::Lib(e) if e.is_io() => 3,
            Failure::Lib(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(msg) => f.write_str(msg),
            Failure::Lib(e) => write!(f, "{e}"),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Amplify(a) => cmd_amplify(&a),
        Command::Optimize(a) => cmd_optimize(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Experiment(a) => cmd_experiment(&a),
    };
    match result {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn cmd_amplify(a: &AmplifyArgs) -> CliResult<String> {
    let params = AmplifyParams { p: a.p, beta: a.beta, q: a.q, blanket_trials: a.blanket_trials, gamma: a.gamma };
    if a.epsilon.is_nan() || a.epsilon < 0.0 {
        return Err(Failure::Usage(format!("epsilon must be non-negative, got {}", a.epsilon)));
    }
    let d = hockey_stick_with_tail(&params, a.epsilon, a.tail).map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(format!("{d:.11e}\n"))
}

impl SpecArgs {
    /// Spec file (if any) with command-line overrides applied.
    fn resolve(&self) -> CliResult<ExperimentSpec> {
        let mut spec = match &self.spec {
            Some(path) => ExperimentSpec::load(path)?,
            None => {
                let n = self.n.ok_or_else(|| Failure::Usage("--n is required without --spec".into()))?;
                let s = self.s.ok_or_else(|| Failure::Usage("--s is required without --spec".into()))?;
                let levels =
                    self.levels.clone().ok_or_else(|| Failure::Usage("--levels is required without --spec".into()))?;
                let fractions = self.fractions.clone().unwrap_or_else(|| vec![1.0 / levels.len() as f64; levels.len()]);
                ExperimentSpec {
                    dataset: DatasetKind::Synthetic,
                    path: None,
                    d: None,
                    s,
                    n,
                    levels,
                    segmentation: fractions,
                    segmentation_label: None,
                    delta: DeltaRule::default(),
                    m: MSweep::Keyword(SweepKeyword::Auto),
                    methods: vec![Method::Segmented],
                    trials: 1,
                    seed: 0,
                    grid_points: segdp::optimize::DEFAULT_GRID_POINTS,
                }
            }
        };
        if let Some(kind) = &self.dataset {
            spec.dataset = match kind.as_str() {
                "msnbc" => DatasetKind::Msnbc,
                "synthetic" => DatasetKind::Synthetic,
                other => return Err(Failure::Usage(format!("unknown dataset {other:?}"))),
            };
        }
        if let Some(p) = &self.data {
            spec.path = Some(p.clone());
            if self.dataset.is_none() {
                spec.dataset = DatasetKind::Msnbc;
            }
        }
        if let Some(d) = self.d {
            spec.d = Some(d);
        }
        if let Some(s) = self.s {
            spec.s = s;
        }
        if let Some(n) = self.n {
            spec.n = n;
        }
        if let Some(l) = &self.levels {
            spec.levels = l.clone();
            if self.fractions.is_none() && spec.segmentation.len() != l.len() {
                spec.segmentation = vec![1.0 / l.len() as f64; l.len()];
            }
        }
        if let Some(f) = &self.fractions {
            spec.segmentation = f.clone();
        }
        if let Some(delta) = &self.delta {
            spec.delta = match delta.parse::<f64>() {
                Ok(v) => DeltaRule::Fixed(v),
                Err(_) => DeltaRule::Rule(delta.clone()),
            };
        }
        if let Some(seed) = self.seed {
            spec.seed = seed;
        }
        if let Some(g) = self.grid_points {
            spec.grid_points = g;
        }
        Ok(spec)
    }
}

fn usage(e: segdp::Error) -> Failure {
    match e {
        segdp::Error::InvalidSpec(_) | segdp::Error::ParameterDomain(_) | segdp::Error::BadFractions(_) => {
            Failure::Usage(e.to_string())
        }
        other => Failure::Lib(other),
    }
}

/// Level counts from exact quotas; no data needed.
fn config_from_spec(spec: &ExperimentSpec) -> CliResult<SegmentedConfig> {
    let d = spec.domain_size().map_err(usage)?;
    let counts = quotas(spec.n, &spec.segmentation).map_err(usage)?;
    let config = SegmentedConfig {
        levels: spec.levels.clone(),
        level_counts: counts.into_iter().map(|c| c as f64).collect(),
        delta: spec.delta.resolve(spec.n).map_err(usage)?,
        domain_size: d,
        set_size: spec.s,
        population: spec.n as u64,
    };
    config.validate().map_err(usage)?;
    Ok(config)
}

#[derive(Serialize)]
struct OptimizeReport {
    blanket_rate: f64,
    poisson_rates: Vec<f64>,
    mse_bound: f64,
    delta: f64,
    level_counts: Vec<f64>,
    privacy_audit: Vec<bool>,
}

fn cmd_optimize(a: &OptimizeArgs) -> CliResult<String> {
    let mut spec = a.spec.resolve()?;
    if spec.dataset == DatasetKind::Msnbc && spec.d.is_none() {
        spec.d = Some(segdp::data::MSNBC_DOMAIN_SIZE);
    }
    if spec.dataset == DatasetKind::Synthetic && spec.d.is_none() {
        return Err(Failure::Usage("--d is required for a synthetic configuration".into()));
    }
    let config = config_from_spec(&spec)?;
    let (params, trace) = match a.m {
        Some(m) => (optimize_parameters(&config, spec.grid_points, Some(m))?, None),
        None if a.trace => {
            let opt = optimize_with_trace(&config, spec.grid_points)?;
            (opt.params.clone(), Some(opt))
        }
        None => (optimize_parameters(&config, spec.grid_points, None)?, None),
    };
    let audit = params.audit(&config)?.iter().map(|c| c.holds).collect();
    let report = OptimizeReport {
        blanket_rate: params.blanket_rate,
        poisson_rates: params.poisson_rates.clone(),
        mse_bound: params.mse_bound,
        delta: config.delta,
        level_counts: config.level_counts.clone(),
        privacy_audit: audit,
    };
    let mut out = toml::to_string(&report).map_err(|e| Failure::Usage(e.to_string()))?;
    if let Some(opt) = trace {
        let _ = writeln!(out, "\n# grid: m, bound, rates");
        for g in &opt.grid {
            let bound = g.mse_bound.map_or("undefined".to_string(), |b| format!("{b:.6e}"));
            let rates: Vec<String> = g.rates.iter().map(|r| format!("{r:.6}")).collect();
            let _ = writeln!(out, "# {:.6} {bound} [{}]", g.m, rates.join(", "));
        }
    }
    Ok(out)
}

fn cmd_simulate(a: &SimulateArgs) -> CliResult<String> {
    let spec = a.spec.resolve()?;
    spec.validate().map_err(usage)?;
    let dataset = spec.build_dataset()?;
    let config = spec.config_for(&dataset)?;
    let params = optimize_parameters(&config, spec.grid_points, a.m)?;
    let result = run_protocol(&dataset.records, &config, &params, spec.trial_seed(0))?;
    let mut out = String::new();
    let rates: Vec<String> = params.poisson_rates.iter().map(|r| format!("{r:.6}")).collect();
    let _ = writeln!(out, "# m = {:.6}, lambdas = [{}], delta = {:e}", params.blanket_rate, rates.join(", "), config.delta);
    let _ = writeln!(out, "item,count,estimate,truth");
    for (j, ((c, e), w)) in result.raw_counts.iter().zip(&result.estimates).zip(&dataset.true_w).enumerate() {
        let _ = writeln!(out, "{},{c},{e:.6},{w:.6}", j + 1);
    }
    let _ = writeln!(out, "# mse = {:.6e}, bound = {:.6e}", result.squared_error(&dataset.true_w), params.mse_bound);
    Ok(out)
}

#[derive(Serialize)]
struct Metadata<'a> {
    spec: &'a ExperimentSpec,
    delta: f64,
    padding: &'static str,
    csv_columns: &'static [&'static str],
}

fn cmd_experiment(a: &ExperimentArgs) -> CliResult<String> {
    if a.spec.spec.is_none() {
        return Err(Failure::Usage("experiment needs --spec FILE".into()));
    }
    let mut spec = a.spec.resolve()?;
    if let Some(m) = &a.m {
        spec.m = if m.trim() == "auto" {
            MSweep::Keyword(SweepKeyword::Auto)
        } else {
            let values = m
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| Failure::Usage(format!("bad --m {m:?}: {e}")))?;
            MSweep::Values(values)
        };
    }
    if let Some(methods) = &a.methods {
        spec.methods = methods.iter().map(|s| Method::parse(s.trim())).collect::<Result<_, _>>().map_err(usage)?;
    }
    if let Some(t) = a.trials {
        spec.trials = t;
    }
    spec.validate().map_err(usage)?;
    let output = run_experiment(&spec)?;
    match &a.out {
        Some(path) => {
            output.write_csv_file(path)?;
            write_metadata(path, &output)?;
            Ok(String::new())
        }
        None => {
            let mut buf = Vec::new();
            output.write_csv(&mut buf)?;
            Ok(String::from_utf8(buf).expect("CSV is UTF-8"))
        }
    }
}

fn write_metadata(csv_path: &Path, output: &segdp::experiment::ExperimentOutput) -> CliResult<()> {
    let meta = Metadata {
        spec: &output.spec,
        delta: output.delta,
        padding: "sets larger than s are subsampled uniformly without replacement; smaller sets are padded with distinct items drawn uniformly from the complement",
        csv_columns: &segdp::experiment::CSV_HEADER,
    };
    let mut name = csv_path.as_os_str().to_owned();
    name.push(".meta.json");
    let path = PathBuf::from(name);
    let text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    std::fs::write(&path, text).map_err(|source| Failure::Lib(segdp::Error::Io { path, source }))
}

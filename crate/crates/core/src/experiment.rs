//! MSE-versus-blanket-rate experiments.
//!
//! An [`ExperimentSpec`] fixes a dataset, a privacy segmentation, a sweep of
//! blanket rates and a list of methods. [`run_experiment`] draws the dataset
//! once, plans each `(method, m)` pair once, then runs every trial and
//! reports one row per trial plus one mean row per `(method, m)`.
//!
//! CSV layout (see [`ExperimentOutput::write_csv`]):
//!
//! | column        | meaning                                                     |
//! |---------------|-------------------------------------------------------------|
//! | method        | `segmented`, `uniform_mm`, `sepmm` or `weighted_sepmm`      |
//! | dataset       | `msnbc` or `synthetic`                                      |
//! | d, s, n       | domain size, set size, population                           |
//! | segmentation  | label, or the level fractions joined by `;`                 |
//! | m             | blanket rate used (per segment, `;`-joined, for auto SepMM) |
//! | trial         | trial index, or `mean` on aggregate rows                    |
//! | seed          | protocol seed of the trial (empty on aggregate rows)        |
//! | mse           | `sum_j (w_hat_j - w_j)^2`                                   |
//! | runtime_ms    | wall time of the protocol run                               |
//! | lambdas       | per-level (or per-segment) Poisson rates, `;`-joined        |
//! | privacy_audit | `pass`, `fail`, or `infeasible` when no parameters exist    |
//!
//! Aggregate rows follow all detail rows, in the same `(method, m)` order.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::{execute_sepmm, execute_uniform_mm, plan_sepmm, plan_uniform_mm, SepPlan, UniformPlan};
use crate::data::{assign_levels, load_msnbc, synth_uniform, Dataset, MSNBC_DOMAIN_SIZE};
use crate::error::{Error, Result};
use crate::optimize::{optimize_parameters, ProtocolParams, SegmentedConfig, DEFAULT_GRID_POINTS};
use crate::protocol::{run_protocol, squared_error};
use crate::rng::derive_seed;

const DATA_TAG: u64 = 0x6461_7461;
const LEVEL_TAG: u64 = 0x6c65_7665;
const TRIAL_TAG: u64 = 0x7472_6961;

pub const CSV_HEADER: [&str; 13] = [
    "method",
    "dataset",
    "d",
    "s",
    "n",
    "segmentation",
    "m",
    "trial",
    "seed",
    "mse",
    "runtime_ms",
    "lambdas",
    "privacy_audit",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Msnbc,
    Synthetic,
}

impl DatasetKind {
    pub fn name(self) -> &'static str {
        match self {
            DatasetKind::Msnbc => "msnbc",
            DatasetKind::Synthetic => "synthetic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "segmented")]
    Segmented,
    #[serde(rename = "uniform_mm")]
    UniformMm,
    #[serde(rename = "sepmm")]
    SepMm,
    #[serde(rename = "weighted_sepmm")]
    WeightedSepMm,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Segmented => "segmented",
            Method::UniformMm => "uniform_mm",
            Method::SepMm => "sepmm",
            Method::WeightedSepMm => "weighted_sepmm",
        }
    }

    pub fn parse(s: &str) -> Result<Method> {
        match s {
            "segmented" => Ok(Method::Segmented),
            "uniform_mm" => Ok(Method::UniformMm),
            "sepmm" => Ok(Method::SepMm),
            "weighted_sepmm" => Ok(Method::WeightedSepMm),
            other => Err(Error::InvalidSpec(format!("unknown method {other:?}"))),
        }
    }
}

/// Failure probability: a fixed value, or a rule `"<c>/n"` resolved from
/// the population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DeltaRule {
    Fixed(f64),
    Rule(String),
}

impl Default for DeltaRule {
    fn default() -> Self {
        DeltaRule::Rule("0.01/n".into())
    }
}

impl DeltaRule {
    pub fn resolve(&self, population: usize) -> Result<f64> {
        let delta = match self {
            DeltaRule::Fixed(v) => *v,
            DeltaRule::Rule(rule) => {
                let c = rule
                    .trim()
                    .strip_suffix("/n")
                    .and_then(|c| c.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::InvalidSpec(format!("delta rule {rule:?} is not a number or \"<c>/n\"")))?;
                c / population as f64
            }
        };
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidSpec(format!("delta resolves to {delta}, outside (0, 1)")));
        }
        Ok(delta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKeyword {
    Auto,
}

/// Blanket rates to evaluate: explicit values, or `"auto"` for the
/// optimizer's own choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MSweep {
    Values(Vec<f64>),
    Keyword(SweepKeyword),
}

impl MSweep {
    /// `None` stands for the optimizer's choice.
    pub fn points(&self) -> Vec<Option<f64>> {
        match self {
            MSweep::Values(v) => v.iter().map(|&m| Some(m)).collect(),
            MSweep::Keyword(SweepKeyword::Auto) => vec![None],
        }
    }
}

fn default_methods() -> Vec<Method> {
    vec![Method::Segmented]
}

fn default_trials() -> usize {
    1
}

fn default_grid_points() -> usize {
    DEFAULT_GRID_POINTS
}

fn default_sweep() -> MSweep {
    MSweep::Keyword(SweepKeyword::Auto)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub dataset: DatasetKind,
    /// Session file; `msnbc` only.
    #[serde(default)]
    pub path: Option<PathBuf>,
    /// Domain size; fixed to 17 for `msnbc`.
    #[serde(default)]
    pub d: Option<usize>,
    pub s: usize,
    pub n: usize,
    pub levels: Vec<f64>,
    pub segmentation: Vec<f64>,
    #[serde(default)]
    pub segmentation_label: Option<String>,
    #[serde(default)]
    pub delta: DeltaRule,
    #[serde(default = "default_sweep")]
    pub m: MSweep,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
}

impl ExperimentSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidSpec(e.to_string()))
    }

    /// Reads a TOML spec; a relative dataset path is taken relative to the
    /// spec file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut spec = Self::from_toml_str(&text)?;
        if let (Some(p), Some(dir)) = (spec.path.as_mut(), path.parent()) {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        Ok(spec)
    }

    pub fn domain_size(&self) -> Result<usize> {
        match (self.dataset, self.d) {
            (DatasetKind::Msnbc, None) => Ok(MSNBC_DOMAIN_SIZE),
            (DatasetKind::Msnbc, Some(d)) if d == MSNBC_DOMAIN_SIZE => Ok(d),
            (DatasetKind::Msnbc, Some(d)) => {
                Err(Error::InvalidSpec(format!("msnbc has domain size {MSNBC_DOMAIN_SIZE}, spec says {d}")))
            }
            (DatasetKind::Synthetic, Some(d)) => Ok(d),
            (DatasetKind::Synthetic, None) => Err(Error::InvalidSpec("synthetic dataset needs d".into())),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.domain_size()?;
        if self.trials < 1 {
            return Err(Error::InvalidSpec("trials must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidSpec("methods must be non-empty".into()));
        }
        if self.n == 0 {
            return Err(Error::InvalidSpec("n must be positive".into()));
        }
        if self.s == 0 || self.s > d {
            return Err(Error::SetSizeExceedsDomain { set_size: self.s, domain_size: d });
        }
        if self.levels.is_empty() || self.levels.len() != self.segmentation.len() {
            return Err(Error::InvalidSpec(format!(
                "{} levels but {} segmentation fractions",
                self.levels.len(),
                self.segmentation.len()
            )));
        }
        if let MSweep::Values(v) = &self.m {
            if v.is_empty() || v.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
                return Err(Error::InvalidSpec(format!("m sweep {v:?} must be non-empty and non-negative")));
            }
        }
        if self.dataset == DatasetKind::Msnbc && self.path.is_none() {
            return Err(Error::InvalidSpec("msnbc dataset needs a path".into()));
        }
        self.delta.resolve(self.n)?;
        Ok(())
    }

    pub fn segmentation_name(&self) -> String {
        self.segmentation_label
            .clone()
            .unwrap_or_else(|| join(self.segmentation.iter()))
    }

    /// Population with level assignments, identical for every method and trial.
    pub fn build_dataset(&self) -> Result<Dataset> {
        let d = self.domain_size()?;
        let data_seed = derive_seed(self.seed, DATA_TAG);
        let ds = match self.dataset {
            DatasetKind::Msnbc => {
                let path = self.path.as_ref().ok_or_else(|| Error::InvalidSpec("msnbc dataset needs a path".into()))?;
                load_msnbc(path, self.s, self.n, data_seed)?
            }
            DatasetKind::Synthetic => synth_uniform(d, self.s, self.n, data_seed)?,
        };
        assign_levels(ds, &self.segmentation, derive_seed(self.seed, LEVEL_TAG))
    }

    pub fn config_for(&self, dataset: &Dataset) -> Result<SegmentedConfig> {
        let config = SegmentedConfig {
            levels: self.levels.clone(),
            level_counts: dataset.level_counts(self.levels.len()),
            delta: self.delta.resolve(self.n)?,
            domain_size: dataset.domain_size,
            set_size: dataset.set_size,
            population: dataset.population() as u64,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        derive_seed(derive_seed(self.seed, TRIAL_TAG), trial as u64)
    }
}

fn join<T: std::fmt::Display>(values: impl Iterator<Item = T>) -> String {
    let mut out = String::new();
    for (i, v) in values.enumerate() {
        if i > 0 {
            out.push(';');
        }
        let _ = write!(out, "{v}");
    }
    out
}

/// Parameters chosen for one `(method, m)` pair.
#[derive(Debug, Clone, PartialEq)]
pub enum Plan {
    Segmented(ProtocolParams),
    Uniform(UniformPlan),
    Separate(SepPlan),
}

impl Plan {
    /// Effective blanket rate(s), `;`-joined.
    pub fn m_label(&self) -> String {
        match self {
            Plan::Segmented(p) => format!("{}", p.blanket_rate),
            Plan::Uniform(u) => format!("{}", u.params.blanket_rate),
            Plan::Separate(sep) => {
                let ms: Vec<f64> = sep.segments.iter().map(|s| s.params.blanket_rate).collect();
                if ms.windows(2).all(|w| w[0] == w[1]) {
                    format!("{}", ms[0])
                } else {
                    join(ms.iter())
                }
            }
        }
    }

    pub fn lambdas(&self, num_levels: usize) -> Vec<f64> {
        match self {
            Plan::Segmented(p) => p.poisson_rates.clone(),
            Plan::Uniform(u) => vec![u.params.poisson_rates[0]; num_levels],
            Plan::Separate(sep) => sep.segments.iter().map(|s| s.params.poisson_rates[0]).collect(),
        }
    }

    /// Whether every level (or segment) passes the accountant re-check.
    pub fn audit(&self, config: &SegmentedConfig) -> Result<bool> {
        let all = |checks: Vec<crate::amplify::PrivacyCheck>| checks.iter().all(|c| c.holds);
        match self {
            Plan::Segmented(p) => Ok(all(p.audit(config)?)),
            Plan::Uniform(u) => Ok(all(u.params.audit(&u.config)?)),
            Plan::Separate(sep) => {
                for seg in &sep.segments {
                    if !all(seg.params.audit(&seg.config)?) {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Audit {
    Pass,
    Fail,
    Infeasible,
}

impl Audit {
    pub fn name(self) -> &'static str {
        match self {
            Audit::Pass => "pass",
            Audit::Fail => "fail",
            Audit::Infeasible => "infeasible",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRow {
    pub method: Method,
    /// Position of this row's `m` in the sweep.
    pub sweep_index: usize,
    pub m: String,
    pub trial: usize,
    pub seed: u64,
    /// NaN when the pair is infeasible.
    pub mse: f64,
    pub runtime_ms: f64,
    pub lambdas: Vec<f64>,
    pub audit: Audit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub method: Method,
    pub sweep_index: usize,
    pub m: String,
    /// Requested sweep value; `None` for `auto`.
    pub m_requested: Option<f64>,
    pub mean_mse: f64,
    /// Standard error of `mean_mse` (0 for a single trial).
    pub stderr: f64,
    pub mean_runtime_ms: f64,
    pub lambdas: Vec<f64>,
    pub audit: Audit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentOutput {
    pub spec: ExperimentSpec,
    pub delta: f64,
    pub rows: Vec<TrialRow>,
    pub aggregates: Vec<AggregateRow>,
}

impl ExperimentOutput {
    pub fn aggregates_for(&self, method: Method) -> impl Iterator<Item = &AggregateRow> {
        self.aggregates.iter().filter(move |a| a.method == method)
    }

    /// Feasible aggregate with the smallest mean MSE for `method`.
    pub fn best(&self, method: Method) -> Option<&AggregateRow> {
        self.aggregates_for(method)
            .filter(|a| a.mean_mse.is_finite())
            .min_by(|a, b| a.mean_mse.total_cmp(&b.mean_mse))
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(CSV_HEADER)?;
        let spec = &self.spec;
        let d = spec.domain_size()?.to_string();
        let s = spec.s.to_string();
        let n = spec.n.to_string();
        let seg = spec.segmentation_name();
        for r in &self.rows {
            w.write_record([
                r.method.name(),
                spec.dataset.name(),
                &d,
                &s,
                &n,
                &seg,
                &r.m,
                &r.trial.to_string(),
                &r.seed.to_string(),
                &format!("{}", r.mse),
                &format!("{:.3}", r.runtime_ms),
                &join(r.lambdas.iter()),
                r.audit.name(),
            ])?;
        }
        for a in &self.aggregates {
            w.write_record([
                a.method.name(),
                spec.dataset.name(),
                &d,
                &s,
                &n,
                &seg,
                &a.m,
                "mean",
                "",
                &format!("{}", a.mean_mse),
                &format!("{:.3}", a.mean_runtime_ms),
                &join(a.lambdas.iter()),
                a.audit.name(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv output>", e))?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

fn plan_for(
    method: Method,
    config: &SegmentedConfig,
    m: Option<f64>,
    grid_points: usize,
    sep_cache: &mut Option<Result<SepPlan>>,
) -> Result<Plan> {
    match method {
        Method::Segmented => Ok(Plan::Segmented(optimize_parameters(config, grid_points, m)?)),
        Method::UniformMm => Ok(Plan::Uniform(plan_uniform_mm(config, None, m)?)),
        Method::SepMm | Method::WeightedSepMm => {
            // Both SepMM variants share one plan per `m`.
            match sep_cache.get_or_insert_with(|| plan_sepmm(config, m)) {
                Ok(plan) => Ok(Plan::Separate(plan.clone())),
                Err(e) if is_infeasible(e) => Err(Error::UndefinedObjective),
                Err(e) => Err(Error::InvalidSpec(format!("per-segment planning failed: {e}"))),
            }
        }
    }
}

fn is_infeasible(e: &Error) -> bool {
    e.is_infeasible() || matches!(e, Error::UndefinedObjective | Error::UndefinedEstimator)
}

struct Task<'a> {
    method: Method,
    sweep_index: usize,
    plan: &'a Plan,
    trial: usize,
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    spec.validate()?;
    let dataset = spec.build_dataset()?;
    let config = spec.config_for(&dataset)?;
    run_on_dataset(spec, &dataset, &config)
}

/// (method, sweep index, requested m, plan if feasible, audit).
type PlannedPoint = (Method, usize, Option<f64>, Option<Plan>, Audit);

/// Runs the sweep on an already built population.
pub fn run_on_dataset(spec: &ExperimentSpec, dataset: &Dataset, config: &SegmentedConfig) -> Result<ExperimentOutput> {
    let sweep = spec.m.points();
    let k = config.num_levels();

    // Plans in (method, m) order.
    let mut plans: Vec<PlannedPoint> = Vec::new();
    let mut sep_cache: Vec<Option<Result<SepPlan>>> = (0..sweep.len()).map(|_| None).collect();
    let mut ordered = spec.methods.clone();
    ordered.dedup();
    for &method in &ordered {
        for (i, &m) in sweep.iter().enumerate() {
            match plan_for(method, config, m, spec.grid_points, &mut sep_cache[i]) {
                Ok(plan) => {
                    let audit = if plan.audit(config)? { Audit::Pass } else { Audit::Fail };
                    plans.push((method, i, m, Some(plan), audit));
                }
                Err(e) if is_infeasible(&e) => plans.push((method, i, m, None, Audit::Infeasible)),
                Err(e) => return Err(e),
            }
        }
    }

    let tasks: Vec<Task> = plans
        .iter()
        .filter_map(|(method, i, _, plan, _)| plan.as_ref().map(|p| (method, i, p)))
        .flat_map(|(&method, &sweep_index, plan)| {
            (0..spec.trials).map(move |trial| Task { method, sweep_index, plan, trial })
        })
        .collect();

    let outcomes = crate::par_map(&tasks, |t| -> Result<(f64, f64)> {
        let seed = spec.trial_seed(t.trial);
        let start = Instant::now();
        let estimates = match t.plan {
            Plan::Segmented(params) => run_protocol(&dataset.records, config, params, seed)?.estimates,
            Plan::Uniform(u) => execute_uniform_mm(&dataset.records, u, seed)?.estimates,
            Plan::Separate(sep) => {
                execute_sepmm(&dataset.records, config, sep, seed, t.method == Method::WeightedSepMm)?.estimates
            }
        };
        let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
        Ok((squared_error(&estimates, &dataset.true_w), runtime_ms))
    });

    let mut outcome_iter = tasks.iter().zip(outcomes);
    let mut rows = Vec::new();
    let mut aggregates = Vec::new();
    for (method, sweep_index, m_requested, plan, audit) in &plans {
        let (m_label, lambdas) = match plan {
            Some(p) => (p.m_label(), p.lambdas(k)),
            None => (m_requested.map(|m| m.to_string()).unwrap_or_else(|| "auto".into()), Vec::new()),
        };
        let mut mses = Vec::with_capacity(spec.trials);
        let mut times = Vec::with_capacity(spec.trials);
        for trial in 0..spec.trials {
            let (mse, runtime_ms) = if plan.is_some() {
                let (task, outcome) = outcome_iter.next().expect("one outcome per task");
                debug_assert_eq!((task.method, task.sweep_index, task.trial), (*method, *sweep_index, trial));
                outcome?
            } else {
                (f64::NAN, 0.0)
            };
            mses.push(mse);
            times.push(runtime_ms);
            rows.push(TrialRow {
                method: *method,
                sweep_index: *sweep_index,
                m: m_label.clone(),
                trial,
                seed: spec.trial_seed(trial),
                mse,
                runtime_ms,
                lambdas: lambdas.clone(),
                audit: *audit,
            });
        }
        let (mean_mse, stderr) = mean_and_stderr(&mses);
        aggregates.push(AggregateRow {
            method: *method,
            sweep_index: *sweep_index,
            m: m_label,
            m_requested: *m_requested,
            mean_mse,
            stderr,
            mean_runtime_ms: times.iter().sum::<f64>() / times.len() as f64,
            lambdas,
            audit: *audit,
        });
    }

    Ok(ExperimentOutput { spec: spec.clone(), delta: config.delta, rows, aggregates })
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"
        dataset = "synthetic"
        d = 8
        s = 2
        n = 400
        levels = [1.0, 2.0]
        segmentation = [0.5, 0.5]
        m = [1.0]
        methods = ["segmented"]
        trials = 1
        seed = 3
    "#;

    #[test]
    fn parses_defaults_and_rules() {
        let spec = ExperimentSpec::from_toml_str(SMALL).unwrap();
        assert_eq!(spec.delta, DeltaRule::Rule("0.01/n".into()));
        assert_eq!(spec.delta.resolve(400).unwrap(), 0.01 / 400.0);
        assert_eq!(spec.grid_points, DEFAULT_GRID_POINTS);
        let auto = ExperimentSpec::from_toml_str(&SMALL.replace("m = [1.0]", "m = \"auto\"")).unwrap();
        assert_eq!(auto.m.points(), vec![None]);
        let fixed = ExperimentSpec::from_toml_str(&format!("{SMALL}\ndelta = 1e-6")).unwrap();
        assert_eq!(fixed.delta.resolve(400).unwrap(), 1e-6);
        assert!(ExperimentSpec::from_toml_str(&SMALL.replace("\"segmented\"", "\"bogus\"")).is_err());
        assert!(DeltaRule::Rule("n/2".into()).resolve(10).is_err());
    }

    #[test]
    fn rejects_invalid_specs() {
        let mut spec = ExperimentSpec::from_toml_str(SMALL).unwrap();
        spec.trials = 0;
        assert!(spec.validate().is_err());
        spec.trials = 1;
        spec.methods.clear();
        assert!(spec.validate().is_err());
        spec.methods = vec![Method::Segmented];
        spec.segmentation = vec![1.0];
        assert!(spec.validate().is_err());
        spec.segmentation = vec![0.5, 0.5];
        spec.dataset = DatasetKind::Msnbc;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn one_trial_one_method_one_m() {
        let spec = ExperimentSpec::from_toml_str(SMALL).unwrap();
        let out = run_experiment(&spec).unwrap();
        assert_eq!(out.rows.len(), 1);
        assert_eq!(out.aggregates.len(), 1);
        let mut buf = Vec::new();
        out.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], CSV_HEADER.join(","));
        assert!(lines[2].starts_with("segmented,synthetic,8,2,400,0.5;0.5,1,mean,,"));
        assert!(lines[1].ends_with(",pass"));
    }

    #[test]
    fn mse_column_is_squared_error() {
        let spec = ExperimentSpec::from_toml_str(SMALL).unwrap();
        let ds = spec.build_dataset().unwrap();
        let config = spec.config_for(&ds).unwrap();
        let out = run_on_dataset(&spec, &ds, &config).unwrap();
        let params = optimize_parameters(&config, DEFAULT_GRID_POINTS, Some(1.0)).unwrap();
        let direct = run_protocol(&ds.records, &config, &params, spec.trial_seed(0)).unwrap();
        assert_eq!(out.rows[0].mse, direct.squared_error(&ds.true_w));
    }

    #[test]
    fn infeasible_pairs_are_flagged() {
        // m = 0 leaves no blankets, so even the smallest rate exceeds a tiny delta.
        let text = format!("{}\ndelta = 1e-15", SMALL.replace("m = [1.0]", "m = [0.0, 1.0]"));
        let spec = ExperimentSpec::from_toml_str(&text).unwrap();
        let out = run_experiment(&spec).unwrap();
        assert_eq!(out.aggregates.len(), 2);
        assert_eq!(out.aggregates[0].audit, Audit::Infeasible);
        assert!(out.aggregates[0].mean_mse.is_nan());
    }
}

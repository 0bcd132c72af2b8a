//! Multi-trial experiment driver.
//!
//! Runs a sweep of pipeline configurations against a stream, many seeded
//! trials each, and writes three artifacts into the output directory:
//! `trials.csv` (one row per trial), `summary.csv` (one row per
//! configuration, with cross-trial statistics), and `manifest.json`
//! (everything needed to regenerate the run; no timestamps, so reruns are
//! byte-identical). `emit_plotdata` then projects the summary into a
//! plot-ready series file per experiment kind.
//!
//! Each trial derives its own seed from the experiment seed, the
//! configuration index, and the trial index; with reshuffling on (the
//! default) the trial also replays the stream in a fresh random order whose
//! shuffle seed is recorded in its row.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::{accuracy_report, trial_stats};
use crate::oracle::{exact_count, PartitionOracle, TriangleSet};
use crate::pipeline::{run, Aggregation, Algorithm, Execution, PipelineConfig};
use crate::routing::{Assignment, NodeMap};
use crate::seeds::{self, tag};
use crate::stream::{gen_random_graph, parse_edge_list, shuffle_stream, GraphStream, NodeId};

/// Exact counting is skipped for streams longer than this; affected rows
/// carry empty accuracy columns and the manifest flags the stream.
pub const ORACLE_EDGE_LIMIT: usize = 2_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    /// Estimate distribution around the exact count, all algorithms.
    Unbiasedness,
    /// Estimate variance as k grows, against the analytic bounds.
    VarianceVsK,
    /// Accuracy as the per-worker budget grows.
    AccuracyVsBudget,
    /// Runtime against accuracy across k.
    SpeedAccuracy,
    /// Runtime against stream size at fixed average degree.
    Scalability,
    /// Adaptive-map tolerance sweep.
    ThetaSweep,
    /// Monte-Carlo partition diagnostics over random node maps.
    PartitionStats,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::Unbiasedness,
        ExperimentKind::VarianceVsK,
        ExperimentKind::AccuracyVsBudget,
        ExperimentKind::SpeedAccuracy,
        ExperimentKind::Scalability,
        ExperimentKind::ThetaSweep,
        ExperimentKind::PartitionStats,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Unbiasedness => "unbiasedness",
            ExperimentKind::VarianceVsK => "variance-vs-k",
            ExperimentKind::AccuracyVsBudget => "accuracy-vs-budget",
            ExperimentKind::SpeedAccuracy => "speed-accuracy",
            ExperimentKind::Scalability => "scalability",
            ExperimentKind::ThetaSweep => "theta-sweep",
            ExperimentKind::PartitionStats => "partition-stats",
        }
    }
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<ExperimentKind> {
        let want = s.to_ascii_lowercase().replace('_', "-");
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == want)
            .ok_or_else(|| {
                let names: Vec<&str> = ExperimentKind::ALL.iter().map(|k| k.name()).collect();
                Error::Config(format!(
                    "unknown experiment kind {s:?} (expected one of {})",
                    names.join(", ")
                ))
            })
    }
}

/// A budget given either as an absolute reservoir size or relative to the
/// stream length: `1000`, `0.02`, and `2%` all parse.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BudgetSpec {
    Absolute(usize),
    Fraction(f64),
}

impl BudgetSpec {
    /// Concrete per-worker budget for a stream of `m` edges; never below 2.
    pub fn resolve(self, m: usize) -> usize {
        let b = match self {
            BudgetSpec::Absolute(b) => b,
            BudgetSpec::Fraction(f) => (f * m as f64).round() as usize,
        };
        b.max(2)
    }
}

impl std::fmt::Display for BudgetSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BudgetSpec::Absolute(b) => write!(f, "{b}"),
            BudgetSpec::Fraction(x) => write!(f, "{x}f"),
        }
    }
}

impl FromStr for BudgetSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<BudgetSpec> {
        let bad = |s: &str| {
            Error::Config(format!(
                "bad budget {s:?} (expected an integer, a fraction like 0.02, or a percentage like 2%)"
            ))
        };
        let s = s.trim();
        if let Some(pct) = s.strip_suffix('%') {
            let v: f64 = pct.trim().parse().map_err(|_| bad(s))?;
            if !(v > 0.0 && v <= 100.0) {
                return Err(bad(s));
            }
            return Ok(BudgetSpec::Fraction(v / 100.0));
        }
        let trimmed = s.strip_suffix('f').unwrap_or(s);
        if trimmed.contains('.') || s.ends_with('f') {
            let v: f64 = trimmed.parse().map_err(|_| bad(s))?;
            if !(v > 0.0 && v <= 1.0) {
                return Err(bad(s));
            }
            return Ok(BudgetSpec::Fraction(v));
        }
        let v: usize = s.parse().map_err(|_| bad(s))?;
        if v < 2 {
            return Err(bad(s));
        }
        Ok(BudgetSpec::Absolute(v))
    }
}

#[derive(Clone, Debug)]
pub enum StreamSource {
    File {
        path: PathBuf,
        delimiter: Option<char>,
    },
    Generated {
        n: u64,
        m: u64,
    },
}

impl StreamSource {
    pub fn load(&self, seed: u64) -> Result<GraphStream> {
        match self {
            StreamSource::File { path, delimiter } => parse_edge_list(path, *delimiter),
            StreamSource::Generated { n, m } => {
                gen_random_graph(*n, *m, seeds::mix(&[seed, tag::GRAPH]))
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            StreamSource::File { path, .. } => path.display().to_string(),
            StreamSource::Generated { n, m } => format!("er-{n}-{m}"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub source: StreamSource,
    pub algorithms: Vec<Algorithm>,
    pub k_values: Vec<usize>,
    pub budgets: Vec<BudgetSpec>,
    pub theta_values: Vec<f64>,
    /// Stream sizes (edge counts) for the scalability sweep; nodes scale as
    /// m/10 to hold the average degree fixed.
    pub sizes: Vec<u64>,
    pub trials: usize,
    pub seed: u64,
    pub reshuffle: bool,
    pub aggregation: Aggregation,
    pub execution: Execution,
    pub out_dir: PathBuf,
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind, source: StreamSource, out_dir: PathBuf) -> ExperimentSpec {
        ExperimentSpec {
            kind,
            source,
            algorithms: Algorithm::ALL.to_vec(),
            k_values: vec![4],
            budgets: vec![BudgetSpec::Fraction(0.1)],
            theta_values: vec![0.2],
            sizes: vec![],
            trials: 10,
            seed: 1,
            reshuffle: true,
            aggregation: Aggregation::Eager,
            execution: Execution::Deterministic,
            out_dir,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.algorithms.is_empty()
            || self.k_values.is_empty()
            || self.budgets.is_empty()
            || self.theta_values.is_empty()
        {
            return Err(Error::Config(
                "algorithms, k values, budgets, and theta values must be non-empty".into(),
            ));
        }
        if self.kind == ExperimentKind::Scalability && self.sizes.is_empty() {
            return Err(Error::Config(
                "the scalability experiment needs at least one stream size".into(),
            ));
        }
        Ok(())
    }
}

/// One row of `trials.csv`. Accuracy columns stay empty when the oracle was
/// skipped; `rank_correlation` is also empty when undefined.
#[derive(Clone, Debug, Serialize)]
pub struct TrialRow {
    pub experiment: String,
    pub algo: String,
    pub k: usize,
    pub budget: usize,
    pub theta: f64,
    pub stream: String,
    pub edges: u64,
    pub trial: usize,
    pub trial_seed: u64,
    pub shuffle_seed: Option<u64>,
    pub global_estimate: f64,
    pub exact_global: Option<u64>,
    pub global_error: Option<f64>,
    pub local_error: Option<f64>,
    pub local_rmse: Option<f64>,
    pub rank_correlation: Option<f64>,
    pub elapsed_seconds: f64,
    pub lucky: u64,
    pub unlucky: u64,
    pub max_load: u64,
    pub evictions: u64,
    pub edge_messages: u64,
    pub update_messages: u64,
    pub violations: u64,
}

/// One row of `summary.csv`: cross-trial statistics per configuration. The
/// `variance_bound` column is filled only for fixed-order runs (reshuffling
/// off) with the oracle available, where the analytic bound applies as-is:
/// z/k for the broadcast baseline, the sum of per-worker z_i otherwise.
#[derive(Clone, Debug, Serialize)]
pub struct SummaryRow {
    pub experiment: String,
    pub algo: String,
    pub k: usize,
    pub budget: usize,
    pub theta: f64,
    pub stream: String,
    pub edges: u64,
    pub trials: usize,
    pub exact_global: Option<u64>,
    pub mean_estimate: f64,
    pub stderr_estimate: f64,
    pub variance_estimate: f64,
    pub variance_bound: Option<f64>,
    pub mean_global_error: Option<f64>,
    pub stderr_global_error: Option<f64>,
    pub mean_local_error: Option<f64>,
    pub mean_local_rmse: Option<f64>,
    pub mean_rank_correlation: Option<f64>,
    pub mean_elapsed_seconds: f64,
    pub mean_edge_messages: f64,
    pub mean_update_messages: f64,
    pub mean_evictions: f64,
    pub mean_violations: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct StreamInfo {
    pub label: String,
    pub edges: u64,
    pub oracle_computed: bool,
    pub exact_global: Option<u64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConfigInfo {
    pub algo: String,
    pub k: usize,
    pub budget: usize,
    pub theta: f64,
    pub stream: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentManifest {
    pub kind: String,
    pub source: String,
    pub seed: u64,
    pub trials: usize,
    pub reshuffle: bool,
    pub aggregation: String,
    pub execution: String,
    pub streams: Vec<StreamInfo>,
    pub configs: Vec<ConfigInfo>,
    pub files: Vec<String>,
}

pub struct ExperimentOutput {
    pub manifest: ExperimentManifest,
    pub manifest_path: PathBuf,
    pub trials_path: PathBuf,
    pub summary_path: PathBuf,
}

struct Job {
    cfg: PipelineConfig,
    stream_idx: usize,
}

struct StreamData {
    stream: GraphStream,
    label: String,
    truth: Option<Truth>,
}

struct Truth {
    set: TriangleSet,
    locals: FxHashMap<NodeId, f64>,
}

fn load_streams(spec: &ExperimentSpec) -> Result<Vec<StreamData>> {
    let sources: Vec<(StreamSource, u64)> = if spec.kind == ExperimentKind::Scalability {
        spec.sizes
            .iter()
            .map(|&m| {
                let n = (m / 10).max(10);
                (StreamSource::Generated { n, m }, seeds::mix(&[spec.seed, tag::GRAPH, m]))
            })
            .collect()
    } else {
        vec![(spec.source.clone(), spec.seed)]
    };
    sources
        .into_iter()
        .map(|(src, seed)| {
            let stream = src.load(seed)?;
            let truth = (stream.len() <= ORACLE_EDGE_LIMIT).then(|| {
                let set = exact_count(&stream);
                let locals = stream
                    .nodes()
                    .into_iter()
                    .map(|n| (n, set.local(n) as f64))
                    .collect();
                Truth { set, locals }
            });
            Ok(StreamData {
                label: src.label(),
                stream,
                truth,
            })
        })
        .collect()
}

fn build_jobs(spec: &ExperimentSpec, streams: &[StreamData]) -> Vec<Job> {
    let mut jobs = Vec::new();
    for (si, sd) in streams.iter().enumerate() {
        let m = sd.stream.len();
        for &algo in &spec.algorithms {
            // Theta only matters for the adaptive map; other algorithms get
            // a single job per (k, budget) regardless of the sweep.
            let thetas: &[f64] = if algo == Algorithm::CocosOpt {
                &spec.theta_values
            } else {
                &spec.theta_values[..1]
            };
            for &k in &spec.k_values {
                for &bs in &spec.budgets {
                    for &theta in thetas {
                        let mut cfg = PipelineConfig::new(algo, k, bs.resolve(m), spec.seed);
                        cfg.theta = theta;
                        cfg.aggregation = spec.aggregation;
                        cfg.execution = spec.execution;
                        jobs.push(Job {
                            cfg,
                            stream_idx: si,
                        });
                    }
                }
            }
        }
    }
    jobs
}

fn run_trial(
    spec: &ExperimentSpec,
    job: &Job,
    ci: usize,
    t: usize,
    sd: &StreamData,
) -> Result<TrialRow> {
    let trial_seed = seeds::mix(&[spec.seed, tag::TRIAL, ci as u64, t as u64]);
    let (stream, shuffle_seed) = if spec.reshuffle {
        let ss = seeds::mix(&[trial_seed, tag::SHUFFLE]);
        (
            std::borrow::Cow::Owned(shuffle_stream(&sd.stream, ss)),
            Some(ss),
        )
    } else {
        (std::borrow::Cow::Borrowed(&sd.stream), None)
    };
    let mut cfg = job.cfg.clone();
    cfg.seed = trial_seed;
    let report = run(&cfg, &stream)?;

    let mut row = TrialRow {
        experiment: spec.kind.name().to_string(),
        algo: cfg.algorithm.to_string(),
        k: cfg.k,
        budget: cfg.budget,
        theta: cfg.theta,
        stream: sd.label.clone(),
        edges: report.stream_len,
        trial: t,
        trial_seed,
        shuffle_seed,
        global_estimate: report.estimates.global,
        exact_global: None,
        global_error: None,
        local_error: None,
        local_rmse: None,
        rank_correlation: None,
        elapsed_seconds: report.elapsed_seconds,
        lucky: report.lucky_count,
        unlucky: report.unlucky_count,
        max_load: report.worker_loads.iter().copied().max().unwrap_or(0),
        evictions: report.total_evictions(),
        edge_messages: report.edge_messages.iter().sum(),
        update_messages: report.update_messages.iter().sum(),
        violations: report.assignment_violations,
    };
    if let Some(truth) = &sd.truth {
        let acc = accuracy_report(
            truth.set.global() as f64,
            report.estimates.global,
            &truth.locals,
            &report.estimates.locals,
        )?;
        row.exact_global = Some(truth.set.global());
        row.global_error = Some(acc.global_error);
        row.local_error = Some(acc.local_error);
        row.local_rmse = Some(acc.local_rmse);
        row.rank_correlation = acc.rank_correlation;
    }
    Ok(row)
}

/// The final node assignment of a fixed-order run is a pure function of the
/// stream order, so the analytic variance bound can be evaluated without
/// running any workers.
fn fixed_order_assignment(cfg: &PipelineConfig, s: &GraphStream) -> Option<Assignment> {
    let mut map = match cfg.algorithm {
        Algorithm::TriFly => return None,
        Algorithm::CocosSimple => NodeMap::modulo(cfg.k),
        Algorithm::CocosOpt => NodeMap::adaptive(cfg.k, cfg.theta),
    };
    for (_t, e) in s.replay() {
        map.route(e);
    }
    match map {
        NodeMap::Adaptive(m) => Some(Assignment::from_adaptive(&m)),
        NodeMap::Modulo { k, .. } => Some(Assignment::from_modulo(s.nodes(), k)),
    }
}

fn config_variance_bound(
    spec: &ExperimentSpec,
    job: &Job,
    sd: &StreamData,
    partition: Option<&PartitionOracle>,
) -> Option<f64> {
    if spec.reshuffle {
        return None;
    }
    let truth = sd.truth.as_ref()?;
    let t = sd.stream.len() as u64;
    let b = job.cfg.budget as u64;
    match job.cfg.algorithm {
        Algorithm::TriFly => {
            let pc = crate::oracle::pair_counts(&sd.stream);
            let z = crate::oracle::variance_bound(t, b, truth.set.global(), pc);
            Some(z / job.cfg.k as f64)
        }
        _ => {
            let f = fixed_order_assignment(&job.cfg, &sd.stream)?;
            let stats = partition?.stats(&f, job.cfg.k, b).ok()?;
            Some(stats.iter().map(|w| w.z).sum())
        }
    }
}

fn summarize(
    spec: &ExperimentSpec,
    jobs: &[Job],
    streams: &[StreamData],
    rows: &[TrialRow],
) -> Result<Vec<SummaryRow>> {
    // Pair classification is the expensive part; do it once per stream and
    // only when some config will use it.
    let need_partition = !spec.reshuffle
        && jobs.iter().any(|j| j.cfg.algorithm.is_partitioned());
    let partitions: Vec<Option<PartitionOracle>> = streams
        .iter()
        .map(|sd| {
            (need_partition && sd.truth.is_some()).then(|| PartitionOracle::new(&sd.stream))
        })
        .collect();

    let trials = spec.trials;
    let mut out = Vec::with_capacity(jobs.len());
    for (ci, job) in jobs.iter().enumerate() {
        let chunk = &rows[ci * trials..(ci + 1) * trials];
        let sd = &streams[job.stream_idx];
        let estimates: Vec<f64> = chunk.iter().map(|r| r.global_estimate).collect();
        let est = if trials >= 2 {
            trial_stats(&estimates)?
        } else {
            crate::metrics::TrialStats {
                mean: estimates[0],
                variance: 0.0,
                stderr: 0.0,
            }
        };
        let mean_of = |f: fn(&TrialRow) -> Option<f64>| -> Option<f64> {
            let vals: Vec<f64> = chunk.iter().filter_map(f).collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        };
        let gerr: Vec<f64> = chunk.iter().filter_map(|r| r.global_error).collect();
        let (mean_global_error, stderr_global_error) = if gerr.len() >= 2 {
            let s = trial_stats(&gerr)?;
            (Some(s.mean), Some(s.stderr))
        } else if gerr.len() == 1 {
            (Some(gerr[0]), None)
        } else {
            (None, None)
        };
        out.push(SummaryRow {
            experiment: spec.kind.name().to_string(),
            algo: job.cfg.algorithm.to_string(),
            k: job.cfg.k,
            budget: job.cfg.budget,
            theta: job.cfg.theta,
            stream: sd.label.clone(),
            edges: sd.stream.len() as u64,
            trials,
            exact_global: sd.truth.as_ref().map(|t| t.set.global()),
            mean_estimate: est.mean,
            stderr_estimate: est.stderr,
            variance_estimate: est.variance,
            variance_bound: config_variance_bound(
                spec,
                job,
                sd,
                partitions[job.stream_idx].as_ref(),
            ),
            mean_global_error,
            stderr_global_error,
            mean_local_error: mean_of(|r| r.local_error),
            mean_local_rmse: mean_of(|r| r.local_rmse),
            mean_rank_correlation: mean_of(|r| r.rank_correlation),
            mean_elapsed_seconds: chunk.iter().map(|r| r.elapsed_seconds).sum::<f64>()
                / trials as f64,
            mean_edge_messages: chunk.iter().map(|r| r.edge_messages as f64).sum::<f64>()
                / trials as f64,
            mean_update_messages: chunk.iter().map(|r| r.update_messages as f64).sum::<f64>()
                / trials as f64,
            mean_evictions: chunk.iter().map(|r| r.evictions as f64).sum::<f64>()
                / trials as f64,
            mean_violations: chunk.iter().map(|r| r.violations as f64).sum::<f64>()
                / trials as f64,
        });
    }
    Ok(out)
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| {
        Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::other(e),
        }
    })?;
    for row in rows {
        w.serialize(row).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::other(e),
        })?;
    }
    w.flush().map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    spec.validate()?;
    std::fs::create_dir_all(&spec.out_dir).map_err(|e| Error::Io {
        path: spec.out_dir.clone(),
        source: e,
    })?;
    if spec.kind == ExperimentKind::PartitionStats {
        return partition_experiment(spec);
    }

    let streams = load_streams(spec)?;
    let jobs = build_jobs(spec, &streams);

    let pairs: Vec<(usize, usize)> = (0..jobs.len())
        .flat_map(|ci| (0..spec.trials).map(move |t| (ci, t)))
        .collect();
    let rows: Vec<TrialRow> = pairs
        .par_iter()
        .map(|&(ci, t)| run_trial(spec, &jobs[ci], ci, t, &streams[jobs[ci].stream_idx]))
        .collect::<Result<Vec<_>>>()?;

    let summary = summarize(spec, &jobs, &streams, &rows)?;

    let trials_path = spec.out_dir.join("trials.csv");
    let summary_path = spec.out_dir.join("summary.csv");
    let manifest_path = spec.out_dir.join("manifest.json");
    write_csv(&trials_path, &rows)?;
    write_csv(&summary_path, &summary)?;

    let manifest = ExperimentManifest {
        kind: spec.kind.name().to_string(),
        source: spec.source.label(),
        seed: spec.seed,
        trials: spec.trials,
        reshuffle: spec.reshuffle,
        aggregation: spec.aggregation.to_string(),
        execution: spec.execution.to_string(),
        streams: streams
            .iter()
            .map(|sd| StreamInfo {
                label: sd.label.clone(),
                edges: sd.stream.len() as u64,
                oracle_computed: sd.truth.is_some(),
                exact_global: sd.truth.as_ref().map(|t| t.set.global()),
            })
            .collect(),
        configs: jobs
            .iter()
            .map(|j| ConfigInfo {
                algo: j.cfg.algorithm.to_string(),
                k: j.cfg.k,
                budget: j.cfg.budget,
                theta: j.cfg.theta,
                stream: streams[j.stream_idx].label.clone(),
            })
            .collect(),
        files: vec!["trials.csv".into(), "summary.csv".into()],
    };
    write_json(&manifest_path, &manifest)?;

    Ok(ExperimentOutput {
        manifest,
        manifest_path,
        trials_path,
        summary_path,
    })
}

/// One row of `trials.csv` for the partition diagnostics: a sampled random
/// assignment, one row per worker.
#[derive(Clone, Debug, Serialize)]
pub struct PartitionRow {
    pub k: usize,
    pub sample: usize,
    pub worker: usize,
    pub triangles: u64,
    pub load: u64,
    pub type1: u64,
    pub type2: u64,
    pub z: f64,
}

/// One row of `summary.csv` for the partition diagnostics: Monte-Carlo means
/// for worker 0 next to the closed-form expectations under a uniform random
/// node map.
#[derive(Clone, Debug, Serialize)]
pub struct PartitionSummaryRow {
    pub k: usize,
    pub samples: usize,
    pub budget: usize,
    pub mean_triangles: f64,
    pub expected_triangles: f64,
    pub mean_load: f64,
    pub expected_load: f64,
    pub mean_type1: f64,
    pub mean_type2: f64,
    pub mean_z_sum: f64,
    pub stderr_triangles: f64,
    pub stderr_load: f64,
    pub stderr_type1: f64,
    pub stderr_type2: f64,
}

fn partition_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    let stream = spec.source.load(spec.seed)?;
    if stream.len() > ORACLE_EDGE_LIMIT {
        return Err(Error::Config(format!(
            "partition diagnostics need exact enumeration; stream has {} edges (limit {})",
            stream.len(),
            ORACLE_EDGE_LIMIT
        )));
    }
    let oracle = PartitionOracle::new(&stream);
    let nodes: Vec<NodeId> = {
        let mut v: Vec<NodeId> = stream.nodes().into_iter().collect();
        v.sort_unstable();
        v
    };
    let t = oracle.stream_len();
    let tri = oracle.triangle_count();
    let budget = spec.budgets[0].resolve(stream.len()) as u64;

    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for &k in &spec.k_values {
        let mut w0_tri = Vec::with_capacity(spec.trials);
        let mut w0_load = Vec::with_capacity(spec.trials);
        let mut w0_t1 = Vec::with_capacity(spec.trials);
        let mut w0_t2 = Vec::with_capacity(spec.trials);
        let mut z_sums = Vec::with_capacity(spec.trials);
        for sample in 0..spec.trials {
            let mut rng = seeds::rng(&[spec.seed, tag::ASSIGN, k as u64, sample as u64]);
            let f = Assignment::random(nodes.iter().copied(), k, &mut rng);
            let stats = oracle.stats(&f, k, budget)?;
            for (worker, w) in stats.iter().enumerate() {
                rows.push(PartitionRow {
                    k,
                    sample,
                    worker,
                    triangles: w.triangles,
                    load: w.load,
                    type1: w.type1,
                    type2: w.type2,
                    z: w.z,
                });
            }
            w0_tri.push(stats[0].triangles as f64);
            w0_load.push(stats[0].load as f64);
            w0_t1.push(stats[0].type1 as f64);
            w0_t2.push(stats[0].type2 as f64);
            z_sums.push(stats.iter().map(|w| w.z).sum::<f64>());
        }
        let kf = k as f64;
        let st = |v: &[f64]| trial_stats(v);
        let (tri_s, load_s, t1_s, t2_s) = (st(&w0_tri)?, st(&w0_load)?, st(&w0_t1)?, st(&w0_t2)?);
        summary.push(PartitionSummaryRow {
            k,
            samples: spec.trials,
            budget: budget as usize,
            mean_triangles: tri_s.mean,
            expected_triangles: tri as f64 / kf,
            mean_load: load_s.mean,
            expected_load: (2.0 * kf - 1.0) * t as f64 / (kf * kf),
            mean_type1: t1_s.mean,
            mean_type2: t2_s.mean,
            mean_z_sum: z_sums.iter().sum::<f64>() / z_sums.len() as f64,
            stderr_triangles: tri_s.stderr,
            stderr_load: load_s.stderr,
            stderr_type1: t1_s.stderr,
            stderr_type2: t2_s.stderr,
        });
    }

    let trials_path = spec.out_dir.join("trials.csv");
    let summary_path = spec.out_dir.join("summary.csv");
    let manifest_path = spec.out_dir.join("manifest.json");
    write_csv(&trials_path, &rows)?;
    write_csv(&summary_path, &summary)?;
    let manifest = ExperimentManifest {
        kind: spec.kind.name().to_string(),
        source: spec.source.label(),
        seed: spec.seed,
        trials: spec.trials,
        reshuffle: false,
        aggregation: spec.aggregation.to_string(),
        execution: spec.execution.to_string(),
        streams: vec![StreamInfo {
            label: spec.source.label(),
            edges: stream.len() as u64,
            oracle_computed: true,
            exact_global: Some(tri),
        }],
        configs: spec
            .k_values
            .iter()
            .map(|&k| ConfigInfo {
                algo: "random-map".into(),
                k,
                budget: budget as usize,
                theta: 0.0,
                stream: spec.source.label(),
            })
            .collect(),
        files: vec!["trials.csv".into(), "summary.csv".into()],
    };
    write_json(&manifest_path, &manifest)?;
    Ok(ExperimentOutput {
        manifest,
        manifest_path,
        trials_path,
        summary_path,
    })
}

/// Projects `summary.csv` into one plot-ready series file per experiment
/// kind under `<dir>/plots/`, returning the paths written.
pub fn emit_plotdata(dir: &Path) -> Result<Vec<PathBuf>> {
    let manifest_path = dir.join("manifest.json");
    let text = std::fs::read_to_string(&manifest_path).map_err(|e| Error::Io {
        path: manifest_path.clone(),
        source: e,
    })?;
    let manifest: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("bad manifest {}: {e}", manifest_path.display())))?;
    let kind: ExperimentKind = manifest
        .get("kind")
        .and_then(|v| v.as_str())
        .ok_or_else(|| Error::Config("manifest missing kind".into()))?
        .parse()?;

    let summary_path = dir.join("summary.csv");
    let mut reader = csv::Reader::from_path(&summary_path).map_err(|e| Error::Io {
        path: summary_path.clone(),
        source: std::io::Error::other(e),
    })?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Config(format!("bad summary header: {e}")))?
        .clone();
    let records: Vec<csv::StringRecord> = reader
        .records()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Config(format!("bad summary row: {e}")))?;
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("summary.csv lacks column {name:?}")))
    };

    let plots = dir.join("plots");
    std::fs::create_dir_all(&plots).map_err(|e| Error::Io {
        path: plots.clone(),
        source: e,
    })?;

    // Column projection per kind: x axis, series key, y columns.
    let (series, x, ys): (&str, &str, Vec<&str>) = match kind {
        ExperimentKind::Unbiasedness => (
            "algo",
            "k",
            vec!["mean_estimate", "stderr_estimate", "exact_global"],
        ),
        ExperimentKind::VarianceVsK => (
            "algo",
            "k",
            vec!["variance_estimate", "variance_bound"],
        ),
        ExperimentKind::AccuracyVsBudget => (
            "algo",
            "budget",
            vec!["mean_global_error", "mean_local_error", "mean_rank_correlation"],
        ),
        ExperimentKind::SpeedAccuracy => (
            "algo",
            "k",
            vec!["mean_elapsed_seconds", "mean_global_error"],
        ),
        ExperimentKind::Scalability => ("algo", "edges", vec!["mean_elapsed_seconds"]),
        ExperimentKind::ThetaSweep => (
            "algo",
            "theta",
            vec!["mean_global_error", "mean_violations", "mean_elapsed_seconds"],
        ),
        ExperimentKind::PartitionStats => (
            "k",
            "k",
            vec![
                "mean_triangles",
                "expected_triangles",
                "mean_load",
                "expected_load",
                "mean_type1",
                "mean_type2",
            ],
        ),
    };

    let series_idx = col(series)?;
    let x_idx = col(x)?;
    let y_idx: Vec<usize> = ys.iter().map(|y| col(y)).collect::<Result<_>>()?;

    let out_path = plots.join(format!("{kind}.csv"));
    let mut w = csv::Writer::from_path(&out_path).map_err(|e| Error::Io {
        path: out_path.clone(),
        source: std::io::Error::other(e),
    })?;
    let mut header = vec!["series", x];
    header.extend(ys.iter().copied());
    w.write_record(&header).map_err(|e| Error::Io {
        path: out_path.clone(),
        source: std::io::Error::other(e),
    })?;
    for rec in &records {
        let mut row = vec![rec[series_idx].to_string(), rec[x_idx].to_string()];
        for &yi in &y_idx {
            row.push(rec[yi].to_string());
        }
        w.write_record(&row).map_err(|e| Error::Io {
            path: out_path.clone(),
            source: std::io::Error::other(e),
        })?;
    }
    w.flush().map_err(|e| Error::Io {
        path: out_path.clone(),
        source: e,
    })?;
    Ok(vec![out_path])
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn budget_spec_parses_all_forms() {
        assert_eq!("1000".parse::<BudgetSpec>().unwrap(), BudgetSpec::Absolute(1000));
        assert_eq!("2%".parse::<BudgetSpec>().unwrap(), BudgetSpec::Fraction(0.02));
        assert_eq!("0.5".parse::<BudgetSpec>().unwrap(), BudgetSpec::Fraction(0.5));
        assert!("0".parse::<BudgetSpec>().is_err());
        assert!("150%".parse::<BudgetSpec>().is_err());
        assert!("-3".parse::<BudgetSpec>().is_err());
        assert_eq!(BudgetSpec::Fraction(0.02).resolve(1000), 20);
        assert_eq!(BudgetSpec::Fraction(0.0001).resolve(100), 2);
        assert_eq!(BudgetSpec::Absolute(7).resolve(3), 7);
    }

    #[test]
    fn kind_names_round_trip() {
        for k in ExperimentKind::ALL {
            assert_eq!(k.name().parse::<ExperimentKind>().unwrap(), k);
        }
        assert!("bogus".parse::<ExperimentKind>().is_err());
    }

    #[test]
    fn unbiasedness_experiment_writes_all_artifacts() {
        let dir = tempdir().unwrap();
        let mut spec = ExperimentSpec::new(
            ExperimentKind::Unbiasedness,
            StreamSource::Generated { n: 40, m: 200 },
            dir.path().to_path_buf(),
        );
        spec.trials = 4;
        spec.k_values = vec![2];
        spec.budgets = vec![BudgetSpec::Absolute(50)];
        let out = run_experiment(&spec).unwrap();
        assert!(out.trials_path.exists());
        assert!(out.summary_path.exists());
        assert!(out.manifest_path.exists());
        assert_eq!(out.manifest.configs.len(), 3, "one per algorithm");

        let trials = std::fs::read_to_string(&out.trials_path).unwrap();
        // Header plus 3 configs x 4 trials.
        assert_eq!(trials.lines().count(), 1 + 12);
        assert!(trials.lines().next().unwrap().contains("global_estimate"));

        let paths = emit_plotdata(dir.path()).unwrap();
        assert_eq!(paths.len(), 1);
        let plot = std::fs::read_to_string(&paths[0]).unwrap();
        assert!(plot.starts_with("series,k,mean_estimate"));
        assert_eq!(plot.lines().count(), 1 + 3);
    }

    #[test]
    fn experiment_outputs_are_deterministic() {
        let make = || {
            let dir = tempdir().unwrap();
            let mut spec = ExperimentSpec::new(
                ExperimentKind::VarianceVsK,
                StreamSource::Generated { n: 30, m: 120 },
                dir.path().to_path_buf(),
            );
            spec.trials = 3;
            spec.k_values = vec![1, 2];
            spec.algorithms = vec![Algorithm::TriFly, Algorithm::CocosOpt];
            spec.budgets = vec![BudgetSpec::Absolute(30)];
            spec.reshuffle = false;
            let out = run_experiment(&spec).unwrap();
            (
                std::fs::read_to_string(&out.trials_path).unwrap(),
                std::fs::read_to_string(&out.summary_path).unwrap(),
                std::fs::read_to_string(&out.manifest_path).unwrap(),
            )
        };
        let a = make();
        let b = make();
        // Elapsed-seconds columns differ run to run; compare all other
        // fields by masking them out.
        let strip = |text: &str| -> Vec<Vec<String>> {
            let mut r = csv::Reader::from_reader(text.as_bytes());
            let headers = r.headers().unwrap().clone();
            let drop: Vec<usize> = headers
                .iter()
                .enumerate()
                .filter(|(_, h)| h.contains("elapsed"))
                .map(|(i, _)| i)
                .collect();
            r.records()
                .map(|rec| {
                    rec.unwrap()
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| !drop.contains(i))
                        .map(|(_, v)| v.to_string())
                        .collect()
                })
                .collect()
        };
        assert_eq!(strip(&a.0), strip(&b.0));
        assert_eq!(strip(&a.1), strip(&b.1));
        assert_eq!(a.2, b.2);
    }

    #[test]
    fn fixed_order_variance_bound_is_emitted() {
        let dir = tempdir().unwrap();
        let mut spec = ExperimentSpec::new(
            ExperimentKind::VarianceVsK,
            StreamSource::Generated { n: 30, m: 150 },
            dir.path().to_path_buf(),
        );
        spec.trials = 3;
        spec.k_values = vec![2];
        spec.budgets = vec![BudgetSpec::Absolute(20)];
        spec.reshuffle = false;
        let out = run_experiment(&spec).unwrap();
        let summary = std::fs::read_to_string(&out.summary_path).unwrap();
        let mut r = csv::Reader::from_reader(summary.as_bytes());
        let headers = r.headers().unwrap().clone();
        let vb = headers.iter().position(|h| h == "variance_bound").unwrap();
        for rec in r.records() {
            let rec = rec.unwrap();
            assert!(!rec[vb].is_empty(), "fixed-order runs carry the bound");
            assert!(rec[vb].parse::<f64>().unwrap() >= 0.0);
        }
    }

    #[test]
    fn partition_experiment_matches_direct_oracle() {
        let dir = tempdir().unwrap();
        let mut spec = ExperimentSpec::new(
            ExperimentKind::PartitionStats,
            StreamSource::Generated { n: 25, m: 100 },
            dir.path().to_path_buf(),
        );
        spec.trials = 5;
        spec.k_values = vec![2, 4];
        spec.budgets = vec![BudgetSpec::Absolute(50)];
        let out = run_experiment(&spec).unwrap();
        let summary = std::fs::read_to_string(&out.summary_path).unwrap();
        assert_eq!(summary.lines().count(), 1 + 2, "one row per k");
        let trials = std::fs::read_to_string(&out.trials_path).unwrap();
        // Per sample one row per worker: 5 x (2 + 4).
        assert_eq!(trials.lines().count(), 1 + 30);

        emit_plotdata(dir.path()).unwrap();
        assert!(dir.path().join("plots/partition-stats.csv").exists());
    }

    #[test]
    fn scalability_generates_one_stream_per_size() {
        let dir = tempdir().unwrap();
        let mut spec = ExperimentSpec::new(
            ExperimentKind::Scalability,
            StreamSource::Generated { n: 0, m: 0 },
            dir.path().to_path_buf(),
        );
        spec.sizes = vec![300, 500];
        spec.trials = 2;
        spec.reshuffle = false;
        spec.algorithms = vec![Algorithm::CocosOpt];
        spec.k_values = vec![2];
        spec.budgets = vec![BudgetSpec::Absolute(50)];
        let out = run_experiment(&spec).unwrap();
        assert_eq!(out.manifest.streams.len(), 2);
        assert_eq!(out.manifest.streams[0].edges, 300);
        assert_eq!(out.manifest.streams[1].edges, 500);
        assert!(out.manifest.streams.iter().all(|s| s.oracle_computed));
    }

    #[test]
    fn oracle_limit_blanks_accuracy_columns() {
        // Force the skip path with a tiny limit stand-in: use a stream just
        // over the real limit is too slow, so check the row plumbing instead
        // by asserting populated columns under the limit.
        let dir = tempdir().unwrap();
        let mut spec = ExperimentSpec::new(
            ExperimentKind::Unbiasedness,
            StreamSource::Generated { n: 20, m: 60 },
            dir.path().to_path_buf(),
        );
        spec.trials = 2;
        spec.algorithms = vec![Algorithm::CocosSimple];
        let out = run_experiment(&spec).unwrap();
        assert!(out.manifest.streams[0].oracle_computed);
        assert!(out.manifest.streams[0].exact_global.is_some());
    }
}

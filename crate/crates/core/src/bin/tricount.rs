//! Command-line front end: single runs, the exact oracle, experiment
//! sweeps, and plot-data projection.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use tricount::error::{Error, Result};
use tricount::experiment::{
    emit_plotdata, run_experiment, BudgetSpec, ExperimentKind, ExperimentSpec, StreamSource,
};
use tricount::oracle::{exact_count, pair_counts, variance_bound};
use tricount::pipeline::{run, Aggregation, Algorithm, Execution, PipelineConfig, RunReport};
use tricount::stream::{shuffle_stream, GraphStream, NodeId};

#[derive(Parser)]
#[command(
    name = "tricount",
    version,
    about = "Distributed single-pass triangle counting over edge streams"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// One pipeline run; prints a JSON report.
    Run(RunArgs),
    /// Exact triangle counts and stream diagnostics.
    Oracle(OracleArgs),
    /// Multi-trial sweep writing trials.csv, summary.csv, and manifest.json.
    Experiment(ExperimentArgs),
    /// Project an experiment directory's summary into plot-ready series.
    Plotdata(PlotdataArgs),
}

/// FromStr adapter for clap value parsers.
fn parse<T>(s: &str) -> std::result::Result<T, String>
where
    T: FromStr<Err = Error>,
{
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_gen(s: &str) -> std::result::Result<(u64, u64), String> {
    let (n, m) = s
        .split_once(',')
        .ok_or_else(|| format!("expected N,M, got {s:?}"))?;
    let n: u64 = n.trim().parse().map_err(|e| format!("bad N: {e}"))?;
    let m: u64 = m.trim().parse().map_err(|e| format!("bad M: {e}"))?;
    Ok((n, m))
}

#[derive(Args)]
struct InputArgs {
    /// Edge-list file: one "u v" pair per line, '#' or '%' comments.
    #[arg(long, conflicts_with = "gen")]
    input: Option<PathBuf>,

    /// Generate a uniform random simple graph instead: N,M.
    #[arg(long, value_name = "N,M", value_parser = parse_gen)]
    gen: Option<(u64, u64)>,

    /// Field separator for --input (default: any whitespace).
    #[arg(long)]
    delimiter: Option<char>,

    /// Shuffle the replay order once after loading, with this seed.
    #[arg(long)]
    shuffle_seed: Option<u64>,
}

impl InputArgs {
    fn source(&self) -> Result<StreamSource> {
        match (&self.input, self.gen) {
            (Some(path), None) => Ok(StreamSource::File {
                path: path.clone(),
                delimiter: self.delimiter,
            }),
            (None, Some((n, m))) => Ok(StreamSource::Generated { n, m }),
            _ => Err(Error::Config(
                "exactly one of --input or --gen is required".into(),
            )),
        }
    }

    fn load(&self, seed: u64) -> Result<GraphStream> {
        let s = self.source()?.load(seed)?;
        Ok(match self.shuffle_seed {
            Some(ss) => shuffle_stream(&s, ss),
            None => s,
        })
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    input: InputArgs,

    /// trifly, cocos-simple, or cocos-opt.
    #[arg(long, default_value = "cocos-opt", value_parser = parse::<Algorithm>)]
    algo: Algorithm,

    /// Number of workers.
    #[arg(long, default_value_t = 4)]
    k: usize,

    /// Per-worker reservoir budget: absolute, fraction, or percentage.
    #[arg(long, default_value = "10%", value_parser = parse::<BudgetSpec>)]
    budget: BudgetSpec,

    /// Adaptive-map load tolerance.
    #[arg(long, default_value_t = 0.2)]
    theta: f64,

    #[arg(long, default_value_t = 1)]
    seed: u64,

    /// eager or lazy.
    #[arg(long, default_value = "eager", value_parser = parse::<Aggregation>)]
    aggregation: Aggregation,

    /// deterministic or concurrent.
    #[arg(long = "mode", default_value = "deterministic", value_parser = parse::<Execution>)]
    mode: Execution,

    /// Record per-edge routing and per-worker discovery sets.
    #[arg(long)]
    instrument: bool,

    /// Send literal zero-sum count updates instead of suppressing them.
    #[arg(long)]
    eager_zero: bool,

    /// Also report estimates for these nodes (comma-separated), zeros kept.
    #[arg(long, value_delimiter = ',')]
    locals: Vec<NodeId>,

    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct RunOutput<'a> {
    #[serde(flatten)]
    report: &'a RunReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    selected_locals: Option<BTreeMap<NodeId, f64>>,
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let stream = args.input.load(args.seed)?;
    let mut cfg = PipelineConfig::new(
        args.algo,
        args.k,
        args.budget.resolve(stream.len()),
        args.seed,
    );
    cfg.theta = args.theta;
    cfg.aggregation = args.aggregation;
    cfg.execution = args.mode;
    cfg.instrument = args.instrument;
    cfg.eager_zero = args.eager_zero;
    let report = run(&cfg, &stream)?;

    let selected_locals = (!args.locals.is_empty()).then(|| {
        args.locals
            .iter()
            .map(|&n| (n, report.estimates.local(n)))
            .collect()
    });
    let out = RunOutput {
        report: &report,
        selected_locals,
    };
    emit_json(&out, args.out.as_deref())
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    input: InputArgs,

    /// Seed for --gen streams.
    #[arg(long, default_value_t = 1)]
    seed: u64,

    /// Report per-node counts for these nodes (comma-separated).
    #[arg(long, value_delimiter = ',')]
    locals: Vec<NodeId>,

    /// Report every node's count (sorted by node id).
    #[arg(long)]
    all_locals: bool,

    /// Also evaluate the analytic variance bound for this budget.
    #[arg(long, value_parser = parse::<BudgetSpec>)]
    budget: Option<BudgetSpec>,

    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct OracleOutput {
    edges: u64,
    nodes: u64,
    global: u64,
    pair_type1: u64,
    pair_type2: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    budget: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    variance_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    locals: Option<BTreeMap<NodeId, u64>>,
}

fn cmd_oracle(args: OracleArgs) -> Result<()> {
    let stream = args.input.load(args.seed)?;
    let set = exact_count(&stream);
    let pc = pair_counts(&stream);
    let nodes = stream.nodes();

    let locals = if args.all_locals {
        Some(nodes.iter().map(|&n| (n, set.local(n))).collect())
    } else if !args.locals.is_empty() {
        Some(args.locals.iter().map(|&n| (n, set.local(n))).collect())
    } else {
        None
    };
    let budget = args.budget.map(|b| b.resolve(stream.len()));
    let out = OracleOutput {
        edges: stream.len() as u64,
        nodes: nodes.len() as u64,
        global: set.global(),
        pair_type1: pc.type1,
        pair_type2: pc.type2,
        variance_bound: budget
            .map(|b| variance_bound(stream.len() as u64, b as u64, set.global(), pc)),
        budget,
        locals,
    };
    emit_json(&out, args.out.as_deref())
}

#[derive(Args)]
struct ExperimentArgs {
    /// Which sweep to run; defaults for the axes below depend on it.
    #[arg(long, value_parser = parse::<ExperimentKind>)]
    kind: ExperimentKind,

    #[command(flatten)]
    input: InputArgs,

    /// Algorithms to sweep (comma-separated).
    #[arg(long, value_delimiter = ',', value_parser = parse::<Algorithm>)]
    algo: Vec<Algorithm>,

    /// Worker counts to sweep (comma-separated).
    #[arg(long, value_delimiter = ',')]
    k: Vec<usize>,

    /// Budgets to sweep (comma-separated; absolute, fraction, or percent).
    #[arg(long, value_delimiter = ',', value_parser = parse::<BudgetSpec>)]
    budget: Vec<BudgetSpec>,

    /// Adaptive-map tolerances to sweep (comma-separated).
    #[arg(long, value_delimiter = ',')]
    theta: Vec<f64>,

    /// Stream sizes for the scalability sweep (comma-separated edge counts).
    #[arg(long, value_delimiter = ',')]
    sizes: Vec<u64>,

    /// Trials per configuration (0 = kind-dependent default).
    #[arg(long, default_value_t = 0)]
    trials: usize,

    #[arg(long, default_value_t = 1)]
    seed: u64,

    /// Replay the stream in its fixed arrival order instead of reshuffling
    /// per trial. Required for comparing against the analytic bounds.
    #[arg(long)]
    fixed_order: bool,

    #[arg(long, default_value = "eager", value_parser = parse::<Aggregation>)]
    aggregation: Aggregation,

    #[arg(long = "mode", default_value = "deterministic", value_parser = parse::<Execution>)]
    mode: Execution,

    /// Output directory for trials.csv, summary.csv, and manifest.json.
    #[arg(long)]
    out: PathBuf,
}

fn cmd_experiment(args: ExperimentArgs) -> Result<()> {
    let source = match args.input.source() {
        Ok(src) => src,
        // Scalability generates its own streams per size.
        Err(_) if args.kind == ExperimentKind::Scalability => {
            StreamSource::Generated { n: 0, m: 0 }
        }
        Err(e) => return Err(e),
    };
    let kind = args.kind;
    let mut spec = ExperimentSpec::new(kind, source, args.out);
    spec.seed = args.seed;
    spec.aggregation = args.aggregation;
    spec.execution = args.mode;
    spec.reshuffle = !args.fixed_order;
    spec.algorithms = defaulted(args.algo, || match kind {
        ExperimentKind::Scalability | ExperimentKind::ThetaSweep => vec![Algorithm::CocosOpt],
        _ => Algorithm::ALL.to_vec(),
    });
    spec.k_values = defaulted(args.k, || match kind {
        ExperimentKind::VarianceVsK => vec![1, 2, 4, 8, 16],
        ExperimentKind::SpeedAccuracy => vec![1, 2, 4, 8],
        ExperimentKind::Scalability => vec![8],
        ExperimentKind::PartitionStats => vec![2, 4, 8, 16],
        _ => vec![4],
    });
    spec.budgets = defaulted(args.budget, || match kind {
        ExperimentKind::AccuracyVsBudget => [0.01, 0.02, 0.05, 0.1, 0.2, 0.5]
            .into_iter()
            .map(BudgetSpec::Fraction)
            .collect(),
        _ => vec![BudgetSpec::Fraction(0.1)],
    });
    spec.theta_values = defaulted(args.theta, || match kind {
        ExperimentKind::ThetaSweep => vec![0.0, 0.1, 0.2, 0.5, 1.0],
        _ => vec![0.2],
    });
    spec.sizes = defaulted(args.sizes, || match kind {
        ExperimentKind::Scalability => vec![100_000, 300_000, 1_000_000],
        _ => vec![],
    });
    spec.trials = if args.trials > 0 {
        args.trials
    } else {
        match kind {
            ExperimentKind::Scalability => 3,
            ExperimentKind::PartitionStats => 200,
            _ => 10,
        }
    };

    let out = run_experiment(&spec)?;
    println!("wrote {}", out.trials_path.display());
    println!("wrote {}", out.summary_path.display());
    println!("wrote {}", out.manifest_path.display());
    Ok(())
}

/// Explicit command-line values win; empty axes take kind defaults.
fn defaulted<T>(given: Vec<T>, default: impl FnOnce() -> Vec<T>) -> Vec<T> {
    if given.is_empty() {
        default()
    } else {
        given
    }
}

#[derive(Args)]
struct PlotdataArgs {
    /// Experiment output directory (holding manifest.json and summary.csv).
    dir: PathBuf,
}

fn cmd_plotdata(args: PlotdataArgs) -> Result<()> {
    for path in emit_plotdata(&args.dir)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn emit_json<T: Serialize>(value: &T, out: Option<&std::path::Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    match out {
        None => {
            println!("{text}");
            Ok(())
        }
        Some(path) => std::fs::write(path, text).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        }),
    }
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Run(args) => cmd_run(args),
        Cmd::Oracle(args) => cmd_oracle(args),
        Cmd::Experiment(args) => cmd_experiment(args),
        Cmd::Plotdata(args) => cmd_plotdata(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

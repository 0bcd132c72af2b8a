//! Master -> workers -> aggregator orchestration.
//!
//! One pass over the stream, shared-nothing workers, and a single in-process
//! master/aggregator pair. Three algorithms share the machinery and differ
//! only in routing and merge scaling:
//!
//! * broadcast baseline: every worker receives and samples every edge; the
//!   aggregator averages by adding `delta / k`;
//! * partitioned (static modulo map): Lucky edges unicast to the shared
//!   owner, Unlucky edges broadcast with exactly the two endpoint owners
//!   assigned; every receiver counts, only assigned workers sample; the
//!   aggregator adds `delta` unscaled;
//! * partitioned with the adaptive load-aware map: same protocol, `f` chosen
//!   on first sight of each node.
//!
//! DETERMINISTIC execution steps workers round-robin in index order inside
//! one thread, making runs bit-for-bit reproducible. CONCURRENT execution
//! gives each worker a thread fed by a bounded FIFO; estimates agree with
//! deterministic mode up to floating-point summation order because all
//! updates are commutative additions. Workers never exchange state in either
//! mode; the only channels are master->worker and worker->aggregator.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::TriangleRecord;
use crate::routing::{Assignment, CaseTag, NodeMap, RoutingDecision};
use crate::stream::{Edge, GraphStream, NodeId};
use crate::worker::{CountKey, CountUpdate, WorkerState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    #[serde(rename = "trifly")]
    TriFly,
    CocosSimple,
    CocosOpt,
}

impl Algorithm {
    pub fn is_partitioned(self) -> bool {
        !matches!(self, Algorithm::TriFly)
    }

    pub const ALL: [Algorithm; 3] = [Algorithm::TriFly, Algorithm::CocosSimple, Algorithm::CocosOpt];
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::TriFly => "trifly",
            Algorithm::CocosSimple => "cocos-simple",
            Algorithm::CocosOpt => "cocos-opt",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Algorithm> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "trifly" | "tri-fly" => Ok(Algorithm::TriFly),
            "cocos-simple" => Ok(Algorithm::CocosSimple),
            "cocos-opt" => Ok(Algorithm::CocosOpt),
            other => Err(Error::Config(format!(
                "unknown algorithm {other:?} (expected trifly, cocos-simple, cocos-opt)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    /// Every count update travels to the aggregator as it is produced.
    Eager,
    /// Workers accumulate locally; totals move on query and are then reset.
    Lazy,
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregation::Eager => "eager",
            Aggregation::Lazy => "lazy",
        })
    }
}

impl FromStr for Aggregation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Aggregation> {
        match s.to_ascii_lowercase().as_str() {
            "eager" => Ok(Aggregation::Eager),
            "lazy" => Ok(Aggregation::Lazy),
            other => Err(Error::Config(format!(
                "unknown aggregation {other:?} (expected eager or lazy)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Execution {
    Deterministic,
    Concurrent,
}

impl fmt::Display for Execution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Execution::Deterministic => "deterministic",
            Execution::Concurrent => "concurrent",
        })
    }
}

impl FromStr for Execution {
    type Err = Error;
    fn from_str(s: &str) -> Result<Execution> {
        match s.to_ascii_lowercase().as_str() {
            "deterministic" => Ok(Execution::Deterministic),
            "concurrent" => Ok(Execution::Concurrent),
            other => Err(Error::Config(format!(
                "unknown execution mode {other:?} (expected deterministic or concurrent)"
            ))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub algorithm: Algorithm,
    pub k: usize,
    /// Per-worker storage budget; at least 2.
    pub budget: usize,
    /// Adaptive-map tolerance; only the adaptive algorithm reads it.
    pub theta: f64,
    pub seed: u64,
    pub aggregation: Aggregation,
    pub execution: Execution,
    pub instrument: bool,
    /// Send literal zero-sum count updates instead of suppressing them.
    pub eager_zero: bool,
    /// Bounded channel capacity for concurrent execution; the master blocks
    /// when a worker falls behind (messages are never dropped).
    pub channel_capacity: usize,
    /// Fault-injection hook for the structural-property tests: clears every
    /// assigned bit so no worker ever samples. Leave off.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub fault_drop_assigned: bool,
}

impl PipelineConfig {
    pub fn new(algorithm: Algorithm, k: usize, budget: usize, seed: u64) -> PipelineConfig {
        PipelineConfig {
            algorithm,
            k,
            budget,
            theta: 0.2,
            seed,
            aggregation: Aggregation::Eager,
            execution: Execution::Deterministic,
            instrument: false,
            eager_zero: false,
            channel_capacity: 4096,
            fault_drop_assigned: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.budget < 2 {
            return Err(Error::Config("budget must be at least 2".into()));
        }
        if !(self.theta >= 0.0 && self.theta.is_finite()) {
            return Err(Error::Config("theta must be finite and >= 0".into()));
        }
        if self.channel_capacity < 1 {
            return Err(Error::Config("channel capacity must be at least 1".into()));
        }
        Ok(())
    }

    fn node_map(&self) -> Option<NodeMap> {
        match self.algorithm {
            Algorithm::TriFly => None,
            Algorithm::CocosSimple => Some(NodeMap::modulo(self.k)),
            Algorithm::CocosOpt => Some(NodeMap::adaptive(self.k, self.theta)),
        }
    }

    fn scale(&self) -> f64 {
        match self.algorithm {
            Algorithm::TriFly => 1.0 / self.k as f64,
            _ => 1.0,
        }
    }
}

/// Global estimate plus sparse per-node locals (absent node = 0).
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct EstimateStore {
    pub global: f64,
    pub locals: FxHashMap<NodeId, f64>,
}

impl EstimateStore {
    pub fn local(&self, u: NodeId) -> f64 {
        self.locals.get(&u).copied().unwrap_or(0.0)
    }

    fn apply(&mut self, update: CountUpdate, scale: f64) {
        match update.key {
            CountKey::Global => self.global += update.delta * scale,
            // A zero delta adds nothing; leaving the node absent keeps the
            // map's "absent = 0" reading intact under literal zero updates.
            CountKey::Node(u) if update.delta != 0.0 => {
                *self.locals.entry(u).or_default() += update.delta * scale;
            }
            CountKey::Node(_) => {}
        }
    }
}

/// Per-worker accumulator for lazy aggregation.
#[derive(Debug, Default, Clone)]
struct LocalAcc {
    global: f64,
    locals: FxHashMap<NodeId, f64>,
}

impl LocalAcc {
    fn absorb(&mut self, u: CountUpdate) {
        match u.key {
            CountKey::Global => self.global += u.delta,
            CountKey::Node(n) => *self.locals.entry(n).or_default() += u.delta,
        }
    }

    fn is_empty(&self) -> bool {
        self.global == 0.0 && self.locals.is_empty()
    }

    /// Drains into the aggregator; returns the number of entries flushed.
    fn flush(&mut self, store: &mut EstimateStore, scale: f64, eager_zero: bool) -> u64 {
        if self.is_empty() && !eager_zero {
            return 0;
        }
        let mut entries = 1;
        store.global += self.global * scale;
        for (n, v) in self.locals.drain() {
            if v != 0.0 {
                *store.locals.entry(n).or_default() += v * scale;
            }
            entries += 1;
        }
        self.global = 0.0;
        entries
    }
}

/// Per-edge routing record kept by instrumentation for the structural
/// checks; `assigned_dropped` marks fault-injected edges.
#[derive(Clone, Copy, Debug)]
pub struct EdgeRoute {
    pub decision: RoutingDecision,
    pub assigned_dropped: bool,
}

impl EdgeRoute {
    pub fn is_assigned(&self, i: usize) -> bool {
        !self.assigned_dropped && self.decision.is_assigned(i)
    }

    pub fn is_target(&self, i: usize) -> bool {
        self.decision.is_target(i)
    }
}

#[derive(Debug, Default, Clone)]
struct WorkerInstr {
    stored: FxHashSet<Edge>,
    counted: FxHashSet<[NodeId; 3]>,
}

/// A counted triangle and the workers that emitted it.
#[derive(Clone, Debug, Serialize)]
pub struct TriangleCounter {
    pub nodes: [NodeId; 3],
    pub workers: Vec<u32>,
}

#[derive(Debug, Serialize)]
pub struct Instrumentation {
    /// Index r = number of stream edges stored by exactly r workers.
    pub replication_histogram: Vec<u64>,
    pub max_replication: u64,
    pub triangle_counters: Vec<TriangleCounter>,
    /// Per-edge routing decisions; in-memory only (bulky in JSON).
    #[serde(skip)]
    pub routes: FxHashMap<Edge, EdgeRoute>,
}

impl Instrumentation {
    pub fn counters_by_triple(&self) -> FxHashMap<[NodeId; 3], &[u32]> {
        self.triangle_counters
            .iter()
            .map(|c| (c.nodes, c.workers.as_slice()))
            .collect()
    }
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub config: PipelineConfig,
    pub stream_len: u64,
    pub estimates: EstimateStore,
    pub lucky_count: u64,
    pub unlucky_count: u64,
    pub worker_loads: Vec<u64>,
    pub worker_evictions: Vec<u64>,
    /// Edges delivered per master->worker channel.
    pub edge_messages: Vec<u64>,
    /// Count-update entries delivered per worker->aggregator channel.
    pub update_messages: Vec<u64>,
    /// Query control messages (lazy aggregation), one per worker per query.
    pub query_broadcasts: u64,
    /// Adaptive-map tolerance violations; must stay 0.
    pub assignment_violations: u64,
    pub elapsed_seconds: f64,
    /// Final node assignment snapshot (adaptive algorithm only; the static
    /// map is implied by `u mod k`).
    pub final_assignment: Option<Assignment>,
    pub instrumentation: Option<Instrumentation>,
}

impl RunReport {
    pub fn total_evictions(&self) -> u64 {
        self.worker_evictions.iter().sum()
    }

    /// A complete assignment over the given nodes, adaptive or modulo. Needed
    /// by partition diagnostics; errs for the broadcast baseline, which has
    /// no node map.
    pub fn assignment_over<I: IntoIterator<Item = NodeId>>(&self, nodes: I) -> Result<Assignment> {
        match self.config.algorithm {
            Algorithm::TriFly => Err(Error::Config(
                "the broadcast baseline has no node assignment".into(),
            )),
            Algorithm::CocosSimple => Ok(Assignment::from_modulo(nodes, self.config.k)),
            Algorithm::CocosOpt => self
                .final_assignment
                .clone()
                .ok_or_else(|| Error::Config("missing final assignment".into())),
        }
    }
}

/// Incremental deterministic pipeline: feed edges one at a time, query
/// whenever needed, finish for the full report. `run` drives this for whole
/// streams and is the only entry point for concurrent execution.
pub struct Pipeline {
    cfg: PipelineConfig,
    map: Option<NodeMap>,
    workers: Vec<WorkerState>,
    store: EstimateStore,
    scale: f64,
    lazy: Option<Vec<LocalAcc>>,
    instr_routes: Option<FxHashMap<Edge, EdgeRoute>>,
    instr_workers: Option<Vec<WorkerInstr>>,
    started: Instant,
    position: u64,
    lucky: u64,
    unlucky: u64,
    edge_messages: Vec<u64>,
    update_messages: Vec<u64>,
    query_broadcasts: u64,
    buf: Vec<CountUpdate>,
    wit: Vec<NodeId>,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig) -> Result<Pipeline> {
        cfg.validate()?;
        if cfg.execution != Execution::Deterministic {
            return Err(Error::Config(
                "incremental pipelines are deterministic; use run() for concurrent execution"
                    .into(),
            ));
        }
        Ok(Pipeline::new_unchecked(cfg))
    }

    fn new_unchecked(cfg: PipelineConfig) -> Pipeline {
        let workers = (0..cfg.k)
            .map(|i| WorkerState::new(i, cfg.budget, cfg.seed).with_eager_zero(cfg.eager_zero))
            .collect();
        Pipeline {
            map: cfg.node_map(),
            scale: cfg.scale(),
            workers,
            store: EstimateStore::default(),
            lazy: (cfg.aggregation == Aggregation::Lazy)
                .then(|| vec![LocalAcc::default(); cfg.k]),
            instr_routes: cfg.instrument.then(FxHashMap::default),
            instr_workers: cfg.instrument.then(|| vec![WorkerInstr::default(); cfg.k]),
            started: Instant::now(),
            position: 0,
            lucky: 0,
            unlucky: 0,
            edge_messages: vec![0; cfg.k],
            update_messages: vec![0; cfg.k],
            query_broadcasts: 0,
            buf: Vec::new(),
            wit: Vec::new(),
            cfg,
        }
    }

    fn route(&mut self, e: Edge) -> RoutingDecision {
        match &mut self.map {
            None => RoutingDecision::BroadcastAll,
            Some(m) => m.route(e),
        }
    }

    pub fn process_edge(&mut self, e: Edge) {
        debug_assert!(e.u < e.v, "edges must be canonical and loop-free");
        self.position += 1;
        let decision = self.route(e);
        match decision.case() {
            CaseTag::Lucky => self.lucky += 1,
            CaseTag::Unlucky => self.unlucky += 1,
            CaseTag::BroadcastAll => {}
        }
        let dropped = self.cfg.fault_drop_assigned;
        if let Some(routes) = &mut self.instr_routes {
            routes.insert(
                e,
                EdgeRoute {
                    decision,
                    assigned_dropped: dropped,
                },
            );
        }
        for i in decision.targets(self.cfg.k) {
            self.edge_messages[i] += 1;
            self.deliver(i, e, !dropped && decision.is_assigned(i));
        }
    }

    /// One worker's COUNT-then-SAMPLE step for a received edge.
    fn deliver(&mut self, i: usize, e: Edge, assigned: bool) {
        self.buf.clear();
        self.wit.clear();
        let witnesses = self.instr_workers.is_some().then_some(&mut self.wit);
        self.workers[i].count_into(e, &mut self.buf, witnesses);
        match &mut self.lazy {
            None => {
                self.update_messages[i] += self.buf.len() as u64;
                for &u in &self.buf {
                    self.store.apply(u, self.scale);
                }
            }
            Some(accs) => {
                for &u in &self.buf {
                    accs[i].absorb(u);
                }
            }
        }
        if let Some(per_worker) = &mut self.instr_workers {
            for &w in &self.wit {
                let mut nodes = [e.u, e.v, w];
                nodes.sort_unstable();
                per_worker[i].counted.insert(nodes);
            }
        }
        if assigned {
            let stored = self.workers[i].sample(e);
            if stored {
                if let Some(per_worker) = &mut self.instr_workers {
                    per_worker[i].stored.insert(e);
                }
            }
        }
    }

    /// Current estimates. Under lazy aggregation this broadcasts a query:
    /// every worker flushes its accumulator to the aggregator and resets it,
    /// so the aggregator's totals advance and nothing is double-counted.
    pub fn query(&mut self) -> EstimateStore {
        if let Some(accs) = &mut self.lazy {
            self.query_broadcasts += self.cfg.k as u64;
            for (i, acc) in accs.iter_mut().enumerate() {
                self.update_messages[i] +=
                    acc.flush(&mut self.store, self.scale, self.cfg.eager_zero);
            }
        }
        self.store.clone()
    }

    pub fn position(&self) -> u64 {
        self.position
    }

    pub fn finish(mut self) -> RunReport {
        let estimates = self.query();
        let elapsed_seconds = self.started.elapsed().as_secs_f64();
        let final_assignment = match &self.map {
            Some(NodeMap::Adaptive(m)) => Some(Assignment::from_adaptive(m)),
            _ => None,
        };
        let assignment_violations = match &self.map {
            Some(NodeMap::Adaptive(m)) => m.violations(),
            _ => 0,
        };
        let instrumentation = build_instrumentation(
            self.instr_routes.take(),
            self.instr_workers.take(),
        );
        RunReport {
            stream_len: self.position,
            estimates,
            lucky_count: self.lucky,
            unlucky_count: self.unlucky,
            worker_loads: self.workers.iter().map(|w| w.load()).collect(),
            worker_evictions: self.workers.iter().map(|w| w.evictions()).collect(),
            edge_messages: self.edge_messages,
            update_messages: self.update_messages,
            query_broadcasts: self.query_broadcasts,
            assignment_violations,
            elapsed_seconds,
            final_assignment,
            instrumentation,
            config: self.cfg,
        }
    }
}

fn build_instrumentation(
    routes: Option<FxHashMap<Edge, EdgeRoute>>,
    per_worker: Option<Vec<WorkerInstr>>,
) -> Option<Instrumentation> {
    let routes = routes?;
    let per_worker = per_worker?;
    let mut histogram = vec![0u64; per_worker.len() + 1];
    let mut max_replication = 0;
    for e in routes.keys() {
        let r = per_worker.iter().filter(|w| w.stored.contains(e)).count() as u64;
        histogram[r as usize] += 1;
        max_replication = max_replication.max(r);
    }
    let mut by_triple: FxHashMap<[NodeId; 3], Vec<u32>> = FxHashMap::default();
    for (i, w) in per_worker.iter().enumerate() {
        for &t in &w.counted {
            by_triple.entry(t).or_default().push(i as u32);
        }
    }
    let mut triangle_counters: Vec<TriangleCounter> = by_triple
        .into_iter()
        .map(|(nodes, mut workers)| {
            workers.sort_unstable();
            TriangleCounter { nodes, workers }
        })
        .collect();
    triangle_counters.sort_unstable_by_key(|c| c.nodes);
    Some(Instrumentation {
        replication_histogram: histogram,
        max_replication,
        triangle_counters,
        routes,
    })
}

/// Runs a whole stream under the given config and returns the full report.
pub fn run(cfg: &PipelineConfig, s: &GraphStream) -> Result<RunReport> {
    cfg.validate()?;
    match cfg.execution {
        Execution::Deterministic => {
            let mut p = Pipeline::new_unchecked(cfg.clone());
            for (_t, e) in s.replay() {
                p.process_edge(e);
            }
            Ok(p.finish())
        }
        Execution::Concurrent => run_concurrent(cfg, s),
    }
}

enum ToWorker {
    Edge { e: Edge, assigned: bool },
    Finish,
}

struct WorkerFinal {
    id: usize,
    load: u64,
    evictions: u64,
    update_messages: u64,
    instr: Option<WorkerInstr>,
}

fn run_concurrent(cfg: &PipelineConfig, s: &GraphStream) -> Result<RunReport> {
    let k = cfg.k;
    let started = Instant::now();

    let (agg_tx, agg_rx) = crossbeam_channel::bounded::<Vec<CountUpdate>>(cfg.channel_capacity);
    let (final_tx, final_rx) = crossbeam_channel::bounded::<WorkerFinal>(k);
    let mut edge_txs = Vec::with_capacity(k);
    let mut edge_rxs = Vec::with_capacity(k);
    for _ in 0..k {
        let (tx, rx) = crossbeam_channel::bounded::<ToWorker>(cfg.channel_capacity);
        edge_txs.push(tx);
        edge_rxs.push(rx);
    }

    let scale = cfg.scale();
    let mut report = std::thread::scope(|scope| -> Result<RunReport> {
        let agg_handle = scope.spawn({
            let agg_rx = agg_rx.clone();
            move || {
                let mut store = EstimateStore::default();
                for batch in agg_rx.iter() {
                    for u in batch {
                        store.apply(u, scale);
                    }
                }
                store
            }
        });
        drop(agg_rx);

        for (i, rx) in edge_rxs.into_iter().enumerate() {
            let agg_tx = agg_tx.clone();
            let final_tx = final_tx.clone();
            let cfg = cfg.clone();
            scope.spawn(move || {
                let mut state =
                    WorkerState::new(i, cfg.budget, cfg.seed).with_eager_zero(cfg.eager_zero);
                let mut instr = cfg.instrument.then(WorkerInstr::default);
                let lazy = cfg.aggregation == Aggregation::Lazy;
                let mut acc = LocalAcc::default();
                let mut update_messages = 0u64;
                let mut buf: Vec<CountUpdate> = Vec::new();
                let mut wit: Vec<NodeId> = Vec::new();
                for msg in rx.iter() {
                    match msg {
                        ToWorker::Edge { e, assigned } => {
                            buf.clear();
                            wit.clear();
                            state.count_into(e, &mut buf, instr.is_some().then_some(&mut wit));
                            if lazy {
                                for &u in &buf {
                                    acc.absorb(u);
                                }
                            } else if !buf.is_empty() {
                                update_messages += buf.len() as u64;
                                agg_tx.send(std::mem::take(&mut buf)).expect("aggregator alive");
                            }
                            if let Some(instr) = instr.as_mut() {
                                for &w in &wit {
                                    let mut nodes = [e.u, e.v, w];
                                    nodes.sort_unstable();
                                    instr.counted.insert(nodes);
                                }
                            }
                            if assigned && state.sample(e) {
                                if let Some(instr) = instr.as_mut() {
                                    instr.stored.insert(e);
                                }
                            }
                        }
                        ToWorker::Finish => {
                            if lazy && (!acc.is_empty() || cfg.eager_zero) {
                                let mut flush = Vec::with_capacity(1 + acc.locals.len());
                                flush.push(CountUpdate {
                                    key: CountKey::Global,
                                    delta: acc.global,
                                });
                                for (n, v) in acc.locals.drain() {
                                    flush.push(CountUpdate {
                                        key: CountKey::Node(n),
                                        delta: v,
                                    });
                                }
                                update_messages += flush.len() as u64;
                                agg_tx.send(flush).expect("aggregator alive");
                            }
                            break;
                        }
                    }
                }
                let _ = final_tx.send(WorkerFinal {
                    id: i,
                    load: state.load(),
                    evictions: state.evictions(),
                    update_messages,
                    instr,
                });
            });
        }
        drop(agg_tx);
        drop(final_tx);

        // Master: route every edge, then broadcast the finish/query message.
        let mut map = cfg.node_map();
        let mut lucky = 0u64;
        let mut unlucky = 0u64;
        let mut edge_messages = vec![0u64; k];
        let mut routes = cfg.instrument.then(FxHashMap::<Edge, EdgeRoute>::default);
        for (_t, e) in s.replay() {
            let decision = match &mut map {
                None => RoutingDecision::BroadcastAll,
                Some(m) => m.route(e),
            };
            match decision.case() {
                CaseTag::Lucky => lucky += 1,
                CaseTag::Unlucky => unlucky += 1,
                CaseTag::BroadcastAll => {}
            }
            let dropped = cfg.fault_drop_assigned;
            if let Some(routes) = &mut routes {
                routes.insert(
                    e,
                    EdgeRoute {
                        decision,
                        assigned_dropped: dropped,
                    },
                );
            }
            for i in decision.targets(k) {
                edge_messages[i] += 1;
                edge_txs[i]
                    .send(ToWorker::Edge {
                        e,
                        assigned: !dropped && decision.is_assigned(i),
                    })
                    .expect("worker alive");
            }
        }
        for tx in &edge_txs {
            tx.send(ToWorker::Finish).expect("worker alive");
        }
        drop(edge_txs);

        let mut finals: Vec<Option<WorkerFinal>> = (0..k).map(|_| None).collect();
        for _ in 0..k {
            let f = final_rx.recv().expect("worker result");
            let id = f.id;
            finals[id] = Some(f);
        }
        let estimates = agg_handle.join().expect("aggregator thread");

        let mut worker_loads = vec![0u64; k];
        let mut worker_evictions = vec![0u64; k];
        let mut update_messages = vec![0u64; k];
        let mut per_worker_instr = cfg.instrument.then(Vec::new);
        for f in finals.into_iter().map(|f| f.expect("all workers reported")) {
            worker_loads[f.id] = f.load;
            worker_evictions[f.id] = f.evictions;
            update_messages[f.id] = f.update_messages;
            if let (Some(list), Some(wi)) = (per_worker_instr.as_mut(), f.instr) {
                list.push(wi);
            }
        }
        let (final_assignment, assignment_violations) = match &map {
            Some(NodeMap::Adaptive(m)) => (Some(Assignment::from_adaptive(m)), m.violations()),
            _ => (None, 0),
        };

        Ok(RunReport {
            config: cfg.clone(),
            stream_len: s.len() as u64,
            estimates,
            lucky_count: lucky,
            unlucky_count: unlucky,
            worker_loads,
            worker_evictions,
            edge_messages,
            update_messages,
            query_broadcasts: if cfg.aggregation == Aggregation::Lazy {
                k as u64
            } else {
                0
            },
            assignment_violations,
            elapsed_seconds: 0.0, // patched below
            final_assignment,
            instrumentation: build_instrumentation(routes, per_worker_instr),
        })
    })?;
    report.elapsed_seconds = started.elapsed().as_secs_f64();
    Ok(report)
}

/// Verdicts for the structural guarantees of an instrumented run, joined
/// against the exact triangle records. For partitioned runs: P1 bounds
/// per-edge storage replication by 2, P2 requires every triangle to be
/// counted by at most one worker, P3 requires each triangle's designated
/// counter to have actually received the closing edge and been assigned both
/// earlier edges. The broadcast baseline bounds replication by k and
/// satisfies P2/P3 vacuously.
#[derive(Clone, Debug, Serialize)]
pub struct PropertyVerdicts {
    pub max_edge_replication: u64,
    pub replication_limit: u64,
    pub replication_ok: bool,
    /// Triangles counted by more than one worker (partitioned runs).
    pub multi_counted: u64,
    /// Counted triples that the oracle does not know; always a bug.
    pub phantom: u64,
    pub unique_counter_ok: bool,
    /// Oracle triangles whose designated counter could not have seen them.
    pub uncovered: u64,
    pub coverage_ok: bool,
}

impl PropertyVerdicts {
    pub fn all_ok(&self) -> bool {
        self.replication_ok && self.unique_counter_ok && self.coverage_ok
    }
}

pub fn verify_structural_properties(
    report: &RunReport,
    records: &[TriangleRecord],
) -> Result<PropertyVerdicts> {
    let instr = report
        .instrumentation
        .as_ref()
        .ok_or(Error::InstrumentationOff)?;
    let k = report.config.k as u64;
    let partitioned = report.config.algorithm.is_partitioned();

    let replication_limit = if partitioned { 2 } else { k };
    let replication_ok = instr.max_replication <= replication_limit;

    let oracle_triples: FxHashSet<[NodeId; 3]> = records.iter().map(|r| r.nodes).collect();
    let mut multi_counted = 0;
    let mut phantom = 0;
    for c in &instr.triangle_counters {
        if !oracle_triples.contains(&c.nodes) {
            phantom += 1;
        }
        if c.workers.len() > 1 {
            multi_counted += 1;
        }
    }
    let unique_counter_ok = phantom == 0 && (!partitioned || multi_counted == 0);

    let mut uncovered = 0;
    if partitioned {
        let nodes: FxHashSet<NodeId> = records.iter().flat_map(|r| r.nodes).collect();
        let assignment = report.assignment_over(nodes)?;
        for rec in records {
            let d = crate::oracle::designated_counter(rec, &assignment)?;
            let e1 = Edge::new(rec.last.u, rec.third);
            let e2 = Edge::new(rec.last.v, rec.third);
            let covered = [e1, e2].iter().all(|e| {
                instr
                    .routes
                    .get(e)
                    .is_some_and(|r| r.is_assigned(d))
            }) && instr
                .routes
                .get(&rec.last)
                .is_some_and(|r| r.is_target(d));
            if !covered {
                uncovered += 1;
            }
        }
    }
    let coverage_ok = uncovered == 0;

    Ok(PropertyVerdicts {
        max_edge_replication: instr.max_replication,
        replication_limit,
        replication_ok,
        multi_counted,
        phantom,
        unique_counter_ok,
        uncovered,
        coverage_ok,
    })
}

//! Distributed single-pass triangle counting over edge streams.
//!
//! A master routes each arriving edge to k shared-nothing workers. Every
//! worker keeps a fixed-budget edge reservoir, counts the triangles the new
//! edge closes against its reservoir (weighted by the inverse discovery
//! probability, so estimates stay unbiased), and then decides whether to
//! store the edge. An aggregator merges the workers' count updates into one
//! global and per-node estimate.
//!
//! Three routing policies are implemented: broadcast everything to everyone
//! (the baseline, which averages the k independent estimates), a static
//! `u mod k` node map that unicasts edges whose endpoints share an owner,
//! and an adaptive load-aware map built on first sight of each node. The
//! partitioned policies cut both network traffic and storage replication
//! while keeping exactly one worker able to count any given triangle.
//!
//! Besides the pipeline itself, the crate carries the tooling the claims are
//! checked with: an exact enumeration oracle ([`oracle`]), closed-form
//! variance bounds and partition diagnostics (also [`oracle`]), accuracy
//! metrics ([`metrics`]), per-run structural instrumentation
//! ([`pipeline::verify_structural_properties`]), and a multi-trial
//! experiment driver with CSV outputs ([`experiment`]).
//!
//! ```
//! use tricount::pipeline::{run, Algorithm, PipelineConfig};
//! use tricount::stream::gen_random_graph;
//!
//! let s = gen_random_graph(100, 1500, 7).unwrap();
//! let cfg = PipelineConfig::new(Algorithm::CocosOpt, 4, 500, 42);
//! let report = run(&cfg, &s).unwrap();
//! assert!(report.estimates.global > 0.0);
//! ```

pub mod error;
pub mod experiment;
pub mod metrics;
pub mod oracle;
pub mod pipeline;
pub mod routing;
pub mod seeds;
pub mod stream;
pub mod worker;

pub use error::{Error, Result};

//! Graph streams: loading, generation, preprocessing, and replay.
//!
//! A stream is an ordered sequence of undirected edges; the position of an
//! edge (1-based) is its arrival time. The estimators downstream assume a
//! simple graph, and a one-pass algorithm with bounded memory cannot dedup,
//! so all cleaning (self-loop and duplicate removal) happens here at
//! ingestion time.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::Rng;
use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds;

pub type NodeId = u64;

/// An undirected edge, stored canonically as (min, max). Self-loops are
/// rejected at construction; every API below hands out canonical edges only.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct Edge {
    pub u: NodeId,
    pub v: NodeId,
}

impl Edge {
    pub fn new(a: NodeId, b: NodeId) -> Edge {
        assert_ne!(a, b, "self-loop {a}-{b}");
        Edge {
            u: a.min(b),
            v: a.max(b),
        }
    }

    /// The endpoint that is not `x`; panics if `x` is not an endpoint.
    pub fn other(&self, x: NodeId) -> NodeId {
        if x == self.u {
            self.v
        } else {
            assert_eq!(x, self.v, "node {x} not on edge {self:?}");
            self.u
        }
    }

    pub fn touches(&self, x: NodeId) -> bool {
        self.u == x || self.v == x
    }
}

/// An in-memory edge stream. Positions are 1-based arrival times.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct GraphStream {
    edges: Vec<Edge>,
    node_count_hint: Option<u64>,
}

impl GraphStream {
    /// Wraps an edge sequence that is already simple (no duplicates, no
    /// self-loops). Use [`parse_edge_list`] for untrusted input.
    pub fn from_edges(edges: Vec<Edge>) -> GraphStream {
        GraphStream {
            edges,
            node_count_hint: None,
        }
    }

    pub fn with_node_count_hint(mut self, n: u64) -> GraphStream {
        self.node_count_hint = Some(n);
        self
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn node_count_hint(&self) -> Option<u64> {
        self.node_count_hint
    }

    /// Arrival-stamped replay: yields (position, edge) with positions 1..=len.
    pub fn replay(&self) -> impl Iterator<Item = (u64, Edge)> + '_ {
        self.edges
            .iter()
            .enumerate()
            .map(|(i, &e)| (i as u64 + 1, e))
    }

    /// Distinct endpoints, i.e. the node set of the final graph.
    pub fn nodes(&self) -> FxHashSet<NodeId> {
        let mut s = FxHashSet::default();
        for e in &self.edges {
            s.insert(e.u);
            s.insert(e.v);
        }
        s
    }

    /// Arrival position of every edge; the stream is simple so this is a map.
    pub fn arrival_times(&self) -> FxHashMap<Edge, u64> {
        self.replay().map(|(t, e)| (e, t)).collect()
    }

    /// Checks simplicity; intended for tests and ingestion code.
    pub fn validate(&self) -> Result<()> {
        let mut seen = FxHashSet::default();
        for (t, e) in self.replay() {
            if e.u == e.v {
                return Err(Error::Config(format!("self-loop at position {t}")));
            }
            if !seen.insert(e) {
                return Err(Error::Config(format!("duplicate edge {e:?} at position {t}")));
            }
        }
        Ok(())
    }
}

fn parse_node(tok: &str, path: &Path, line: usize) -> Result<NodeId> {
    if tok.starts_with('-') {
        return Err(Error::MalformedLine {
            path: path.to_owned(),
            line,
            reason: format!("negative node id {tok:?}"),
        });
    }
    tok.parse::<NodeId>().map_err(|_| Error::MalformedLine {
        path: path.to_owned(),
        line,
        reason: format!("expected a node id, got {tok:?}"),
    })
}

/// Reads a whitespace- or delimiter-separated edge list. Lines starting with
/// `#` or `%` are comments. Self-loops are dropped; duplicate undirected
/// edges are dropped keeping the first occurrence, preserving order.
pub fn parse_edge_list(path: &Path, delimiter: Option<char>) -> Result<GraphStream> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    let reader = BufReader::new(file);

    let mut edges = Vec::new();
    let mut seen: FxHashSet<Edge> = FxHashSet::default();

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with('%') {
            continue;
        }
        let mut toks = match delimiter {
            Some(d) => split_on(trimmed, d),
            None => trimmed.split_whitespace().map(str::to_owned).collect(),
        }
        .into_iter();
        let (a, b) = match (toks.next(), toks.next(), toks.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => {
                return Err(Error::MalformedLine {
                    path: path.to_owned(),
                    line: lineno,
                    reason: format!("expected exactly two fields, got {trimmed:?}"),
                })
            }
        };
        let a = parse_node(&a, path, lineno)?;
        let b = parse_node(&b, path, lineno)?;
        if a == b {
            continue; // self-loop
        }
        let e = Edge::new(a, b);
        if seen.insert(e) {
            edges.push(e);
        }
    }
    Ok(GraphStream::from_edges(edges))
}

fn split_on(s: &str, d: char) -> Vec<String> {
    s.split(d)
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Uniformly random permutation of the stream, deterministic given the seed.
/// In-memory only: shuffling inherently needs the whole stream materialized.
pub fn shuffle_stream(s: &GraphStream, seed: u64) -> GraphStream {
    let mut edges = s.edges.clone();
    let mut rng = seeds::rng(&[seed, seeds::tag::SHUFFLE]);
    // Fisher-Yates, spelled out so the permutation is pinned by our own code
    // rather than by rand's shuffle internals.
    for i in (1..edges.len()).rev() {
        let j = rng.random_range(0..=i);
        edges.swap(i, j);
    }
    GraphStream {
        edges,
        node_count_hint: s.node_count_hint,
    }
}

/// Erdős–Rényi-style G(n, m): m distinct undirected edges sampled uniformly
/// without replacement among nodes 0..n, in uniformly random arrival order,
/// deterministic given the seed.
pub fn gen_random_graph(n: u64, m: u64, seed: u64) -> Result<GraphStream> {
    let max = if n < 2 {
        0
    } else if n % 2 == 0 {
        // n(n-1)/2 without intermediate overflow: halve the even factor.
        (n / 2).checked_mul(n - 1).unwrap_or(u64::MAX)
    } else {
        ((n - 1) / 2).checked_mul(n).unwrap_or(u64::MAX)
    };
    if m > max {
        return Err(Error::TooManyEdges { n, m, max });
    }
    let mut rng = seeds::rng(&[seed, seeds::tag::GRAPH]);

    // Dense request on a small node set: enumerate all pairs and take a
    // random prefix (partial Fisher-Yates). Otherwise rejection-sample, which
    // stays fast while the sampled fraction is at most half of all pairs.
    let edges = if m > max / 2 {
        let mut all: Vec<Edge> = Vec::with_capacity(max as usize);
        for u in 0..n {
            for v in (u + 1)..n {
                all.push(Edge { u, v });
            }
        }
        for i in 0..(m as usize) {
            let j = rng.random_range(i..all.len());
            all.swap(i, j);
        }
        all.truncate(m as usize);
        all
    } else {
        let mut seen: FxHashSet<u64> = FxHashSet::default();
        seen.reserve(m as usize);
        let mut edges = Vec::with_capacity(m as usize);
        let pack = |e: Edge| -> Option<u64> {
            if n <= u32::MAX as u64 + 1 {
                Some((e.u << 32) | e.v)
            } else {
                None
            }
        };
        let mut big_seen: FxHashSet<Edge> = FxHashSet::default();
        while edges.len() < m as usize {
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            if a == b {
                continue;
            }
            let e = Edge::new(a, b);
            let fresh = match pack(e) {
                Some(key) => seen.insert(key),
                None => big_seen.insert(e),
            };
            if fresh {
                edges.push(e);
            }
        }
        edges
    };
    Ok(GraphStream {
        edges,
        node_count_hint: Some(n),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn tmp_edge_file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn parse_drops_duplicates_and_self_loops() {
        let f = tmp_edge_file("1 2\n2 1\n3 3\n1 3");
        let s = parse_edge_list(f.path(), None).unwrap();
        assert_eq!(s.edges(), &[Edge::new(1, 2), Edge::new(1, 3)]);
    }

    #[test]
    fn parse_empty_file() {
        let f = tmp_edge_file("");
        let s = parse_edge_list(f.path(), None).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn parse_preserves_order() {
        let f = tmp_edge_file("1 2\n2 3\n1 3");
        let s = parse_edge_list(f.path(), None).unwrap();
        assert_eq!(
            s.edges(),
            &[Edge::new(1, 2), Edge::new(2, 3), Edge::new(1, 3)]
        );
    }

    #[test]
    fn parse_comments_and_delimiters() {
        let f = tmp_edge_file("# header\n% more\n7,9\n9, 11\n");
        let s = parse_edge_list(f.path(), Some(',')).unwrap();
        assert_eq!(s.edges(), &[Edge::new(7, 9), Edge::new(9, 11)]);
    }

    #[test]
    fn parse_reports_line_numbers() {
        let f = tmp_edge_file("1 2\nnot an edge\n");
        let err = parse_edge_list(f.path(), None).unwrap_err();
        assert!(err.to_string().contains(":2:"), "{err}");
    }

    #[test]
    fn parse_rejects_negative_ids() {
        let f = tmp_edge_file("1 2\n-3 4\n");
        let err = parse_edge_list(f.path(), None).unwrap_err();
        assert!(err.to_string().contains("negative"), "{err}");
    }

    #[test]
    fn parse_rejects_arity_errors() {
        let f = tmp_edge_file("1 2 3\n");
        assert!(parse_edge_list(f.path(), None).is_err());
        let f = tmp_edge_file("1\n");
        assert!(parse_edge_list(f.path(), None).is_err());
    }

    #[test]
    fn shuffle_singleton_and_determinism() {
        let s = GraphStream::from_edges(vec![Edge::new(1, 2)]);
        assert_eq!(shuffle_stream(&s, 7).edges(), s.edges());

        let s = gen_random_graph(50, 200, 3).unwrap();
        let a = shuffle_stream(&s, 11);
        let b = shuffle_stream(&s, 11);
        assert_eq!(a.edges(), b.edges());
    }

    #[test]
    fn shuffle_is_uniform_over_three_edge_orders() {
        // 3 edges have 6 orders; each should appear with frequency 1/6 +- 0.02
        // over 10,000 shuffles.
        let s = GraphStream::from_edges(vec![Edge::new(1, 2), Edge::new(3, 4), Edge::new(5, 6)]);
        let mut counts: FxHashMap<Vec<Edge>, u32> = FxHashMap::default();
        let trials = 10_000;
        for seed in 0..trials {
            let out = shuffle_stream(&s, seed);
            *counts.entry(out.edges().to_vec()).or_default() += 1;
        }
        assert_eq!(counts.len(), 6);
        for (&ref order, &c) in &counts {
            let freq = f64::from(c) / f64::from(trials as u32);
            assert!(
                (freq - 1.0 / 6.0).abs() <= 0.02,
                "order {order:?} frequency {freq}"
            );
        }
    }

    #[test]
    fn shuffle_preserves_edge_multiset() {
        let s = gen_random_graph(100, 500, 9).unwrap();
        let t = shuffle_stream(&s, 1234);
        let mut a = s.edges().to_vec();
        let mut b = t.edges().to_vec();
        a.sort_unstable();
        b.sort_unstable();
        assert_eq!(a, b);
    }

    #[test]
    fn gen_forced_cases() {
        let s = gen_random_graph(2, 1, 99).unwrap();
        assert_eq!(s.edges(), &[Edge::new(0, 1)]);

        let s = gen_random_graph(4, 6, 5).unwrap();
        let mut got = s.edges().to_vec();
        got.sort_unstable();
        let mut want = Vec::new();
        for u in 0..4 {
            for v in (u + 1)..4 {
                want.push(Edge::new(u, v));
            }
        }
        assert_eq!(got, want, "K4 as a set");
    }

    #[test]
    fn gen_postconditions_and_determinism() {
        let s = gen_random_graph(1000, 5000, 1).unwrap();
        assert_eq!(s.len(), 5000);
        s.validate().unwrap();
        assert!(s.edges().iter().all(|e| e.u < e.v && e.v < 1000));
        assert_eq!(
            s.edges(),
            gen_random_graph(1000, 5000, 1).unwrap().edges()
        );
        assert_ne!(
            s.edges(),
            gen_random_graph(1000, 5000, 2).unwrap().edges()
        );
    }

    #[test]
    fn gen_rejects_oversized_requests() {
        assert!(matches!(
            gen_random_graph(4, 7, 0),
            Err(Error::TooManyEdges { max: 6, .. })
        ));
        assert!(gen_random_graph(1, 1, 0).is_err());
    }

    #[test]
    fn gen_dense_path_is_uniformish() {
        // Dense branch: n=4, m=5 of 6 pairs; each pair should be omitted
        // roughly 1/6 of the time.
        let mut omitted: FxHashMap<Edge, u32> = FxHashMap::default();
        let trials = 6000;
        for seed in 0..trials {
            let s = gen_random_graph(4, 5, seed).unwrap();
            let present: FxHashSet<Edge> = s.edges().iter().copied().collect();
            for u in 0..4 {
                for v in (u + 1)..4 {
                    let e = Edge::new(u, v);
                    if !present.contains(&e) {
                        *omitted.entry(e).or_default() += 1;
                    }
                }
            }
        }
        for (&e, &c) in &omitted {
            let freq = f64::from(c) / f64::from(trials as u32);
            assert!((freq - 1.0 / 6.0).abs() <= 0.03, "{e:?} omitted {freq}");
        }
    }

    #[test]
    fn edge_other_endpoint() {
        let e = Edge::new(9, 4);
        assert_eq!((e.u, e.v), (4, 9));
        assert_eq!(e.other(4), 9);
        assert_eq!(e.other(9), 4);
        assert!(e.touches(4) && e.touches(9) && !e.touches(5));
    }
}

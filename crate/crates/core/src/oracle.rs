//! Exact ground truth for desk-scale streams: triangle enumeration, the
//! Type-1/Type-2 shared-edge pair census, closed-form variance bounds, and
//! per-worker partition diagnostics.
//!
//! Everything here is an independent reference: brute force where the
//! definitions are brute force, and deliberately unshared with the streaming
//! estimators it judges.

use rustc_hash::{FxHashMap, FxHashSet};
use serde::Serialize;

use crate::error::Result;
use crate::routing::Assignment;
use crate::stream::{Edge, GraphStream, NodeId};

/// One triangle with its arrival structure: `nodes` sorted for identity,
/// `last` the closing (latest-arriving) edge, `third` the node opposite it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TriangleRecord {
    pub nodes: [NodeId; 3],
    pub last: Edge,
    pub third: NodeId,
}

/// Exact global and per-node triangle counts.
#[derive(Clone, Debug, Default, Serialize)]
pub struct TriangleSet {
    pub triangles: FxHashSet<[NodeId; 3]>,
    pub per_node: FxHashMap<NodeId, u64>,
}

impl TriangleSet {
    pub fn global(&self) -> u64 {
        self.triangles.len() as u64
    }

    pub fn local(&self, u: NodeId) -> u64 {
        self.per_node.get(&u).copied().unwrap_or(0)
    }
}

/// Enumerates every triangle at the arrival of its closing edge, which pins
/// `last`/`third` without a second pass. One record per triangle.
pub fn enumerate_triangles(s: &GraphStream) -> Vec<TriangleRecord> {
    let mut adj: FxHashMap<NodeId, FxHashSet<NodeId>> = FxHashMap::default();
    let mut records = Vec::new();
    for (_t, e) in s.replay() {
        if let (Some(nu), Some(nv)) = (adj.get(&e.u), adj.get(&e.v)) {
            let (small, large) = if nu.len() <= nv.len() { (nu, nv) } else { (nv, nu) };
            for &w in small {
                if large.contains(&w) {
                    let mut nodes = [e.u, e.v, w];
                    nodes.sort_unstable();
                    records.push(TriangleRecord {
                        nodes,
                        last: e,
                        third: w,
                    });
                }
            }
        }
        adj.entry(e.u).or_default().insert(e.v);
        adj.entry(e.v).or_default().insert(e.u);
    }
    records
}

/// Exact global set and exact per-node counts.
pub fn exact_count(s: &GraphStream) -> TriangleSet {
    let mut out = TriangleSet::default();
    for rec in enumerate_triangles(s) {
        out.triangles.insert(rec.nodes);
        for n in rec.nodes {
            *out.per_node.entry(n).or_default() += 1;
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairType {
    One,
    Two,
}

/// An unordered pair of distinct triangles sharing an edge, classified by
/// where their closing edges attach on the shared edge: the same endpoint is
/// Type 1, different endpoints Type 2. A pair in which either triangle
/// closes *with* the shared edge itself is neither. Indices point into the
/// record list that produced the pair.
#[derive(Clone, Copy, Debug)]
pub struct TrianglePair {
    pub a: usize,
    pub b: usize,
    pub ptype: PairType,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct PairCounts {
    pub type1: u64,
    pub type2: u64,
}

/// Brute force over all triangle pairs sharing an edge. This is the oracle
/// the variance bounds are built on; no shortcuts.
pub fn classify_pairs(records: &[TriangleRecord]) -> Vec<TrianglePair> {
    let mut by_edge: FxHashMap<Edge, Vec<usize>> = FxHashMap::default();
    for (idx, rec) in records.iter().enumerate() {
        let [a, b, c] = rec.nodes;
        for e in [Edge::new(a, b), Edge::new(a, c), Edge::new(b, c)] {
            by_edge.entry(e).or_default().push(idx);
        }
    }
    // The endpoint of the shared edge that a triangle's closing edge touches,
    // or None when the closing edge *is* the shared edge.
    let attach = |idx: usize, shared: Edge| -> Option<NodeId> {
        let last = records[idx].last;
        if last == shared {
            return None;
        }
        if shared.touches(last.u) {
            Some(last.u)
        } else {
            Some(last.v)
        }
    };
    let mut pairs = Vec::new();
    for (&shared, group) in &by_edge {
        for i in 0..group.len() {
            for j in (i + 1)..group.len() {
                let (a, b) = (group[i], group[j]);
                if let (Some(x), Some(y)) = (attach(a, shared), attach(b, shared)) {
                    pairs.push(TrianglePair {
                        a,
                        b,
                        ptype: if x == y { PairType::One } else { PairType::Two },
                    });
                }
            }
        }
    }
    pairs
}

pub fn pair_counts(s: &GraphStream) -> PairCounts {
    let records = enumerate_triangles(s);
    let mut out = PairCounts::default();
    for p in classify_pairs(&records) {
        match p.ptype {
            PairType::One => out.type1 += 1,
            PairType::Two => out.type2 += 1,
        }
    }
    out
}

/// Closed-form variance upper bound for a single budget-`b` reservoir over a
/// `t`-edge stream with `tri` triangles and the given pair counts:
///
/// ```text
/// z = max(0, tri * ((t-1)(t-2) / (b(b-1)) - 1) + (p+q) * (t-1-b) / b)
/// ```
pub fn variance_bound(t: u64, b: u64, tri: u64, pc: PairCounts) -> f64 {
    assert!(b >= 2);
    let t = t as f64;
    let b = b as f64;
    let tri = tri as f64;
    let pairs = (pc.type1 + pc.type2) as f64;
    let val = tri * ((t - 1.0) * (t - 2.0) / (b * (b - 1.0)) - 1.0) + pairs * (t - 1.0 - b) / b;
    val.max(0.0)
}

/// Per-worker slice of the partition diagnostics.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct WorkerPartition {
    /// Triangles whose unique potential counter is this worker.
    pub triangles: u64,
    /// Edges assigned to this worker (an endpoint maps here).
    pub load: u64,
    pub type1: u64,
    pub type2: u64,
    /// Per-worker variance bound from the fields above.
    pub z: f64,
}

/// The worker that can possibly count a triangle: the shared owner when the
/// closing edge is Lucky under `f`, otherwise the owner of the third node.
pub fn designated_counter(rec: &TriangleRecord, f: &Assignment) -> Result<usize> {
    let fu = f.worker_of(rec.last.u)?;
    let fv = f.worker_of(rec.last.v)?;
    if fu == fv {
        Ok(fu)
    } else {
        f.worker_of(rec.third)
    }
}

/// Precomputed stream structure for repeated partition queries. Sampling
/// thousands of random assignments against a fixed graph only pays the
/// enumeration and pair-classification cost once this way.
pub struct PartitionOracle {
    records: Vec<TriangleRecord>,
    pairs: Vec<TrianglePair>,
    edges: Vec<Edge>,
    t: u64,
}

impl PartitionOracle {
    pub fn new(s: &GraphStream) -> PartitionOracle {
        let records = enumerate_triangles(s);
        let pairs = classify_pairs(&records);
        PartitionOracle {
            pairs,
            records,
            edges: s.edges().to_vec(),
            t: s.len() as u64,
        }
    }

    pub fn records(&self) -> &[TriangleRecord] {
        &self.records
    }

    pub fn triangle_count(&self) -> u64 {
        self.records.len() as u64
    }

    pub fn pair_counts(&self) -> PairCounts {
        let mut out = PairCounts::default();
        for p in &self.pairs {
            match p.ptype {
                PairType::One => out.type1 += 1,
                PairType::Two => out.type2 += 1,
            }
        }
        out
    }

    pub fn stream_len(&self) -> u64 {
        self.t
    }

    /// Per-worker (|T_i|, l_i, p_i, q_i, z_i) under a complete assignment.
    /// l_i counts every edge with an endpoint owned by worker i over the
    /// whole stream, matching the sample calls that worker would see.
    pub fn stats(&self, f: &Assignment, k: usize, b: u64) -> Result<Vec<WorkerPartition>> {
        let mut out = vec![WorkerPartition::default(); k];

        let mut designated = Vec::with_capacity(self.records.len());
        for rec in &self.records {
            let d = designated_counter(rec, f)?;
            designated.push(d);
            out[d].triangles += 1;
        }
        for &e in &self.edges {
            let fu = f.worker_of(e.u)?;
            let fv = f.worker_of(e.v)?;
            out[fu].load += 1;
            if fv != fu {
                out[fv].load += 1;
            }
        }
        for p in &self.pairs {
            let (da, db) = (designated[p.a], designated[p.b]);
            if da == db {
                match p.ptype {
                    PairType::One => out[da].type1 += 1,
                    PairType::Two => out[da].type2 += 1,
                }
            }
        }
        for w in &mut out {
            w.z = variance_bound(
                w.load,
                b,
                w.triangles,
                PairCounts { type1: w.type1, type2: w.type2 },
            );
        }
        Ok(out)
    }
}

/// One-shot form of [`PartitionOracle::stats`].
pub fn partition_stats(
    s: &GraphStream,
    f: &Assignment,
    k: usize,
    b: u64,
) -> Result<Vec<WorkerPartition>> {
    PartitionOracle::new(s).stats(f, k, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::gen_random_graph;

    fn stream(edges: &[(NodeId, NodeId)]) -> GraphStream {
        GraphStream::from_edges(edges.iter().map(|&(a, b)| Edge::new(a, b)).collect())
    }

    #[test]
    fn exact_count_small_graphs() {
        let k3 = stream(&[(1, 2), (2, 3), (1, 3)]);
        let t = exact_count(&k3);
        assert_eq!(t.global(), 1);
        for n in 1..=3 {
            assert_eq!(t.local(n), 1);
        }

        let k4 = stream(&[(1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)]);
        let t = exact_count(&k4);
        assert_eq!(t.global(), 4);
        for n in 1..=4 {
            assert_eq!(t.local(n), 3);
        }

        let path = stream(&[(1, 2), (2, 3)]);
        assert_eq!(exact_count(&path).global(), 0);
    }

    #[test]
    fn per_node_sums_to_three_per_triangle() {
        let s = gen_random_graph(60, 500, 8).unwrap();
        let t = exact_count(&s);
        assert_eq!(t.per_node.values().sum::<u64>(), 3 * t.global());
    }

    #[test]
    fn triangle_records_pin_closing_edge() {
        let s = stream(&[(2, 3), (1, 2), (3, 1)]);
        let recs = enumerate_triangles(&s);
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].nodes, [1, 2, 3]);
        assert_eq!(recs[0].last, Edge::new(1, 3));
        assert_eq!(recs[0].third, 2);
    }

    #[test]
    fn pair_counts_no_triangles() {
        assert_eq!(pair_counts(&stream(&[(1, 2)])), PairCounts::default());
        assert_eq!(pair_counts(&GraphStream::default()), PairCounts::default());
    }

    #[test]
    fn pair_counts_type1() {
        // Closing edges (3,1) and (4,1) both attach to node 1 on the shared
        // edge {1,2}.
        let s = stream(&[(2, 3), (2, 4), (1, 2), (3, 1), (4, 1)]);
        assert_eq!(pair_counts(&s), PairCounts { type1: 1, type2: 0 });
    }

    #[test]
    fn pair_counts_type2() {
        // Closing edges (3,2) and (4,1) attach to different endpoints of the
        // shared edge {1,2}.
        let s = stream(&[(1, 3), (2, 4), (1, 2), (3, 2), (4, 1)]);
        assert_eq!(pair_counts(&s), PairCounts { type1: 0, type2: 1 });
    }

    #[test]
    fn pair_closing_with_shared_edge_is_neither_type() {
        // Both triangles close with the shared edge {1,2} itself.
        let s = stream(&[(1, 3), (2, 3), (1, 4), (2, 4), (1, 2)]);
        assert_eq!(pair_counts(&s), PairCounts::default());
    }

    #[test]
    fn variance_bound_values() {
        // Exact regime: t = b+1 zeroes both terms.
        assert_eq!(variance_bound(11, 10, 5, PairCounts { type1: 2, type2: 1 }), 0.0);
        assert_eq!(
            variance_bound(101, 10, 10, PairCounts { type1: 3, type2: 1 }),
            1126.0
        );
        assert_eq!(variance_bound(500, 10, 0, PairCounts::default()), 0.0);
    }

    #[test]
    fn variance_bound_monotone_in_budget() {
        let pc = PairCounts { type1: 7, type2: 5 };
        let mut prev = f64::INFINITY;
        for b in 2..200 {
            let z = variance_bound(200, b, 40, pc);
            assert!(z <= prev, "z must not increase with budget");
            prev = z;
        }
    }

    #[test]
    fn partition_single_worker_degeneracy() {
        let s = gen_random_graph(40, 200, 3).unwrap();
        let tri = exact_count(&s);
        let pc = pair_counts(&s);
        let f = Assignment::from_modulo(s.nodes(), 1);
        let stats = partition_stats(&s, &f, 1, 50).unwrap();
        assert_eq!(stats.len(), 1);
        assert_eq!(stats[0].triangles, tri.global());
        assert_eq!(stats[0].load, s.len() as u64);
        assert_eq!(stats[0].type1, pc.type1);
        assert_eq!(stats[0].type2, pc.type2);
        assert_eq!(
            stats[0].z,
            variance_bound(s.len() as u64, 50, tri.global(), pc)
        );
    }

    #[test]
    fn partition_triangles_sum_to_total_for_any_assignment() {
        let s = gen_random_graph(50, 400, 12).unwrap();
        let tri = exact_count(&s);
        let oracle = PartitionOracle::new(&s);
        let mut rng = crate::seeds::rng(&[99, crate::seeds::tag::ASSIGN]);
        for k in [2usize, 3, 5, 8] {
            for _ in 0..20 {
                let f = Assignment::random(s.nodes(), k, &mut rng);
                let stats = oracle.stats(&f, k, 30).unwrap();
                assert_eq!(
                    stats.iter().map(|w| w.triangles).sum::<u64>(),
                    tri.global()
                );
                // Loads: lucky edges add 1, unlucky add 2.
                let total_load: u64 = stats.iter().map(|w| w.load).sum();
                assert!(total_load >= s.len() as u64 && total_load <= 2 * s.len() as u64);
            }
        }
    }

    #[test]
    fn partition_requires_complete_assignment() {
        let s = stream(&[(1, 2), (2, 3), (1, 3)]);
        let f = Assignment::from_modulo([1u64, 2], 2);
        assert!(partition_stats(&s, &f, 2, 10).is_err());
    }
}

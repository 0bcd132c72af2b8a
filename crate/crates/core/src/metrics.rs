//! Accuracy metrics and cross-trial statistics.
//!
//! Estimate quality is judged four ways: global relative error, mean local
//! relative error, local RMSE, and Spearman rank correlation of the local
//! counts (average ranks for ties). The node universe is always the truth
//! map's key set; estimates default to 0 for nodes they never touched.

use rustc_hash::FxHashMap;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::stream::NodeId;

/// `|x - x̂| / (1 + x)`.
pub fn global_error(truth: f64, est: f64) -> f64 {
    (truth - est).abs() / (1.0 + truth)
}

fn check_universe(
    truth: &FxHashMap<NodeId, f64>,
    est: &FxHashMap<NodeId, f64>,
) -> Result<()> {
    if truth.is_empty() {
        return Err(Error::Metric("empty node set".into()));
    }
    for node in est.keys() {
        if !truth.contains_key(node) {
            return Err(Error::Metric(format!(
                "estimate for node {node} outside the truth universe"
            )));
        }
    }
    Ok(())
}

/// `(1/|V|) * sum_u |x[u] - x̂[u]| / (1 + x[u])` over the truth universe.
pub fn local_error(
    truth: &FxHashMap<NodeId, f64>,
    est: &FxHashMap<NodeId, f64>,
) -> Result<f64> {
    check_universe(truth, est)?;
    let sum: f64 = truth
        .iter()
        .map(|(u, &x)| {
            let xhat = est.get(u).copied().unwrap_or(0.0);
            (x - xhat).abs() / (1.0 + x)
        })
        .sum();
    Ok(sum / truth.len() as f64)
}

/// `sqrt((1/|V|) * sum_u (x[u] - x̂[u])^2)`.
pub fn local_rmse(
    truth: &FxHashMap<NodeId, f64>,
    est: &FxHashMap<NodeId, f64>,
) -> Result<f64> {
    check_universe(truth, est)?;
    let sum: f64 = truth
        .iter()
        .map(|(u, &x)| {
            let d = x - est.get(u).copied().unwrap_or(0.0);
            d * d
        })
        .sum();
    Ok((sum / truth.len() as f64).sqrt())
}

/// Fractional ranks (1-based), ties receiving the average of the positions
/// they span.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation: Pearson correlation of the two rank vectors.
/// `Ok(None)` when either rank vector has zero variance (all values tied),
/// where the coefficient is undefined.
pub fn rank_correlation(
    truth: &FxHashMap<NodeId, f64>,
    est: &FxHashMap<NodeId, f64>,
) -> Result<Option<f64>> {
    check_universe(truth, est)?;
    if truth.len() < 2 {
        return Err(Error::Metric("rank correlation needs at least 2 nodes".into()));
    }
    let mut nodes: Vec<NodeId> = truth.keys().copied().collect();
    nodes.sort_unstable();
    let xs: Vec<f64> = nodes.iter().map(|u| truth[u]).collect();
    let ys: Vec<f64> = nodes
        .iter()
        .map(|u| est.get(u).copied().unwrap_or(0.0))
        .collect();
    let rx = average_ranks(&xs);
    let ry = average_ranks(&ys);
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..rx.len() {
        let dx = rx[i] - mx;
        let dy = ry[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(None);
    }
    Ok(Some(sxy / (sxx * syy).sqrt()))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct TrialStats {
    pub mean: f64,
    /// Unbiased sample variance (n-1 denominator).
    pub variance: f64,
    /// `sqrt(variance / n)`.
    pub stderr: f64,
}

pub fn trial_stats(samples: &[f64]) -> Result<TrialStats> {
    if samples.len() < 2 {
        return Err(Error::Metric(format!(
            "need at least 2 samples for a variance, got {}",
            samples.len()
        )));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let ss: f64 = samples.iter().map(|x| (x - mean) * (x - mean)).sum();
    let variance = ss / (n - 1.0);
    Ok(TrialStats {
        mean,
        variance,
        stderr: (variance / n).sqrt(),
    })
}

/// All four accuracy metrics against exact truth in one bundle.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct AccuracyReport {
    pub global_error: f64,
    pub local_error: f64,
    pub local_rmse: f64,
    /// None when undefined (constant ranks).
    pub rank_correlation: Option<f64>,
}

pub fn accuracy_report(
    truth_global: f64,
    est_global: f64,
    truth_locals: &FxHashMap<NodeId, f64>,
    est_locals: &FxHashMap<NodeId, f64>,
) -> Result<AccuracyReport> {
    Ok(AccuracyReport {
        global_error: global_error(truth_global, est_global),
        local_error: local_error(truth_locals, est_locals)?,
        local_rmse: local_rmse(truth_locals, est_locals)?,
        rank_correlation: rank_correlation(truth_locals, est_locals)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(pairs: &[(NodeId, f64)]) -> FxHashMap<NodeId, f64> {
        pairs.iter().copied().collect()
    }

    #[test]
    fn global_error_values() {
        assert_eq!(global_error(10.0, 10.0), 0.0);
        assert_eq!(global_error(0.0, 1.0), 1.0);
        assert_eq!(global_error(4.0, 9.0), 1.0);
    }

    #[test]
    fn local_error_values() {
        let truth = map(&[(1, 3.0), (2, 1.0)]);
        assert_eq!(local_error(&truth, &truth).unwrap(), 0.0);

        let zeros = map(&[(1, 0.0), (2, 0.0)]);
        let est = map(&[(1, 1.0)]);
        assert_eq!(local_error(&zeros, &est).unwrap(), 0.5);

        let est = map(&[(1, 1.0), (2, 1.0)]);
        assert_eq!(local_error(&truth, &est).unwrap(), 0.25);
    }

    #[test]
    fn local_error_rejects_bad_input() {
        assert!(local_error(&map(&[]), &map(&[])).is_err());
        assert!(local_error(&map(&[(1, 1.0)]), &map(&[(9, 1.0)])).is_err());
    }

    #[test]
    fn local_rmse_values() {
        let truth = map(&[(1, 3.0), (2, 1.0)]);
        assert_eq!(local_rmse(&truth, &truth).unwrap(), 0.0);
        assert_eq!(
            local_rmse(&map(&[(1, 0.0)]), &map(&[(1, 2.0)])).unwrap(),
            2.0
        );
        let est = map(&[(1, 1.0), (2, 1.0)]);
        assert_eq!(local_rmse(&truth, &est).unwrap(), 2.0f64.sqrt());
    }

    #[test]
    fn ranks_with_ties_average() {
        assert_eq!(average_ranks(&[10.0, 20.0, 30.0]), vec![1.0, 2.0, 3.0]);
        assert_eq!(average_ranks(&[5.0, 1.0, 5.0]), vec![2.5, 1.0, 2.5]);
        assert_eq!(average_ranks(&[7.0, 7.0, 7.0]), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn rank_correlation_extremes() {
        let truth = map(&[(1, 1.0), (2, 2.0), (3, 3.0), (4, 4.0)]);
        assert_eq!(rank_correlation(&truth, &truth).unwrap(), Some(1.0));

        let reversed = map(&[(1, 9.0), (2, 7.0), (3, 5.0), (4, 3.0)]);
        assert_eq!(rank_correlation(&truth, &reversed).unwrap(), Some(-1.0));
    }

    #[test]
    fn rank_correlation_with_ties() {
        // Truth ranks (1,2,3,4); estimate ranks (1, 2.5, 2.5, 4).
        let truth = map(&[(1, 10.0), (2, 20.0), (3, 30.0), (4, 40.0)]);
        let est = map(&[(1, 1.0), (2, 5.0), (3, 5.0), (4, 9.0)]);
        let r = rank_correlation(&truth, &est).unwrap().unwrap();
        assert!((r - 0.9487).abs() <= 1e-4, "r = {r}");
    }

    #[test]
    fn rank_correlation_undefined_on_constant_ranks() {
        let truth = map(&[(1, 1.0), (2, 2.0)]);
        let flat = map(&[(1, 5.0), (2, 5.0)]);
        assert_eq!(rank_correlation(&truth, &flat).unwrap(), None);
        assert!(rank_correlation(&map(&[(1, 1.0)]), &map(&[(1, 1.0)])).is_err());
    }

    #[test]
    fn rank_correlation_invariant_under_monotone_transform() {
        let truth = map(&[(1, 3.0), (2, 1.0), (3, 4.0), (4, 1.0), (5, 5.0)]);
        let est = map(&[(1, 0.3), (2, 2.0), (3, 0.3), (4, 9.0), (5, 4.0)]);
        let r1 = rank_correlation(&truth, &est).unwrap().unwrap();
        let transformed: FxHashMap<NodeId, f64> = est
            .iter()
            .map(|(&n, &v)| (n, v * v * v + 2.0 * v + 1.0)) // strictly increasing
            .collect();
        let r2 = rank_correlation(&truth, &transformed).unwrap().unwrap();
        assert!((r1 - r2).abs() < 1e-15);
    }

    #[test]
    fn trial_stats_values() {
        let s = trial_stats(&[5.0, 5.0, 5.0]).unwrap();
        assert_eq!((s.mean, s.variance, s.stderr), (5.0, 0.0, 0.0));

        let s = trial_stats(&[0.0, 2.0]).unwrap();
        assert_eq!((s.mean, s.variance, s.stderr), (1.0, 2.0, 1.0));

        let s = trial_stats(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.mean, 2.5);
        assert!((s.variance - 5.0 / 3.0).abs() < 1e-15);
        assert!((s.stderr - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);

        assert!(trial_stats(&[1.0]).is_err());
    }
}

//! Confidence-bound (open-mindedness) estimation from one month-pair of
//! opinions and the interaction snapshot of the first month.
//!
//! For a user `u` with opinions `x(t)` and `x(t+1)`, the neighbors of `u` in
//! the month-`t` snapshot are sorted by opinion distance `|x(t) - x_v(t)|`
//! (ties by neighbor id). The estimate is the sequence of prefix averages
//!
//! ```text
//! X[0] = x(t),  X[i] = (X[i-1] + x_v[i]) / 2
//! E[0] = 1.0,   E[i] = |X[i] - x(t+1)|
//! ```
//!
//! and the selected prefix `j` is the smallest index attaining the minimum
//! error. The confidence bound is the distance to the `j`-th sorted
//! neighbor, or 0 when `j = 0`.
//!
//! `E[0]` is pinned to 1.0 rather than `|x(t) - x(t+1)|`. Since every other
//! error is at most 1, `j = 0` is only chosen when all errors equal 1.0.
//! Edge weights play no part: each neighbor enters the averaging once.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::SnapshotGraph;
use crate::model::{validate_score, MonthId, OpinionTable};
use crate::par::{self, Execution};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimationResult {
    pub user_id: String,
    pub from_month: MonthId,
    pub to_month: MonthId,
    pub cb_hat: f64,
    pub x_hat: f64,
    pub prefix_j: usize,
    pub n_neighbors: usize,
    pub abs_error: f64,
    /// Set when no neighbor was selected (`prefix_j == 0`).
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum SkipReason {
    NoOpinionAtT,
    NoOpinionAtT1,
    NoNeighbors,
}

impl SkipReason {
    pub const ALL: [SkipReason; 3] = [SkipReason::NoOpinionAtT, SkipReason::NoOpinionAtT1, SkipReason::NoNeighbors];

    pub fn as_str(self) -> &'static str {
        match self {
            SkipReason::NoOpinionAtT => "no_opinion_at_t",
            SkipReason::NoOpinionAtT1 => "no_opinion_at_t1",
            SkipReason::NoNeighbors => "no_neighbors",
        }
    }
}

/// Outcome of the prefix-averaging search, independent of graph bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrefixEstimate {
    pub prefix_j: usize,
    pub x_hat: f64,
    pub cb_hat: f64,
    pub abs_error: f64,
    pub n_neighbors: usize,
}

fn by_distance(x_t: f64) -> impl Fn(&(&str, f64), &(&str, f64)) -> Ordering {
    move |a, b| (x_t - a.1).abs().total_cmp(&(x_t - b.1).abs()).then_with(|| a.0.cmp(b.0))
}

/// Runs the estimation on explicit `(neighbor id, opinion at t)` pairs.
pub fn estimate_from_neighbors(x_t: f64, x_t1: f64, neighbors: &[(&str, f64)]) -> Result<PrefixEstimate> {
    validate_score(x_t)?;
    validate_score(x_t1)?;
    for (_, x) in neighbors {
        validate_score(*x)?;
    }
    let n = neighbors.len();
    if n == 0 {
        return Err(Error::NoNeighbors(String::new()));
    }
    let mut sorted = neighbors.to_vec();
    sorted.sort_by(by_distance(x_t));

    let mut estimates = Vec::with_capacity(n + 1);
    let mut errors = Vec::with_capacity(n + 1);
    estimates.push(x_t);
    errors.push(1.0);
    for (i, (_, x_v)) in sorted.iter().enumerate() {
        let next = (estimates[i] + x_v) / 2.0;
        estimates.push(next);
        errors.push((next - x_t1).abs());
    }

    // descending scan with `<=`: the smallest index among equal minima wins
    let mut min_e = errors[n];
    let mut j = n;
    for i in (0..=n).rev() {
        if errors[i] <= min_e {
            min_e = errors[i];
            j = i;
        }
    }

    let cb_hat = if j == 0 { 0.0 } else { (x_t - sorted[j - 1].1).abs() };
    Ok(PrefixEstimate { prefix_j: j, x_hat: estimates[j], cb_hat, abs_error: errors[j], n_neighbors: n })
}

fn neighbor_opinions<'g>(g: &'g SnapshotGraph, u: &str) -> Result<Vec<(&'g str, f64)>> {
    let nbrs = g.neighbors(u).ok_or_else(|| Error::UnknownNode(u.to_string()))?;
    Ok(nbrs.keys().map(|v| (v.as_str(), g.nodes()[v].score)).collect())
}

fn into_result(u: &str, month: MonthId, est: PrefixEstimate) -> EstimationResult {
    EstimationResult {
        user_id: u.to_string(),
        from_month: month,
        to_month: month.next(),
        cb_hat: est.cb_hat,
        x_hat: est.x_hat,
        prefix_j: est.prefix_j,
        n_neighbors: est.n_neighbors,
        abs_error: est.abs_error,
        degenerate: est.prefix_j == 0,
    }
}

/// Estimates `u`'s confidence bound between `g.month()` and the next month.
pub fn estimate_user(u: &str, g: &SnapshotGraph, x_t: f64, x_t1: f64) -> Result<EstimationResult> {
    let nbrs = neighbor_opinions(g, u)?;
    if nbrs.is_empty() {
        return Err(Error::NoNeighbors(u.to_string()));
    }
    let est = estimate_from_neighbors(x_t, x_t1, &nbrs)?;
    Ok(into_result(u, g.month(), est))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EstimationBatch {
    /// Ordered by user id.
    pub results: Vec<EstimationResult>,
    pub skipped: BTreeMap<String, SkipReason>,
}

impl EstimationBatch {
    pub fn skip_count(&self, reason: SkipReason) -> usize {
        self.skipped.values().filter(|r| **r == reason).count()
    }
}

/// Estimates every user active at `m` or `m + 1`. Users that cannot be
/// estimated are reported with the first applicable [`SkipReason`] in the
/// order: no opinion at `m`, no opinion at `m + 1`, no neighbors at `m`.
pub fn estimate_all(g: &SnapshotGraph, table: &OpinionTable, m: MonthId, exec: Execution) -> Result<EstimationBatch> {
    if g.month() != m {
        return Err(Error::MonthMismatch { expected: m, found: g.month() });
    }
    let empty = BTreeMap::new();
    let now = table.month(m).unwrap_or(&empty);
    let next = table.month(m.next()).unwrap_or(&empty);
    let universe: Vec<&str> =
        now.keys().chain(next.keys()).map(String::as_str).collect::<BTreeSet<_>>().into_iter().collect();

    let outcomes = par::map(exec, &universe, |u| -> Result<std::result::Result<EstimationResult, SkipReason>> {
        let Some(o_t) = now.get(*u) else { return Ok(Err(SkipReason::NoOpinionAtT)) };
        let Some(o_t1) = next.get(*u) else { return Ok(Err(SkipReason::NoOpinionAtT1)) };
        if g.degree(u) == 0 {
            return Ok(Err(SkipReason::NoNeighbors));
        }
        estimate_user(u, g, o_t.score, o_t1.score).map(Ok)
    });

    let mut batch = EstimationBatch::default();
    for (u, outcome) in universe.iter().zip(outcomes) {
        match outcome? {
            Ok(r) => batch.results.push(r),
            Err(reason) => {
                batch.skipped.insert(u.to_string(), reason);
            }
        }
    }
    Ok(batch)
}

pub mod oracle {
    //! Exhaustive reference for [`estimate_user`](super::estimate_user):
    //! every prefix estimate is rebuilt from scratch and the winner is picked
    //! by a lexicographic `(error, index)` minimum.

    use super::*;

    pub fn brute_force_oracle(u: &str, g: &SnapshotGraph, x_t: f64, x_t1: f64) -> Result<EstimationResult> {
        validate_score(x_t)?;
        validate_score(x_t1)?;
        let mut keyed: Vec<(f64, &str, f64)> =
            neighbor_opinions(g, u)?.into_iter().map(|(v, x)| ((x_t - x).abs(), v, x)).collect();
        if keyed.is_empty() {
            return Err(Error::NoNeighbors(u.to_string()));
        }
        keyed.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
        let n = keyed.len();

        let candidates: Vec<(f64, usize, f64)> = (0..=n)
            .map(|j| {
                let x_hat = keyed[..j].iter().fold(x_t, |acc, (_, _, x)| (acc + x) / 2.0);
                let err = if j == 0 { 1.0 } else { (x_hat - x_t1).abs() };
                (err, j, x_hat)
            })
            .collect();
        let &(abs_error, prefix_j, x_hat) =
            candidates.iter().min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))).expect("at least one candidate");
        let cb_hat = if prefix_j == 0 { 0.0 } else { keyed[prefix_j - 1].0 };

        Ok(into_result(u, g.month(), PrefixEstimate { prefix_j, x_hat, cb_hat, abs_error, n_neighbors: n }))
    }
}

#[cfg(test)]
mod tests {
    use super::oracle::brute_force_oracle;
    use super::*;
    use crate::leaning::Thresholds;
    use crate::model::{LeaningLabel, Opinion};
    use proptest::prelude::*;

    fn month() -> MonthId {
        MonthId::new(2018, 5).unwrap()
    }

    fn opinion(score: f64) -> Opinion {
        Opinion { score, label: crate::leaning::discretize(score, &Thresholds::default()).unwrap() }
    }

    fn star(x_t: f64, nbrs: &[f64]) -> SnapshotGraph {
        let mut g = SnapshotGraph::new(month());
        g.add_node("u", opinion(x_t));
        for (i, x) in nbrs.iter().enumerate() {
            let v = format!("v{i:02}");
            g.add_node(v.clone(), opinion(*x));
            g.add_edge("u", &v, 1).unwrap();
        }
        g
    }

    #[test]
    fn hand_trace_single_step() {
        let r = estimate_user("u", &star(0.2, &[0.6, 0.9]), 0.2, 0.4).unwrap();
        assert_eq!(r.prefix_j, 1);
        assert!((r.x_hat - 0.4).abs() < 1e-12);
        assert!((r.cb_hat - 0.4).abs() < 1e-12);
        assert!(r.abs_error.abs() < 1e-12);
        assert_eq!(r.n_neighbors, 2);
        assert_eq!(r.to_month, month().next());
    }

    #[test]
    fn hand_trace_coincident_values() {
        let r = estimate_user("u", &star(0.5, &[0.5]), 0.5, 0.5).unwrap();
        assert_eq!((r.prefix_j, r.x_hat, r.cb_hat, r.abs_error), (1, 0.5, 0.0, 0.0));
        assert!(!r.degenerate);
    }

    #[test]
    fn hand_trace_two_steps() {
        let r = estimate_user("u", &star(0.0, &[0.2, 0.8]), 0.0, 0.35).unwrap();
        assert_eq!(r.prefix_j, 2);
        assert!((r.x_hat - 0.45).abs() < 1e-12);
        assert!((r.cb_hat - 0.8).abs() < 1e-12);
        assert!((r.abs_error - 0.10).abs() < 1e-12);
    }

    #[test]
    fn single_neighbor_exact_partner() {
        let r = estimate_user("u", &star(0.3, &[0.7]), 0.3, 0.5).unwrap();
        assert_eq!((r.prefix_j, r.abs_error), (1, 0.0));
    }

    #[test]
    fn zero_prefix_only_when_all_errors_are_one() {
        // x(t) = 0, neighbor at 0 and x(t+1) = 1: E = (1.0, 1.0)
        let r = estimate_user("u", &star(0.0, &[0.0]), 0.0, 1.0).unwrap();
        assert_eq!(r.prefix_j, 0);
        assert!(r.degenerate);
        assert_eq!((r.cb_hat, r.x_hat, r.abs_error), (0.0, 0.0, 1.0));
    }

    #[test]
    fn equal_errors_prefer_fewer_neighbors() {
        // distances tie; X = (0.5, 0.6, 0.45): errors to 0.525 are 0.075 and 0.075
        let r = estimate_user("u", &star(0.5, &[0.7, 0.3]), 0.5, 0.525).unwrap();
        let o = brute_force_oracle("u", &star(0.5, &[0.7, 0.3]), 0.5, 0.525).unwrap();
        assert_eq!(r, o);
    }

    #[test]
    fn distance_ties_broken_by_id() {
        let g = star(0.5, &[0.7, 0.3]);
        // v00 = 0.7 and v01 = 0.3 are equidistant; v00 goes first
        let r = estimate_user("u", &g, 0.5, 0.6).unwrap();
        assert_eq!(r.prefix_j, 1);
        assert_eq!(r.cb_hat, (0.5f64 - 0.7).abs());
    }

    #[test]
    fn error_paths() {
        let g = star(0.5, &[]);
        assert!(matches!(estimate_user("u", &g, 0.5, 0.5), Err(Error::NoNeighbors(_))));
        assert!(matches!(estimate_user("zz", &g, 0.5, 0.5), Err(Error::UnknownNode(_))));
        let g = star(0.5, &[0.1]);
        assert!(matches!(estimate_user("u", &g, 1.5, 0.5), Err(Error::OutOfRange(_))));
        assert!(matches!(brute_force_oracle("u", &g, 0.5, -0.5), Err(Error::OutOfRange(_))));
    }

    fn path_table(months: &[&[(&str, f64)]]) -> OpinionTable {
        let mut t = OpinionTable::new(Thresholds::default());
        let mut m = month();
        for users in months {
            for (u, s) in *users {
                t.insert(*u, m, *s).unwrap();
            }
            m = m.next();
        }
        t
    }

    fn graph_for(t: &OpinionTable, edges: &[(&str, &str)]) -> SnapshotGraph {
        let mut g = SnapshotGraph::new(month());
        for (u, o) in t.month(month()).unwrap() {
            g.add_node(u.clone(), *o);
        }
        for (a, b) in edges {
            g.add_edge(a, b, 1).unwrap();
        }
        g
    }

    #[test]
    fn estimate_all_path() {
        let t = path_table(&[&[("a", 0.1), ("b", 0.5), ("c", 0.9)], &[("a", 0.3), ("b", 0.5), ("c", 0.7)]]);
        let g = graph_for(&t, &[("a", "b"), ("b", "c")]);
        let batch = estimate_all(&g, &t, month(), Execution::Sequential).unwrap();
        assert_eq!(batch.results.len(), 3);
        assert!(batch.skipped.is_empty());
        let ids: Vec<_> = batch.results.iter().map(|r| r.user_id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        assert_eq!(batch, estimate_all(&g, &t, month(), Execution::Parallel).unwrap());
    }

    #[test]
    fn estimate_all_skips() {
        let t = path_table(&[&[("a", 0.1), ("b", 0.5), ("iso", 0.2)], &[("b", 0.4), ("iso", 0.3), ("late", 0.6)]]);
        let g = graph_for(&t, &[("a", "b")]);
        let batch = estimate_all(&g, &t, month(), Execution::Sequential).unwrap();
        assert_eq!(batch.results.len(), 1);
        assert_eq!(batch.skipped["a"], SkipReason::NoOpinionAtT1);
        assert_eq!(batch.skipped["iso"], SkipReason::NoNeighbors);
        assert_eq!(batch.skipped["late"], SkipReason::NoOpinionAtT);
        assert_eq!(batch.skip_count(SkipReason::NoNeighbors), 1);

        let wrong = SnapshotGraph::new(month().next());
        assert!(matches!(estimate_all(&wrong, &t, month(), Execution::Sequential), Err(Error::MonthMismatch { .. })));
    }

    #[test]
    fn edge_weights_ignored() {
        let t = path_table(&[&[("a", 0.1), ("b", 0.5), ("c", 0.9)], &[("a", 0.3), ("b", 0.5), ("c", 0.7)]]);
        let g = graph_for(&t, &[("a", "b"), ("b", "c")]);
        let mut heavy = g.clone();
        heavy.add_edge("a", "b", 7).unwrap();
        assert_eq!(
            estimate_all(&g, &t, month(), Execution::Sequential).unwrap(),
            estimate_all(&heavy, &t, month(), Execution::Sequential).unwrap()
        );
    }

    #[test]
    fn leaning_labels_do_not_matter() {
        let mut g = star(0.2, &[0.6]);
        g.add_node("v00", Opinion { score: 0.6, label: LeaningLabel::Democrat });
        assert_eq!(estimate_user("u", &g, 0.2, 0.4).unwrap().prefix_j, 1);
    }

    proptest! {
        #[test]
        fn matches_oracle(
            x_t in 0.0f64..=1.0,
            x_t1 in 0.0f64..=1.0,
            nbrs in proptest::collection::vec(0.0f64..=1.0, 1..20),
        ) {
            let g = star(x_t, &nbrs);
            let r = estimate_user("u", &g, x_t, x_t1).unwrap();
            prop_assert_eq!(&r, &brute_force_oracle("u", &g, x_t, x_t1).unwrap());
            prop_assert!((0.0..=1.0).contains(&r.cb_hat));
            prop_assert!((0.0..=1.0).contains(&r.x_hat));
            prop_assert!(r.prefix_j <= r.n_neighbors);
            prop_assert_eq!(r.prefix_j == 0, r.abs_error == 1.0 && r.degenerate);
        }

        #[test]
        fn storage_order_irrelevant(
            x_t in 0.0f64..=1.0,
            x_t1 in 0.0f64..=1.0,
            nbrs in proptest::collection::vec((0.0f64..=1.0, 0usize..1000), 1..15),
        ) {
            let pairs: Vec<(String, f64)> = nbrs.iter().enumerate().map(|(i, (x, _))| (format!("v{i:02}"), *x)).collect();
            let as_refs: Vec<(&str, f64)> = pairs.iter().map(|(v, x)| (v.as_str(), *x)).collect();
            let mut shuffled = as_refs.clone();
            shuffled.sort_by_key(|(v, _)| nbrs[v[1..].parse::<usize>().unwrap()].1);
            prop_assert_eq!(
                estimate_from_neighbors(x_t, x_t1, &as_refs).unwrap(),
                estimate_from_neighbors(x_t, x_t1, &shuffled).unwrap()
            );
        }
    }
}

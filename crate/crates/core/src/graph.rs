//! Monthly interaction snapshots and their network statistics.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{InteractionRecord, LeaningLabel, MonthId, Opinion, OpinionTable};
use crate::par::{self, Execution};

/// Undirected weighted interaction graph of one month. Nodes carry the
/// user's opinion for that month.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotGraph {
    month: MonthId,
    nodes: BTreeMap<String, Opinion>,
    adjacency: BTreeMap<String, BTreeMap<String, u64>>,
}

impl SnapshotGraph {
    pub fn new(month: MonthId) -> Self {
        SnapshotGraph { month, nodes: BTreeMap::new(), adjacency: BTreeMap::new() }
    }

    pub fn month(&self) -> MonthId {
        self.month
    }

    pub fn add_node(&mut self, user: impl Into<String>, opinion: Opinion) {
        let user = user.into();
        self.adjacency.entry(user.clone()).or_default();
        self.nodes.insert(user, opinion);
    }

    /// Adds `weight` to the edge {a, b}, creating it if needed.
    pub fn add_edge(&mut self, a: &str, b: &str, weight: u64) -> Result<()> {
        if a == b {
            return Err(Error::SelfInteraction(a.to_string()));
        }
        if weight == 0 {
            return Err(Error::NonPositiveCount);
        }
        for u in [a, b] {
            if !self.nodes.contains_key(u) {
                return Err(Error::UnknownNode(u.to_string()));
            }
        }
        *self.adjacency.get_mut(a).unwrap().entry(b.to_string()).or_insert(0) += weight;
        *self.adjacency.get_mut(b).unwrap().entry(a.to_string()).or_insert(0) += weight;
        Ok(())
    }

    pub fn nodes(&self) -> &BTreeMap<String, Opinion> {
        &self.nodes
    }

    pub fn opinion(&self, user: &str) -> Option<Opinion> {
        self.nodes.get(user).copied()
    }

    /// Neighbors of `user` with edge weights, ordered by identifier.
    pub fn neighbors(&self, user: &str) -> Option<&BTreeMap<String, u64>> {
        self.adjacency.get(user)
    }

    pub fn degree(&self, user: &str) -> usize {
        self.adjacency.get(user).map_or(0, BTreeMap::len)
    }

    /// Each unordered edge once, as `(a, b, weight)` with `a < b`.
    pub fn edges(&self) -> impl Iterator<Item = (&str, &str, u64)> + '_ {
        self.adjacency.iter().flat_map(|(a, nbrs)| {
            nbrs.iter().filter(move |(b, _)| a.as_str() < b.as_str()).map(move |(b, w)| (a.as_str(), b.as_str(), *w))
        })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.values().map(BTreeMap::len).sum::<usize>() / 2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotBuild {
    pub graph: SnapshotGraph,
    /// Records with at least one endpoint lacking an opinion in the month.
    pub dropped_records: usize,
}

/// Nodes are every user holding an opinion in `month`; records touching an
/// unscored user are dropped and counted.
pub fn build_snapshot(month: MonthId, records: &[InteractionRecord], table: &OpinionTable) -> Result<SnapshotBuild> {
    let mut graph = SnapshotGraph::new(month);
    if let Some(users) = table.month(month) {
        for (u, o) in users {
            graph.add_node(u.clone(), *o);
        }
    }
    let mut dropped_records = 0;
    for r in records {
        if r.month != month {
            return Err(Error::MonthMismatch { expected: month, found: r.month });
        }
        if graph.nodes.contains_key(r.user_a()) && graph.nodes.contains_key(r.user_b()) {
            graph.add_edge(r.user_a(), r.user_b(), r.count())?;
        } else {
            dropped_records += 1;
        }
    }
    Ok(SnapshotBuild { graph, dropped_records })
}

/// Groups records by month and builds one snapshot per month present in
/// either the records or the table.
pub fn build_snapshots(
    records: &[InteractionRecord],
    table: &OpinionTable,
    exec: Execution,
) -> Result<Vec<SnapshotBuild>> {
    let mut by_month: BTreeMap<MonthId, Vec<InteractionRecord>> = table.months().map(|m| (m, Vec::new())).collect();
    for r in records {
        by_month.entry(r.month).or_default().push(r.clone());
    }
    let months: Vec<_> = by_month.into_iter().collect();
    par::map(exec, &months, |(m, recs)| build_snapshot(*m, recs, table)).into_iter().collect()
}

/// One row of the per-month network statistics table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NetworkStats {
    pub n_nodes: usize,
    pub n_rep: usize,
    pub n_dem: usize,
    pub n_neu: usize,
    pub n_edges: usize,
    /// 2E / N
    pub avg_degree: f64,
    /// E / N; reported alongside 2E / N because published tables use both conventions.
    pub edges_per_node: f64,
    /// `None` when undefined (no edges, or a single populated category).
    pub assortativity: Option<f64>,
}

/// Counts and degree fields; `assortativity` is left `None`.
pub fn degree_stats(g: &SnapshotGraph) -> NetworkStats {
    let mut counts = [0usize; 3];
    for o in g.nodes.values() {
        counts[o.label.index()] += 1;
    }
    let n = g.node_count();
    let e = g.edge_count();
    let (avg_degree, edges_per_node) =
        if n == 0 { (0.0, 0.0) } else { (2.0 * e as f64 / n as f64, e as f64 / n as f64) };
    NetworkStats {
        n_nodes: n,
        n_dem: counts[LeaningLabel::Democrat.index()],
        n_neu: counts[LeaningLabel::Neutral.index()],
        n_rep: counts[LeaningLabel::Republican.index()],
        n_edges: e,
        avg_degree,
        edges_per_node,
        assortativity: None,
    }
}

/// Newman's categorical assortativity over leaning labels, unweighted.
///
/// Each edge adds one endpoint count at (label_u, label_v) and one at
/// (label_v, label_u); the mixing matrix is that count table over 2E. The
/// result is evaluated from integer counts so the degenerate case
/// (`sum a_i b_i = 1`) is detected exactly.
pub fn categorical_assortativity(g: &SnapshotGraph) -> Result<f64> {
    let mut mix = [[0u64; 3]; 3];
    let mut total = 0u64;
    for (a, b, _) in g.edges() {
        let la = g.nodes[a].label.index();
        let lb = g.nodes[b].label.index();
        mix[la][lb] += 1;
        mix[lb][la] += 1;
        total += 2;
    }
    if total == 0 {
        return Err(Error::NoEdges);
    }
    let trace: u128 = (0..3).map(|i| u128::from(mix[i][i])).sum();
    let sum_sq: u128 = mix
        .iter()
        .map(|row| {
            let s: u128 = row.iter().map(|&c| u128::from(c)).sum();
            s * s
        })
        .sum();
    let total = u128::from(total);
    let denom = total * total - sum_sq;
    if denom == 0 {
        return Err(Error::DegenerateAssortativity);
    }
    let numer = (total * trace) as f64 - sum_sq as f64;
    Ok((numer / denom as f64).clamp(-1.0, 1.0))
}

pub fn network_stats(g: &SnapshotGraph) -> NetworkStats {
    NetworkStats { assortativity: categorical_assortativity(g).ok(), ..degree_stats(g) }
}

/// Cross-month arithmetic means of [`NetworkStats`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStats {
    pub n_nodes: f64,
    pub n_rep: f64,
    pub n_dem: f64,
    pub n_neu: f64,
    pub n_edges: f64,
    pub avg_degree: f64,
    pub edges_per_node: f64,
    /// Mean over the months where assortativity is defined.
    pub assortativity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsReport {
    pub per_month: Vec<(MonthId, NetworkStats)>,
    pub mean: MeanStats,
}

pub fn monthly_stats_report(graphs: &[SnapshotGraph], exec: Execution) -> Result<StatsReport> {
    if graphs.is_empty() {
        return Err(Error::EmptySequence);
    }
    let per_month: Vec<_> = par::map(exec, graphs, |g| (g.month(), network_stats(g)));
    let k = per_month.len() as f64;
    let avg = |f: fn(&NetworkStats) -> f64| per_month.iter().map(|(_, s)| f(s)).sum::<f64>() / k;
    let defined: Vec<f64> = per_month.iter().filter_map(|(_, s)| s.assortativity).collect();
    let mean = MeanStats {
        n_nodes: avg(|s| s.n_nodes as f64),
        n_rep: avg(|s| s.n_rep as f64),
        n_dem: avg(|s| s.n_dem as f64),
        n_neu: avg(|s| s.n_neu as f64),
        n_edges: avg(|s| s.n_edges as f64),
        avg_degree: avg(|s| s.avg_degree),
        edges_per_node: avg(|s| s.edges_per_node),
        assortativity: (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64),
    };
    Ok(StatsReport { per_month, mean })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::leaning::Thresholds;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use LeaningLabel::*;

    fn month() -> MonthId {
        MonthId::new(2018, 5).unwrap()
    }

    fn op(label: LeaningLabel) -> Opinion {
        let score = match label {
            Democrat => 0.1,
            Neutral => 0.5,
            Republican => 0.9,
        };
        Opinion { score, label }
    }

    fn graph(nodes: &[(&str, LeaningLabel)], edges: &[(&str, &str)]) -> SnapshotGraph {
        let mut g = SnapshotGraph::new(month());
        for (u, l) in nodes {
            g.add_node(*u, op(*l));
        }
        for (a, b) in edges {
            g.add_edge(a, b, 1).unwrap();
        }
        g
    }

    fn table(users: &[(&str, f64)]) -> OpinionTable {
        let mut t = OpinionTable::new(Thresholds::default());
        for (u, s) in users {
            t.insert(*u, month(), *s).unwrap();
        }
        t
    }

    #[test]
    fn undirected_aggregation() {
        let t = table(&[("a", 0.1), ("b", 0.9)]);
        let recs = vec![
            InteractionRecord::new(month(), "a", "b", 1).unwrap(),
            InteractionRecord::new(month(), "b", "a", 2).unwrap(),
        ];
        let built = build_snapshot(month(), &recs, &t).unwrap();
        let edges: Vec<_> = built.graph.edges().collect();
        assert_eq!(edges, vec![("a", "b", 3)]);
        assert_eq!(built.dropped_records, 0);
    }

    #[test]
    fn unscored_endpoint_dropped() {
        let t = table(&[("a", 0.1), ("b", 0.9)]);
        let recs = vec![InteractionRecord::new(month(), "a", "c", 1).unwrap()];
        let built = build_snapshot(month(), &recs, &t).unwrap();
        assert_eq!(built.graph.edge_count(), 0);
        assert_eq!(built.dropped_records, 1);
        assert_eq!(built.graph.node_count(), 2);
    }

    #[test]
    fn foreign_month_rejected() {
        let t = table(&[("a", 0.1), ("b", 0.9)]);
        let recs = vec![InteractionRecord::new(month().next(), "a", "b", 1).unwrap()];
        assert!(matches!(build_snapshot(month(), &recs, &t), Err(Error::MonthMismatch { .. })));
    }

    #[test]
    fn self_loop_rejected() {
        let mut g = graph(&[("a", Democrat)], &[]);
        assert!(matches!(g.add_edge("a", "a", 1), Err(Error::SelfInteraction(_))));
    }

    #[test]
    fn degree_examples() {
        let tri = graph(&[("a", Democrat), ("b", Democrat), ("c", Republican)], &[("a", "b"), ("b", "c"), ("a", "c")]);
        let s = degree_stats(&tri);
        assert_eq!((s.n_nodes, s.n_edges), (3, 3));
        assert!((s.avg_degree - 2.0).abs() < 1e-12);
        assert_eq!(s.n_dem + s.n_neu + s.n_rep, s.n_nodes);

        let empty = degree_stats(&SnapshotGraph::new(month()));
        assert_eq!((empty.n_nodes, empty.n_edges, empty.avg_degree), (0, 0, 0.0));

        let star = graph(
            &[("c", Neutral), ("l1", Neutral), ("l2", Neutral), ("l3", Neutral), ("l4", Neutral)],
            &[("c", "l1"), ("c", "l2"), ("c", "l3"), ("c", "l4")],
        );
        let s = degree_stats(&star);
        assert_eq!((s.n_nodes, s.n_edges), (5, 4));
        assert!((s.avg_degree - 1.6).abs() < 1e-12);
        assert!((s.edges_per_node - 0.8).abs() < 1e-12);
    }

    #[test]
    fn assortativity_examples() {
        let within =
            graph(&[("a", Democrat), ("b", Democrat), ("c", Republican), ("d", Republican)], &[("a", "b"), ("c", "d")]);
        assert!((categorical_assortativity(&within).unwrap() - 1.0).abs() < 1e-12);

        let bip = graph(
            &[("d1", Democrat), ("d2", Democrat), ("r1", Republican), ("r2", Republican), ("r3", Republican)],
            &[("d1", "r1"), ("d1", "r2"), ("d1", "r3"), ("d2", "r1"), ("d2", "r2"), ("d2", "r3")],
        );
        assert!((categorical_assortativity(&bip).unwrap() + 1.0).abs() < 1e-12);

        let mixed = graph(
            &[("d1", Democrat), ("d2", Democrat), ("r1", Republican), ("r2", Republican)],
            &[("d1", "d2"), ("r1", "r2"), ("d1", "r1"), ("d2", "r2")],
        );
        assert!(categorical_assortativity(&mixed).unwrap().abs() < 1e-12);
    }

    #[test]
    fn assortativity_degenerate_cases() {
        let one = graph(&[("a", Neutral), ("b", Neutral)], &[("a", "b")]);
        assert!(matches!(categorical_assortativity(&one), Err(Error::DegenerateAssortativity)));
        let none = graph(&[("a", Neutral), ("b", Democrat)], &[]);
        assert!(matches!(categorical_assortativity(&none), Err(Error::NoEdges)));
        assert_eq!(network_stats(&one).assortativity, None);
    }

    #[test]
    fn stats_report_means() {
        let mut g10 = SnapshotGraph::new(month());
        for i in 0..10 {
            g10.add_node(format!("u{i:02}"), op(Democrat));
        }
        let mut g20 = SnapshotGraph::new(month().next());
        for i in 0..20 {
            g20.add_node(format!("u{i:02}"), op(Republican));
        }
        let rep = monthly_stats_report(&[g10.clone(), g20], Execution::Sequential).unwrap();
        assert_eq!(rep.mean.n_nodes, 15.0);
        assert_eq!(rep.mean.assortativity, None);

        let one = monthly_stats_report(std::slice::from_ref(&g10), Execution::Sequential).unwrap();
        assert_eq!(one.mean.n_nodes, 10.0);
        assert_eq!(one.mean.n_dem, 10.0);
        assert!(matches!(monthly_stats_report(&[], Execution::Sequential), Err(Error::EmptySequence)));
    }

    #[test]
    fn stats_report_assortativity_mean() {
        // r = 1 and r = -1 average to 0
        let a =
            graph(&[("a", Democrat), ("b", Democrat), ("c", Republican), ("d", Republican)], &[("a", "b"), ("c", "d")]);
        let b = graph(
            &[("d1", Democrat), ("d2", Democrat), ("r1", Republican), ("r2", Republican)],
            &[("d1", "r1"), ("d2", "r2")],
        );
        let rep = monthly_stats_report(&[a, b], Execution::Sequential).unwrap();
        assert!(rep.mean.assortativity.unwrap().abs() < 1e-12);
    }

    fn random_labeled_graph(seed: u64, n: usize, m: usize) -> SnapshotGraph {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = SnapshotGraph::new(month());
        for i in 0..n {
            g.add_node(format!("u{i:03}"), op(LeaningLabel::ALL[rng.gen_range(0..3)]));
        }
        let mut added = 0;
        while added < m {
            let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
            let (ka, kb) = (format!("u{a:03}"), format!("u{b:03}"));
            if a != b && !g.neighbors(&ka).unwrap().contains_key(&kb) {
                g.add_edge(&ka, &kb, 1).unwrap();
                added += 1;
            }
        }
        g
    }

    #[test]
    fn avg_degree_matches_mean_node_degree() {
        let g = random_labeled_graph(3, 50, 120);
        let mean_deg = g.nodes().keys().map(|u| g.degree(u) as f64).sum::<f64>() / 50.0;
        assert!((degree_stats(&g).avg_degree - mean_deg).abs() < 1e-12);
    }

    #[test]
    fn permuted_labels_have_near_zero_assortativity() {
        let g = random_labeled_graph(11, 200, 2000);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let users: Vec<String> = g.nodes().keys().cloned().collect();
        let mut labels: Vec<Opinion> = g.nodes().values().copied().collect();
        let mut sum = 0.0;
        for _ in 0..100 {
            labels.shuffle(&mut rng);
            let mut h = SnapshotGraph::new(month());
            for (u, o) in users.iter().zip(&labels) {
                h.add_node(u.clone(), *o);
            }
            for (a, b, w) in g.edges() {
                h.add_edge(a, b, w).unwrap();
            }
            sum += categorical_assortativity(&h).unwrap();
        }
        assert!((sum / 100.0).abs() < 0.05);
    }

    proptest! {
        #[test]
        fn record_order_irrelevant(
            pairs in proptest::collection::vec((0usize..8, 0usize..8, 1u64..4), 0..40),
            seed in any::<u64>(),
        ) {
            let users: Vec<(String, f64)> = (0..8).map(|i| (format!("u{i}"), i as f64 / 8.0)).collect();
            let mut t = OpinionTable::new(Thresholds::default());
            for (u, s) in &users {
                t.insert(u.clone(), month(), *s).unwrap();
            }
            let mut recs: Vec<_> = pairs
                .iter()
                .filter(|(a, b, _)| a != b)
                .map(|(a, b, c)| InteractionRecord::new(month(), format!("u{a}"), format!("u{b}"), *c).unwrap())
                .collect();
            let g1 = build_snapshot(month(), &recs, &t).unwrap();
            recs.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let g2 = build_snapshot(month(), &recs, &t).unwrap();
            prop_assert_eq!(g1, g2);
        }
    }
}

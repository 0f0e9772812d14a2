//! Deffuant–Weisbuch bounded-confidence simulator with per-agent bounds.
//!
//! Each step draws one connected pair and lets each agent move toward the
//! other by `mu` of the gap, provided the pre-update distance is within that
//! agent's own confidence bound.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{InteractionRecord, MonthId, PostScore};
use crate::par::{self, Execution};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Epsilon {
    Global(f64),
    PerAgent(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Topology {
    Complete,
    /// Erdős–Rényi graph, each pair linked with probability `p`.
    Random {
        p: f64,
    },
    Explicit(Vec<(usize, usize)>),
}

/// How interacting pairs are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Schedule {
    /// One uniformly random connected pair per step.
    #[default]
    RandomPair,
    /// Steps are grouped into rounds; each round is a random maximal
    /// matching, so every matched agent interacts exactly once per round.
    Matching,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub n_agents: usize,
    pub epsilon: Epsilon,
    pub mu: f64,
    pub topology: Topology,
    pub schedule: Schedule,
    pub n_steps: u64,
    pub snapshot_every: u64,
    pub rng_seed: u64,
    /// Uniform on [0, 1] when absent.
    pub initial_opinions: Option<Vec<f64>>,
}

impl SimConfig {
    pub fn new(n_agents: usize, epsilon: f64, n_steps: u64, rng_seed: u64) -> Self {
        SimConfig {
            n_agents,
            epsilon: Epsilon::Global(epsilon),
            mu: 0.5,
            topology: Topology::Complete,
            schedule: Schedule::RandomPair,
            n_steps,
            snapshot_every: n_steps.max(1),
            rng_seed,
            initial_opinions: None,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_agents < 2 {
            return bad(format!("need at least 2 agents, got {}", self.n_agents));
        }
        if !(self.mu > 0.0 && self.mu <= 0.5) {
            return bad(format!("mu must lie in (0, 0.5], got {}", self.mu));
        }
        let in_unit = |x: f64| (0.0..=1.0).contains(&x);
        match &self.epsilon {
            Epsilon::Global(e) if !in_unit(*e) => return bad(format!("epsilon {e} outside [0, 1]")),
            Epsilon::PerAgent(v) if v.len() != self.n_agents => {
                return bad(format!("{} per-agent bounds for {} agents", v.len(), self.n_agents))
            }
            Epsilon::PerAgent(v) if !v.iter().all(|e| in_unit(*e)) => {
                return bad("per-agent epsilon outside [0, 1]".into())
            }
            _ => {}
        }
        if self.snapshot_every == 0 || !self.n_steps.is_multiple_of(self.snapshot_every) {
            return bad(format!("snapshot_every ({}) must divide n_steps ({})", self.snapshot_every, self.n_steps));
        }
        if let Some(init) = &self.initial_opinions {
            if init.len() != self.n_agents || !init.iter().all(|x| in_unit(*x)) {
                return bad("initial opinions must be n_agents values in [0, 1]".into());
            }
        }
        if let Topology::Random { p } = self.topology {
            if !in_unit(p) {
                return bad(format!("edge probability {p} outside [0, 1]"));
            }
        }
        Ok(())
    }

    fn epsilons(&self) -> Vec<f64> {
        match &self.epsilon {
            Epsilon::Global(e) => vec![*e; self.n_agents],
            Epsilon::PerAgent(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub step: u64,
    pub opinions: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Interaction {
    pub step: u64,
    pub agent_u: usize,
    pub agent_v: usize,
    pub accepted_u: bool,
    pub accepted_v: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum SimWarning {
    /// Agents with no link; they never interact.
    DisconnectedTopology { isolated_agents: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub snapshot_every: u64,
    /// Ground-truth confidence bound of each agent.
    pub epsilons: Vec<f64>,
    /// Step 0 (initial state) and every `snapshot_every` steps after it.
    pub snapshots: Vec<Snapshot>,
    pub interaction_log: Vec<Interaction>,
    pub warnings: Vec<SimWarning>,
}

impl Trajectory {
    pub fn final_opinions(&self) -> &[f64] {
        &self.snapshots.last().expect("initial snapshot always recorded").opinions
    }

    pub fn last_step(&self) -> u64 {
        self.snapshots.last().map_or(0, |s| s.step)
    }

    pub fn snapshot_at(&self, step: u64) -> Option<&Snapshot> {
        if !step.is_multiple_of(self.snapshot_every) {
            return None;
        }
        self.snapshots.get((step / self.snapshot_every) as usize)
    }
}

/// One pairwise update. Acceptance is decided on the pre-update distance,
/// separately for each side.
pub fn step(x_u: f64, x_v: f64, eps_u: f64, eps_v: f64, mu: f64) -> (f64, f64) {
    let d = (x_u - x_v).abs();
    // (1 - mu) x + mu y == x + mu (y - x); with mu = 0.5 this rounds exactly
    // like (x + y) / 2 and stays inside [min, max]
    let toward = |from: f64, to: f64| ((1.0 - mu) * from + mu * to).clamp(from.min(to), from.max(to));
    let u_new = if d <= eps_u { toward(x_u, x_v) } else { x_u };
    let v_new = if d <= eps_v { toward(x_v, x_u) } else { x_v };
    (u_new, v_new)
}

enum PairSource {
    Complete(usize),
    Edges(Vec<(usize, usize)>),
}

impl PairSource {
    fn random_pair(&self, rng: &mut ChaCha8Rng) -> (usize, usize) {
        match self {
            PairSource::Complete(n) => {
                let u = rng.gen_range(0..*n);
                let mut v = rng.gen_range(0..n - 1);
                if v >= u {
                    v += 1;
                }
                (u, v)
            }
            PairSource::Edges(edges) => edges[rng.gen_range(0..edges.len())],
        }
    }

    fn random_matching(&self, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
        match self {
            PairSource::Complete(n) => {
                let mut agents: Vec<usize> = (0..*n).collect();
                agents.shuffle(rng);
                agents.chunks_exact(2).map(|c| (c[0], c[1])).collect()
            }
            PairSource::Edges(edges) => {
                let mut order = edges.clone();
                order.shuffle(rng);
                let mut used = BTreeMap::new();
                let mut matching = Vec::new();
                for (a, b) in order {
                    if !used.contains_key(&a) && !used.contains_key(&b) {
                        used.insert(a, ());
                        used.insert(b, ());
                        matching.push((a, b));
                    }
                }
                matching
            }
        }
    }
}

fn pair_source(config: &SimConfig, rng: &mut ChaCha8Rng) -> Result<(PairSource, usize)> {
    let n = config.n_agents;
    let edges = match &config.topology {
        Topology::Complete => return Ok((PairSource::Complete(n), 0)),
        Topology::Random { p } => {
            let mut edges = Vec::new();
            for a in 0..n {
                for b in a + 1..n {
                    if rng.gen_bool(*p) {
                        edges.push((a, b));
                    }
                }
            }
            edges
        }
        Topology::Explicit(list) => {
            let mut edges = Vec::with_capacity(list.len());
            for &(a, b) in list {
                if a >= n || b >= n || a == b {
                    return Err(Error::InvalidConfig(format!("bad edge ({a}, {b})")));
                }
                edges.push((a.min(b), a.max(b)));
            }
            edges.sort_unstable();
            edges.dedup();
            edges
        }
    };
    if edges.is_empty() {
        return Err(Error::InvalidConfig("topology has no edges".into()));
    }
    let mut linked = vec![false; n];
    for &(a, b) in &edges {
        linked[a] = true;
        linked[b] = true;
    }
    let isolated = linked.iter().filter(|l| !**l).count();
    Ok((PairSource::Edges(edges), isolated))
}

/// Runs the model. The trajectory is a pure function of the config.
pub fn run(config: &SimConfig) -> Result<Trajectory> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut opinions: Vec<f64> = match &config.initial_opinions {
        Some(v) => v.clone(),
        None => (0..config.n_agents).map(|_| rng.gen_range(0.0..=1.0)).collect(),
    };
    let (pairs, isolated) = pair_source(config, &mut rng)?;
    let epsilons = config.epsilons();

    let mut warnings = Vec::new();
    if isolated > 0 {
        warnings.push(SimWarning::DisconnectedTopology { isolated_agents: isolated });
    }

    let mut snapshots = vec![Snapshot { step: 0, opinions: opinions.clone() }];
    let mut interaction_log = Vec::with_capacity(config.n_steps as usize);
    let mut round: Vec<(usize, usize)> = Vec::new();
    for s in 1..=config.n_steps {
        let (u, v) = match config.schedule {
            Schedule::RandomPair => pairs.random_pair(&mut rng),
            Schedule::Matching => {
                if round.is_empty() {
                    round = pairs.random_matching(&mut rng);
                    round.reverse();
                }
                round.pop().expect("matching of a non-empty topology is non-empty")
            }
        };
        let (xu, xv) = (opinions[u], opinions[v]);
        let (nu, nv) = step(xu, xv, epsilons[u], epsilons[v], config.mu);
        let d = (xu - xv).abs();
        opinions[u] = nu;
        opinions[v] = nv;
        interaction_log.push(Interaction {
            step: s,
            agent_u: u,
            agent_v: v,
            accepted_u: d <= epsilons[u],
            accepted_v: d <= epsilons[v],
        });
        if s % config.snapshot_every == 0 {
            snapshots.push(Snapshot { step: s, opinions: opinions.clone() });
        }
    }
    Ok(Trajectory { snapshot_every: config.snapshot_every, epsilons, snapshots, interaction_log, warnings })
}

/// Independent runs (e.g. a seed sweep), in input order.
pub fn run_many(configs: &[SimConfig], exec: Execution) -> Vec<Result<Trajectory>> {
    par::map(exec, configs, run)
}

/// Number of groups left after sorting and splitting at every gap larger
/// than `gap_tolerance`.
pub fn cluster_count(opinions: &[f64], gap_tolerance: f64) -> Result<usize> {
    if opinions.is_empty() {
        return Err(Error::EmptyVector);
    }
    if gap_tolerance.is_nan() || gap_tolerance <= 0.0 {
        return Err(Error::InvalidConfig(format!("gap tolerance must be positive, got {gap_tolerance}")));
    }
    let mut sorted = opinions.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(1 + sorted.windows(2).filter(|w| w[1] - w[0] > gap_tolerance).count())
}

/// Month assigned to the first export window.
pub fn export_origin() -> MonthId {
    MonthId::new(2000, 1).expect("valid constant month")
}

/// Stable, lexicographically sortable agent identifier.
pub fn agent_id(index: usize, n_agents: usize) -> String {
    let width = n_agents.saturating_sub(1).to_string().len();
    format!("a{index:0width$}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub months: Vec<MonthId>,
    pub posts: Vec<PostScore>,
    pub interactions: Vec<InteractionRecord>,
}

/// Turns a trajectory into pipeline input. Window `k` becomes month
/// `origin + k`: each agent posts its opinion at step `k * window`, and the
/// interactions logged in steps `(k * window, (k + 1) * window]` become
/// records of that month, aggregated per pair.
pub fn export_benchmark(trajectory: &Trajectory, window: u64) -> Result<Benchmark> {
    let steps = trajectory.last_step();
    if window == 0 || window > steps {
        return Err(Error::WindowLargerThanTrajectory { window, steps });
    }
    if !window.is_multiple_of(trajectory.snapshot_every) {
        return Err(Error::WindowMisaligned { window, snapshot_every: trajectory.snapshot_every });
    }
    let n_months = (steps / window + 1) as usize;
    let n_agents = trajectory.epsilons.len();
    let ids: Vec<String> = (0..n_agents).map(|i| agent_id(i, n_agents)).collect();

    let mut months = Vec::with_capacity(n_months);
    let mut m = export_origin();
    for _ in 0..n_months {
        months.push(m);
        m = m.next();
    }

    let mut posts = Vec::with_capacity(n_months * n_agents);
    for (k, month) in months.iter().enumerate() {
        let snap = trajectory.snapshot_at(k as u64 * window).expect("aligned snapshot exists");
        for (id, x) in ids.iter().zip(&snap.opinions) {
            posts.push(PostScore::new(id.clone(), *month, *x)?);
        }
    }

    let mut counts: BTreeMap<(usize, usize, usize), u64> = BTreeMap::new();
    for it in &trajectory.interaction_log {
        let k = ((it.step - 1) / window) as usize;
        if k < n_months {
            let (a, b) = (it.agent_u.min(it.agent_v), it.agent_u.max(it.agent_v));
            *counts.entry((k, a, b)).or_insert(0) += 1;
        }
    }
    let interactions = counts
        .into_iter()
        .map(|((k, a, b), c)| InteractionRecord::new(months[k], ids[a].clone(), ids[b].clone(), c))
        .collect::<Result<Vec<_>>>()?;

    Ok(Benchmark { months, posts, interactions })
}

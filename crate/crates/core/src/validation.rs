//! Simulator-backed check of the estimator against known confidence bounds.
//!
//! Agents interact along a fresh random perfect matching every round, so in
//! each exported month every agent has exactly one neighbor. When the agent
//! accepted the interaction (with `mu = 0.5`) its next opinion is exactly the
//! average with its partner, the estimator selects that partner with zero
//! error, and the estimated bound is the true interaction distance, which
//! cannot exceed the agent's epsilon.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::EstimationResult;
use crate::graph::build_snapshots;
use crate::leaning::{build_opinion_table, Thresholds};
use crate::par::Execution;
use crate::pipeline::estimate_series;
use crate::sim::{cluster_count, export_benchmark, run, Benchmark, Schedule, SimConfig, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationConfig {
    pub n_agents: usize,
    pub epsilon: f64,
    pub mu: f64,
    /// Matching rounds; each round becomes one month.
    pub rounds: u64,
    pub seed: u64,
    pub gap_tolerance: f64,
}

impl ValidationConfig {
    pub fn new(n_agents: usize, epsilon: f64, seed: u64) -> Self {
        ValidationConfig { n_agents, epsilon, mu: 0.5, rounds: 1000, seed, gap_tolerance: 0.05 }
    }

    pub fn sim_config(&self) -> SimConfig {
        let per_round = (self.n_agents / 2) as u64;
        let mut cfg = SimConfig::new(self.n_agents, self.epsilon, self.rounds * per_round, self.seed);
        cfg.mu = self.mu;
        cfg.schedule = Schedule::Matching;
        cfg.snapshot_every = per_round.max(1);
        cfg
    }
}

/// A zero-error single-neighbor estimate whose bound exceeds the true epsilon.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundViolation {
    pub user_id: String,
    pub from_month: String,
    pub cb_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub config: ValidationConfig,
    pub months: usize,
    pub n_results: usize,
    /// Results with `abs_error == 0` and `prefix_j == 1`.
    pub exact_single_neighbor: usize,
    pub bound_violations: Vec<BoundViolation>,
    pub recovery_holds: bool,
    /// Results whose opinion changed between the two months.
    pub updating_agents: usize,
    pub updating_within_bound: usize,
    pub fraction_updating_within_bound: Option<f64>,
    pub final_clusters: usize,
    pub polarized: bool,
}

pub struct ValidationRun {
    pub report: ValidationReport,
    pub trajectory: Trajectory,
    pub benchmark: Benchmark,
    pub estimates: Vec<EstimationResult>,
}

pub fn validate(config: &ValidationConfig, exec: Execution) -> Result<ValidationRun> {
    if config.n_agents < 2 || config.rounds == 0 {
        return Err(Error::InvalidConfig("validation needs at least 2 agents and 1 round".into()));
    }
    let sim = config.sim_config();
    let trajectory = run(&sim)?;
    let benchmark = export_benchmark(&trajectory, sim.snapshot_every)?;
    let table = build_opinion_table(&benchmark.posts, Thresholds::default())?;
    let graphs: Vec<_> = build_snapshots(&benchmark.interactions, &table, exec)?.into_iter().map(|b| b.graph).collect();
    let months = estimate_series(&table, &graphs, exec)?;

    let mut report = ValidationReport {
        config: config.clone(),
        months: benchmark.months.len(),
        n_results: 0,
        exact_single_neighbor: 0,
        bound_violations: Vec::new(),
        recovery_holds: true,
        updating_agents: 0,
        updating_within_bound: 0,
        fraction_updating_within_bound: None,
        final_clusters: cluster_count(trajectory.final_opinions(), config.gap_tolerance)?,
        polarized: false,
    };
    report.polarized = report.final_clusters >= 2;

    let mut estimates = Vec::new();
    for month in months {
        for r in month.batch.results {
            report.n_results += 1;
            if r.abs_error == 0.0 && r.prefix_j == 1 {
                report.exact_single_neighbor += 1;
                if r.cb_hat > config.epsilon {
                    report.bound_violations.push(BoundViolation {
                        user_id: r.user_id.clone(),
                        from_month: r.from_month.to_string(),
                        cb_hat: r.cb_hat,
                    });
                }
            }
            let x_t = table.get(&r.user_id, r.from_month).map(|o| o.score);
            let x_t1 = table.get(&r.user_id, r.to_month).map(|o| o.score);
            if x_t != x_t1 {
                report.updating_agents += 1;
                if r.cb_hat <= config.epsilon {
                    report.updating_within_bound += 1;
                }
            }
            estimates.push(r);
        }
    }
    report.recovery_holds = report.bound_violations.is_empty();
    report.fraction_updating_within_bound =
        (report.updating_agents > 0).then(|| report.updating_within_bound as f64 / report.updating_agents as f64);
    Ok(ValidationRun { report, trajectory, benchmark, estimates })
}

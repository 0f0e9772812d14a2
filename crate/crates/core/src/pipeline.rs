//! Orchestration of the command-line stages. Each command returns its
//! output files in memory; [`Outputs::commit`] writes them all or none.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::{estimate_all, EstimationBatch, EstimationResult, SkipReason};
use crate::graph::{build_snapshots, monthly_stats_report, SnapshotGraph};
use crate::io;
use crate::leaning::{build_opinion_table, Thresholds};
use crate::model::{InteractionRecord, LeaningLabel, MonthId, OpinionTable};
use crate::par::{self, Execution};
use crate::sim::{agent_id, export_benchmark, run, SimConfig};
use crate::stats::{dispersion, histogram, ks_2samp, skewness, DispersionSummary};
use crate::transitions::{contiguous_months, retention, transition_series};
use crate::validation::{validate, ValidationConfig, ValidationReport};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Files produced by one command, keyed by path relative to the output directory.
#[derive(Debug, Default)]
pub struct Outputs {
    files: BTreeMap<PathBuf, Vec<u8>>,
}

impl Outputs {
    pub fn add(&mut self, name: impl Into<PathBuf>, bytes: Vec<u8>) {
        self.files.insert(name.into(), bytes);
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.get(Path::new(name)).map(Vec::as_slice)
    }

    pub fn names(&self) -> impl Iterator<Item = &Path> {
        self.files.keys().map(PathBuf::as_path)
    }

    /// Writes every file under `dir`. On failure the files written so far are removed.
    pub fn commit(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        let result = (|| -> Result<()> {
            for (name, bytes) in &self.files {
                let path = dir.join(name);
                if let Some(parent) = path.parent() {
                    fs::create_dir_all(parent)?;
                }
                fs::write(&path, bytes)?;
                written.push(path);
            }
            Ok(())
        })();
        if let Err(e) = result {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            return Err(e);
        }
        Ok(written)
    }
}

/// Row accounting for one stage: `ingested = used + dropped`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageCounts {
    pub stage: String,
    pub ingested: u64,
    pub used: u64,
    pub dropped: u64,
    pub dropped_by_reason: BTreeMap<String, u64>,
}

impl StageCounts {
    pub fn new(stage: &str, used: u64, dropped_by_reason: BTreeMap<String, u64>) -> Self {
        let dropped = dropped_by_reason.values().sum();
        StageCounts { stage: stage.to_string(), ingested: used + dropped, used, dropped, dropped_by_reason }
    }

    pub fn reconciles(&self) -> bool {
        self.ingested == self.used + self.dropped && self.dropped == self.dropped_by_reason.values().sum::<u64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub inputs: Vec<String>,
    pub thresholds: Thresholds,
    pub month_range: Option<(MonthId, MonthId)>,
    pub seed: Option<u64>,
    pub stages: Vec<StageCounts>,
}

impl RunManifest {
    fn new(command: &str, inputs: &[&Path], thresholds: Thresholds) -> Self {
        RunManifest {
            tool_version: TOOL_VERSION.to_string(),
            command: command.to_string(),
            inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
            thresholds,
            month_range: None,
            seed: None,
            stages: Vec::new(),
        }
    }

    pub fn check(&self) -> Result<()> {
        for s in &self.stages {
            if !s.reconciles() {
                return Err(Error::Invariant(format!("stage {} counts do not reconcile", s.stage)));
            }
        }
        Ok(())
    }

    fn into_output(self, out: &mut Outputs) -> Result<()> {
        self.check()?;
        out.add("manifest.json", json_bytes(&self)?);
        Ok(())
    }
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

fn csv_bytes(write: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

/// Options shared by every data-consuming command.
#[derive(Debug, Clone, Copy, Default)]
pub struct CommonOptions {
    pub thresholds: Thresholds,
    pub lenient: bool,
    pub exec: Execution,
}

struct Loaded {
    table: OpinionTable,
    records: Vec<InteractionRecord>,
    stages: Vec<StageCounts>,
}

fn parse_drop_reasons(dropped: &[io::ParseError]) -> BTreeMap<String, u64> {
    let mut m = BTreeMap::new();
    for e in dropped {
        let key = match e {
            io::ParseError::BadHeader { .. } | io::ParseError::MalformedRow(_) => "malformed_row",
            io::ParseError::BadMonth(_) => "bad_month",
            io::ParseError::OutOfRange(_) => "out_of_range",
            io::ParseError::SelfLoop(_) => "self_loop",
            io::ParseError::NonPositiveCount(_) => "non_positive_count",
        };
        *m.entry(key.to_string()).or_insert(0) += 1;
    }
    m
}

fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|source| Error::Open { path: path.to_path_buf(), source })
}

fn load(posts: &Path, interactions: Option<&Path>, opts: &CommonOptions) -> Result<Loaded> {
    let parsed = io::parse_posts(open(posts)?, opts.lenient)?;
    let mut stages = vec![StageCounts::new("posts", parsed.rows.len() as u64, parse_drop_reasons(&parsed.dropped))];
    let table = build_opinion_table(&parsed.rows, opts.thresholds)?;
    let records = match interactions {
        Some(path) => {
            let parsed = io::parse_interactions(open(path)?, opts.lenient)?;
            stages.push(StageCounts::new(
                "interactions",
                parsed.rows.len() as u64,
                parse_drop_reasons(&parsed.dropped),
            ));
            parsed.rows
        }
        None => Vec::new(),
    };
    Ok(Loaded { table, records, stages })
}

fn month_range(table: &OpinionTable) -> Option<(MonthId, MonthId)> {
    Some((table.months().next()?, table.months().last()?))
}

fn graphs_with_stage(loaded: &Loaded, exec: Execution) -> Result<(Vec<SnapshotGraph>, StageCounts)> {
    let builds = build_snapshots(&loaded.records, &loaded.table, exec)?;
    let dropped: usize = builds.iter().map(|b| b.dropped_records).sum();
    let used = loaded.records.len() - dropped;
    let stage = StageCounts::new(
        "snapshot_edges",
        used as u64,
        BTreeMap::from([("unscored_endpoint".to_string(), dropped as u64)]),
    );
    Ok((builds.into_iter().map(|b| b.graph).collect(), stage))
}

/// Per month-pair coverage of the estimator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkipAccounting {
    pub from_month: MonthId,
    pub to_month: MonthId,
    /// Users active at `t` or `t + 1`.
    pub users: usize,
    /// Users active at both `t` and `t + 1`.
    pub both_months: usize,
    pub estimated: usize,
    pub no_opinion_at_t: usize,
    pub no_opinion_at_t1: usize,
    pub no_neighbors: usize,
}

impl SkipAccounting {
    fn from_batch(m: MonthId, batch: &EstimationBatch) -> Self {
        let estimated = batch.results.len();
        let no_neighbors = batch.skip_count(SkipReason::NoNeighbors);
        SkipAccounting {
            from_month: m,
            to_month: m.next(),
            users: estimated + batch.skipped.len(),
            both_months: estimated + no_neighbors,
            estimated,
            no_opinion_at_t: batch.skip_count(SkipReason::NoOpinionAtT),
            no_opinion_at_t1: batch.skip_count(SkipReason::NoOpinionAtT1),
            no_neighbors,
        }
    }

    /// Estimated users over users present in both months.
    pub fn coverage(&self) -> f64 {
        ratio(self.estimated, self.both_months)
    }

    /// Share of the both-month users skipped for lack of neighbors;
    /// `coverage() + no_neighbors_fraction() == 1`.
    pub fn no_neighbors_fraction(&self) -> f64 {
        ratio(self.no_neighbors, self.both_months)
    }

    /// Fractions over all users active in either month: estimated, then each skip reason.
    pub fn population_fractions(&self) -> [f64; 4] {
        [self.estimated, self.no_opinion_at_t, self.no_opinion_at_t1, self.no_neighbors].map(|c| ratio(c, self.users))
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonthEstimates {
    pub month: MonthId,
    pub batch: EstimationBatch,
    pub accounting: SkipAccounting,
}

/// Runs the estimator over every contiguous month pair of the table.
pub fn estimate_series(table: &OpinionTable, graphs: &[SnapshotGraph], exec: Execution) -> Result<Vec<MonthEstimates>> {
    let by_month: BTreeMap<MonthId, &SnapshotGraph> = graphs.iter().map(|g| (g.month(), g)).collect();
    let mut out = Vec::new();
    for m in contiguous_months(table) {
        let empty;
        let g = match by_month.get(&m) {
            Some(g) => *g,
            None => {
                empty = SnapshotGraph::new(m);
                &empty
            }
        };
        let batch = estimate_all(g, table, m, exec)?;
        let accounting = SkipAccounting::from_batch(m, &batch);
        out.push(MonthEstimates { month: m, batch, accounting });
    }
    Ok(out)
}

fn write_skips(out: &mut Vec<u8>, rows: &[SkipAccounting]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record([
        "month_from",
        "month_to",
        "users",
        "both_months",
        "estimated",
        "no_opinion_at_t",
        "no_opinion_at_t1",
        "no_neighbors",
        "coverage",
    ])?;
    for s in rows {
        w.write_record([
            s.from_month.to_string(),
            s.to_month.to_string(),
            s.users.to_string(),
            s.both_months.to_string(),
            s.estimated.to_string(),
            s.no_opinion_at_t.to_string(),
            s.no_opinion_at_t1.to_string(),
            s.no_neighbors.to_string(),
            io::fmt_sig12(s.coverage()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn estimation_stage(months: &[MonthEstimates]) -> StageCounts {
    let mut reasons = BTreeMap::new();
    let mut used = 0u64;
    for m in months {
        used += m.batch.results.len() as u64;
        for r in m.batch.skipped.values() {
            *reasons.entry(r.as_str().to_string()).or_insert(0) += 1;
        }
    }
    StageCounts::new("estimation", used, reasons)
}

/// `leaning`: posts to the per-(user, month) opinion table.
pub fn cmd_leaning(posts: &Path, opts: &CommonOptions) -> Result<Outputs> {
    let loaded = load(posts, None, opts)?;
    let mut out = Outputs::default();
    out.add("opinions.csv", csv_bytes(|b| io::write_opinions(b, &loaded.table))?);
    let mut manifest = RunManifest::new("leaning", &[posts], opts.thresholds);
    manifest.month_range = month_range(&loaded.table);
    manifest.stages = loaded.stages;
    manifest.into_output(&mut out)?;
    Ok(out)
}

/// `graph-stats`: per-month network statistics plus the cross-month mean.
pub fn cmd_graph_stats(posts: &Path, interactions: &Path, opts: &CommonOptions) -> Result<Outputs> {
    let loaded = load(posts, Some(interactions), opts)?;
    let (graphs, stage) = graphs_with_stage(&loaded, opts.exec)?;
    let report = monthly_stats_report(&graphs, opts.exec)?;
    let mut out = Outputs::default();
    out.add("graph_stats.csv", csv_bytes(|b| io::write_graph_stats(b, &report.per_month, &report.mean))?);
    let mut manifest = RunManifest::new("graph-stats", &[posts, interactions], opts.thresholds);
    manifest.month_range = month_range(&loaded.table);
    manifest.stages = loaded.stages;
    manifest.stages.push(stage);
    manifest.into_output(&mut out)?;
    Ok(out)
}

/// `transitions`: transition matrices and retention for each contiguous month pair.
pub fn cmd_transitions(posts: &Path, opts: &CommonOptions) -> Result<Outputs> {
    let loaded = load(posts, None, opts)?;
    let series = transition_series(&loaded.table, opts.exec)?;
    let ret: Vec<Option<f64>> = series.iter().map(|tm| retention(&loaded.table, tm.from_month).ok()).collect();
    let mut out = Outputs::default();
    out.add("transitions.json", io::transitions_json(&series, &ret)?.into_bytes());
    let mut manifest = RunManifest::new("transitions", &[posts], opts.thresholds);
    manifest.month_range = month_range(&loaded.table);
    manifest.stages = loaded.stages;
    manifest.into_output(&mut out)?;
    Ok(out)
}

fn run_estimation(loaded: &Loaded, opts: &CommonOptions) -> Result<(Vec<MonthEstimates>, StageCounts)> {
    let (graphs, stage) = graphs_with_stage(loaded, opts.exec)?;
    Ok((estimate_series(&loaded.table, &graphs, opts.exec)?, stage))
}

fn flatten(months: &[MonthEstimates]) -> Vec<EstimationResult> {
    months.iter().flat_map(|m| m.batch.results.iter().cloned()).collect()
}

/// `estimate`: confidence-bound estimates and skip accounting.
pub fn cmd_estimate(posts: &Path, interactions: &Path, opts: &CommonOptions) -> Result<Outputs> {
    let loaded = load(posts, Some(interactions), opts)?;
    let (months, edge_stage) = run_estimation(&loaded, opts)?;
    let results = flatten(&months);
    let skips: Vec<SkipAccounting> = months.iter().map(|m| m.accounting.clone()).collect();

    let mut out = Outputs::default();
    out.add("estimates.csv", csv_bytes(|b| io::write_estimates(b, &results))?);
    out.add("skips.csv", csv_bytes(|b| write_skips(b, &skips))?);
    let mut manifest = RunManifest::new("estimate", &[posts, interactions], opts.thresholds);
    manifest.month_range = month_range(&loaded.table);
    manifest.stages = loaded.stages;
    manifest.stages.push(edge_stage);
    manifest.stages.push(estimation_stage(&months));
    manifest.into_output(&mut out)?;
    Ok(out)
}

/// Parameters of the `simulate` command.
#[derive(Debug, Clone)]
pub struct SimulateOptions {
    pub config: SimConfig,
    /// Steps per exported month.
    pub window: u64,
}

/// `simulate`: synthetic posts and interactions in the real-data formats,
/// plus each agent's ground-truth bound.
pub fn cmd_simulate(opts: &SimulateOptions) -> Result<Outputs> {
    let trajectory = run(&opts.config)?;
    let bench = export_benchmark(&trajectory, opts.window)?;
    let mut out = Outputs::default();
    out.add("posts.csv", csv_bytes(|b| io::write_posts(b, &bench.posts))?);
    out.add("interactions.csv", csv_bytes(|b| io::write_interactions(b, &bench.interactions))?);
    out.add(
        "agents.csv",
        csv_bytes(|b| {
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(b);
            w.write_record(["user_id", "epsilon"])?;
            let n = trajectory.epsilons.len();
            for (i, e) in trajectory.epsilons.iter().enumerate() {
                w.write_record([agent_id(i, n), e.to_string()])?;
            }
            w.flush()?;
            Ok(())
        })?,
    );
    #[derive(Serialize)]
    struct SimSummary<'a> {
        config: &'a SimConfig,
        window: u64,
        months: usize,
        warnings: &'a [crate::sim::SimWarning],
    }
    out.add(
        "simulation.json",
        json_bytes(&SimSummary {
            config: &opts.config,
            window: opts.window,
            months: bench.months.len(),
            warnings: &trajectory.warnings,
        })?,
    );
    let mut manifest = RunManifest::new("simulate", &[], Thresholds::default());
    manifest.seed = Some(opts.config.rng_seed);
    manifest.month_range = Some((bench.months[0], *bench.months.last().expect("at least two months")));
    manifest.stages.push(StageCounts::new("posts", bench.posts.len() as u64, BTreeMap::new()));
    manifest.stages.push(StageCounts::new("interactions", bench.interactions.len() as u64, BTreeMap::new()));
    manifest.into_output(&mut out)?;
    Ok(out)
}

/// `validate`: simulate with known bounds, estimate, and check recovery.
/// The report is returned alongside the files so callers can set the exit status.
pub fn cmd_validate(config: &ValidationConfig, exec: Execution) -> Result<(Outputs, ValidationReport)> {
    let run = validate(config, exec)?;
    let mut out = Outputs::default();
    out.add("validation.json", json_bytes(&run.report)?);
    out.add("estimates.csv", csv_bytes(|b| io::write_estimates(b, &run.estimates))?);
    let mut manifest = RunManifest::new("validate", &[], Thresholds::default());
    manifest.seed = Some(config.seed);
    manifest.month_range = Some((run.benchmark.months[0], *run.benchmark.months.last().expect("months")));
    manifest.stages.push(StageCounts::new("estimation", run.report.n_results as u64, BTreeMap::new()));
    manifest.into_output(&mut out)?;
    Ok((out, run.report))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct KsRow {
    scope: String,
    leaning_a: LeaningLabel,
    leaning_b: LeaningLabel,
    n_a: usize,
    n_b: usize,
    d_statistic: f64,
    p_value: f64,
}

fn ks_rows(scope: &str, groups: &BTreeMap<LeaningLabel, Vec<f64>>) -> Result<Vec<KsRow>> {
    let mut rows = Vec::new();
    let labels = LeaningLabel::ALL;
    for (i, a) in labels.iter().enumerate() {
        for b in &labels[i + 1..] {
            let (Some(xa), Some(xb)) = (groups.get(a), groups.get(b)) else { continue };
            if xa.is_empty() || xb.is_empty() {
                continue;
            }
            let r = ks_2samp(xa, xb)?;
            rows.push(KsRow {
                scope: scope.to_string(),
                leaning_a: *a,
                leaning_b: *b,
                n_a: xa.len(),
                n_b: xb.len(),
                d_statistic: r.d_statistic,
                p_value: r.p_value,
            });
        }
    }
    Ok(rows)
}

/// Options of the `report` command.
#[derive(Debug, Clone, Copy)]
pub struct ReportOptions {
    pub common: CommonOptions,
    pub bins: usize,
}

#[derive(Debug, Default, Serialize)]
struct ReportSummary {
    estimates: usize,
    users_with_dispersion: usize,
    histogram_overflow: BTreeMap<String, u64>,
}

/// `report`: plot-ready distributions of the estimated bounds: histograms
/// (pooled, per month, per month and leaning at `t`), pairwise KS tests
/// between leanings (per month and pooled), skewness, and per-user dispersion.
pub fn cmd_report(posts: &Path, interactions: &Path, opts: &ReportOptions) -> Result<Outputs> {
    let common = &opts.common;
    let loaded = load(posts, Some(interactions), common)?;
    let (months, edge_stage) = run_estimation(&loaded, common)?;
    let mut out = Outputs::default();
    let mut summary = ReportSummary::default();

    let mut add_hist = |out: &mut Outputs, name: String, values: &[f64]| -> Result<()> {
        let h = histogram(values, opts.bins, 0.0, 1.0)?;
        if h.overflow > 0 {
            summary.histogram_overflow.insert(name.clone(), h.overflow);
        }
        out.add(format!("histograms/{name}.csv"), csv_bytes(|b| io::write_histogram(b, &h))?);
        Ok(())
    };

    let label_at_t = |r: &EstimationResult| {
        loaded.table.get(&r.user_id, r.from_month).map(|o| o.label).expect("estimated users have an opinion at t")
    };

    let mut ks = Vec::new();
    let mut skew_rows: Vec<(String, String, usize, Option<f64>)> = Vec::new();
    let mut pooled: BTreeMap<LeaningLabel, Vec<f64>> = BTreeMap::new();
    let mut all = Vec::new();
    for m in &months {
        let scope = m.month.to_string();
        let cbs: Vec<f64> = m.batch.results.iter().map(|r| r.cb_hat).collect();
        add_hist(&mut out, format!("cb_{scope}"), &cbs)?;
        skew_rows.push((scope.clone(), "all".into(), cbs.len(), skewness(&cbs).ok()));
        let mut groups: BTreeMap<LeaningLabel, Vec<f64>> = BTreeMap::new();
        for r in &m.batch.results {
            groups.entry(label_at_t(r)).or_default().push(r.cb_hat);
        }
        for label in LeaningLabel::ALL {
            let values = groups.get(&label).map(Vec::as_slice).unwrap_or(&[]);
            add_hist(&mut out, format!("cb_{scope}_{}", label.code()), values)?;
            skew_rows.push((scope.clone(), label.name().into(), values.len(), skewness(values).ok()));
            pooled.entry(label).or_default().extend_from_slice(values);
        }
        ks.extend(ks_rows(&scope, &groups)?);
        all.extend(cbs);
    }
    add_hist(&mut out, "cb_all".into(), &all)?;
    skew_rows.push(("all".into(), "all".into(), all.len(), skewness(&all).ok()));
    for label in LeaningLabel::ALL {
        let values = pooled.get(&label).map(Vec::as_slice).unwrap_or(&[]);
        skew_rows.push(("all".into(), label.name().into(), values.len(), skewness(values).ok()));
    }
    ks.extend(ks_rows("pooled", &pooled)?);

    let mut per_user: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for m in &months {
        for r in &m.batch.results {
            per_user.entry(r.user_id.as_str()).or_default().push(r.cb_hat);
        }
    }
    let eligible: Vec<(&str, Vec<f64>)> = per_user.into_iter().filter(|(_, v)| v.len() >= 2).collect();
    let disp: Vec<DispersionSummary> =
        par::map(common.exec, &eligible, |(u, v)| dispersion(u, v)).into_iter().collect::<Result<_>>()?;
    let stds: Vec<f64> = disp.iter().map(|d| d.std_dev).collect();
    let fanos: Vec<f64> = disp.iter().filter_map(|d| d.fano).collect();
    add_hist(&mut out, "std_dev".into(), &stds)?;
    add_hist(&mut out, "fano".into(), &fanos)?;
    out.add("dispersion.csv", csv_bytes(|b| io::write_dispersion(b, &disp))?);

    out.add(
        "ks.csv",
        csv_bytes(|b| {
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(b);
            w.write_record(["scope", "leaning_a", "leaning_b", "n_a", "n_b", "d_statistic", "p_value"])?;
            for r in &ks {
                w.write_record([
                    r.scope.clone(),
                    r.leaning_a.name().to_string(),
                    r.leaning_b.name().to_string(),
                    r.n_a.to_string(),
                    r.n_b.to_string(),
                    io::fmt_sig12(r.d_statistic),
                    io::fmt_sig12(r.p_value),
                ])?;
            }
            w.flush()?;
            Ok(())
        })?,
    );
    out.add(
        "skewness.csv",
        csv_bytes(|b| {
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(b);
            w.write_record(["scope", "leaning", "n", "skewness"])?;
            for (scope, label, n, g1) in &skew_rows {
                let g1 = g1.map_or_else(|| "undefined".to_string(), io::fmt_sig12);
                w.write_record([scope.as_str(), label.as_str(), &n.to_string(), &g1])?;
            }
            w.flush()?;
            Ok(())
        })?,
    );

    summary.estimates = all.len();
    summary.users_with_dispersion = disp.len();
    out.add("report_summary.json", json_bytes(&summary)?);

    let mut manifest = RunManifest::new("report", &[posts, interactions], common.thresholds);
    manifest.month_range = month_range(&loaded.table);
    manifest.stages = loaded.stages;
    manifest.stages.push(edge_stage);
    manifest.stages.push(estimation_stage(&months));
    manifest.into_output(&mut out)?;
    Ok(out)
}

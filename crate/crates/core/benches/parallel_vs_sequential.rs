//! Sequential vs rayon execution of the batch stages.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use openmind_core::graph::{build_snapshots, monthly_stats_report};
use openmind_core::sim::{run_many, SimConfig};
use openmind_core::transitions::transition_series;
use openmind_core::{estimate_all, Execution, InteractionRecord, MonthId, OpinionTable, Thresholds};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

struct Corpus {
    table: OpinionTable,
    records: Vec<InteractionRecord>,
    first: MonthId,
}

/// `users` active over `months` months, each with about `degree` random partners per month.
fn corpus(users: usize, months: usize, degree: usize, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = MonthId::new(2020, 1).unwrap();
    let mut table = OpinionTable::new(Thresholds::default());
    let mut records = Vec::new();
    let mut m = first;
    for _ in 0..months {
        for u in 0..users {
            table.insert(format!("u{u:05}"), m, rng.gen()).unwrap();
        }
        for _ in 0..users * degree / 2 {
            let (a, b) = (rng.gen_range(0..users), rng.gen_range(0..users));
            if a != b {
                records.push(InteractionRecord::new(m, format!("u{a:05}"), format!("u{b:05}"), 1).unwrap());
            }
        }
        m = m.next();
    }
    Corpus { table, records, first }
}

fn bench_estimate_all(c: &mut Criterion) {
    let mut group = c.benchmark_group("estimate_all");
    for users in [1_000, 10_000] {
        let data = corpus(users, 2, 20, 1);
        let graphs = build_snapshots(&data.records, &data.table, Execution::Parallel).unwrap();
        let g = &graphs.iter().find(|b| b.graph.month() == data.first).unwrap().graph;
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, users), &users, |b, _| {
                b.iter(|| black_box(estimate_all(g, &data.table, data.first, exec).unwrap()))
            });
        }
    }
    group.finish();
}

fn bench_snapshots(c: &mut Criterion) {
    let mut group = c.benchmark_group("snapshots_and_stats");
    group.sample_size(20);
    let data = corpus(2_000, 12, 10, 2);
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| {
                let graphs: Vec<_> =
                    build_snapshots(&data.records, &data.table, exec).unwrap().into_iter().map(|b| b.graph).collect();
                black_box(monthly_stats_report(&graphs, exec).unwrap())
            })
        });
    }
    group.finish();
}

fn bench_transitions(c: &mut Criterion) {
    let mut group = c.benchmark_group("transition_series");
    let data = corpus(5_000, 24, 0, 3);
    for (name, exec) in MODES {
        group.bench_function(name, |b| b.iter(|| black_box(transition_series(&data.table, exec).unwrap())));
    }
    group.finish();
}

fn bench_seed_sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulation_seed_sweep");
    group.sample_size(10);
    let configs: Vec<SimConfig> = (0..16).map(|s| SimConfig::new(100, 0.2, 20_000, s)).collect();
    for (name, exec) in MODES {
        group.bench_function(name, |b| b.iter(|| black_box(run_many(&configs, exec))));
    }
    group.finish();
}

criterion_group!(benches, bench_estimate_all, bench_snapshots, bench_transitions, bench_seed_sweep);
criterion_main!(benches);

use criterion::{criterion_group, criterion_main, Criterion};
use ecbc_core::run_execution;
use ecbc_core::simnet::scripts::{handcrafted, scenario_config};
use ecbc_core::simnet::{replay, AdversaryScript, Algorithm};
use std::hint::black_box;

fn executions(c: &mut Criterion) {
    let mut group = c.benchmark_group("execution");
    for (n, t) in [(4, 1), (7, 2), (10, 3)] {
        let cfg = scenario_config(Algorithm::Consensus, n, t, None, 1);
        group.bench_function(format!("fault_free_n{n}"), |b| {
            b.iter(|| run_execution(black_box(&cfg), &AdversaryScript::honest()).unwrap())
        });
    }
    let cfg = scenario_config(Algorithm::QValidity, 7, 2, Some(3), 1);
    group.bench_function("qvalidity_fault_free_n7_q3", |b| {
        b.iter(|| run_execution(black_box(&cfg), &AdversaryScript::honest()).unwrap())
    });
    let attack = handcrafted(7, 2, 1)
        .into_iter()
        .find(|s| s.name == "equivocation")
        .unwrap();
    group.bench_function("equivocation_n7", |b| {
        b.iter(|| replay(black_box(&attack.replay)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, executions);
criterion_main!(benches);

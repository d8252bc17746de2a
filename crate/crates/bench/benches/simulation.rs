use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fedreorder::sim::{evaluate_sequence_bounded, simulated_optimal_bounded};
use fedreorder::{auto_plan, CostConfig};
use fedreorder_bench::simulation_instances;

const MAX_ROWS: usize = 200_000;

fn simulation(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulation");
    group.sample_size(20);
    for n in [2, 3, 4] {
        let instances = simulation_instances(n, 4);
        let planned: Vec<_> = instances
            .iter()
            .map(|i| auto_plan(&i.query, &CostConfig::default()).unwrap().0)
            .collect();
        group.bench_with_input(
            BenchmarkId::new("planned_order", n),
            &instances,
            |b, insts| {
                b.iter(|| {
                    for (inst, q) in insts.iter().zip(&planned) {
                        black_box(
                            evaluate_sequence_bounded(q, &inst.federation, MAX_ROWS).unwrap(),
                        );
                    }
                })
            },
        );
        group.bench_with_input(
            BenchmarkId::new("optimal_search", n),
            &instances,
            |b, insts| {
                b.iter(|| {
                    for inst in insts {
                        black_box(
                            simulated_optimal_bounded(&inst.query, &inst.federation, 9, MAX_ROWS)
                                .unwrap(),
                        );
                    }
                })
            },
        );
    }
    group.finish();
}

criterion_group!(benches, simulation);
criterion_main!(benches);

//! Parallel pool versus a single worker on small sweep workloads. Without
//! the `parallel` feature both arms run sequentially.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use iondd::experiments::{run_scenario, Scenario};
use iondd::par;

const SWEEP: &str = r#"
name = "bench_sweep"
kind = "epsilon_sweep"
seed = 1

[chain]
n_ions = 2
trap_frequency_hz = 220e3
eta = 0.018

[sequence]
blocks = 8
rabi_hz = 40e3

[noise]
eps_hz = [0, 10, 100, 500, 1000, 2000, 3000, 4000]

[thermal]
nbar = 0.0
cutoff = 3
"#;

const MAP: &str = r#"
name = "bench_map"
kind = "robustness_map"
seed = 2

[chain]
n_ions = 2
trap_frequency_hz = 200e3
eta = 0.0113

[sequence]
blocks = 10
rabi_hz = 40e3
policies = ["random", "correlated:2"]

[noise]
eps_hz = [0, 1000, 2000]
domega_fraction = [0, 0.02, 0.04]
realizations = 2

[thermal]
nbar = 0.0
cutoff = 3
"#;

fn bench_scenarios(c: &mut Criterion) {
    let mut group = c.benchmark_group("scenarios");
    group.sample_size(10);
    for (label, text) in [("epsilon_sweep", SWEEP), ("robustness_map", MAP)] {
        let s = Scenario::from_toml_str(text, None).unwrap();
        group.bench_with_input(BenchmarkId::new("pool", label), &s, |b, s| {
            b.iter(|| black_box(run_scenario(s).unwrap()))
        });
        group.bench_with_input(BenchmarkId::new("sequential", label), &s, |b, s| {
            b.iter(|| black_box(par::with_threads(1, || run_scenario(s).unwrap()).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_scenarios);
criterion_main!(benches);

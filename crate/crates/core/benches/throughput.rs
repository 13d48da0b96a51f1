use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use missforecast::datagen::Scenario;
use missforecast::procedures::ProcedureKind;
use missforecast::runner::{run_sweep, ProcedureEntry, PropGrid, SweepConfig};

fn small_sweep() -> SweepConfig {
    SweepConfig {
        scenarios: vec![Scenario::S3, Scenario::S4],
        prop_grid: PropGrid { start: 0.1, stop: 0.5, step: 0.2 },
        n_train: 500,
        n_test: 500,
        replicates_per_point: 2,
        procedures: [ProcedureKind::PS, ProcedureKind::MIMI, ProcedureKind::MleM]
            .into_iter()
            .map(ProcedureEntry::Name)
            .collect(),
        ..Default::default()
    }
}

fn sweep(c: &mut Criterion) {
    let cfg = small_sweep();
    let mut g = c.benchmark_group("sweep");
    g.sample_size(10);
    #[cfg(feature = "parallel")]
    {
        let threads = rayon::current_num_threads();
        g.bench_function(BenchmarkId::new("rayon", threads), |b| b.iter(|| run_sweep(&cfg, None).unwrap()));
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        g.bench_function(BenchmarkId::new("rayon", 1), |b| {
            b.iter(|| single.install(|| run_sweep(&cfg, None).unwrap()))
        });
    }
    #[cfg(not(feature = "parallel"))]
    g.bench_function(BenchmarkId::new("sequential", 1), |b| b.iter(|| run_sweep(&cfg, None).unwrap()));
    g.finish();
}

criterion_group!(benches, sweep);
criterion_main!(benches);

use aam_core::anderson::AndersonConfig;
use aam_core::experiments::{run_monte_carlo, run_theta_sweep, SampleDomain, SweepConfig, SweepKind};
use aam_core::problems::builtin;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

/// Sequential baseline against a pool sized to the machine (at least 2).
fn job_counts() -> Vec<usize> {
    let n = std::thread::available_parallelism().map_or(1, |n| n.get());
    vec![1, n.max(2)]
}

fn sweeps(c: &mut Criterion) {
    let p = builtin("prob41").unwrap();
    let mut group = c.benchmark_group("sweeps");
    group.sample_size(10);
    for jobs in job_counts() {
        let mut theta = SweepConfig::new(p.clone(), AndersonConfig::default(), SweepKind::Theta { n_angles: 360 });
        theta.jobs = jobs;
        group.bench_with_input(BenchmarkId::new("theta_360", jobs), &theta, |b, cfg| {
            b.iter(|| run_theta_sweep(cfg).unwrap())
        });

        let mut mc = SweepConfig::new(
            p.clone(),
            AndersonConfig::default(),
            SweepKind::MonteCarlo {
                trials: 1000,
                seed: 1,
                domain: SampleDomain::UnitCircle,
            },
        );
        mc.jobs = jobs;
        group.bench_with_input(BenchmarkId::new("monte_carlo_1000", jobs), &mc, |b, cfg| {
            b.iter(|| run_monte_carlo(cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, sweeps);
criterion_main!(benches);

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex64;

use acdisc::acs::StructureField;
use acdisc::disc::{cauchy_p, cauchy_p_direct, DiscGrid};
use acdisc::levi::{lambda0, Lambda0Options, ScalarField};
use acdisc::par::Execution;
use acdisc::region::DomainSpec;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn bench_lambda0(c: &mut Criterion) {
    let j = StructureField::standard(2);
    let d = DomainSpec::unit_ball(2);
    let u = ScalarField::squared_norm(vec![0.0; 4]);
    let mut group = c.benchmark_group("lambda0_n2");
    group.sample_size(10);
    for (name, execution) in MODES {
        let opts = Lambda0Options {
            execution,
            ..Lambda0Options::default()
        };
        group.bench_function(name, |b| b.iter(|| lambda0(&j, &u, &d, &opts).value));
    }
    group.finish();
}

fn bench_cauchy(c: &mut Criterion) {
    let mut group = c.benchmark_group("cauchy");
    group.sample_size(10);
    for n in [32, 64] {
        let grid = DiscGrid::new(n);
        let f: Vec<Complex64> = grid.nodes.iter().map(|&z| z.exp() * z.conj()).collect();
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(format!("fft_{name}"), n), &n, |b, _| {
                b.iter(|| cauchy_p(&grid, &f, exec))
            });
        }
        if n == 32 {
            for (name, exec) in MODES {
                group.bench_with_input(BenchmarkId::new(format!("direct_{name}"), n), &n, |b, _| {
                    b.iter(|| cauchy_p_direct(&grid, &f, exec))
                });
            }
        }
    }
    group.finish();
}

criterion_group!(benches, bench_lambda0, bench_cauchy);
criterion_main!(benches);

use criterion::{criterion_group, criterion_main, Criterion};
use erheo_core::{
    maximal_function, modular, luxembourg_norm, pipeline, solver, Centering, Field, Grid, Rank,
    VariableExponent, Weight,
};
use std::hint::black_box;

fn bench_luxembourg(c: &mut Criterion) {
    let g = Grid::unit(64);
    let u = erheo_core::truncation::random_smooth(g, Rank::Scalar, 1, 0, false);
    let p = VariableExponent::new(Field::scalar_from_fn(g, Centering::Node, |x, y| {
        1.4 + 0.8 * (x + y) / 2.0
    }))
    .unwrap();
    let w = Weight::unit(g, Centering::Node);
    c.bench_function("luxembourg_norm_64", |b| {
        b.iter(|| luxembourg_norm(black_box(&u), &p, &w).unwrap())
    });
    c.bench_function("modular_64", |b| {
        b.iter(|| modular(black_box(&u), &p, &w).unwrap())
    });
}

fn bench_maximal(c: &mut Criterion) {
    let g = Grid::unit(48);
    let u = erheo_core::truncation::random_smooth(g, Rank::Scalar, 2, 0, false).magnitude();
    c.bench_function("maximal_function_48", |b| {
        b.iter(|| maximal_function(black_box(&u)).unwrap())
    });
}

fn bench_picard(c: &mut Criterion) {
    let setup = pipeline::default_nonlinear_setup(16, 1).unwrap();
    let state = solver::SolverState::zero(setup.grid);
    c.bench_function("picard_step_16", |b| {
        b.iter(|| solver::picard_step(black_box(&state), &setup).unwrap())
    });
}

criterion_group!(benches, bench_luxembourg, bench_maximal, bench_picard);
criterion_main!(benches);

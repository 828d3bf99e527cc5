use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use evolk_bench::{oscillator_solution, system, tangent_points};
use evolk_core::geometry::lagrangian_jet;
use evolk_core::hj::check_standard_hj;
use evolk_core::kappa::{dynamical_identity_residual, evaluate_k, integrate_regular};
use evolk_core::exprlang::Vars;
use evolk_core::scalars::eval_hess;
use evolk_core::{parse, Method, TangentPoint};

fn derivatives(c: &mut Criterion) {
    let pend = system("pendulum_1d");
    let osc2 = system("oscillator_2d");
    let pts = tangent_points(2, 64);
    let rosen = parse("100*(q2-q1^2)^2 + (1-q1)^2 + 100*(q3-q2^2)^2 + (1-q2)^2 + 100*(q4-q3^2)^2 + (1-q3)^2", 4).unwrap();
    c.bench_function("eval_hess rosenbrock-4", |b| {
        b.iter(|| eval_hess(|x| rosen.eval(&Vars::q(x)), black_box(&[0.3, -0.2, 0.8, 1.1])).unwrap())
    });
    c.bench_function("lagrangian_jet oscillator_2d x64", |b| {
        b.iter(|| pts.iter().map(|p| lagrangian_jet(&osc2, p).unwrap().value).sum::<f64>())
    });
    c.bench_function("evaluate_k pendulum", |b| {
        let pt = TangentPoint { q: vec![0.4], v: vec![1.2] };
        b.iter(|| evaluate_k(&pend, black_box(&pt)).unwrap())
    });
    c.bench_function("dynamical identity oscillator_2d x64", |b| {
        b.iter(|| pts.iter().map(|p| dynamical_identity_residual(&osc2, p).unwrap()).fold(0.0, f64::max))
    });
}

fn checks(c: &mut Criterion) {
    let (osc, x, grid) = oscillator_solution();
    c.bench_function("check_standard_hj oscillator 101 points", |b| {
        b.iter(|| check_standard_hj(&osc, &x, &grid, 1e-8).unwrap().passed())
    });
    let pend = system("pendulum_1d");
    c.bench_function("integrate_regular pendulum rk4 1000 steps", |b| {
        let start = TangentPoint { q: vec![0.1], v: vec![0.5] };
        b.iter(|| integrate_regular(&pend, &start, 1e-3, 1000, Method::Rk4).unwrap().len())
    });
}

criterion_group!(benches, derivatives, checks);
criterion_main!(benches);

use evolk_core::exprlang::{Expr, Vars};
use evolk_core::scalars::{eval_grad, eval_hess};
use evolk_core::systems::{builtin, BUILTIN_NAMES};
use evolk_core::{parse, LagrangianSystem};
use proptest::prelude::*;

fn fd4(f: &dyn Fn(&[f64]) -> f64, x: &[f64], i: usize, h: f64) -> f64 {
    let at = |d: f64| {
        let mut y = x.to_vec();
        y[i] += d;
        f(&y)
    };
    (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h)
}

/// Expressions of a system as functions of a flat point: L over (q, v) and,
/// if present, H over (q, p).
fn system_functions(sys: &LagrangianSystem) -> Vec<(Expr, bool)> {
    let mut out = vec![(sys.lagrangian().clone(), false)];
    if let Some(h) = sys.hamiltonian() {
        out.push((h.clone(), true));
    }
    out
}

fn vars<S>(x: &[S], n: usize, cotangent: bool) -> Vars<'_, S> {
    if cotangent {
        Vars::qp(&x[..n], &x[n..])
    } else {
        Vars::qv(&x[..n], &x[n..])
    }
}

fn systems() -> Vec<LagrangianSystem> {
    BUILTIN_NAMES.iter().map(|n| builtin(n).unwrap().system).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn gradients_match_fourth_order_differences(raw in prop::collection::vec(-2.0f64..2.0, 4)) {
        for sys in systems() {
            let n = sys.dof();
            let x = &raw[..2 * n];
            for (e, cot) in system_functions(&sys) {
                let (_, g) = eval_grad(|d| e.eval(&vars(d, n, cot)), x).unwrap();
                let f = |y: &[f64]| e.eval_real(&vars(y, n, cot)).unwrap();
                for (i, gi) in g.iter().enumerate() {
                    let fd = fd4(&f, x, i, 1e-4);
                    prop_assert!((gi - fd).abs() <= 1e-6 * fd.abs().max(1.0), "{} d{i}: {gi} vs {fd}", sys.name());
                }
            }
        }
    }

    #[test]
    fn hessians_are_bitwise_symmetric(raw in prop::collection::vec(-2.0f64..2.0, 4)) {
        let e = parse("sin(q1*q2)*exp(q3) + q4^3/(2 + cos(q1 - q4)) + sqrt(1 + q2^2)*q3", 4).unwrap();
        let (_, _, h) = eval_hess(|d| e.eval(&Vars::q(d)), &raw).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                prop_assert_eq!(h[i * 4 + j].to_bits(), h[j * 4 + i].to_bits());
            }
        }
    }

    #[test]
    fn gradient_is_linear(raw in prop::collection::vec(-2.0f64..2.0, 3), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let f = parse("q1*sin(q2) + q3^2", 3).unwrap();
        let g = parse("exp(q1)*q3 - cos(q2*q3)", 3).unwrap();
        let (_, gf) = eval_grad(|d| f.eval(&Vars::q(d)), &raw).unwrap();
        let (_, gg) = eval_grad(|d| g.eval(&Vars::q(d)), &raw).unwrap();
        let combo = parse(&format!("({a:?})*({f}) + ({b:?})*({g})"), 3).unwrap();
        let (_, gc) = eval_grad(|d| combo.eval(&Vars::q(d)), &raw).unwrap();
        for i in 0..3 {
            let expected = a * gf[i] + b * gg[i];
            prop_assert!((gc[i] - expected).abs() <= 4.0 * f64::EPSILON * (a.abs() * gf[i].abs() + b.abs() * gg[i].abs()).max(1.0));
        }
    }
}

#[test]
fn hessian_matches_differences_of_the_gradient() {
    let e = parse("sin(q1)*q2^2 + exp(q1*q2)", 2).unwrap();
    let x = [0.4, -0.7];
    let (_, _, h) = eval_hess(|d| e.eval(&Vars::q(d)), &x).unwrap();
    for j in 0..2 {
        let gj = |y: &[f64]| eval_grad(|d| e.eval(&Vars::q(d)), y).unwrap().1[j];
        for i in 0..2 {
            let fd = fd4(&gj, &x, i, 1e-4);
            assert!((h[i * 2 + j] - fd).abs() < 1e-8, "{i}{j}");
        }
    }
}

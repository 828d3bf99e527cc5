//! Acceptance criteria, one line each. Exits nonzero if any criterion fails.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use evolk_core::constraints::{primary_constraint_residual, stabilize, transport_constraint, Status};
use evolk_core::hj::{
    check_hamiltonian_generalized, check_hamiltonian_hj, check_standard_hj, condition3_residual, condition4_residual,
    condition5_residual, lift_and_compare, parse_alpha, solve_hj_1dof, Branch,
};
use evolk_core::kappa::{
    dynamical_identity_residual, energy_drift, evaluate_k, hamiltonian_curve_residual, integrate_hamiltonian,
    integrate_regular, pushforward_relation_residual,
};
use evolk_core::systems::BUILTIN_NAMES;
use evolk_core::{builtin, Axis, CotangentPoint, LagrangianSystem, Method, SampleGrid, SectionX, TangentPoint};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Outcome = Result<String, String>;

/// Exit code, stdout and the files left in the working directory.
type Run = (Option<i32>, Vec<u8>, Vec<(String, Vec<u8>)>);

type Criterion = (&'static str, fn() -> Outcome);

const REGULAR: [&str; 4] = ["free_particle_1d", "oscillator_1d", "oscillator_2d", "pendulum_1d"];

fn ensure(ok: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(message())
    }
}

fn s<T, E: ToString>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn random_points(sys: &LagrangianSystem, tq: &SampleGrid, count: usize, rng: &mut StdRng) -> Vec<TangentPoint> {
    let n = sys.dof();
    (0..count)
        .map(|_| {
            let x: Vec<f64> = tq.axes.iter().map(|a| rng.random_range(a.lo..=a.hi)).collect();
            TangentPoint { q: x[..n].to_vec(), v: x[n..].to_vec() }
        })
        .collect()
}

fn oscillator_grid() -> SampleGrid {
    SampleGrid::new(vec![Axis::new(-0.9, 0.9, 101).unwrap()]).unwrap()
}

fn ac1_identity_suite() -> Outcome {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for name in BUILTIN_NAMES {
        let b = s(builtin(name))?;
        for pt in random_points(&b.system, &b.tq_grid, 1000, &mut rng) {
            let r = s(dynamical_identity_residual(&b.system, &pt))?;
            ensure(r <= 1e-10, || format!("{name}: identity residual {r:e} at {pt:?}"))?;
            let k = s(evaluate_k(&b.system, &pt))?;
            ensure(k.dq.iter().zip(&pt.v).all(|(a, b)| a.to_bits() == b.to_bits()), || {
                format!("{name}: second-order condition broken at {pt:?}")
            })?;
            worst = worst.max(r);
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    ensure(elapsed < 5.0, || format!("took {elapsed:.2} s"))?;
    Ok(format!("max residual {worst:.2e} over 6x1000 points, second-order exact, {elapsed:.2} s"))
}

fn ac2_pushforward() -> Outcome {
    let mut rng = StdRng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for name in REGULAR {
        let b = s(builtin(name))?;
        for pt in random_points(&b.system, &b.tq_grid, 200, &mut rng) {
            let r = s(pushforward_relation_residual(&b.system, &pt))?;
            ensure(r <= 1e-10, || format!("{name}: residual {r:e} at {pt:?}"))?;
            worst = worst.max(r);
        }
    }
    Ok(format!("max residual {worst:.2e} over 4x200 points"))
}

fn curve(name: &str, q: &[f64], p: &[f64], steps: usize) -> Result<f64, String> {
    let b = s(builtin(name))?;
    let start = CotangentPoint { q: q.to_vec(), p: p.to_vec() };
    let traj = s(integrate_hamiltonian(&b.system, &start, 1e-3, steps, Method::Rk4))?;
    s(hamiltonian_curve_residual(&b.system, &traj))
}

fn ac3_curve_relation() -> Outcome {
    let osc = curve("oscillator_1d", &[1.0], &[0.0], 10_000)?;
    ensure(osc <= 1e-5, || format!("oscillator residual {osc:e}"))?;
    let free = curve("free_particle_1d", &[0.3], &[-0.8], 10_000)?;
    ensure(free <= 1e-12, || format!("free particle residual {free:e}"))?;
    let rest = curve("oscillator_2d", &[0.0, 0.0], &[0.0, 0.0], 1000)?.max(curve("pendulum_1d", &[0.0], &[0.0], 1000)?);
    ensure(rest <= 1e-12, || format!("equilibrium residual {rest:e}"))?;
    Ok(format!("oscillator {osc:.2e}, free particle {free:.2e}, equilibria {rest:.2e}"))
}

fn ac4_positive_suite() -> Outcome {
    let start = Instant::now();
    let b = s(builtin("oscillator_1d"))?;
    let x = s(SectionX::parse(&["sqrt(1-q1^2)"], 1))?;
    let r = s(check_standard_hj(&b.system, &x, &oscillator_grid(), 1e-8))?;
    let (c3, c4, c5) = (r.cond3_operator.unwrap(), r.cond4_form.unwrap(), r.cond5_pullback.unwrap());
    let (closed, energy) = (r.closedness.unwrap(), r.energy_variation.unwrap());
    ensure(c3 <= 1e-8 && c4 <= 1e-8 && c5 <= 1e-8, || format!("conditions {c3:e} {c4:e} {c5:e}"))?;
    ensure(closed <= 1e-12, || format!("closedness {closed:e}"))?;
    ensure(energy <= 1e-10, || format!("energy variation {energy:e}"))?;
    let mut lift = 0.0f64;
    for q0 in [-0.5, 0.0, 0.3] {
        lift = lift.max(s(lift_and_compare(&b.system, &x, &[q0], 1.0, 1e-3))?);
    }
    ensure(lift <= 1e-6, || format!("lift deviation {lift:e}"))?;
    let elapsed = start.elapsed().as_secs_f64();
    ensure(elapsed < 1.0, || format!("took {elapsed:.2} s"))?;
    Ok(format!(
        "cond3/4/5 {:.1e}, closedness {closed:.1e}, energy {energy:.1e}, lift {lift:.1e}, {elapsed:.2} s",
        c3.max(c4).max(c5)
    ))
}

fn ac5_negative_suite() -> Outcome {
    let b = s(builtin("oscillator_1d"))?;
    let x = s(SectionX::parse(&["sqrt(1-q1^2)+0.1"], 1))?;
    let at = s(condition3_residual(&b.system, &x, &[0.3]))?;
    ensure((at - 0.031446).abs() <= 1e-5, || format!("cond3 at q=0.3 is {at}"))?;
    let r = s(check_standard_hj(&b.system, &x, &oscillator_grid(), 1e-8))?;
    let all = [r.cond3_operator.unwrap(), r.cond4_form.unwrap(), r.cond5_pullback.unwrap()];
    ensure(all.iter().all(|c| *c > 1e-3), || format!("maxima {all:?}"))?;
    Ok(format!("cond3(0.3) = {at:.6}, maxima {:.3e} {:.3e} {:.3e}", all[0], all[1], all[2]))
}

fn random_section(rng: &mut StdRng) -> Result<SectionX, String> {
    let mut c = || rng.random_range(-1.0..=1.0f64);
    let texts: Vec<String> = (1..=2)
        .map(|i| format!("({}) + ({})*q1 + ({})*q2 + ({})*sin(q{i}) + ({})*q1*q2", c(), c(), c(), c(), c()))
        .collect();
    s(SectionX::parse(&[&texts[0], &texts[1]], 2))
}

fn ac6_forms_agree() -> Outcome {
    let b = s(builtin("oscillator_2d"))?;
    let mut rng = StdRng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let x = random_section(&mut rng)?;
        for q in b.q_grid.points() {
            let d = (s(condition4_residual(&b.system, &x, &q))? - s(condition5_residual(&b.system, &x, &q))?).abs();
            ensure(d <= 1e-9, || format!("|cond4 - cond5| = {d:e} at {q:?}"))?;
            worst = worst.max(d);
        }
    }
    Ok(format!("max |cond4 - cond5| {worst:.2e} over 20 sections x {} points", b.q_grid.len()))
}

fn oscillator_error(h: f64) -> Result<(f64, f64), String> {
    let b = s(builtin("oscillator_1d"))?;
    let steps = (10.0 / h).round() as usize;
    let traj = s(integrate_regular(&b.system, &TangentPoint { q: vec![1.0], v: vec![0.0] }, h, steps, Method::Rk4))?;
    let err = traj.times.iter().zip(&traj.states).map(|(t, st)| (st.q[0] - t.cos()).abs()).fold(0.0, f64::max);
    Ok((err, s(energy_drift(&b.system, &traj))?))
}

fn ac7_integrator() -> Outcome {
    let (err, drift) = oscillator_error(1e-3)?;
    ensure(err <= 1e-8, || format!("position error {err:e}"))?;
    ensure(drift <= 1e-8, || format!("energy drift {drift:e}"))?;
    let ratio = oscillator_error(0.1)?.0 / oscillator_error(0.05)?.0;
    ensure((12.0..=20.0).contains(&ratio), || format!("halving ratio {ratio}"))?;
    Ok(format!("error {err:.2e}, drift {drift:.2e}, halving ratio {ratio:.2} (h = 0.1 -> 0.05)"))
}

fn ac8_solver() -> Outcome {
    let b = s(builtin("pendulum_1d"))?;
    let axis = s(Axis::new(-1.0, 1.0, 201))?;
    let sol = s(solve_hj_1dof(&b.system, 2.0, axis, Branch::Plus))?;
    let level = sol.q.iter().zip(&sol.p).map(|(q, p)| (0.5 * p * p - q.cos() - 2.0).abs()).fold(0.0, f64::max);
    ensure(level <= 1e-10, || format!("level residual {level:e}"))?;
    let h = axis.step();
    let mut fd = 0.0f64;
    for k in 2..sol.q.len() - 2 {
        let w = &sol.w;
        let dw = (w[k - 2] - 8.0 * w[k - 1] + 8.0 * w[k + 1] - w[k + 2]) / (12.0 * h);
        fd = fd.max((dw - sol.p[k]).abs());
    }
    ensure(fd <= 1e-6, || format!("dW/dq mismatch {fd:e}"))?;
    let report = s(check_standard_hj(&b.system, &sol, &SampleGrid { axes: vec![axis] }, 1e-8))?;
    ensure(report.passed(), || format!("self-check failed:\n{report}"))?;
    Ok(format!("level {level:.2e}, dW/dq {fd:.2e}, check_standard_hj passed"))
}

fn ac9_constraints() -> Outcome {
    let b = s(builtin("singular_affine"))?;
    let primaries = s(b.primaries())?;
    let res = s(primary_constraint_residual(&b.system, &primaries[0], &b.tq_grid))?;
    ensure(res == 0.0, || format!("primary residual {res:e}"))?;
    let chi = s(transport_constraint(&primaries[0]))?;
    let mut rng = StdRng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for pt in random_points(&b.system, &b.tq_grid, 1000, &mut rng) {
        worst = worst.max((s(chi.eval_tangent(&b.system, &pt))? + pt.v[0]).abs());
    }
    ensure(worst <= 1e-12, || format!("|chi + v1| = {worst:e}"))?;
    let set = s(stabilize(&b.system, &primaries, &b.tq_grid, 1e-8, 10))?;
    ensure(set.status == Status::Converged, || format!("status {}", set.status))?;
    ensure(set.constraints.len() == b.constraint_chain.len(), || format!("{} constraints", set.constraints.len()))?;
    let gens: Vec<usize> = set.constraints.iter().map(|c| c.generation).collect();
    ensure(gens == [0, 1, 2], || format!("generations {gens:?}"))?;
    let on_v_zero = set.feasible.iter().all(|&k| b.tq_grid.point(k)[2..] == [0.0, 0.0]);
    ensure(on_v_zero && set.feasible.len() == 25, || format!("{} feasible points, v = 0: {on_v_zero}", set.feasible.len()))?;

    let g = s(builtin("singular_gauge"))?;
    let gp = s(g.primaries())?;
    let gset = s(stabilize(&g.system, &gp, &g.tq_grid, 1e-8, 10))?;
    ensure(gset.status == Status::Converged && gset.iterations == 1 && gset.constraints == gp, || {
        format!("gauge: {} after {} iterations, {} constraints", gset.status, gset.iterations, gset.constraints.len())
    })?;
    Ok(format!("affine chain p2 - q1 -> -v1 -> -v2 (|chi + v1| {worst:.1e}), gauge converged in 1 iteration"))
}

fn ac10_hamiltonian_side() -> Outcome {
    let b = s(builtin("oscillator_1d"))?;
    let alpha = s(parse_alpha(&["sqrt(1-q1^2)"], 1))?;
    let t3 = s(check_hamiltonian_generalized(&b.system, &alpha, &oscillator_grid(), 1e-10))?.cond4_form.unwrap();
    ensure(t3 <= 1e-10, || format!("generalized residual {t3:e}"))?;
    let t4 = s(check_hamiltonian_hj(&b.system, &alpha, &oscillator_grid(), 1e-10))?.energy_variation.unwrap();
    ensure(t4 <= 1e-10, || format!("energy variation {t4:e}"))?;

    let osc2 = s(builtin("oscillator_2d"))?;
    let wrong = s(parse_alpha(&["q2", "q1"], 2))?;
    let corner = SampleGrid::uniform(s(Axis::new(-0.9, 0.9, 19))?, 2).map_err(|e| e.to_string())?;
    let r = s(check_hamiltonian_generalized(&osc2.system, &wrong, &corner, 1e-8))?.cond4_form.unwrap();
    // α is closed, so the residual is |d(H∘α)| = 2 max(|q1|, |q2|), largest at the corner
    ensure(r >= 1.0 && (r - 1.8).abs() <= 1e-12, || format!("wrong form residual {r}"))?;
    Ok(format!("generalized {t3:.1e}, energy variation {t4:.1e}, wrong form residual {r:.3} at (0.9, 0.9)"))
}

const EXAMPLES: [&[&str]; 6] = [
    &["check-hj", "--system", "oscillator_1d", "--X", "sqrt(1-q1^2)", "--grid", "-0.9:0.9:101", "--tol", "1e-8"],
    &["verify-identities", "--system", "singular_affine", "--samples", "1000"],
    &["solve-hj", "--system", "pendulum_1d", "--energy", "2", "--interval", "-1:1", "--points", "201"],
    &["integrate", "--system", "oscillator_1d", "--q", "1", "--v", "0", "--steps", "10000"],
    &["constraints", "--system", "singular_affine"],
    &["check-hj-hamiltonian", "--system", "oscillator_2d", "--alpha", "q2", "--alpha", "q1", "--grid", "-0.9:0.9:19"],
];

fn run_in(dir: &Path, args: &[&str]) -> Result<Run, String> {
    let out = s(Command::new(env!("CARGO_BIN_EXE_evolk")).args(args).current_dir(dir).output())?;
    let mut files = Vec::new();
    for entry in s(std::fs::read_dir(dir))? {
        let path = s(entry)?.path();
        files.push((path.file_name().unwrap().to_string_lossy().into_owned(), s(std::fs::read(&path))?));
    }
    files.sort();
    Ok((out.status.code(), out.stdout, files))
}

fn ac11_determinism() -> Outcome {
    let mut csv = 0;
    for args in EXAMPLES {
        let (a, b) = (s(tempfile::tempdir())?, s(tempfile::tempdir())?);
        let first = run_in(a.path(), args)?;
        let second = run_in(b.path(), args)?;
        ensure(first.0 == second.0, || format!("{args:?}: exit codes {:?} vs {:?}", first.0, second.0))?;
        ensure(first.1 == second.1, || format!("{args:?}: reports differ"))?;
        ensure(first.2 == second.2, || format!("{args:?}: CSV output differs"))?;
        csv += first.2.len();
    }
    Ok(format!("{} commands, {csv} CSV files byte-identical across runs", EXAMPLES.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("identity suite", ac1_identity_suite),
        ("operator-dynamics relation", ac2_pushforward),
        ("curve relation", ac3_curve_relation),
        ("HJ positive suite", ac4_positive_suite),
        ("HJ negative suite", ac5_negative_suite),
        ("cond4 = cond5", ac6_forms_agree),
        ("integrator accuracy", ac7_integrator),
        ("HJ solver", ac8_solver),
        ("constraint suite", ac9_constraints),
        ("Hamiltonian-side checks", ac10_hamiltonian_side),
        ("CLI determinism", ac11_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match result {
            Ok(detail) => println!("[PASS] AC-{} {name}: {detail}", i + 1),
            Err(reason) => {
                failed += 1;
                println!("[FAIL] AC-{} {name}: {reason}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

use clap::Args;
use evolk_core::geometry::{legendre_map, velocity_hessian};
use evolk_core::hj::{condition4_residual, condition5_residual};
use evolk_core::kappa::{dynamical_identity_residual, evaluate_k, hamiltonian_curve_residual, integrate_hamiltonian, pushforward_relation_residual};
use evolk_core::{Method, SectionX, TangentPoint};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use super::{Loaded, Outcome, SystemArg};
use crate::error::CliResult;

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub system: SystemArg,

    /// Random points of TQ per suite
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,

    /// Tolerance of the curve relation, which carries finite-difference error
    #[arg(long, default_value_t = 1e-5)]
    pub curve_tol: f64,

    /// Step of the trajectory used by the curve relation
    #[arg(long, default_value_t = 1e-3)]
    pub h: f64,

    /// Steps of the trajectory used by the curve relation
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
}

/// Sampling box on TQ: the system's TQ grid, else its Q grid with `v ∈ [−1, 1]`.
fn sample_box(loaded: &Loaded) -> Vec<(f64, f64)> {
    let n = loaded.dof();
    if let Some(g) = &loaded.tq_grid {
        return g.axes.iter().map(|a| (a.lo, a.hi)).collect();
    }
    let q: Vec<(f64, f64)> = match &loaded.q_grid {
        Some(g) => g.axes.iter().map(|a| (a.lo, a.hi)).collect(),
        None => vec![(-1.0, 1.0); n],
    };
    q.into_iter().chain(std::iter::repeat_n((-1.0, 1.0), n)).collect()
}

/// `X_i = b_i + Σ_j a_ij q_j + c_i q_i²` with coefficients in [−1, 1].
fn random_section(rng: &mut StdRng, n: usize) -> CliResult<SectionX> {
    let mut coef = || rng.random_range(-1.0..=1.0f64);
    let texts: Vec<String> = (1..=n)
        .map(|i| {
            let mut s = format!("({}) + ({})*q{i}^2", coef(), coef());
            for j in 1..=n {
                s += &format!(" + ({})*q{j}", coef());
            }
            s
        })
        .collect();
    let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
    Ok(SectionX::parse(&refs, n)?)
}

enum Line {
    Checked(f64, f64),
    Skipped(&'static str),
}

impl VerifyArgs {
    pub fn run(&self) -> CliResult<Outcome> {
        let loaded = self.system.load()?;
        let sys = &loaded.system;
        let n = loaded.dof();
        let bounds = sample_box(&loaded);
        let mut rng = StdRng::seed_from_u64(self.seed);
        let points: Vec<TangentPoint> = (0..self.samples.max(1))
            .map(|_| {
                let x: Vec<f64> = bounds.iter().map(|&(lo, hi)| rng.random_range(lo..=hi)).collect();
                TangentPoint::from_flat(&x)
            })
            .collect();

        let mut identity = 0.0f64;
        let mut second_order = 0.0f64;
        let mut regular = true;
        for pt in &points {
            identity = identity.max(dynamical_identity_residual(sys, pt)?);
            let k = evaluate_k(sys, pt)?;
            second_order = second_order.max(k.dq.iter().zip(&pt.v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
            regular &= velocity_hessian(sys, pt)?.regular;
        }

        let pushforward = if regular {
            let mut worst = 0.0f64;
            for pt in &points {
                worst = worst.max(pushforward_relation_residual(sys, pt)?);
            }
            Line::Checked(worst, self.tol)
        } else {
            Line::Skipped("singular velocity Hessian")
        };

        let curve = if sys.hamiltonian().is_some() {
            let start = legendre_map(sys, &points[0])?;
            let traj = integrate_hamiltonian(sys, &start, self.h, self.steps, Method::Rk4)?;
            Line::Checked(hamiltonian_curve_residual(sys, &traj)?, self.curve_tol)
        } else {
            Line::Skipped("no Hamiltonian")
        };

        let mut forms = 0.0f64;
        for pt in &points {
            let x = random_section(&mut rng, n)?;
            let c4 = condition4_residual(sys, &x, &pt.q)?;
            let c5 = condition5_residual(sys, &x, &pt.q)?;
            forms = forms.max((c4 - c5).abs());
        }

        println!("system: {}", sys.name());
        println!("samples: {} (seed {})", points.len(), self.seed);
        let lines = [
            ("dynamical identity", Line::Checked(identity, self.tol)),
            ("second-order condition", Line::Checked(second_order, 0.0)),
            ("pushforward relation", pushforward),
            ("curve relation", curve),
            ("cond4 = cond5", Line::Checked(forms, self.tol)),
        ];
        let mut ok = true;
        for (name, line) in &lines {
            match line {
                Line::Checked(r, tol) => {
                    let pass = r <= tol;
                    ok &= pass;
                    println!("{name:<24} {r:.6e}  {}", if pass { "PASS" } else { "FAIL" });
                }
                Line::Skipped(why) => println!("{name:<24} skipped ({why})"),
            }
        }
        println!("verdict: {}", if ok { "PASS" } else { "FAIL" });
        Ok(ok.into())
    }
}

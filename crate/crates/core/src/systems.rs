//! Builtin reference systems with closed-form ground truth.

use crate::constraints::ConstraintFunction;
use crate::error::{Error, Result};
use crate::geometry::LagrangianSystem;
use crate::grid::{Axis, SampleGrid};

pub const BUILTIN_NAMES: [&str; 6] =
    ["free_particle_1d", "oscillator_1d", "oscillator_2d", "pendulum_1d", "singular_affine", "singular_gauge"];

/// Closed-form trajectory `q(t)` for an initial condition `(q0, v0)`.
pub type Flow = fn(q0: &[f64], v0: &[f64], t: f64) -> Vec<f64>;

/// A 1-dof Hamilton–Jacobi family: the section `X_E(q)` on a branch, for
/// energies where it is defined.
pub type HjFamily = fn(energy: f64, sign: f64, q: f64) -> f64;

#[derive(Clone, Debug)]
pub struct BuiltinSystem {
    pub system: LagrangianSystem,
    pub flow: Option<Flow>,
    pub hj_family: Option<HjFamily>,
    /// Expected stabilization chain as generation-indexed descriptions,
    /// starting from the declared primaries.
    pub constraint_chain: Vec<&'static str>,
    /// Grid on Q.
    pub q_grid: SampleGrid,
    /// Grid on TQ, `(q, v)` axes.
    pub tq_grid: SampleGrid,
    pub note: &'static str,
}

impl BuiltinSystem {
    pub fn name(&self) -> &str {
        self.system.name()
    }

    pub fn primaries(&self) -> Result<Vec<ConstraintFunction>> {
        self.system.constraints().iter().cloned().map(ConstraintFunction::hamiltonian).collect()
    }
}

fn grid(axes: &[(f64, f64, usize)]) -> SampleGrid {
    SampleGrid::new(axes.iter().map(|&(a, b, m)| Axis::new(a, b, m).expect("builtin axes are valid")).collect())
        .expect("builtin grids are non-empty")
}

fn oscillator_flow(q0: &[f64], v0: &[f64], t: f64) -> Vec<f64> {
    q0.iter().zip(v0).map(|(q, v)| q * t.cos() + v * t.sin()).collect()
}

fn free_flow(q0: &[f64], v0: &[f64], t: f64) -> Vec<f64> {
    q0.iter().zip(v0).map(|(q, v)| q + v * t).collect()
}

fn oscillator_family(e: f64, sign: f64, q: f64) -> f64 {
    sign * (2.0 * e - q * q).sqrt()
}

fn free_family(e: f64, sign: f64, _q: f64) -> f64 {
    sign * (2.0 * e).sqrt()
}

fn pendulum_family(e: f64, sign: f64, q: f64) -> f64 {
    sign * (2.0 * (e + q.cos())).sqrt()
}

/// Looks up a builtin by name and self-checks FL-projectability of its
/// Hamiltonian on the recommended TQ grid.
pub fn builtin(name: &str) -> Result<BuiltinSystem> {
    let b = match name {
        "free_particle_1d" => BuiltinSystem {
            system: LagrangianSystem::from_strs(1, "0.5*v1^2", Some("0.5*p1^2"), &[])?,
            flow: Some(free_flow),
            hj_family: Some(free_family),
            constraint_chain: vec![],
            q_grid: grid(&[(-1.0, 1.0, 21)]),
            tq_grid: grid(&[(-1.0, 1.0, 11), (-1.0, 1.0, 11)]),
            note: "q(t) = q0 + v0 t; p = ±√(2E) on every fiber",
        },
        "oscillator_1d" => BuiltinSystem {
            system: LagrangianSystem::from_strs(1, "0.5*v1^2 - 0.5*q1^2", Some("0.5*p1^2 + 0.5*q1^2"), &[])?,
            flow: Some(oscillator_flow),
            hj_family: Some(oscillator_family),
            constraint_chain: vec![],
            q_grid: grid(&[(-0.9, 0.9, 101)]),
            tq_grid: grid(&[(-1.0, 1.0, 11), (-1.0, 1.0, 11)]),
            note: "q(t) = q0 cos t + v0 sin t; X_E(q) = ±√(2E − q²) since ½X² + ½q² = E",
        },
        "oscillator_2d" => BuiltinSystem {
            system: LagrangianSystem::from_strs(
                2,
                "0.5*v1^2 + 0.5*v2^2 - 0.5*q1^2 - 0.5*q2^2",
                Some("0.5*p1^2 + 0.5*p2^2 + 0.5*q1^2 + 0.5*q2^2"),
                &[],
            )?,
            flow: Some(oscillator_flow),
            hj_family: None,
            constraint_chain: vec![],
            q_grid: grid(&[(-0.8, 0.8, 17), (-0.8, 0.8, 17)]),
            tq_grid: grid(&[(-1.0, 1.0, 5), (-1.0, 1.0, 5), (-1.0, 1.0, 5), (-1.0, 1.0, 5)]),
            note: "two uncoupled unit oscillators; separable with X = (±√(2E₁ − q1²), ±√(2E₂ − q2²))",
        },
        "pendulum_1d" => BuiltinSystem {
            system: LagrangianSystem::from_strs(1, "0.5*v1^2 + cos(q1)", Some("0.5*p1^2 - cos(q1)"), &[])?,
            flow: None,
            hj_family: Some(pendulum_family),
            constraint_chain: vec![],
            q_grid: grid(&[(-1.0, 1.0, 201)]),
            tq_grid: grid(&[(-3.0, 3.0, 13), (-2.0, 2.0, 9)]),
            note: "p(q) = ±√(2(E + cos q)) on the level set ½p² − cos q = E",
        },
        "singular_affine" => BuiltinSystem {
            system: LagrangianSystem::from_strs(2, "0.5*v1^2 + q1*v2", None, &["p2 - q1"])?,
            flow: None,
            hj_family: None,
            constraint_chain: vec!["p2 - q1", "-v1", "-v2"],
            q_grid: grid(&[(-1.0, 1.0, 5), (-1.0, 1.0, 5)]),
            tq_grid: grid(&[(-1.0, 1.0, 5), (-1.0, 1.0, 5), (-1.0, 1.0, 5), (-1.0, 1.0, 5)]),
            note: "W = diag(1, 0); FL gives p2 = q1; i(K)d(p2 − q1) = −v1; along the flow v̇1 = v2, so v2 = 0 next; \
                   then d(v2)/dt is absorbed by the free acceleration along ∂/∂v2",
        },
        "singular_gauge" => BuiltinSystem {
            system: LagrangianSystem::from_strs(2, "0.5*(v1 - v2)^2", None, &["p1 + p2"])?,
            flow: None,
            hj_family: None,
            constraint_chain: vec!["p1 + p2"],
            q_grid: grid(&[(-1.0, 1.0, 5), (-1.0, 1.0, 5)]),
            tq_grid: grid(&[(-1.0, 1.0, 5), (-1.0, 1.0, 5), (-1.0, 1.0, 5), (-1.0, 1.0, 5)]),
            note: "L depends on v1 − v2 only; p1 + p2 = 0 and its transport vanishes since ∂L/∂q = 0",
        },
        other => return Err(Error::UnknownSystem(other.to_string())),
    };
    let b = BuiltinSystem { system: b.system.named(name), ..b };
    if b.system.hamiltonian().is_some() {
        b.system.check_projectability(&b.tq_grid, 1e-10)?;
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{stabilize, Status};
    use crate::geometry::{lagrangian_energy, TangentPoint};

    #[test]
    fn every_builtin_loads() {
        for name in BUILTIN_NAMES {
            let b = builtin(name).unwrap();
            assert_eq!(b.name(), name);
            assert_eq!(b.tq_grid.dim(), 2 * b.system.dof());
            assert_eq!(b.q_grid.dim(), b.system.dof());
        }
        assert_eq!(builtin("double_pendulum").unwrap_err(), Error::UnknownSystem("double_pendulum".into()));
    }

    #[test]
    fn hj_families_lie_on_level_sets() {
        for (name, e) in [("free_particle_1d", 0.5), ("oscillator_1d", 0.5), ("pendulum_1d", 2.0)] {
            let b = builtin(name).unwrap();
            let f = b.hj_family.unwrap();
            for q in b.q_grid.axes[0].points() {
                for s in [1.0, -1.0] {
                    let pt = TangentPoint { q: vec![q], v: vec![f(e, s, q)] };
                    let el = lagrangian_energy(&b.system, &pt).unwrap();
                    assert!((el - e).abs() < 1e-10, "{name} {q}");
                }
            }
        }
    }

    #[test]
    fn flows_satisfy_the_equations_of_motion() {
        for name in ["free_particle_1d", "oscillator_1d", "oscillator_2d"] {
            let b = builtin(name).unwrap();
            let n = b.system.dof();
            let flow = b.flow.unwrap();
            let q0: Vec<f64> = (0..n).map(|i| 0.3 + 0.2 * i as f64).collect();
            let v0: Vec<f64> = (0..n).map(|i| -0.5 + 0.4 * i as f64).collect();
            let h = 1e-4;
            for t in [0.0, 0.7, 2.5] {
                let (a, c, d) = (flow(&q0, &v0, t - h), flow(&q0, &v0, t), flow(&q0, &v0, t + h));
                for i in 0..n {
                    let acc = (a[i] - 2.0 * c[i] + d[i]) / (h * h);
                    let force = if name == "free_particle_1d" { 0.0 } else { -c[i] };
                    assert!((acc - force).abs() < 1e-6, "{name} {t}");
                }
            }
        }
    }

    #[test]
    fn constraint_chains_match_fixtures() {
        for name in ["singular_affine", "singular_gauge"] {
            let b = builtin(name).unwrap();
            let set = stabilize(&b.system, &b.primaries().unwrap(), &b.tq_grid, 1e-8, 10).unwrap();
            assert_eq!(set.status, Status::Converged);
            assert_eq!(set.constraints.len(), b.constraint_chain.len(), "{name}");
        }
    }
}

//! The time-evolution operator K.
//!
//! K is a vector field along the Legendre map: at `(q, v)` it is the tangent
//! vector to T*Q based at `FL(q, v)` with components
//! `v^i ∂/∂q^i + ∂L/∂q^i ∂/∂p_i`. It exists for singular Lagrangians too,
//! which is why every identity below is checked on singular systems as well.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{
    condition_estimate, energy_jet, lagrangian_energy, lagrangian_gradient, lagrangian_jet, max_abs, CotangentPoint,
    LagrangianSystem, TangentPoint,
};
use crate::ode::{self, Method};

/// Condition estimates of W above this count as singular during integration.
pub const SINGULAR_CONDITION: f64 = 1e12;

/// The value `K(q, v)`.
#[derive(Clone, Debug, PartialEq)]
pub struct EvolutionVector {
    /// `FL(q, v)`.
    pub base: CotangentPoint,
    /// ∂/∂q components; always equal to `v`.
    pub dq: Vec<f64>,
    /// ∂/∂p components, `∂L/∂q`.
    pub dp: Vec<f64>,
}

pub fn evaluate_k(sys: &LagrangianSystem, pt: &TangentPoint) -> Result<EvolutionVector> {
    let (_, dl_dq, p) = lagrangian_gradient(sys, pt)?;
    Ok(EvolutionVector {
        base: CotangentPoint { q: pt.q.clone(), p },
        dq: pt.v.clone(),
        dp: dl_dq,
    })
}

/// Jacobian of `FL` over `(q, v)`: `[I 0; M W]` with `M_ij = ∂²L/∂v^i∂q^j`.
pub fn legendre_jacobian(sys: &LagrangianSystem, pt: &TangentPoint) -> Result<DMatrix<f64>> {
    let n = sys.dof();
    let jet = lagrangian_jet(sys, pt)?;
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    j.view_mut((0, 0), (n, n)).fill_with_identity();
    j.view_mut((n, 0), (n, n)).copy_from(&jet.mixed_block());
    j.view_mut((n, n), (n, n)).copy_from(&jet.velocity_block());
    Ok(j)
}

/// `ω(a, b) = a_q·b_p − a_p·b_q` on T*Q, vectors given as `(dq, dp)` stacks.
fn canonical_form(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() / 2;
    (0..n).map(|i| a[i] * b[n + i] - a[n + i] * b[i]).sum()
}

/// Max-norm of the 1-form `i(K)ω − dE_L` on TQ at `pt`.
///
/// `(i(K)ω)(w) = ω(K, T(FL)w)` over the `2n` coordinate vectors `w`. `dE_L`
/// is computed separately by nested differentiation of `v·∂L/∂v − L`.
pub fn dynamical_identity_residual(sys: &LagrangianSystem, pt: &TangentPoint) -> Result<f64> {
    let k = evaluate_k(sys, pt)?;
    let kvec: Vec<f64> = k.dq.iter().chain(&k.dp).copied().collect();
    let jac = legendre_jacobian(sys, pt)?;
    let de = energy_jet(sys, pt)?;
    let de: Vec<f64> = de.dq.into_iter().chain(de.dv).collect();
    let mut worst = 0.0f64;
    for (c, de_c) in de.iter().enumerate() {
        let pushed: Vec<f64> = jac.column(c).iter().copied().collect();
        worst = worst.max((canonical_form(&kvec, &pushed) - de_c).abs());
    }
    Ok(worst)
}

/// Sampled solution curve on TQ or T*Q.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<P> {
    pub times: Vec<f64>,
    pub states: Vec<P>,
    pub step: f64,
    pub method: Method,
}

impl<P> Trajectory<P> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// `v̇ = W⁻¹ (∂L/∂q − M v)`, the acceleration of the regular Euler–Lagrange
/// flow obtained by differentiating `p = ∂L/∂v` along the K-dynamics.
pub fn lagrangian_acceleration(sys: &LagrangianSystem, pt: &TangentPoint) -> Result<Vec<f64>> {
    let jet = lagrangian_jet(sys, pt)?;
    let w = jet.velocity_block();
    let condition = condition_estimate(&w);
    if condition.is_nan() || condition > SINGULAR_CONDITION {
        return Err(Error::SingularHessian { time: None, condition });
    }
    let rhs = DVector::from_vec(jet.dq.clone()) - jet.mixed_block() * DVector::from_vec(pt.v.clone());
    let a = w
        .lu()
        .solve(&rhs)
        .ok_or(Error::SingularHessian { time: None, condition })?;
    Ok(a.iter().copied().collect())
}

fn with_time(e: Error, t: f64) -> Error {
    match e {
        Error::SingularHessian { condition, .. } => Error::SingularHessian { time: Some(t), condition },
        other => other,
    }
}

/// Integrates `q̇ = v`, `v̇ = W⁻¹(∂L/∂q − M v)`. Refuses to run through a
/// singular velocity Hessian.
pub fn integrate_regular(
    sys: &LagrangianSystem,
    start: &TangentPoint,
    h: f64,
    steps: usize,
    method: Method,
) -> Result<Trajectory<TangentPoint>> {
    let n = sys.dof();
    if start.dof() != n {
        return Err(Error::Dimension(format!("start point has dof {}, system has {n}", start.dof())));
    }
    let rhs = |t: f64, y: &[f64]| -> Result<Vec<f64>> {
        let pt = TangentPoint::from_flat(y);
        let a = lagrangian_acceleration(sys, &pt).map_err(|e| with_time(e, t))?;
        Ok(pt.v.into_iter().chain(a).collect())
    };
    let ys = ode::integrate(method, &start.flat(), h, steps, rhs)?;
    Ok(Trajectory {
        times: (0..=steps).map(|k| k as f64 * h).collect(),
        states: ys.iter().map(|y| TangentPoint::from_flat(y)).collect(),
        step: h,
        method,
    })
}

/// Integrates Hamilton's equations `q̇ = ∂H/∂p`, `ṗ = −∂H/∂q`.
pub fn integrate_hamiltonian(
    sys: &LagrangianSystem,
    start: &CotangentPoint,
    h: f64,
    steps: usize,
    method: Method,
) -> Result<Trajectory<CotangentPoint>> {
    sys.require_hamiltonian()?;
    let n = sys.dof();
    if start.dof() != n {
        return Err(Error::Dimension(format!("start point has dof {}, system has {n}", start.dof())));
    }
    let rhs = |_: f64, y: &[f64]| -> Result<Vec<f64>> {
        let (_, dh_dq, dh_dp) = sys.hamiltonian_gradient(&CotangentPoint::from_flat(y))?;
        Ok(dh_dp.into_iter().chain(dh_dq.into_iter().map(|x| -x)).collect())
    };
    let ys = ode::integrate(method, &start.flat(), h, steps, rhs)?;
    Ok(Trajectory {
        times: (0..=steps).map(|k| k as f64 * h).collect(),
        states: ys.iter().map(|y| CotangentPoint::from_flat(y)).collect(),
        step: h,
        method,
    })
}

/// Max-norm of `T(FL)(X_L) − K` at `pt`, for regular L.
pub fn pushforward_relation_residual(sys: &LagrangianSystem, pt: &TangentPoint) -> Result<f64> {
    let a = lagrangian_acceleration(sys, pt)?;
    let xl = DVector::from_iterator(2 * sys.dof(), pt.v.iter().chain(&a).copied());
    let pushed = legendre_jacobian(sys, pt)? * xl;
    let k = evaluate_k(sys, pt)?;
    Ok(max_abs(pushed.iter().zip(k.dq.iter().chain(&k.dp)).map(|(x, y)| x - y)))
}

/// Checks `ψ̇ = K ∘ Tπ_Q ∘ ψ̇` along a sampled curve on T*Q.
///
/// `ψ̇` comes from second-order central differences at interior samples, so the
/// result is only as small as `O(h²)` allows. The comparison covers the base
/// point (`p` against `∂L/∂v(q, q̇)`) as well as both vector components.
pub fn hamiltonian_curve_residual(sys: &LagrangianSystem, traj: &Trajectory<CotangentPoint>) -> Result<f64> {
    sys.require_hamiltonian()?;
    if traj.len() < 3 {
        return Err(Error::TrajectoryTooShort(traj.len()));
    }
    let h2 = 2.0 * traj.step;
    let mut worst = 0.0f64;
    for k in 1..traj.len() - 1 {
        let (prev, here, next) = (&traj.states[k - 1], &traj.states[k], &traj.states[k + 1]);
        let qdot: Vec<f64> = next.q.iter().zip(&prev.q).map(|(a, b)| (a - b) / h2).collect();
        let pdot: Vec<f64> = next.p.iter().zip(&prev.p).map(|(a, b)| (a - b) / h2).collect();
        let kv = evaluate_k(sys, &TangentPoint { q: here.q.clone(), v: qdot.clone() })?;
        worst = worst
            .max(max_abs(qdot.iter().zip(&kv.dq).map(|(a, b)| a - b)))
            .max(max_abs(pdot.iter().zip(&kv.dp).map(|(a, b)| a - b)))
            .max(max_abs(here.p.iter().zip(&kv.base.p).map(|(a, b)| a - b)));
    }
    Ok(worst)
}

/// Largest `|E_L(t) − E_L(0)|` along a Lagrangian trajectory.
pub fn energy_drift(sys: &LagrangianSystem, traj: &Trajectory<TangentPoint>) -> Result<f64> {
    let e: Vec<f64> = traj
        .states
        .iter()
        .map(|pt| lagrangian_energy(sys, pt))
        .collect::<Result<_>>()?;
    Ok(max_abs(e.iter().map(|x| x - e[0])))
}

/// Largest `|H(t) − H(0)|` along a Hamiltonian trajectory.
pub fn hamiltonian_drift(sys: &LagrangianSystem, traj: &Trajectory<CotangentPoint>) -> Result<f64> {
    let e: Vec<f64> = traj.states.iter().map(|pt| sys.hamiltonian_value(pt)).collect::<Result<_>>()?;
    Ok(max_abs(e.iter().map(|x| x - e[0])))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sys(n: usize, l: &str, h: Option<&str>) -> LagrangianSystem {
        LagrangianSystem::from_strs(n, l, h, &[]).unwrap()
    }

    fn tp(q: &[f64], v: &[f64]) -> TangentPoint {
        TangentPoint::new(q.to_vec(), v.to_vec()).unwrap()
    }

    #[test]
    fn k_examples() {
        let osc = sys(1, "0.5*v1^2 - 0.5*q1^2", None);
        let k = evaluate_k(&osc, &tp(&[1.0], &[2.0])).unwrap();
        assert_eq!((k.base.p.clone(), k.dq.clone(), k.dp.clone()), (vec![2.0], vec![2.0], vec![-1.0]));
        let free = sys(1, "0.5*v1^2", None);
        let k = evaluate_k(&free, &tp(&[0.0], &[3.0])).unwrap();
        assert_eq!((k.base.p, k.dq, k.dp), (vec![3.0], vec![3.0], vec![0.0]));
        let aff = sys(2, "0.5*v1^2 + q1*v2", None);
        let k = evaluate_k(&aff, &tp(&[1.0, 0.0], &[2.0, 3.0])).unwrap();
        assert_eq!(k.base, CotangentPoint { q: vec![1.0, 0.0], p: vec![2.0, 1.0] });
        assert_eq!((k.dq, k.dp), (vec![2.0, 3.0], vec![3.0, 0.0]));
    }

    #[test]
    fn dynamical_identity_on_regular_and_singular() {
        let cases = [
            (sys(1, "0.5*v1^2 - 0.5*q1^2", None), tp(&[1.0], &[2.0])),
            (sys(2, "0.5*v1^2 + q1*v2", None), tp(&[0.4, -1.1], &[0.7, 2.0])),
            (sys(1, "0.5*v1^2 + cos(q1)", None), tp(&[0.3], &[1.7])),
        ];
        for (s, pt) in &cases {
            assert!(dynamical_identity_residual(s, pt).unwrap() < 1e-12);
        }
    }

    #[test]
    fn singular_lagrangian_refuses_to_integrate() {
        let aff = sys(2, "0.5*v1^2 + q1*v2", None);
        let err = integrate_regular(&aff, &tp(&[0.0, 0.0], &[1.0, 1.0]), 1e-2, 10, Method::Rk4).unwrap_err();
        assert!(matches!(err, Error::SingularHessian { time: Some(t), .. } if t == 0.0));
    }

    #[test]
    fn free_particle_moves_linearly() {
        let free = sys(1, "0.5*v1^2", None);
        let traj = integrate_regular(&free, &tp(&[0.0], &[3.0]), 0.125, 80, Method::Rk4).unwrap();
        for (t, s) in traj.times.iter().zip(&traj.states) {
            assert_eq!(s.q[0], 3.0 * t);
            assert_eq!(s.v[0], 3.0);
        }
    }

    #[test]
    fn constant_hamiltonian_vector_field() {
        let s = sys(1, "v1", Some("p1"));
        let traj = integrate_hamiltonian(&s, &CotangentPoint::new(vec![0.0], vec![0.0]).unwrap(), 0.25, 8, Method::Euler)
            .unwrap();
        for (t, st) in traj.times.iter().zip(&traj.states) {
            assert_eq!(st.q[0], *t);
            assert_eq!(st.p[0], 0.0);
        }
    }

    #[test]
    fn pushforward_on_free_particle_is_exact() {
        let free = sys(1, "0.5*v1^2", None);
        assert_eq!(pushforward_relation_residual(&free, &tp(&[0.3], &[-2.0])).unwrap(), 0.0);
        let osc = sys(1, "0.5*v1^2 - 0.5*q1^2", None);
        assert!(pushforward_relation_residual(&osc, &tp(&[1.0], &[2.0])).unwrap() < 1e-10);
    }

    #[test]
    fn curve_residual_needs_three_samples() {
        let osc = sys(1, "0.5*v1^2 - 0.5*q1^2", Some("0.5*p1^2 + 0.5*q1^2"));
        let traj = integrate_hamiltonian(&osc, &CotangentPoint::new(vec![1.0], vec![0.0]).unwrap(), 0.1, 1, Method::Rk4)
            .unwrap();
        assert_eq!(hamiltonian_curve_residual(&osc, &traj), Err(Error::TrajectoryTooShort(2)));
    }

    #[test]
    fn fl_jacobian_blocks() {
        let aff = sys(2, "0.5*v1^2 + q1*v2", None);
        let j = legendre_jacobian(&aff, &tp(&[1.0, 0.0], &[2.0, 3.0])).unwrap();
        // p2 = q1, so ∂p2/∂q1 = 1
        assert_eq!(j[(3, 0)], 1.0);
        assert_eq!(j[(2, 2)], 1.0);
        assert_eq!(j[(3, 3)], 0.0);
    }
}

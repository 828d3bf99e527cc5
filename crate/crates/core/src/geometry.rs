//! Bundle points, the Lagrangian system, and the coordinate expressions of
//! the Legendre map, the energy, the velocity Hessian and the pullbacks of
//! θ_L and ω_L by a section.
//!
//! Conventions used throughout the crate:
//!
//! * a 2-form β on Q is the antisymmetric matrix `B` with
//!   `β = Σ_{i<j} B_ij dq^i ∧ dq^j`, and `(i(X)β)_j = Σ_i X^i B_ij`;
//! * the canonical form on T*Q is `ω = Σ dq^i ∧ dp_i`, so
//!   `ω(a, b) = a_q·b_p − a_p·b_q`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::exprlang::{parse, Expr, Family, Vars};
use crate::grid::SampleGrid;
use crate::hj::{Section, SectionJet};
use crate::scalars::{seed1, seed2, Dual1, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub struct TangentPoint {
    pub q: Vec<f64>,
    pub v: Vec<f64>,
}

impl TangentPoint {
    pub fn new(q: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if q.is_empty() || q.len() != v.len() {
            return Err(Error::Dimension(format!("q has {} entries, v has {}", q.len(), v.len())));
        }
        Ok(Self { q, v })
    }

    /// Splits a flat `(q, v)` vector.
    pub fn from_flat(x: &[f64]) -> Self {
        let n = x.len() / 2;
        Self { q: x[..n].to_vec(), v: x[n..].to_vec() }
    }

    pub fn dof(&self) -> usize {
        self.q.len()
    }

    pub fn flat(&self) -> Vec<f64> {
        self.q.iter().chain(&self.v).copied().collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CotangentPoint {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl CotangentPoint {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if q.is_empty() || q.len() != p.len() {
            return Err(Error::Dimension(format!("q has {} entries, p has {}", q.len(), p.len())));
        }
        Ok(Self { q, p })
    }

    pub fn from_flat(x: &[f64]) -> Self {
        let n = x.len() / 2;
        Self { q: x[..n].to_vec(), p: x[n..].to_vec() }
    }

    pub fn dof(&self) -> usize {
        self.q.len()
    }

    pub fn flat(&self) -> Vec<f64> {
        self.q.iter().chain(&self.p).copied().collect()
    }
}

/// A Lagrangian `L(q, v)` on TQ with an optional Hamiltonian `H(q, p)` and
/// optional declared primary constraints `ξ(q, p)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LagrangianSystem {
    name: String,
    dof: usize,
    lagrangian: Expr,
    hamiltonian: Option<Expr>,
    constraints: Vec<Expr>,
}

fn check_families(what: &str, e: &Expr, allowed: Family) -> Result<()> {
    match e.families().into_iter().find(|f| *f != Family::Q && *f != allowed) {
        Some(f) => Err(Error::InvalidSystem(format!("{what} must not reference the {} family", f.letter()))),
        None => Ok(()),
    }
}

impl LagrangianSystem {
    pub fn new(dof: usize, lagrangian: Expr) -> Result<Self> {
        if dof == 0 {
            return Err(Error::InvalidSystem("dof must be positive".into()));
        }
        check_families("the Lagrangian", &lagrangian, Family::V)?;
        check_index_range(&lagrangian, dof)?;
        Ok(Self { name: String::new(), dof, lagrangian, hamiltonian: None, constraints: Vec::new() })
    }

    /// Parses every expression against `dof`.
    pub fn from_strs(dof: usize, lagrangian: &str, hamiltonian: Option<&str>, constraints: &[&str]) -> Result<Self> {
        let mut sys = Self::new(dof, parse(lagrangian, dof)?)?;
        if let Some(h) = hamiltonian {
            sys = sys.with_hamiltonian(parse(h, dof)?)?;
        }
        let constraints = constraints.iter().map(|c| parse(c, dof)).collect::<Result<Vec<_>>>()?;
        sys.with_constraints(constraints)
    }

    pub fn with_hamiltonian(mut self, h: Expr) -> Result<Self> {
        check_families("the Hamiltonian", &h, Family::P)?;
        check_index_range(&h, self.dof)?;
        self.hamiltonian = Some(h);
        Ok(self)
    }

    pub fn with_constraints(mut self, constraints: Vec<Expr>) -> Result<Self> {
        for c in &constraints {
            check_families("a Hamiltonian constraint", c, Family::P)?;
            check_index_range(c, self.dof)?;
        }
        self.constraints = constraints;
        Ok(self)
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dof(&self) -> usize {
        self.dof
    }

    pub fn lagrangian(&self) -> &Expr {
        &self.lagrangian
    }

    pub fn hamiltonian(&self) -> Option<&Expr> {
        self.hamiltonian.as_ref()
    }

    pub fn require_hamiltonian(&self) -> Result<&Expr> {
        self.hamiltonian.as_ref().ok_or(Error::MissingHamiltonian)
    }

    pub fn constraints(&self) -> &[Expr] {
        &self.constraints
    }

    /// `H(q, p)`.
    pub fn hamiltonian_value(&self, pt: &CotangentPoint) -> Result<f64> {
        self.require_hamiltonian()?.eval_real(&Vars::qp(&pt.q, &pt.p))
    }

    /// Gradient `(∂H/∂q, ∂H/∂p)` at `pt`.
    pub fn hamiltonian_gradient(&self, pt: &CotangentPoint) -> Result<(f64, Vec<f64>, Vec<f64>)> {
        let h = self.require_hamiltonian()?;
        let x = seed1(&pt.flat());
        let (q, p) = x.split_at(self.dof);
        let out: Dual1 = h.eval(&Vars::qp(q, p))?;
        let grad: Vec<f64> = (0..2 * self.dof).map(|i| out.partial(i)).collect();
        Ok((out.value, grad[..self.dof].to_vec(), grad[self.dof..].to_vec()))
    }

    /// Checks `H(FL(q, v)) = E_L(q, v)` on a `2n`-dimensional grid and returns
    /// the largest deviation.
    pub fn check_projectability(&self, grid: &SampleGrid, tol: f64) -> Result<f64> {
        self.require_hamiltonian()?;
        if grid.dim() != 2 * self.dof {
            return Err(Error::Dimension(format!("grid has {} axes, expected {}", grid.dim(), 2 * self.dof)));
        }
        let mut worst = 0.0f64;
        for x in grid.points() {
            let pt = TangentPoint::from_flat(&x);
            let residual = (self.hamiltonian_value(&legendre_map(self, &pt)?)? - lagrangian_energy(self, &pt)?).abs();
            if residual > tol {
                return Err(Error::NotProjectable { residual, point: x });
            }
            worst = worst.max(residual);
        }
        Ok(worst)
    }
}

fn check_index_range(e: &Expr, dof: usize) -> Result<()> {
    match e.variables().into_iter().find(|v| v.index >= dof) {
        Some(v) => Err(Error::InvalidSystem(format!("variable {v} exceeds dof {dof}"))),
        None => Ok(()),
    }
}

/// First and second derivatives of L at a point of TQ.
#[derive(Clone, Debug)]
pub struct LagrangianJet {
    pub value: f64,
    /// ∂L/∂q
    pub dq: Vec<f64>,
    /// ∂L/∂v, i.e. the momenta.
    pub dv: Vec<f64>,
    /// Full Hessian over `(q, v)`.
    pub hessian: DMatrix<f64>,
}

impl LagrangianJet {
    fn n(&self) -> usize {
        self.dq.len()
    }

    /// `W_ij = ∂²L/∂v^i∂v^j`.
    pub fn velocity_block(&self) -> DMatrix<f64> {
        let n = self.n();
        self.hessian.view((n, n), (n, n)).into_owned()
    }

    /// `M_ij = ∂²L/∂v^i∂q^j`.
    pub fn mixed_block(&self) -> DMatrix<f64> {
        let n = self.n();
        self.hessian.view((n, 0), (n, n)).into_owned()
    }
}

pub fn lagrangian_jet(sys: &LagrangianSystem, pt: &TangentPoint) -> Result<LagrangianJet> {
    let n = sys.dof();
    let x = seed2(&pt.flat());
    let (q, v) = x.split_at(n);
    let out = sys.lagrangian().eval(&Vars::qv(q, v))?;
    let m = 2 * n;
    let hessian = DMatrix::from_fn(m, m, |i, j| out.hessian(i, j));
    let grad: Vec<f64> = (0..m).map(|i| out.grad.get(i).copied().unwrap_or(0.0)).collect();
    Ok(LagrangianJet { value: out.value, dq: grad[..n].to_vec(), dv: grad[n..].to_vec(), hessian })
}

/// `(L, ∂L/∂q, ∂L/∂v)` by first-order differentiation.
pub fn lagrangian_gradient(sys: &LagrangianSystem, pt: &TangentPoint) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let n = sys.dof();
    let x = seed1(&pt.flat());
    let (q, v) = x.split_at(n);
    let out: Dual1 = sys.lagrangian().eval(&Vars::qv(q, v))?;
    let grad: Vec<f64> = (0..2 * n).map(|i| out.partial(i)).collect();
    Ok((out.value, grad[..n].to_vec(), grad[n..].to_vec()))
}

/// The fiber derivative `(q, v) ↦ (q, ∂L/∂v)`.
pub fn legendre_map(sys: &LagrangianSystem, pt: &TangentPoint) -> Result<CotangentPoint> {
    let (_, _, p) = lagrangian_gradient(sys, pt)?;
    Ok(CotangentPoint { q: pt.q.clone(), p })
}

/// `E_L = Σ v^i ∂L/∂v^i − L`.
pub fn lagrangian_energy(sys: &LagrangianSystem, pt: &TangentPoint) -> Result<f64> {
    let (l, _, p) = lagrangian_gradient(sys, pt)?;
    Ok(dot(&pt.v, &p) - l)
}

/// `E_L` and its gradient, obtained by differentiating `v·∂L/∂v − L` as a
/// whole with nested dual numbers (no hand-written chain rule).
#[derive(Clone, Debug)]
pub struct EnergyJet {
    pub value: f64,
    pub dq: Vec<f64>,
    pub dv: Vec<f64>,
}

pub fn energy_jet(sys: &LagrangianSystem, pt: &TangentPoint) -> Result<EnergyJet> {
    let n = sys.dof();
    let inner = seed1(&pt.flat());
    let q: Vec<Dual1<Dual1>> = inner[..n].iter().cloned().map(Dual1::constant).collect();
    let v: Vec<Dual1<Dual1>> = inner[n..]
        .iter()
        .enumerate()
        .map(|(i, vi)| {
            let partials = (0..n).map(|k| Dual1::from_f64(if k == i { 1.0 } else { 0.0 })).collect();
            Dual1 { value: vi.clone(), partials }
        })
        .collect();
    let l = sys.lagrangian().eval(&Vars::qv(&q, &v))?;
    let mut energy = -l.value.clone();
    for i in 0..n {
        energy = inner[n + i].clone() * l.partial(i) + energy;
    }
    let grad: Vec<f64> = (0..2 * n).map(|i| energy.partial(i)).collect();
    Ok(EnergyJet { value: energy.value, dq: grad[..n].to_vec(), dv: grad[n..].to_vec() })
}

#[derive(Clone, Debug)]
pub struct VelocityHessian {
    pub w: DMatrix<f64>,
    pub rank: usize,
    pub regular: bool,
    pub singular_values: Vec<f64>,
}

pub fn velocity_hessian(sys: &LagrangianSystem, pt: &TangentPoint) -> Result<VelocityHessian> {
    let w = lagrangian_jet(sys, pt)?.velocity_block();
    let (rank, singular_values) = numerical_rank(&w);
    Ok(VelocityHessian { regular: rank == w.nrows(), w, rank, singular_values })
}

/// Singular values below `max(1e-8 · σ_max, 1e-12)` count as zero.
pub(crate) fn rank_threshold(singular_values: &[f64]) -> f64 {
    let smax = singular_values.iter().copied().fold(0.0, f64::max);
    (1e-8 * smax).max(1e-12)
}

pub(crate) fn numerical_rank(m: &DMatrix<f64>) -> (usize, Vec<f64>) {
    let sv: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    let thr = rank_threshold(&sv);
    (sv.iter().filter(|s| **s > thr).count(), sv)
}

/// Ratio of extreme singular values; infinite for an exactly singular matrix.
pub(crate) fn condition_estimate(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let smax = sv.max();
    let smin = sv.min();
    if smin == 0.0 {
        f64::INFINITY
    } else {
        smax / smin
    }
}

/// Orthonormal basis of the numerical null space, as columns, and the
/// thresholded pseudo-inverse.
pub(crate) fn null_space_and_pinv(m: &DMatrix<f64>) -> (Vec<DVector<f64>>, DMatrix<f64>) {
    let n = m.ncols();
    let svd = m.clone().svd(true, true);
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    let thr = rank_threshold(&sv);
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let mut pinv = DMatrix::zeros(n, m.nrows());
    let mut null = Vec::new();
    for (k, s) in sv.iter().enumerate() {
        let vk = vt.row(k).transpose();
        if *s > thr {
            pinv += &vk * u.column(k).transpose() / *s;
        } else {
            null.push(vk);
        }
    }
    // nalgebra's thin SVD has min(rows, cols) singular triplets; square here.
    (null, pinv)
}

/// `J_ij = ∂α_i/∂q^j` for `α = FL∘X`, by the chain rule
/// `∂²L/∂q^j∂v^i + Σ_k W_ik ∂X^k/∂q^j` evaluated at `(q, X(q))`.
pub fn induced_jacobian(sys: &LagrangianSystem, q: &[f64], x: &SectionJet) -> Result<(LagrangianJet, DMatrix<f64>)> {
    let pt = TangentPoint::new(q.to_vec(), x.value.clone())?;
    let jet = lagrangian_jet(sys, &pt)?;
    let j = jet.mixed_block() + jet.velocity_block() * &x.jacobian;
    Ok((jet, j))
}

/// Components of `X*θ_L`, which equal `α = FL∘X`.
pub fn pullback_theta(sys: &LagrangianSystem, x: &dyn Section, q: &[f64]) -> Result<Vec<f64>> {
    let v = x.value(q)?;
    Ok(legendre_map(sys, &TangentPoint::new(q.to_vec(), v)?)?.p)
}

/// A 2-form on Q at a base point.
#[derive(Clone, Debug, PartialEq)]
pub struct Form2OnQ {
    pub base: Vec<f64>,
    components: DMatrix<f64>,
}

impl Form2OnQ {
    /// Stores the antisymmetric part `½(raw − rawᵀ)`.
    pub fn new(base: Vec<f64>, raw: &DMatrix<f64>) -> Self {
        let components = (raw - raw.transpose()) * 0.5;
        Self { base, components }
    }

    pub fn components(&self) -> &DMatrix<f64> {
        &self.components
    }

    /// `(i(X)β)_j = Σ_i X^i B_ij`.
    pub fn contract(&self, x: &[f64]) -> Vec<f64> {
        let n = self.components.nrows();
        (0..n).map(|j| (0..n).map(|i| x[i] * self.components[(i, j)]).sum()).collect()
    }
}

/// `X*ω_L` pulled back through `v = X(q)`. With `ω_L = Σ dq^i ∧ d(∂L/∂v^i)`,
/// the coefficient matrix is `J − Jᵀ` for the chain-rule Jacobian `J` of α.
pub fn pullback_omega_l(sys: &LagrangianSystem, x: &dyn Section, q: &[f64]) -> Result<Form2OnQ> {
    let jet = x.jet(q)?;
    let (_, j) = induced_jacobian(sys, q, &jet)?;
    Ok(Form2OnQ::new(q.to_vec(), &(&j - j.transpose())))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn max_abs(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hj::SectionX;

    fn sys(n: usize, l: &str) -> LagrangianSystem {
        LagrangianSystem::from_strs(n, l, None, &[]).unwrap()
    }

    fn tp(q: &[f64], v: &[f64]) -> TangentPoint {
        TangentPoint::new(q.to_vec(), v.to_vec()).unwrap()
    }

    #[test]
    fn legendre_examples() {
        let osc = sys(1, "0.5*v1^2 - 0.5*q1^2");
        assert_eq!(legendre_map(&osc, &tp(&[1.0], &[2.0])).unwrap(), CotangentPoint { q: vec![1.0], p: vec![2.0] });
        let aff = sys(2, "0.5*v1^2 + q1*v2");
        assert_eq!(legendre_map(&aff, &tp(&[1.0, 0.0], &[2.0, 3.0])).unwrap().p, vec![2.0, 1.0]);
        let pot = sys(2, "cos(q1) + q2^2");
        assert_eq!(legendre_map(&pot, &tp(&[0.4, 1.0], &[2.0, 3.0])).unwrap().p, vec![0.0, 0.0]);
    }

    #[test]
    fn energy_examples() {
        let osc = sys(1, "0.5*v1^2 - 0.5*q1^2");
        assert_eq!(lagrangian_energy(&osc, &tp(&[1.0], &[2.0])).unwrap(), 2.5);
        let aff = sys(2, "0.5*v1^2 + q1*v2");
        assert_eq!(lagrangian_energy(&aff, &tp(&[1.0, 0.0], &[2.0, 3.0])).unwrap(), 2.0);
        let hom = sys(1, "v1");
        assert_eq!(lagrangian_energy(&hom, &tp(&[0.3], &[-4.0])).unwrap(), 0.0);
        let pot = sys(1, "cos(q1)");
        let pt = tp(&[0.4], &[2.0]);
        assert_eq!(lagrangian_energy(&pot, &pt).unwrap(), -(0.4f64.cos()));
    }

    #[test]
    fn energy_jet_agrees_with_hand_formula() {
        let pend = sys(1, "0.5*v1^2 + cos(q1)");
        let e = energy_jet(&pend, &tp(&[0.3], &[1.7])).unwrap();
        assert!((e.value - (0.5 * 1.7 * 1.7 - 0.3f64.cos())).abs() < 1e-15);
        assert!((e.dq[0] - 0.3f64.sin()).abs() < 1e-15);
        assert!((e.dv[0] - 1.7).abs() < 1e-15);
    }

    #[test]
    fn hessian_examples() {
        let osc = velocity_hessian(&sys(1, "0.5*v1^2 - 0.5*q1^2"), &tp(&[1.0], &[2.0])).unwrap();
        assert_eq!(osc.w, DMatrix::from_row_slice(1, 1, &[1.0]));
        assert_eq!((osc.rank, osc.regular), (1, true));
        let aff = velocity_hessian(&sys(2, "0.5*v1^2 + q1*v2"), &tp(&[1.0, 0.0], &[2.0, 3.0])).unwrap();
        assert_eq!(aff.w, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
        assert_eq!((aff.rank, aff.regular), (1, false));
        let gauge = velocity_hessian(&sys(2, "0.5*(v1 - v2)^2"), &tp(&[0.0, 0.0], &[1.0, 3.0])).unwrap();
        assert_eq!(gauge.w, DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
        assert_eq!((gauge.rank, gauge.regular), (1, false));
        assert_eq!(gauge.w, gauge.w.transpose());
    }

    #[test]
    fn pullback_theta_examples() {
        let osc = sys(1, "0.5*v1^2 - 0.5*q1^2");
        let x = SectionX::parse(&["sqrt(1 - q1^2)"], 1).unwrap();
        assert_eq!(pullback_theta(&osc, &x, &[0.0]).unwrap(), vec![1.0]);
        let free = sys(1, "0.5*v1^2");
        let c = SectionX::parse(&["0.7"], 1).unwrap();
        for q in [-1.0, 0.0, 2.5] {
            assert_eq!(pullback_theta(&free, &c, &[q]).unwrap(), vec![0.7]);
        }
        let aff = sys(2, "0.5*v1^2 + q1*v2");
        let zero = SectionX::parse(&["0", "0"], 2).unwrap();
        assert_eq!(pullback_theta(&aff, &zero, &[0.6, -2.0]).unwrap(), vec![0.0, 0.6]);
    }

    #[test]
    fn pullback_omega_examples() {
        let osc = sys(1, "0.5*v1^2 - 0.5*q1^2");
        let x = SectionX::parse(&["sqrt(1 - q1^2) + q1"], 1).unwrap();
        assert_eq!(pullback_omega_l(&osc, &x, &[0.2]).unwrap().components()[(0, 0)], 0.0);
        let free2 = sys(2, "0.5*v1^2 + 0.5*v2^2");
        let c = SectionX::parse(&["1", "-2"], 2).unwrap();
        assert_eq!(*pullback_omega_l(&free2, &c, &[0.5, 0.5]).unwrap().components(), DMatrix::zeros(2, 2));
        // α = (q2, 0): dα has C_12 = ∂α_2/∂q1 − ∂α_1/∂q2 = −1, so X*ω_L = −dα has A_12 = +1.
        let shear = SectionX::parse(&["q2", "0"], 2).unwrap();
        let a = pullback_omega_l(&free2, &shear, &[1.0, 1.0]).unwrap();
        assert_eq!(a.components()[(0, 1)], 1.0);
        assert_eq!(a.components()[(1, 0)], -1.0);
    }

    #[test]
    fn form_contraction_convention() {
        let raw = DMatrix::from_row_slice(2, 2, &[0.0, 3.0, -3.0, 0.0]);
        let b = Form2OnQ::new(vec![0.0, 0.0], &raw);
        assert_eq!(b.contract(&[1.0, 0.0]), vec![0.0, 3.0]);
        assert_eq!(b.contract(&[0.0, 1.0]), vec![-3.0, 0.0]);
    }

    #[test]
    fn rejects_wrong_families() {
        assert!(LagrangianSystem::from_strs(1, "p1*v1", None, &[]).is_err());
        assert!(LagrangianSystem::from_strs(1, "v1^2", Some("v1"), &[]).is_err());
        assert!(LagrangianSystem::from_strs(1, "v1^2", None, &["v1"]).is_err());
    }

    #[test]
    fn pseudo_inverse_and_null_space() {
        let w = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        let (null, pinv) = null_space_and_pinv(&w);
        assert_eq!(null.len(), 1);
        let n = &null[0];
        assert!((n[0].abs() - 0.5f64.sqrt()).abs() < 1e-12 && (n[0] - n[1]).abs() < 1e-12);
        let back = &w * &pinv * &w;
        assert!((back - &w).norm() < 1e-12);
    }
}

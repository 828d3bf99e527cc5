use std::fmt;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::section::{direct_jet, induced_jet, AlphaJet, OneFormAlpha, Section};
use crate::error::{Error, Result};
use crate::exprlang::{Expr, Vars};
use crate::geometry::{energy_jet, induced_jacobian, max_abs, pullback_omega_l, LagrangianSystem, TangentPoint};
use crate::grid::SampleGrid;
use crate::kappa::integrate_regular;
use crate::ode::{self, Method};
use crate::scalars::{seed1, Dual1};

/// `J_ij = ∂α_i/∂q^j` for `α = FL∘X`, by the chain rule.
pub fn alpha_jacobian(sys: &LagrangianSystem, x: &dyn Section, q: &[f64]) -> Result<DMatrix<f64>> {
    let jet = x.jet(q)?;
    Ok(induced_jacobian(sys, q, &jet)?.1)
}

fn closedness_from(jet: &AlphaJet) -> DMatrix<f64> {
    let j = &jet.jacobian;
    j.transpose() - j
}

/// `C_ij = ∂α_j/∂q^i − ∂α_i/∂q^j`; α is closed at q iff C vanishes.
pub fn closedness_matrix(alpha: &OneFormAlpha<'_>, q: &[f64]) -> Result<DMatrix<f64>> {
    Ok(closedness_from(&alpha.jet(q)?))
}

fn contract(x: &[f64], c: &DMatrix<f64>) -> Vec<f64> {
    let n = x.len();
    (0..n).map(|j| (0..n).map(|i| x[i] * c[(i, j)]).sum()).collect()
}

/// Max-norm of the `dp` mismatch in `Tα∘X = K∘X`.
pub fn condition3_residual(sys: &LagrangianSystem, x: &dyn Section, q: &[f64]) -> Result<f64> {
    let xj = x.jet(q)?;
    let (ljet, j) = induced_jacobian(sys, q, &xj)?;
    let n = q.len();
    Ok(max_abs((0..n).map(|i| (0..n).map(|k| j[(i, k)] * xj.value[k]).sum::<f64>() - ljet.dq[i])))
}

/// Max-norm of `i(X)dα + d(E_L∘X)`, with dα and the energy gradient taken by
/// nested differentiation of `q ↦ L(q, X(q))`.
pub fn condition4_residual(sys: &LagrangianSystem, x: &dyn Section, q: &[f64]) -> Result<f64> {
    let xv = x.value(q)?;
    let ind = induced_jet(sys, x, q)?;
    let ix = contract(&xv, &closedness_from(&ind.alpha));
    Ok(max_abs(ix.iter().zip(&ind.energy_grad).map(|(a, g)| a + g)))
}

/// `g_j = ∂E_L/∂q^j + Σ_k ∂E_L/∂v^k ∂X^k/∂q^j` at `(q, X(q))`.
fn energy_total_gradient(sys: &LagrangianSystem, x: &super::SectionJet, q: &[f64]) -> Result<(f64, Vec<f64>)> {
    let e = energy_jet(sys, &TangentPoint::new(q.to_vec(), x.value.clone())?)?;
    let n = q.len();
    let g = (0..n).map(|j| e.dq[j] + (0..n).map(|k| e.dv[k] * x.jacobian[(k, j)]).sum::<f64>()).collect();
    Ok((e.value, g))
}

/// Max-norm of `i(X)(X*ω_L) − d(E_L∘X)` using the pulled-back symplectic form.
pub fn condition5_residual(sys: &LagrangianSystem, x: &dyn Section, q: &[f64]) -> Result<f64> {
    let xj = x.jet(q)?;
    let omega = pullback_omega_l(sys, x, q)?;
    let a = omega.components();
    let (_, g) = energy_total_gradient(sys, &xj, q)?;
    let ix = contract(&xj.value, a);
    Ok(max_abs(ix.iter().zip(&g).map(|(a, g)| a - g)))
}

/// Integrates `γ̇ = X(γ)` and the K-dynamics from `(q0, X(q0))` side by side
/// and returns `max_t |q_K − γ| + |v_K − X(γ)|` (max-norms).
pub fn lift_and_compare(sys: &LagrangianSystem, x: &dyn Section, q0: &[f64], horizon: f64, h: f64) -> Result<f64> {
    if !(h > 0.0 && horizon > 0.0) {
        return Err(Error::Precondition(format!("need positive step and horizon, got h={h}, T={horizon}")));
    }
    let steps = (horizon / h).round() as usize;
    let exit = |t: f64| move |e: Error| if e.is_numerical() { Error::DomainExit { time: t } } else { e };
    let gamma = ode::integrate(Method::Rk4, q0, h, steps, |t, q| x.value(q).map_err(exit(t)))?;
    let v0 = x.value(q0).map_err(exit(0.0))?;
    let traj = integrate_regular(sys, &TangentPoint::new(q0.to_vec(), v0)?, h, steps, Method::Rk4)?;
    let mut worst = 0.0f64;
    for (k, (g, s)) in gamma.iter().zip(&traj.states).enumerate() {
        let xg = x.value(g).map_err(exit(k as f64 * h))?;
        let dq = max_abs(s.q.iter().zip(g).map(|(a, b)| a - b));
        let dv = max_abs(s.v.iter().zip(&xg).map(|(a, b)| a - b));
        worst = worst.max(dq + dv);
    }
    Ok(worst)
}

/// Residuals at one grid point of a Lagrangian check.
#[derive(Clone, Debug, PartialEq)]
pub struct GridRow {
    pub q: Vec<f64>,
    pub cond3: f64,
    pub cond4: f64,
    pub cond5: f64,
    pub closedness: f64,
    pub energy: f64,
}

/// Residual maxima of a Hamilton–Jacobi check. Conditions that were not
/// evaluated are `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct HJReport {
    pub cond1_lift: Option<f64>,
    pub cond3_operator: Option<f64>,
    pub cond4_form: Option<f64>,
    pub cond5_pullback: Option<f64>,
    pub closedness: Option<f64>,
    pub energy_variation: Option<f64>,
    pub samples: usize,
    pub domain: String,
    pub tol: f64,
    pub rows: Vec<GridRow>,
}

impl HJReport {
    fn empty(grid: &SampleGrid, tol: f64) -> Self {
        Self {
            cond1_lift: None,
            cond3_operator: None,
            cond4_form: None,
            cond5_pullback: None,
            closedness: None,
            energy_variation: None,
            samples: grid.len(),
            domain: grid.describe(),
            tol,
            rows: Vec::new(),
        }
    }

    pub fn residuals(&self) -> Vec<(&'static str, f64)> {
        [
            ("cond1_lift", self.cond1_lift),
            ("cond3_operator", self.cond3_operator),
            ("cond4_form", self.cond4_form),
            ("cond5_pullback", self.cond5_pullback),
            ("closedness", self.closedness),
            ("energy_variation", self.energy_variation),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.map(|v| (k, v)))
        .collect()
    }

    /// `(name, residual, residual ≤ tol)` for every evaluated condition.
    pub fn verdicts(&self) -> Vec<(&'static str, f64, bool)> {
        self.residuals().into_iter().map(|(k, v)| (k, v, v <= self.tol)).collect()
    }

    pub fn passed(&self) -> bool {
        self.verdicts().iter().all(|(_, _, ok)| *ok)
    }
}

impl fmt::Display for HJReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "samples: {} on {}", self.samples, self.domain)?;
        writeln!(f, "tolerance: {:e}", self.tol)?;
        for (name, value, ok) in self.verdicts() {
            writeln!(f, "{name:<18} {value:.6e}  {}", if ok { "PASS" } else { "FAIL" })?;
        }
        write!(f, "verdict: {}", if self.passed() { "PASS" } else { "FAIL" })
    }
}

fn grid_row(sys: &LagrangianSystem, x: &dyn Section, q: &[f64]) -> Result<GridRow> {
    let xj = x.jet(q)?;
    let (ljet, j) = induced_jacobian(sys, q, &xj)?;
    let n = q.len();
    let cond3 = max_abs((0..n).map(|i| (0..n).map(|k| j[(i, k)] * xj.value[k]).sum::<f64>() - ljet.dq[i]));

    let ind = induced_jet(sys, x, q)?;
    let c = closedness_from(&ind.alpha);
    let ix = contract(&xj.value, &c);
    let cond4 = max_abs(ix.iter().zip(&ind.energy_grad).map(|(a, g)| a + g));

    let a = &j - j.transpose();
    let (energy, g) = energy_total_gradient(sys, &xj, q)?;
    let ix = contract(&xj.value, &a);
    let cond5 = max_abs(ix.iter().zip(&g).map(|(a, g)| a - g));

    Ok(GridRow { q: q.to_vec(), cond3, cond4, cond5, closedness: c.amax(), energy })
}

fn par_rows<T: Send>(grid: &SampleGrid, f: impl Fn(&[f64]) -> Result<T> + Sync) -> Result<Vec<T>> {
    (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let q = grid.point(k);
            f(&q).map_err(|e| e.at(&q))
        })
        .collect()
}

fn check_grid_dim(grid: &SampleGrid, n: usize) -> Result<()> {
    if grid.dim() != n {
        return Err(Error::Dimension(format!("grid has dimension {}, system has {n} degrees of freedom", grid.dim())));
    }
    Ok(())
}

fn variation(values: impl IntoIterator<Item = f64>) -> f64 {
    let (lo, hi) = values.into_iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| (lo.min(e), hi.max(e)));
    hi - lo
}

fn lagrangian_check(sys: &LagrangianSystem, x: &dyn Section, grid: &SampleGrid, tol: f64, standard: bool) -> Result<HJReport> {
    check_grid_dim(grid, sys.dof())?;
    if x.dof() != sys.dof() {
        return Err(Error::Dimension(format!("section has {} components, system has {}", x.dof(), sys.dof())));
    }
    let rows = par_rows(grid, |q| grid_row(sys, x, q))?;
    let mut report = HJReport::empty(grid, tol);
    report.cond3_operator = Some(rows.iter().map(|r| r.cond3).fold(0.0, f64::max));
    report.cond4_form = Some(rows.iter().map(|r| r.cond4).fold(0.0, f64::max));
    report.cond5_pullback = Some(rows.iter().map(|r| r.cond5).fold(0.0, f64::max));
    if standard {
        report.closedness = Some(rows.iter().map(|r| r.closedness).fold(0.0, f64::max));
        report.energy_variation = Some(variation(rows.iter().map(|r| r.energy)));
    }
    report.rows = rows;
    Ok(report)
}

/// Standard Lagrangian problem: conditions 3–5 plus `dα = 0` and constant
/// `E_L∘X`, all as maxima over the grid.
pub fn check_standard_hj(sys: &LagrangianSystem, x: &dyn Section, grid: &SampleGrid, tol: f64) -> Result<HJReport> {
    lagrangian_check(sys, x, grid, tol, true)
}

/// Generalized Lagrangian problem: conditions 3–5 only.
pub fn check_generalized_hj(sys: &LagrangianSystem, x: &dyn Section, grid: &SampleGrid, tol: f64) -> Result<HJReport> {
    lagrangian_check(sys, x, grid, tol, false)
}

/// `H(q, α(q))` with its total q-gradient, and `X = ∂H/∂p(q, α(q))`.
fn hamiltonian_along(h: &Expr, alpha: &AlphaJet, q: &[f64]) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let n = q.len();
    let qd = seed1(q);
    let pd: Vec<Dual1> = (0..n)
        .map(|i| Dual1 { value: alpha.value[i], partials: alpha.jacobian.row(i).iter().copied().collect() })
        .collect();
    let total: Dual1 = h.eval(&Vars::qp(&qd, &pd))?;
    let pt = seed1(&q.iter().chain(&alpha.value).copied().collect::<Vec<_>>());
    let (qq, pp) = pt.split_at(n);
    let hp: Dual1 = h.eval(&Vars::qp(qq, pp))?;
    let x = (n..2 * n).map(|i| hp.partial(i)).collect();
    Ok((total.value, (0..n).map(|j| total.partial(j)).collect(), x))
}

/// Generalized Hamiltonian problem for a direct 1-form: with
/// `X = ∂H/∂p(q, α(q))`, the max-norm of `i(X)dα + d(H∘α)` is stored in
/// `cond4_form`.
pub fn check_hamiltonian_generalized(sys: &LagrangianSystem, alpha: &[Expr], grid: &SampleGrid, tol: f64) -> Result<HJReport> {
    let h = sys.require_hamiltonian()?;
    check_grid_dim(grid, sys.dof())?;
    check_alpha_dim(alpha, sys.dof())?;
    let res = par_rows(grid, |q| {
        let jet = direct_jet(alpha, q)?;
        let (_, grad, x) = hamiltonian_along(h, &jet, q)?;
        let ix = contract(&x, &closedness_from(&jet));
        Ok(max_abs(ix.iter().zip(&grad).map(|(a, g)| a + g)))
    })?;
    let mut report = HJReport::empty(grid, tol);
    report.cond4_form = Some(res.into_iter().fold(0.0, f64::max));
    Ok(report)
}

fn check_alpha_dim(alpha: &[Expr], n: usize) -> Result<()> {
    if alpha.len() != n {
        return Err(Error::Dimension(format!("1-form has {} components, system has {n}", alpha.len())));
    }
    Ok(())
}

/// Standard Hamiltonian problem for a closed 1-form: the variation of `H∘α`.
/// Returns [`Error::NotClosed`] for the worst entry of C if it exceeds `tol`.
pub fn check_hamiltonian_hj(sys: &LagrangianSystem, alpha: &[Expr], grid: &SampleGrid, tol: f64) -> Result<HJReport> {
    let h = sys.require_hamiltonian()?;
    check_grid_dim(grid, sys.dof())?;
    check_alpha_dim(alpha, sys.dof())?;
    let rows = par_rows(grid, |q| {
        let jet = direct_jet(alpha, q)?;
        let (hv, _, _) = hamiltonian_along(h, &jet, q)?;
        Ok((closedness_from(&jet), hv))
    })?;
    let mut worst: Option<(usize, usize, f64, usize)> = None;
    for (k, (c, _)) in rows.iter().enumerate() {
        for i in 0..c.nrows() {
            for j in 0..c.ncols() {
                if worst.is_none_or(|w| c[(i, j)].abs() > w.2.abs()) {
                    worst = Some((i, j, c[(i, j)], k));
                }
            }
        }
    }
    let closedness = worst.map_or(0.0, |w| w.2.abs());
    if let Some((i, j, value, k)) = worst.filter(|w| w.2.abs() > tol) {
        return Err(Error::NotClosed { i: i + 1, j: j + 1, value, point: grid.point(k) });
    }
    let mut report = HJReport::empty(grid, tol);
    report.closedness = Some(closedness);
    report.energy_variation = Some(variation(rows.iter().map(|r| r.1)));
    Ok(report)
}

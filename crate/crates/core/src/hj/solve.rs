use std::collections::BTreeMap;

use nalgebra::DMatrix;

use super::section::{Section, SectionJet};
use crate::error::{Error, Result};
use crate::exprlang::{Expr, Var, Vars};
use crate::geometry::{energy_jet, lagrangian_gradient, LagrangianSystem, TangentPoint};
use crate::grid::Axis;
use crate::scalars::{seed2, Dual2};

const NEWTON_ITERATIONS: usize = 50;
const NEWTON_TOL: f64 = 1e-12;
const TURNING_SLOPE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

impl std::str::FromStr for Branch {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "+" | "plus" | "1" | "+1" => Ok(Branch::Plus),
            "-" | "minus" | "-1" => Ok(Branch::Minus),
            other => Err(Error::Precondition(format!("branch must be + or -, got `{other}`"))),
        }
    }
}

/// The 1-dof level function whose zero set is solved for. The unknown `y` is
/// `p` on the Hamiltonian side and `v` on the Lagrangian side (`E_L(q, v) = E`).
#[derive(Clone, Debug)]
enum Level {
    Hamiltonian(Expr),
    Energy(LagrangianSystem),
}

/// `F(q, y)` with `∂F/∂y`, `∂F/∂q`.
struct LevelValue {
    f: f64,
    fy: f64,
    fq: f64,
}

impl Level {
    fn hamiltonian_jet(h: &Expr, q: f64, p: f64) -> Result<Dual2> {
        let x = seed2(&[q, p]);
        h.eval(&Vars::qp(&x[..1], &x[1..]))
    }

    fn eval(&self, q: f64, y: f64) -> Result<LevelValue> {
        match self {
            Level::Hamiltonian(h) => {
                let d = Self::hamiltonian_jet(h, q, y)?;
                Ok(LevelValue { f: d.value, fy: grad(&d, 1), fq: grad(&d, 0) })
            }
            Level::Energy(sys) => {
                let e = energy_jet(sys, &TangentPoint { q: vec![q], v: vec![y] })?;
                Ok(LevelValue { f: e.value, fy: e.dv[0], fq: e.dq[0] })
            }
        }
    }

    /// `(p, X, dX/dq)` on the level set through `(q, y)`.
    fn section(&self, q: f64, y: f64) -> Result<(f64, f64, f64)> {
        match self {
            Level::Hamiltonian(h) => {
                let d = Self::hamiltonian_jet(h, q, y)?;
                let dp = -grad(&d, 0) / grad(&d, 1);
                Ok((y, grad(&d, 1), d.hessian(1, 0) + d.hessian(1, 1) * dp))
            }
            Level::Energy(sys) => {
                let lv = self.eval(q, y)?;
                let (_, _, p) = lagrangian_gradient(sys, &TangentPoint { q: vec![q], v: vec![y] })?;
                Ok((p[0], y, -lv.fq / lv.fy))
            }
        }
    }

    /// Minimum of `H(q, ·)` along the fiber, by Newton on `∂H/∂p = 0`.
    fn fiber_minimum(&self, q: f64, start: f64) -> Option<f64> {
        let Level::Hamiltonian(h) = self else { return None };
        let mut p = start;
        for _ in 0..NEWTON_ITERATIONS {
            let d = Self::hamiltonian_jet(h, q, p).ok()?;
            let (hp, hpp) = (grad(&d, 1), d.hessian(1, 1));
            if hpp <= 0.0 {
                return None;
            }
            let step = hp / hpp;
            p -= step;
            if step.abs() <= NEWTON_TOL * (1.0 + p.abs()) {
                return Self::hamiltonian_jet(h, q, p).ok().map(|d| d.value);
            }
        }
        None
    }

    fn newton(&self, q: f64, energy: f64, start: f64) -> Result<f64> {
        let mut y = start;
        for _ in 0..NEWTON_ITERATIONS {
            let lv = self.eval(q, y)?;
            let r = lv.f - energy;
            if r.abs() <= NEWTON_TOL * energy.abs().max(1.0) {
                if lv.fy.abs() < TURNING_SLOPE {
                    return Err(Error::TurningPoint { q });
                }
                // one more step brings a quadratically converging iterate to roundoff
                return Ok(y - r / lv.fy);
            }
            if lv.fy == 0.0 || !lv.fy.is_finite() {
                break;
            }
            y -= r / lv.fy;
            if !y.is_finite() {
                break;
            }
        }
        match self.fiber_minimum(q, start) {
            Some(minimum) if minimum > energy => Err(Error::BelowFiberMinimum { q, energy, minimum }),
            _ => Err(Error::TurningPoint { q }),
        }
    }
}

fn grad(d: &Dual2, i: usize) -> f64 {
    d.grad.get(i).copied().unwrap_or(0.0)
}

/// Tabulated solution of the 1-dof problem `H(q, p(q)) = E` (or
/// `E_L(q, X(q)) = E` without a Hamiltonian) on one branch.
///
/// Also a [`Section`]: off-grid values are recomputed by Newton, warm-started
/// from the nearest grid node.
#[derive(Clone, Debug)]
pub struct Hj1dSolution {
    level: Level,
    pub energy: f64,
    pub branch: Branch,
    pub axis: Axis,
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub x: Vec<f64>,
    /// `W(q) = ∫_a^q p`, by composite Simpson over each grid interval.
    pub w: Vec<f64>,
    unknown: Vec<f64>,
}

impl Hj1dSolution {
    fn solve_at(&self, q: f64) -> Result<f64> {
        if q < self.axis.lo || q > self.axis.hi || !q.is_finite() {
            return Err(Error::Domain { op: "tabulated section", arg: q });
        }
        let k = (((q - self.axis.lo) / self.axis.step()).round() as usize).min(self.axis.count - 1);
        self.level.newton(q, self.energy, self.unknown[k])
    }

    /// `|H(q, p) − E|` (or `|E_L(q, X) − E|`) over the table.
    pub fn level_residual(&self) -> Result<f64> {
        let mut worst = 0.0f64;
        for (q, y) in self.q.iter().zip(&self.unknown) {
            worst = worst.max((self.level.eval(*q, *y)?.f - self.energy).abs());
        }
        Ok(worst)
    }
}

impl Section for Hj1dSolution {
    fn dof(&self) -> usize {
        1
    }

    fn jet(&self, q: &[f64]) -> Result<SectionJet> {
        let y = self.solve_at(q[0])?;
        let (_, x, dx) = self.level.section(q[0], y)?;
        Ok(SectionJet { value: vec![x], jacobian: DMatrix::from_element(1, 1, dx) })
    }

    fn value(&self, q: &[f64]) -> Result<Vec<f64>> {
        let y = self.solve_at(q[0])?;
        Ok(vec![self.level.section(q[0], y)?.1])
    }
}

fn solve_level(level: Level, energy: f64, axis: Axis, branch: Branch) -> Result<Hj1dSolution> {
    let qs = axis.points();
    let s = branch.sign();
    let guess = (2.0 * energy.abs()).sqrt();
    let mut y_prev = s * if guess > 0.0 { guess } else { 1.0 };
    let mut unknown = Vec::with_capacity(qs.len());
    let mut slope_prev = 0.0f64;
    for (k, &q) in qs.iter().enumerate() {
        let y = level.newton(q, energy, y_prev)?;
        let lv = level.eval(q, y)?;
        let slope = -lv.fq / lv.fy;
        if k > 0 {
            let dq = q - qs[k - 1];
            let step = (y - y_prev).abs();
            let limit = 10.0 * slope.abs().max(slope_prev.abs()) * dq + 1e-9;
            if step > limit {
                return Err(Error::BranchJump { q, step, limit });
            }
        }
        unknown.push(y);
        y_prev = y;
        slope_prev = slope;
    }
    let mut p = Vec::with_capacity(qs.len());
    let mut x = Vec::with_capacity(qs.len());
    for (q, y) in qs.iter().zip(&unknown) {
        let (pk, xk, _) = level.section(*q, *y)?;
        p.push(pk);
        x.push(xk);
    }
    let mut w = vec![0.0];
    for k in 1..qs.len() {
        let (a, b) = (qs[k - 1], qs[k]);
        let mid = 0.5 * (a + b);
        let ymid = level.newton(mid, energy, 0.5 * (unknown[k - 1] + unknown[k]))?;
        let pmid = level.section(mid, ymid)?.0;
        w.push(w[k - 1] + (b - a) / 6.0 * (p[k - 1] + 4.0 * pmid + p[k]));
    }
    Ok(Hj1dSolution { level, energy, branch, axis, q: qs, p, x, w, unknown })
}

/// Solves the classical 1-dof Hamilton–Jacobi equation at energy `energy` on
/// `axis`, sweeping left to right on the chosen branch. Uses H when present,
/// otherwise the Lagrangian energy with unknown velocity.
pub fn solve_hj_1dof(sys: &LagrangianSystem, energy: f64, axis: Axis, branch: Branch) -> Result<Hj1dSolution> {
    if sys.dof() != 1 {
        return Err(Error::Precondition(format!("1-dof solver needs dof 1, system has {}", sys.dof())));
    }
    let level = match sys.hamiltonian() {
        Some(h) => Level::Hamiltonian(h.clone()),
        None => Level::Energy(sys.clone()),
    };
    solve_level(level, energy, axis, branch)
}

/// Product of 1-dof solutions, one per coordinate.
#[derive(Clone, Debug)]
pub struct SeparableSolution {
    pub parts: Vec<Hj1dSolution>,
}

impl Section for SeparableSolution {
    fn dof(&self) -> usize {
        self.parts.len()
    }

    fn jet(&self, q: &[f64]) -> Result<SectionJet> {
        let n = self.parts.len();
        let mut value = Vec::with_capacity(n);
        let mut jacobian = DMatrix::zeros(n, n);
        for (k, part) in self.parts.iter().enumerate() {
            let jet = part.jet(&q[k..k + 1])?;
            value.push(jet.value[0]);
            jacobian[(k, k)] = jet.jacobian[(0, 0)];
        }
        Ok(SectionJet { value, jacobian })
    }

    fn value(&self, q: &[f64]) -> Result<Vec<f64>> {
        self.parts.iter().enumerate().map(|(k, part)| Ok(part.value(&q[k..k + 1])?[0])).collect()
    }
}

/// Splits `expr` into one expression per coordinate, each rewritten to use
/// index 0 only. Terms without variables go to the first coordinate.
fn split_by_index(expr: &Expr, n: usize) -> Result<Vec<Expr>> {
    let mut groups: BTreeMap<usize, Vec<Expr>> = BTreeMap::new();
    for term in expr.additive_terms() {
        let idx = term.indices();
        if idx.len() > 1 {
            return Err(Error::UnsupportedStructure(format!("term `{term}` couples coordinates {idx:?}")));
        }
        let k = idx.into_iter().next().unwrap_or(0);
        groups.entry(k).or_default().push(term.map_vars(&|v: Var| Var { index: 0, ..v }));
    }
    Ok((0..n).map(|k| Expr::sum(groups.remove(&k).unwrap_or_default())).collect())
}

/// Solves a system whose H (or L) is a sum of single-coordinate terms, one
/// 1-dof problem per coordinate.
pub fn solve_hj_separable(
    sys: &LagrangianSystem,
    energies: &[f64],
    axes: &[Axis],
    branches: &[Branch],
) -> Result<SeparableSolution> {
    let n = sys.dof();
    if energies.len() != n || axes.len() != n || branches.len() != n {
        return Err(Error::Dimension(format!(
            "need {n} energies, axes and branches, got {}, {}, {}",
            energies.len(),
            axes.len(),
            branches.len()
        )));
    }
    let levels: Vec<Level> = match sys.hamiltonian() {
        Some(h) => split_by_index(h, n)?.into_iter().map(Level::Hamiltonian).collect(),
        None => split_by_index(sys.lagrangian(), n)?
            .into_iter()
            .map(|l| LagrangianSystem::new(1, l).map(Level::Energy))
            .collect::<Result<_>>()?,
    };
    let parts = levels
        .into_iter()
        .enumerate()
        .map(|(k, level)| solve_level(level, energies[k], axes[k], branches[k]))
        .collect::<Result<_>>()?;
    Ok(SeparableSolution { parts })
}

//! Singular Lagrangians: degeneracy of the velocity Hessian, declared primary
//! constraints on T*Q, their transport `χ = i(K)dξ` to TQ, and stabilization
//! toward a constraint submanifold to which K is tangent.
//!
//! Transport of T*Q-side constraints is exact. Lagrangian-side constraints
//! have no such formula and are propagated numerically: a forward difference
//! of χ along the flow direction `(v, W⁺(∂L/∂q − M v))`. If χ varies along a
//! null direction of W, its time derivative can be absorbed by the free part
//! of the acceleration and no new constraint arises.

use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exprlang::{parse, Expr, Family, Vars};
use crate::geometry::{
    lagrangian_gradient, lagrangian_jet, legendre_map, null_space_and_pinv, numerical_rank, LagrangianSystem,
    TangentPoint,
};
use crate::grid::SampleGrid;
use crate::hj::Section;
use crate::scalars::{seed1, Dual1};

/// Step of the forward difference used for Lagrangian-side propagation.
pub const FLOW_STEP: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Hamiltonian,
    Lagrangian,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Declared,
    Transported,
}

#[derive(Clone, Debug, PartialEq)]
enum Kind {
    Hamiltonian(Expr),
    Lagrangian(Expr),
    /// `i(K)dξ` of a Hamiltonian-side constraint.
    Transported(Box<ConstraintFunction>),
    /// Forward-difference time derivative of a Lagrangian-side constraint.
    FlowDerived { source: Box<ConstraintFunction>, tol: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintFunction {
    kind: Kind,
    pub generation: usize,
    pub provenance: Provenance,
}

fn check_sides(e: &Expr, other: Family, what: &str) -> Result<()> {
    if e.families().contains(&other) {
        return Err(Error::InvalidSystem(format!("{what} constraint `{e}` must not reference {}", other.letter())));
    }
    Ok(())
}

impl ConstraintFunction {
    /// A declared `ξ(q, p)`.
    pub fn hamiltonian(e: Expr) -> Result<Self> {
        check_sides(&e, Family::V, "a Hamiltonian-side")?;
        Ok(Self { kind: Kind::Hamiltonian(e), generation: 0, provenance: Provenance::Declared })
    }

    /// A declared `χ(q, v)`.
    pub fn lagrangian(e: Expr) -> Result<Self> {
        check_sides(&e, Family::P, "a Lagrangian-side")?;
        Ok(Self { kind: Kind::Lagrangian(e), generation: 0, provenance: Provenance::Declared })
    }

    pub fn parse_hamiltonian(text: &str, dof: usize) -> Result<Self> {
        Self::hamiltonian(parse(text, dof)?)
    }

    pub fn side(&self) -> Side {
        match self.kind {
            Kind::Hamiltonian(_) => Side::Hamiltonian,
            _ => Side::Lagrangian,
        }
    }

    /// `ξ(q, p)` for a Hamiltonian-side constraint.
    pub fn eval_cotangent(&self, q: &[f64], p: &[f64]) -> Result<f64> {
        match &self.kind {
            Kind::Hamiltonian(e) => e.eval_real(&Vars::qp(q, p)),
            _ => Err(Error::Precondition("Lagrangian-side constraints are not defined on T*Q".into())),
        }
    }

    /// The value on TQ: `ξ(FL(q, v))` or `χ(q, v)`.
    pub fn eval_tangent(&self, sys: &LagrangianSystem, pt: &TangentPoint) -> Result<f64> {
        match &self.kind {
            Kind::Hamiltonian(e) => {
                let fl = legendre_map(sys, pt)?;
                e.eval_real(&Vars::qp(&fl.q, &fl.p))
            }
            Kind::Lagrangian(e) => e.eval_real(&Vars::qv(&pt.q, &pt.v)),
            Kind::Transported(source) => transported_value(sys, source, pt),
            Kind::FlowDerived { source, tol } => flow_derivative(sys, source, pt, *tol),
        }
    }
}

impl fmt::Display for ConstraintFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            Kind::Hamiltonian(e) | Kind::Lagrangian(e) => write!(f, "{e}"),
            Kind::Transported(s) => write!(f, "i(K)d[{s}]"),
            Kind::FlowDerived { source, .. } => write!(f, "d/dt[{source}]"),
        }
    }
}

fn transported_value(sys: &LagrangianSystem, xi: &ConstraintFunction, pt: &TangentPoint) -> Result<f64> {
    let Kind::Hamiltonian(e) = &xi.kind else {
        return Err(Error::Precondition("only Hamiltonian-side constraints can be transported".into()));
    };
    let n = sys.dof();
    let (_, dl_dq, p) = lagrangian_gradient(sys, pt)?;
    let x = seed1(&pt.q.iter().chain(&p).copied().collect::<Vec<_>>());
    let d: Dual1 = e.eval(&Vars::qp(&x[..n], &x[n..]))?;
    Ok((0..n).map(|i| pt.v[i] * d.partial(i) + dl_dq[i] * d.partial(n + i)).sum())
}

fn flow_derivative(sys: &LagrangianSystem, chi: &ConstraintFunction, pt: &TangentPoint, tol: f64) -> Result<f64> {
    let n = sys.dof();
    let jet = lagrangian_jet(sys, pt)?;
    let (null, pinv) = null_space_and_pinv(&jet.velocity_block());
    let base = chi.eval_tangent(sys, pt)?;
    for dir in &null {
        let shifted = TangentPoint { q: pt.q.clone(), v: (0..n).map(|i| pt.v[i] + FLOW_STEP * dir[i]).collect() };
        if ((chi.eval_tangent(sys, &shifted)? - base) / FLOW_STEP).abs() > tol {
            return Ok(0.0);
        }
    }
    let rhs = nalgebra::DVector::from_vec(jet.dq.clone()) - jet.mixed_block() * nalgebra::DVector::from_vec(pt.v.clone());
    let a = pinv * rhs;
    let moved = TangentPoint {
        q: (0..n).map(|i| pt.q[i] + FLOW_STEP * pt.v[i]).collect(),
        v: (0..n).map(|i| pt.v[i] + FLOW_STEP * a[i]).collect(),
    };
    Ok((chi.eval_tangent(sys, &moved)? - base) / FLOW_STEP)
}

/// `χ = i(K)dξ`, i.e. `χ(q, v) = Σ v^i ∂ξ/∂q^i + Σ ∂L/∂q^i ∂ξ/∂p_i` at
/// `(q, FL(q, v))`.
pub fn transport_constraint(xi: &ConstraintFunction) -> Result<ConstraintFunction> {
    if xi.side() != Side::Hamiltonian {
        return Err(Error::Precondition("only Hamiltonian-side constraints can be transported".into()));
    }
    Ok(ConstraintFunction {
        kind: Kind::Transported(Box::new(xi.clone())),
        generation: xi.generation + 1,
        provenance: Provenance::Transported,
    })
}

fn flow_derived(chi: &ConstraintFunction, tol: f64) -> ConstraintFunction {
    ConstraintFunction {
        kind: Kind::FlowDerived { source: Box::new(chi.clone()), tol },
        generation: chi.generation + 1,
        provenance: Provenance::Transported,
    }
}

fn check_tq_grid(sys: &LagrangianSystem, grid: &SampleGrid) -> Result<()> {
    if grid.dim() != 2 * sys.dof() {
        return Err(Error::Dimension(format!("TQ grid needs {} axes, got {}", 2 * sys.dof(), grid.dim())));
    }
    Ok(())
}

fn values_on(sys: &LagrangianSystem, c: &ConstraintFunction, grid: &SampleGrid, subset: &[usize]) -> Result<Vec<f64>> {
    subset
        .par_iter()
        .map(|&k| {
            let x = grid.point(k);
            c.eval_tangent(sys, &TangentPoint::from_flat(&x)).map_err(|e| e.at(&x))
        })
        .collect()
}

/// Rank of W over a TQ grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Degeneracy {
    pub dof: usize,
    pub min_rank: usize,
    pub max_rank: usize,
    /// Point of TQ where the minimum was first attained.
    pub point: Vec<f64>,
    /// Orthonormal null-space basis of W at `point`.
    pub null_directions: Vec<Vec<f64>>,
}

impl Degeneracy {
    pub fn is_regular(&self) -> bool {
        self.min_rank == self.dof
    }
}

pub fn detect_degeneracy(sys: &LagrangianSystem, grid: &SampleGrid) -> Result<Degeneracy> {
    check_tq_grid(sys, grid)?;
    let ranks: Vec<usize> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let x = grid.point(k);
            let w = lagrangian_jet(sys, &TangentPoint::from_flat(&x)).map_err(|e| e.at(&x))?.velocity_block();
            Ok(numerical_rank(&w).0)
        })
        .collect::<Result<_>>()?;
    let (k_min, &min_rank) = ranks.iter().enumerate().min_by_key(|(k, r)| (**r, *k)).expect("grid is never empty");
    let max_rank = *ranks.iter().max().expect("grid is never empty");
    let point = grid.point(k_min);
    let w = lagrangian_jet(sys, &TangentPoint::from_flat(&point))?.velocity_block();
    let null_directions = null_space_and_pinv(&w)
        .0
        .into_iter()
        .map(|d| {
            let sign = d.iter().find(|x| x.abs() > 1e-12).map_or(1.0, |x| x.signum());
            d.iter().map(|x| sign * x).collect()
        })
        .collect();
    Ok(Degeneracy { dof: sys.dof(), min_rank, max_rank, point, null_directions })
}

/// `max |ξ(FL(q, v))|` over a TQ grid.
pub fn primary_constraint_residual(sys: &LagrangianSystem, xi: &ConstraintFunction, grid: &SampleGrid) -> Result<f64> {
    check_tq_grid(sys, grid)?;
    if xi.side() != Side::Hamiltonian {
        return Err(Error::Precondition("primary constraints live on T*Q".into()));
    }
    let all: Vec<usize> = (0..grid.len()).collect();
    Ok(values_on(sys, xi, grid, &all)?.into_iter().fold(0.0, |m, x| m.max(x.abs())))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Converged,
    MaxIterations,
    Inconsistent,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Converged => "converged",
            Status::MaxIterations => "max-iterations",
            Status::Inconsistent => "inconsistent",
        })
    }
}

/// Result of stabilization.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintSet {
    pub constraints: Vec<ConstraintFunction>,
    pub grid: SampleGrid,
    pub status: Status,
    pub iterations: usize,
    /// Indices of the grid points where every constraint is within `tol`.
    pub feasible: Vec<usize>,
    pub tol: f64,
}

/// Runs the constraint algorithm on a TQ grid. Each iteration propagates the
/// newest generation and keeps results that exceed `tol` somewhere on the
/// current feasible subset.
pub fn stabilize(
    sys: &LagrangianSystem,
    primaries: &[ConstraintFunction],
    grid: &SampleGrid,
    tol: f64,
    max_iter: usize,
) -> Result<ConstraintSet> {
    check_tq_grid(sys, grid)?;
    let deg = detect_degeneracy(sys, grid)?;
    if deg.min_rank != deg.max_rank {
        return Err(Error::VaryingRank { min: deg.min_rank, max: deg.max_rank });
    }
    let all: Vec<usize> = (0..grid.len()).collect();
    // declared constraints all vanish on the image of FL, so they are only
    // deduplicated as expression trees
    let mut constraints: Vec<ConstraintFunction> = Vec::new();
    let mut values: Vec<Vec<f64>> = Vec::new();
    for c in primaries {
        if !constraints.contains(c) {
            values.push(values_on(sys, c, grid, &all)?);
            constraints.push(c.clone());
        }
    }
    let feasible_of = |values: &[Vec<f64>]| -> Vec<usize> {
        all.iter().copied().filter(|&k| values.iter().all(|v| v[k].abs() <= tol)).collect()
    };
    let lagrangian_values = |constraints: &[ConstraintFunction], values: &[Vec<f64>]| -> Vec<Vec<f64>> {
        constraints.iter().zip(values).filter(|(c, _)| c.side() == Side::Lagrangian).map(|(_, v)| v.clone()).collect()
    };
    let mut feasible = feasible_of(&values);
    let mut newest: Vec<usize> = (0..constraints.len()).collect();
    let mut iterations = 0;
    let mut status = Status::Converged;
    while !newest.is_empty() {
        if feasible.is_empty() {
            status = Status::Inconsistent;
            break;
        }
        if iterations == max_iter {
            status = Status::MaxIterations;
            break;
        }
        iterations += 1;
        let mut added = Vec::new();
        for idx in newest {
            let src = &constraints[idx];
            let next = match src.side() {
                Side::Hamiltonian => transport_constraint(src)?,
                Side::Lagrangian => flow_derived(src, tol),
            };
            let on_feasible = values_on(sys, &next, grid, &feasible)?;
            if on_feasible.iter().all(|x| x.abs() <= tol) {
                continue;
            }
            let v = values_on(sys, &next, grid, &all)?;
            if is_duplicate(&v, &lagrangian_values(&constraints, &values), tol) {
                continue;
            }
            added.push(constraints.len());
            constraints.push(next);
            values.push(v);
        }
        feasible = feasible_of(&values);
        newest = added;
    }
    if feasible.is_empty() {
        status = Status::Inconsistent;
    }
    Ok(ConstraintSet { constraints, grid: grid.clone(), status, iterations, feasible, tol })
}

fn is_duplicate(v: &[f64], existing: &[Vec<f64>], tol: f64) -> bool {
    existing.iter().any(|e| e.iter().zip(v).all(|(a, b)| (a - b).abs() <= tol))
}

/// Per-constraint residuals of a section against a stabilized set.
#[derive(Clone, Debug, PartialEq)]
pub struct Admissibility {
    /// `(constraint, max residual over the grid, residual ≤ tol)`.
    pub rows: Vec<(String, f64, bool)>,
    pub tol: f64,
}

impl Admissibility {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.2)
    }
}

/// Checks that `(q, X(q))` lies on the final constraint submanifold at every
/// point of a Q grid.
pub fn check_x_admissible(
    sys: &LagrangianSystem,
    x: &dyn Section,
    set: &ConstraintSet,
    grid: &SampleGrid,
    tol: f64,
) -> Result<Admissibility> {
    if set.status != Status::Converged {
        return Err(Error::Precondition(format!("constraint set is {}, not converged", set.status)));
    }
    if grid.dim() != sys.dof() {
        return Err(Error::Dimension(format!("Q grid needs {} axes, got {}", sys.dof(), grid.dim())));
    }
    let points: Vec<TangentPoint> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let q = grid.point(k);
            let v = x.value(&q).map_err(|e| e.at(&q))?;
            Ok(TangentPoint { q, v })
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(set.constraints.len());
    for c in &set.constraints {
        let worst = points
            .par_iter()
            .map(|pt| c.eval_tangent(sys, pt).map(f64::abs).map_err(|e| e.at(&pt.q)))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        rows.push((c.to_string(), worst, worst <= tol));
    }
    Ok(Admissibility { rows, tol })
}

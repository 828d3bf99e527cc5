//! Hamilton–Jacobi problems in terms of the evolution operator.
//!
//! A candidate solution is a section `X: Q → TQ` with induced 1-form
//! `α = FL∘X`. The generalized problem asks that integral curves of X lift to
//! dynamical trajectories; equivalently, at every point,
//!
//! * `Tα∘X = K∘X` (condition 3),
//! * `i(X)dα + d(E_L∘X) = 0` (condition 4),
//! * `i(X)(X*ω_L) − d(E_L∘X) = 0` (condition 5).
//!
//! The standard problem adds `dα = 0`, so that `E_L∘X` is locally constant.
//! Each condition is computed by a separate route so that their agreement is
//! a meaningful check rather than a tautology.

mod check;
mod section;
mod solve;

pub use check::{
    alpha_jacobian, check_generalized_hj, check_hamiltonian_generalized, check_hamiltonian_hj, check_standard_hj,
    closedness_matrix, condition3_residual, condition4_residual, condition5_residual, lift_and_compare, GridRow,
    HJReport,
};
pub use section::{parse_alpha, AlphaJet, OneFormAlpha, Section, SectionJet, SectionX};
pub use solve::{solve_hj_1dof, solve_hj_separable, Branch, Hj1dSolution, SeparableSolution};

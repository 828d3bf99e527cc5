//! Time-evolution operator K for autonomous Lagrangian systems and
//! Hamilton–Jacobi verification built on it.
//!
//! Everything is numerical: expressions are parsed once and differentiated
//! with forward-mode dual numbers, so no symbolic algebra is involved.

pub mod constraints;
pub mod error;
pub mod exprlang;
pub mod geometry;
pub mod grid;
pub mod hj;
pub mod kappa;
pub mod ode;
pub mod scalars;
pub mod systems;

pub use error::{Error, Result};
pub use exprlang::{parse, Expr};
pub use geometry::{CotangentPoint, LagrangianSystem, TangentPoint};
pub use grid::{Axis, SampleGrid};
pub use hj::{HJReport, Section, SectionX};
pub use kappa::{EvolutionVector, Trajectory};
pub use ode::Method;
pub use systems::{builtin, BuiltinSystem};

mod check;
mod constraints;
mod integrate;
mod solve;
mod verify;

use std::path::Path;

use clap::Args;
use evolk_core::constraints::ConstraintFunction;
use evolk_core::systems::BUILTIN_NAMES;
use evolk_core::{builtin, Axis, Expr, LagrangianSystem, SampleGrid, SectionX};

use crate::error::{CliError, CliResult};
use crate::sysfile;

pub use check::{CheckHamiltonianArgs, CheckHjArgs};
pub use constraints::ConstraintsArgs;
pub use integrate::IntegrateArgs;
pub use solve::SolveHjArgs;
pub use verify::VerifyArgs;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Passed,
    Failed,
}

impl From<bool> for Outcome {
    fn from(ok: bool) -> Self {
        if ok {
            Outcome::Passed
        } else {
            Outcome::Failed
        }
    }
}

#[derive(Args, Debug)]
pub struct SystemArg {
    /// Builtin system name or path to a system file
    #[arg(long, value_name = "NAME|PATH")]
    pub system: String,
}

/// A system with whatever extra data its source provides.
pub struct Loaded {
    pub system: LagrangianSystem,
    pub x: Option<SectionX>,
    pub alpha: Option<Vec<Expr>>,
    pub q_grid: Option<SampleGrid>,
    pub tq_grid: Option<SampleGrid>,
}

impl SystemArg {
    pub fn load(&self) -> CliResult<Loaded> {
        if BUILTIN_NAMES.contains(&self.system.as_str()) {
            let b = builtin(&self.system)?;
            return Ok(Loaded {
                system: b.system,
                x: None,
                alpha: None,
                q_grid: Some(b.q_grid),
                tq_grid: Some(b.tq_grid),
            });
        }
        let path = Path::new(&self.system);
        if !path.exists() {
            return Err(CliError::Usage(format!(
                "`{}` is neither a builtin ({}) nor an existing file",
                self.system,
                BUILTIN_NAMES.join(", ")
            )));
        }
        let f = sysfile::read(path)?;
        Ok(Loaded { system: f.system, x: f.x, alpha: f.alpha, q_grid: f.grid, tq_grid: None })
    }
}

impl Loaded {
    pub fn dof(&self) -> usize {
        self.system.dof()
    }

    /// Grid on Q from `--grid` flags, falling back to the system's own.
    pub fn q_grid(&self, flags: &[Axis]) -> CliResult<SampleGrid> {
        if flags.is_empty() {
            return self.q_grid.clone().ok_or_else(|| CliError::Usage("no grid given; pass --grid a:b:m".into()));
        }
        expand_axes(flags, self.dof(), "--grid")
    }

    pub fn primaries(&self) -> CliResult<Vec<ConstraintFunction>> {
        Ok(self.system.constraints().iter().cloned().map(ConstraintFunction::hamiltonian).collect::<Result<_, _>>()?)
    }
}

/// One axis per coordinate, or a single axis repeated.
pub fn expand_axes(flags: &[Axis], dim: usize, flag: &str) -> CliResult<SampleGrid> {
    let axes = match flags.len() {
        1 => vec![flags[0]; dim],
        k if k == dim => flags.to_vec(),
        k => return Err(CliError::Usage(format!("{flag} given {k} times, expected 1 or {dim}"))),
    };
    Ok(SampleGrid::new(axes)?)
}

/// Repeats a single value `n` times, or checks that there are exactly `n`.
pub fn per_coordinate<T: Clone>(values: &[T], n: usize, flag: &str) -> CliResult<Vec<T>> {
    match values.len() {
        1 => Ok(vec![values[0].clone(); n]),
        k if k == n => Ok(values.to_vec()),
        k => Err(CliError::Usage(format!("{flag} given {k} times, expected 1 or {n}"))),
    }
}

/// Parses `"a:b"`.
pub fn parse_interval(s: &str) -> Result<(f64, f64), String> {
    let bad = || format!("expected \"a:b\", got \"{s}\"");
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let a: f64 = a.trim().parse().map_err(|_| bad())?;
    let b: f64 = b.trim().parse().map_err(|_| bad())?;
    Ok((a, b))
}

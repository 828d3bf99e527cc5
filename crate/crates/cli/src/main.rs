//! `evolk`: checks, integrators and solvers for Lagrangian systems from the
//! command line.
//!
//! Exit status: 0 when every check passes, 1 when a check fails, 2 for bad
//! input, 3 for numerical failure.

mod commands;
mod error;
mod sysfile;
mod table;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{CheckHamiltonianArgs, CheckHjArgs, ConstraintsArgs, IntegrateArgs, Outcome, SolveHjArgs, VerifyArgs};

#[derive(Parser, Debug)]
#[command(name = "evolk", version, about = "Time-evolution operator and Hamilton–Jacobi checks for Lagrangian systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a section X: Q → TQ against the Lagrangian Hamilton–Jacobi conditions
    CheckHj(CheckHjArgs),
    /// Check a 1-form α on Q against the Hamiltonian Hamilton–Jacobi equation
    CheckHjHamiltonian(CheckHamiltonianArgs),
    /// Integrate the Euler–Lagrange or Hamiltonian flow
    Integrate(IntegrateArgs),
    /// Solve the Hamilton–Jacobi equation at fixed energy for 1-dof or separable systems
    SolveHj(SolveHjArgs),
    /// Run the constraint algorithm for singular Lagrangians
    Constraints(ConstraintsArgs),
    /// Check the time-evolution operator identities on random points
    VerifyIdentities(VerifyArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::CheckHj(a) => a.run(),
        Command::CheckHjHamiltonian(a) => a.run(),
        Command::Integrate(a) => a.run(),
        Command::SolveHj(a) => a.run(),
        Command::Constraints(a) => a.run(),
        Command::VerifyIdentities(a) => a.run(),
    };
    match result {
        Ok(Outcome::Passed) => ExitCode::SUCCESS,
        Ok(Outcome::Failed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

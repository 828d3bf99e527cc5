use std::path::PathBuf;

use clap::Args;
use evolk_core::hj::{check_generalized_hj, check_hamiltonian_generalized, check_hamiltonian_hj, check_standard_hj, lift_and_compare, parse_alpha};
use evolk_core::{Axis, Error, HJReport, SectionX};

use super::{Outcome, SystemArg};
use crate::error::{CliError, CliResult};
use crate::table;

#[derive(Args, Debug)]
pub struct CheckHjArgs {
    #[command(flatten)]
    pub system: SystemArg,

    /// Component of the section X(q), once per degree of freedom
    #[arg(long = "X", visible_alias = "x", value_name = "EXPR", allow_hyphen_values = true)]
    pub x: Vec<String>,

    /// Sample axis a:b:m, once per coordinate or once for all
    #[arg(long, value_name = "a:b:m", allow_hyphen_values = true)]
    pub grid: Vec<Axis>,

    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,

    /// Check conditions 3, 4 and 5 only
    #[arg(long)]
    pub generalized: bool,

    /// Also compare X-integral curves with the dynamics up to time T, from the grid center
    #[arg(long, value_name = "T")]
    pub lift: Option<f64>,

    #[arg(long, default_value_t = 1e-3)]
    pub lift_step: f64,

    #[arg(long, default_value = "check_hj_residuals.csv")]
    pub out: PathBuf,
}

impl CheckHjArgs {
    pub fn run(&self) -> CliResult<Outcome> {
        let loaded = self.system.load()?;
        let n = loaded.dof();
        let x = if self.x.is_empty() {
            loaded.x.clone().ok_or_else(|| CliError::Usage("no section given; pass --X once per coordinate".into()))?
        } else {
            let texts: Vec<&str> = self.x.iter().map(String::as_str).collect();
            SectionX::parse(&texts, n)?
        };
        let grid = loaded.q_grid(&self.grid)?;
        let mut report = if self.generalized {
            check_generalized_hj(&loaded.system, &x, &grid, self.tol)?
        } else {
            check_standard_hj(&loaded.system, &x, &grid, self.tol)?
        };
        if let Some(horizon) = self.lift {
            let center: Vec<f64> = grid.axes.iter().map(|a| 0.5 * (a.lo + a.hi)).collect();
            report.cond1_lift = Some(lift_and_compare(&loaded.system, &x, &center, horizon, self.lift_step)?);
        }
        let mut header = table::numbered("q", n);
        header.extend(["cond3", "cond4", "cond5", "closedness", "energy"].map(String::from));
        let rows = report.rows.iter().map(|r| {
            let mut row = r.q.clone();
            row.extend([r.cond3, r.cond4, r.cond5, r.closedness, r.energy]);
            row
        });
        table::write(&self.out, &header, rows)?;
        println!("system: {}", loaded.system.name());
        println!("{report}");
        println!("residuals: {}", self.out.display());
        Ok(report.passed().into())
    }
}

#[derive(Args, Debug)]
pub struct CheckHamiltonianArgs {
    #[command(flatten)]
    pub system: SystemArg,

    /// Component of the 1-form α(q), once per degree of freedom
    #[arg(long, value_name = "EXPR", allow_hyphen_values = true)]
    pub alpha: Vec<String>,

    /// Sample axis a:b:m, once per coordinate or once for all
    #[arg(long, value_name = "a:b:m", allow_hyphen_values = true)]
    pub grid: Vec<Axis>,

    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,

    /// Skip the closedness and energy checks
    #[arg(long)]
    pub generalized: bool,
}

impl CheckHamiltonianArgs {
    pub fn run(&self) -> CliResult<Outcome> {
        let loaded = self.system.load()?;
        let alpha = if self.alpha.is_empty() {
            loaded.alpha.clone().ok_or_else(|| CliError::Usage("no 1-form given; pass --alpha once per coordinate".into()))?
        } else {
            let texts: Vec<&str> = self.alpha.iter().map(String::as_str).collect();
            parse_alpha(&texts, loaded.dof())?
        };
        let grid = loaded.q_grid(&self.grid)?;
        let mut report = check_hamiltonian_generalized(&loaded.system, &alpha, &grid, self.tol)?;
        let mut not_closed = None;
        if !self.generalized {
            match check_hamiltonian_hj(&loaded.system, &alpha, &grid, self.tol) {
                Ok(standard) => merge(&mut report, standard),
                Err(e @ Error::NotClosed { .. }) => not_closed = Some(e),
                Err(e) => return Err(e.into()),
            }
        }
        println!("system: {}", loaded.system.name());
        println!("{report}");
        if let Some(e) = not_closed {
            println!("{e}");
            return Ok(Outcome::Failed);
        }
        Ok(report.passed().into())
    }
}

fn merge(into: &mut HJReport, from: HJReport) {
    into.closedness = from.closedness;
    into.energy_variation = from.energy_variation;
}

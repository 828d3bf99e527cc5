use std::path::PathBuf;

use clap::Args;
use evolk_core::hj::{check_standard_hj, solve_hj_1dof, solve_hj_separable, Branch, Hj1dSolution, Section};
use evolk_core::{Axis, SampleGrid};

use super::{parse_interval, per_coordinate, Outcome, SystemArg};
use crate::error::CliResult;
use crate::table;

#[derive(Args, Debug)]
pub struct SolveHjArgs {
    #[command(flatten)]
    pub system: SystemArg,

    /// Energy level, once per coordinate for separable systems
    #[arg(long, required = true, allow_hyphen_values = true)]
    pub energy: Vec<f64>,

    /// Interval a:b, once per coordinate or once for all
    #[arg(long, required = true, value_name = "a:b", allow_hyphen_values = true, value_parser = parse_interval)]
    pub interval: Vec<(f64, f64)>,

    /// Grid points per interval, endpoints included
    #[arg(long, default_value_t = 201)]
    pub points: usize,

    /// Sign of the momentum branch, + or -, once per coordinate or once for all
    #[arg(long, default_value = "+", allow_hyphen_values = true)]
    pub branch: Vec<Branch>,

    /// Tolerance of the self-check
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,

    #[arg(long, default_value = "solve_hj.csv")]
    pub out: PathBuf,
}

impl SolveHjArgs {
    pub fn run(&self) -> CliResult<Outcome> {
        let loaded = self.system.load()?;
        let sys = &loaded.system;
        let n = loaded.dof();
        let axes = per_coordinate(&self.interval, n, "--interval")?
            .into_iter()
            .map(|(a, b)| Axis::new(a, b, self.points))
            .collect::<Result<Vec<_>, _>>()?;
        let branches = per_coordinate(&self.branch, n, "--branch")?;
        let grid = SampleGrid::new(axes.clone())?;
        let (parts, section): (Vec<Hj1dSolution>, Box<dyn Section>) = if n == 1 {
            let energy = per_coordinate(&self.energy, 1, "--energy")?[0];
            let sol = solve_hj_1dof(sys, energy, axes[0], branches[0])?;
            (vec![sol.clone()], Box::new(sol))
        } else {
            let energies = if self.energy.len() == n {
                self.energy.clone()
            } else {
                return Err(crate::error::CliError::Usage(format!("--energy needs one value per coordinate ({n})")));
            };
            let sol = solve_hj_separable(sys, &energies, &axes, &branches)?;
            (sol.parts.clone(), Box::new(sol))
        };
        let header: Vec<String> = if n == 1 {
            ["q", "p", "X", "W"].map(String::from).to_vec()
        } else {
            (1..=n).flat_map(|i| ["q", "p", "X", "W"].map(|c| format!("{c}{i}"))).collect()
        };
        let rows = (0..self.points).map(|k| parts.iter().flat_map(|s| [s.q[k], s.p[k], s.x[k], s.w[k]]).collect());
        table::write(&self.out, &header, rows)?;
        println!("system: {}", sys.name());
        for (i, s) in parts.iter().enumerate() {
            println!("coordinate {}: E = {}, branch {:?}, level residual {:.6e}", i + 1, s.energy, s.branch, s.level_residual()?);
        }
        println!("table: {}", self.out.display());
        let report = check_standard_hj(sys, section.as_ref(), &grid, self.tol)?;
        println!("{report}");
        Ok(report.passed().into())
    }
}

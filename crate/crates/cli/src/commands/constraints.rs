use clap::Args;
use evolk_core::constraints::{check_x_admissible, detect_degeneracy, primary_constraint_residual, stabilize, Status};
use evolk_core::{Axis, SampleGrid, SectionX};

use super::{expand_axes, Outcome, SystemArg};
use crate::error::CliResult;

#[derive(Args, Debug)]
pub struct ConstraintsArgs {
    #[command(flatten)]
    pub system: SystemArg,

    /// TQ sample axis a:b:m, once per (q, v) coordinate or once for all
    #[arg(long, value_name = "a:b:m", allow_hyphen_values = true)]
    pub grid: Vec<Axis>,

    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,

    #[arg(long, default_value_t = 10)]
    pub max_iter: usize,

    /// Component of a section X(q) to test against the final constraints
    #[arg(long, value_name = "EXPR", allow_hyphen_values = true)]
    pub admissible: Vec<String>,

    /// Q sample axis for --admissible
    #[arg(long, value_name = "a:b:m", allow_hyphen_values = true)]
    pub q_grid: Vec<Axis>,
}

fn default_axis() -> Axis {
    Axis { lo: -1.0, hi: 1.0, count: 5 }
}

impl ConstraintsArgs {
    pub fn run(&self) -> CliResult<Outcome> {
        let loaded = self.system.load()?;
        let sys = &loaded.system;
        let n = loaded.dof();
        let tq = match (&loaded.tq_grid, self.grid.is_empty()) {
            (_, false) => expand_axes(&self.grid, 2 * n, "--grid")?,
            (Some(g), true) => g.clone(),
            (None, true) => SampleGrid::uniform(default_axis(), 2 * n)?,
        };
        println!("system: {}", sys.name());
        println!("TQ grid: {} points on {}", tq.len(), tq.describe());

        let deg = detect_degeneracy(sys, &tq)?;
        if deg.min_rank == deg.max_rank {
            println!("velocity Hessian rank: {} of {}", deg.min_rank, deg.dof);
        } else {
            println!("velocity Hessian rank: varies from {} to {} of {}", deg.min_rank, deg.max_rank, deg.dof);
        }
        for d in &deg.null_directions {
            println!("null direction: {d:?}");
        }

        let primaries = loaded.primaries()?;
        let mut ok = true;
        for c in &primaries {
            let r = primary_constraint_residual(sys, c, &tq)?;
            let pass = r <= self.tol;
            ok &= pass;
            println!("primary {c}: residual {r:.6e}  {}", if pass { "PASS" } else { "FAIL" });
        }

        let set = stabilize(sys, &primaries, &tq, self.tol, self.max_iter)?;
        for c in &set.constraints {
            println!("generation {}  {:<11}  {c}", c.generation, format!("{:?}", c.provenance).to_lowercase());
        }
        println!(
            "status: {} after {} iteration(s); {} of {} grid points feasible",
            set.status,
            set.iterations,
            set.feasible.len(),
            tq.len()
        );
        ok &= set.status == Status::Converged;

        if !self.admissible.is_empty() && set.status != Status::Converged {
            println!("admissibility: skipped, constraint set is {}", set.status);
        } else if !self.admissible.is_empty() {
            let texts: Vec<&str> = self.admissible.iter().map(String::as_str).collect();
            let x = SectionX::parse(&texts, n)?;
            let q_grid = if self.q_grid.is_empty() {
                loaded.q_grid.clone().map_or_else(|| SampleGrid::uniform(default_axis(), n), Ok)?
            } else {
                expand_axes(&self.q_grid, n, "--q-grid")?
            };
            let adm = check_x_admissible(sys, &x, &set, &q_grid, self.tol)?;
            for (c, r, pass) in &adm.rows {
                println!("admissible {c}: residual {r:.6e}  {}", if *pass { "PASS" } else { "FAIL" });
            }
            ok &= adm.passed();
        }
        println!("verdict: {}", if ok { "PASS" } else { "FAIL" });
        Ok(ok.into())
    }
}

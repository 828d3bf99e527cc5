use std::path::PathBuf;

use clap::Args;
use evolk_core::geometry::legendre_map;
use evolk_core::kappa::{energy_drift, hamiltonian_drift, integrate_hamiltonian, integrate_regular};
use evolk_core::{CotangentPoint, Method, TangentPoint};

use super::{Outcome, SystemArg};
use crate::error::{CliError, CliResult};
use crate::table;

#[derive(Args, Debug)]
pub struct IntegrateArgs {
    #[command(flatten)]
    pub system: SystemArg,

    /// Initial positions, comma separated
    #[arg(long, required = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub q: Vec<f64>,

    /// Initial velocities
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub v: Vec<f64>,

    /// Initial momenta, with --hamiltonian
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub p: Vec<f64>,

    /// Integrate Hamilton's equations instead of the Euler–Lagrange flow
    #[arg(long)]
    pub hamiltonian: bool,

    /// Step size
    #[arg(long, default_value_t = 1e-3)]
    pub h: f64,

    #[arg(long, default_value_t = 1000)]
    pub steps: usize,

    /// rk4 or euler
    #[arg(long, default_value = "rk4")]
    pub method: Method,

    #[arg(long, default_value = "trajectory.csv")]
    pub out: PathBuf,
}

impl IntegrateArgs {
    pub fn run(&self) -> CliResult<Outcome> {
        let loaded = self.system.load()?;
        let sys = &loaded.system;
        let n = loaded.dof();
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(CliError::Usage(format!("--h must be positive, got {}", self.h)));
        }
        let mut header = vec!["t".to_string()];
        header.extend(table::numbered("q", n));
        let (rows, drift, label): (Vec<Vec<f64>>, f64, &str) = if self.hamiltonian {
            let start = match (self.p.is_empty(), self.v.is_empty()) {
                (false, _) => CotangentPoint::new(self.q.clone(), self.p.clone())?,
                (true, false) => legendre_map(sys, &TangentPoint::new(self.q.clone(), self.v.clone())?)?,
                (true, true) => return Err(CliError::Usage("pass --p (or --v to start at FL(q, v))".into())),
            };
            let traj = integrate_hamiltonian(sys, &start, self.h, self.steps, self.method)?;
            header.extend(table::numbered("p", n));
            let rows = traj.times.iter().zip(&traj.states).map(|(t, s)| flat_row(*t, &s.q, &s.p)).collect();
            (rows, hamiltonian_drift(sys, &traj)?, "Hamiltonian drift")
        } else {
            if !self.p.is_empty() {
                return Err(CliError::Usage("--p needs --hamiltonian".into()));
            }
            if self.v.is_empty() {
                return Err(CliError::Usage("pass --v".into()));
            }
            let traj = integrate_regular(sys, &TangentPoint::new(self.q.clone(), self.v.clone())?, self.h, self.steps, self.method)?;
            header.extend(table::numbered("v", n));
            let rows = traj.times.iter().zip(&traj.states).map(|(t, s)| flat_row(*t, &s.q, &s.v)).collect();
            (rows, energy_drift(sys, &traj)?, "energy drift")
        };
        let last = rows.last().cloned().unwrap_or_default();
        table::write(&self.out, &header, rows)?;
        println!("system: {}", sys.name());
        println!("method: {}, h = {}, steps = {}", self.method, self.h, self.steps);
        println!("final state: {}", last.iter().map(|x| table::float(*x)).collect::<Vec<_>>().join(", "));
        println!("{label}: {drift:.6e}");
        println!("trajectory: {}", self.out.display());
        Ok(Outcome::Passed)
    }
}

fn flat_row(t: f64, a: &[f64], b: &[f64]) -> Vec<f64> {
    std::iter::once(t).chain(a.iter().copied()).chain(b.iter().copied()).collect()
}

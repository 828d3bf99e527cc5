//! Fixed-step explicit integrators for autonomous systems `y' = f(y)`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Method {
    #[default]
    Rk4,
    Euler,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Rk4 => "rk4",
            Method::Euler => "euler",
        })
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rk4" => Ok(Method::Rk4),
            "euler" => Ok(Method::Euler),
            other => Err(Error::Precondition(format!("unknown integration method `{other}`"))),
        }
    }
}

fn axpy(y: &[f64], h: f64, k: &[f64]) -> Vec<f64> {
    y.iter().zip(k).map(|(a, b)| a + h * b).collect()
}

pub fn step<F>(method: Method, y: &[f64], h: f64, f: &F) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    match method {
        Method::Euler => Ok(axpy(y, h, &f(y)?)),
        Method::Rk4 => {
            let k1 = f(y)?;
            let k2 = f(&axpy(y, 0.5 * h, &k1))?;
            let k3 = f(&axpy(y, 0.5 * h, &k2))?;
            let k4 = f(&axpy(y, h, &k3))?;
            Ok(y.iter()
                .enumerate()
                .map(|(i, yi)| yi + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
                .collect())
        }
    }
}

/// Integrates `steps` fixed steps. `f` receives the time of the step start so
/// that errors can be attributed.
pub fn integrate<F>(method: Method, y0: &[f64], h: f64, steps: usize, f: F) -> Result<Vec<Vec<f64>>>
where
    F: Fn(f64, &[f64]) -> Result<Vec<f64>>,
{
    let mut out = Vec::with_capacity(steps + 1);
    out.push(y0.to_vec());
    for k in 0..steps {
        let t = k as f64 * h;
        let next = step(method, &out[k], h, &|y: &[f64]| f(t, y))?;
        out.push(next);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_orders() {
        let f = |_: f64, y: &[f64]| Ok(vec![-y[0]]);
        let err = |m: Method, h: f64| {
            let n = (1.0 / h).round() as usize;
            let ys = integrate(m, &[1.0], h, n, f).unwrap();
            (ys[n][0] - (-1.0f64).exp()).abs()
        };
        let r4 = err(Method::Rk4, 0.1) / err(Method::Rk4, 0.05);
        assert!((14.0..18.0).contains(&r4), "{r4}");
        let r1 = err(Method::Euler, 0.01) / err(Method::Euler, 0.005);
        assert!((1.8..2.2).contains(&r1), "{r1}");
    }
}

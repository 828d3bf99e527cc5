use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Uniform points on `[lo, hi]`, both endpoints included.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(Error::InvalidGrid(format!("need a < b, got {lo}:{hi}")));
        }
        if count < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 points, got {count}")));
        }
        Ok(Self { lo, hi, count })
    }

    pub fn point(&self, k: usize) -> f64 {
        if k + 1 == self.count {
            return self.hi;
        }
        self.lo + (self.hi - self.lo) * (k as f64) / ((self.count - 1) as f64)
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.point(k)).collect()
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / ((self.count - 1) as f64)
    }
}

/// Parses `"a:b:m"`.
impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let bad = || Error::InvalidGrid(format!("expected \"a:b:m\", got \"{s}\""));
        if parts.len() != 3 {
            return Err(bad());
        }
        let lo: f64 = parts[0].parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].parse().map_err(|_| bad())?;
        let count: usize = parts[2].parse().map_err(|_| bad())?;
        Axis::new(lo, hi, count)
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]x{}", self.lo, self.hi, self.count)
    }
}

/// Cartesian product of axes, enumerated with the last index fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleGrid {
    pub axes: Vec<Axis>,
}

impl SampleGrid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::EmptyGrid);
        }
        Ok(Self { axes })
    }

    /// The same axis repeated `dim` times.
    pub fn uniform(axis: Axis, dim: usize) -> Result<Self> {
        Self::new(vec![axis; dim])
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.count).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, mut flat: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (slot, axis) in out.iter_mut().zip(&self.axes).rev() {
            *slot = axis.point(flat % axis.count);
            flat /= axis.count;
        }
        out
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|k| self.point(k)).collect()
    }

    /// Keeps the first `n` axes.
    pub fn head(&self, n: usize) -> Result<SampleGrid> {
        SampleGrid::new(self.axes.iter().take(n).copied().collect())
    }

    pub fn describe(&self) -> String {
        self.axes.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(" x ")
    }
}

//! Forward-mode automatic differentiation.
//!
//! [`Dual1`] carries a value and its gradient, [`Dual2`] additionally carries a
//! dense symmetric Hessian. Both treat an empty derivative vector as "all
//! zeros", so constants never need to know how many variables are active.
//!
//! `Dual1` is generic over its component type, which makes nested
//! differentiation (`Dual1<Dual1<f64>>`) available for composite quantities such
//! as `∂/∂q [∂L/∂v (q, X(q))]`.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::error::Error;

/// Number-like type that the expression evaluator can run on.
pub trait Scalar:
    Clone
    + Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(c: f64) -> Self;

    /// Innermost real value.
    fn re(&self) -> f64;

    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn powi(self, n: i32) -> Self;
    fn powf(self, c: f64) -> Self;
}

impl Scalar for f64 {
    fn from_f64(c: f64) -> Self {
        c
    }
    fn re(&self) -> f64 {
        *self
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    fn powf(self, c: f64) -> Self {
        f64::powf(self, c)
    }
}

// Domain-checked primitives used by the evaluator.

pub fn try_div<S: Scalar>(a: S, b: S) -> Result<S, Error> {
    if b.re() == 0.0 {
        return Err(Error::Domain { op: "division", arg: b.re() });
    }
    Ok(a / b)
}

pub fn try_ln<S: Scalar>(x: S) -> Result<S, Error> {
    if x.re() <= 0.0 {
        return Err(Error::Domain { op: "log", arg: x.re() });
    }
    Ok(x.ln())
}

pub fn try_sqrt<S: Scalar>(x: S) -> Result<S, Error> {
    if x.re() < 0.0 {
        return Err(Error::Domain { op: "sqrt", arg: x.re() });
    }
    Ok(x.sqrt())
}

pub fn try_powi<S: Scalar>(x: S, n: i32) -> Result<S, Error> {
    if n < 0 && x.re() == 0.0 {
        return Err(Error::Domain { op: "power", arg: x.re() });
    }
    Ok(x.powi(n))
}

pub fn try_powf<S: Scalar>(x: S, c: f64) -> Result<S, Error> {
    if x.re() < 0.0 || (x.re() == 0.0 && c < 0.0) {
        return Err(Error::Domain { op: "power", arg: x.re() });
    }
    Ok(x.powf(c))
}

/// `x^y` with a variable exponent, computed as `exp(y ln x)`.
pub fn try_pow<S: Scalar>(x: S, y: S) -> Result<S, Error> {
    if x.re() <= 0.0 {
        return Err(Error::Domain { op: "power", arg: x.re() });
    }
    Ok((y * x.ln()).exp())
}

/// Value plus first partial derivatives.
#[derive(Clone, Debug, PartialEq)]
pub struct Dual1<T = f64> {
    pub value: T,
    pub partials: Vec<T>,
}

impl<T: Scalar> Dual1<T> {
    pub fn constant(value: T) -> Self {
        Self { value, partials: Vec::new() }
    }

    /// Independent variable `index` out of `m`.
    pub fn variable(value: T, index: usize, m: usize) -> Self {
        let partials = (0..m)
            .map(|k| T::from_f64(if k == index { 1.0 } else { 0.0 }))
            .collect();
        Self { value, partials }
    }

    pub fn partial(&self, i: usize) -> T {
        self.partials.get(i).cloned().unwrap_or_else(|| T::from_f64(0.0))
    }

    fn chain(self, value: T, deriv: T) -> Self {
        let partials = self.partials.into_iter().map(|d| deriv.clone() * d).collect();
        Self { value, partials }
    }
}

/// Seeds `x` as `x.len()` independent real variables.
pub fn seed1(x: &[f64]) -> Vec<Dual1> {
    x.iter()
        .enumerate()
        .map(|(i, &xi)| Dual1::variable(xi, i, x.len()))
        .collect()
}

impl<T: Scalar> Add for Dual1<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let partials = match (self.partials.is_empty(), rhs.partials.is_empty()) {
            (true, _) => rhs.partials,
            (_, true) => self.partials,
            _ => self.partials.into_iter().zip(rhs.partials).map(|(a, b)| a + b).collect(),
        };
        Self { value: self.value + rhs.value, partials }
    }
}

impl<T: Scalar> Sub for Dual1<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let partials = match (self.partials.is_empty(), rhs.partials.is_empty()) {
            (_, true) => self.partials,
            (true, false) => rhs.partials.into_iter().map(|b| -b).collect(),
            _ => self.partials.into_iter().zip(rhs.partials).map(|(a, b)| a - b).collect(),
        };
        Self { value: self.value - rhs.value, partials }
    }
}

#[allow(clippy::suspicious_arithmetic_impl)]
impl<T: Scalar> Mul for Dual1<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let (a, b) = (self.value, rhs.value);
        let partials = match (self.partials.is_empty(), rhs.partials.is_empty()) {
            (true, true) => Vec::new(),
            (true, false) => rhs.partials.into_iter().map(|db| a.clone() * db).collect(),
            (false, true) => self.partials.into_iter().map(|da| b.clone() * da).collect(),
            (false, false) => self
                .partials
                .into_iter()
                .zip(rhs.partials)
                .map(|(da, db)| a.clone() * db + b.clone() * da)
                .collect(),
        };
        Self { value: a * b, partials }
    }
}

#[allow(clippy::suspicious_arithmetic_impl)]
impl<T: Scalar> Div for Dual1<T> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let quotient = self.value / rhs.value.clone();
        let b = rhs.value;
        let partials = match (self.partials.is_empty(), rhs.partials.is_empty()) {
            (true, true) => Vec::new(),
            (false, true) => self.partials.into_iter().map(|da| da / b.clone()).collect(),
            (true, false) => rhs
                .partials
                .into_iter()
                .map(|db| -(quotient.clone() * db) / b.clone())
                .collect(),
            (false, false) => self
                .partials
                .into_iter()
                .zip(rhs.partials)
                .map(|(da, db)| (da - quotient.clone() * db) / b.clone())
                .collect(),
        };
        Self { value: quotient, partials }
    }
}

impl<T: Scalar> Neg for Dual1<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self {
            value: -self.value,
            partials: self.partials.into_iter().map(|d| -d).collect(),
        }
    }
}

impl<T: Scalar> Scalar for Dual1<T> {
    fn from_f64(c: f64) -> Self {
        Self::constant(T::from_f64(c))
    }
    fn re(&self) -> f64 {
        self.value.re()
    }
    fn sin(self) -> Self {
        let (v, d) = (self.value.clone().sin(), self.value.clone().cos());
        self.chain(v, d)
    }
    fn cos(self) -> Self {
        let (v, d) = (self.value.clone().cos(), -self.value.clone().sin());
        self.chain(v, d)
    }
    fn exp(self) -> Self {
        let v = self.value.clone().exp();
        self.chain(v.clone(), v)
    }
    fn ln(self) -> Self {
        let v = self.value.clone().ln();
        let d = T::from_f64(1.0) / self.value.clone();
        self.chain(v, d)
    }
    fn sqrt(self) -> Self {
        let v = self.value.clone().sqrt();
        let d = T::from_f64(0.5) / v.clone();
        self.chain(v, d)
    }
    fn powi(self, n: i32) -> Self {
        let v = self.value.clone().powi(n);
        let d = if n == 0 {
            T::from_f64(0.0)
        } else {
            T::from_f64(n as f64) * self.value.clone().powi(n - 1)
        };
        self.chain(v, d)
    }
    fn powf(self, c: f64) -> Self {
        let v = self.value.clone().powf(c);
        let d = T::from_f64(c) * self.value.clone().powf(c - 1.0);
        self.chain(v, d)
    }
}

/// Value, gradient and dense symmetric Hessian (row-major).
#[derive(Clone, Debug, PartialEq)]
pub struct Dual2 {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
}

impl Dual2 {
    pub fn constant(value: f64) -> Self {
        Self { value, grad: Vec::new(), hess: Vec::new() }
    }

    pub fn variable(value: f64, index: usize, m: usize) -> Self {
        let mut grad = vec![0.0; m];
        grad[index] = 1.0;
        Self { value, grad, hess: vec![0.0; m * m] }
    }

    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    pub fn hessian(&self, i: usize, j: usize) -> f64 {
        let m = self.dim();
        if m == 0 {
            0.0
        } else {
            self.hess[i * m + j]
        }
    }

    fn widen(&mut self, m: usize) {
        if self.grad.is_empty() && m > 0 {
            self.grad = vec![0.0; m];
            self.hess = vec![0.0; m * m];
        }
    }

    /// Composition with a scalar function given by its value and first two
    /// derivatives at `self.value`.
    fn chain(self, f0: f64, f1: f64, f2: f64) -> Self {
        let m = self.dim();
        let grad: Vec<f64> = self.grad.iter().map(|g| f1 * g).collect();
        let mut hess = vec![0.0; m * m];
        for i in 0..m {
            for j in i..m {
                let h = f2 * (self.grad[i] * self.grad[j]) + f1 * self.hess[i * m + j];
                hess[i * m + j] = h;
                hess[j * m + i] = h;
            }
        }
        Self { value: f0, grad, hess }
    }
}

/// Seeds `x` as `x.len()` independent variables with second-order tracking.
pub fn seed2(x: &[f64]) -> Vec<Dual2> {
    x.iter()
        .enumerate()
        .map(|(i, &xi)| Dual2::variable(xi, i, x.len()))
        .collect()
}

impl Add for Dual2 {
    type Output = Self;
    fn add(mut self, mut rhs: Self) -> Self {
        let m = self.dim().max(rhs.dim());
        self.widen(m);
        rhs.widen(m);
        Self {
            value: self.value + rhs.value,
            grad: self.grad.iter().zip(&rhs.grad).map(|(a, b)| a + b).collect(),
            hess: self.hess.iter().zip(&rhs.hess).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for Dual2 {
    type Output = Self;
    fn sub(mut self, mut rhs: Self) -> Self {
        let m = self.dim().max(rhs.dim());
        self.widen(m);
        rhs.widen(m);
        Self {
            value: self.value - rhs.value,
            grad: self.grad.iter().zip(&rhs.grad).map(|(a, b)| a - b).collect(),
            hess: self.hess.iter().zip(&rhs.hess).map(|(a, b)| a - b).collect(),
        }
    }
}

#[allow(clippy::suspicious_arithmetic_impl)]
impl Mul for Dual2 {
    type Output = Self;
    fn mul(mut self, mut rhs: Self) -> Self {
        let m = self.dim().max(rhs.dim());
        self.widen(m);
        rhs.widen(m);
        let (a, b) = (self.value, rhs.value);
        let grad = self.grad.iter().zip(&rhs.grad).map(|(da, db)| a * db + b * da).collect();
        let mut hess = vec![0.0; m * m];
        for i in 0..m {
            for j in i..m {
                let k = i * m + j;
                let h = a * rhs.hess[k]
                    + b * self.hess[k]
                    + (self.grad[i] * rhs.grad[j] + rhs.grad[i] * self.grad[j]);
                hess[k] = h;
                hess[j * m + i] = h;
            }
        }
        Self { value: a * b, grad, hess }
    }
}

#[allow(clippy::suspicious_arithmetic_impl)]
impl Div for Dual2 {
    type Output = Self;
    fn div(mut self, mut rhs: Self) -> Self {
        let m = self.dim().max(rhs.dim());
        self.widen(m);
        rhs.widen(m);
        let b = rhs.value;
        let q = self.value / b;
        let gq: Vec<f64> = self.grad.iter().zip(&rhs.grad).map(|(da, db)| (da - q * db) / b).collect();
        let mut hess = vec![0.0; m * m];
        for i in 0..m {
            for j in i..m {
                let k = i * m + j;
                let h = (self.hess[k] - q * rhs.hess[k] - (gq[i] * rhs.grad[j] + rhs.grad[i] * gq[j])) / b;
                hess[k] = h;
                hess[j * m + i] = h;
            }
        }
        Self { value: q, grad: gq, hess }
    }
}

impl Neg for Dual2 {
    type Output = Self;
    fn neg(self) -> Self {
        Self {
            value: -self.value,
            grad: self.grad.into_iter().map(|g| -g).collect(),
            hess: self.hess.into_iter().map(|h| -h).collect(),
        }
    }
}

impl Scalar for Dual2 {
    fn from_f64(c: f64) -> Self {
        Self::constant(c)
    }
    fn re(&self) -> f64 {
        self.value
    }
    fn sin(self) -> Self {
        let x = self.value;
        self.chain(x.sin(), x.cos(), -x.sin())
    }
    fn cos(self) -> Self {
        let x = self.value;
        self.chain(x.cos(), -x.sin(), -x.cos())
    }
    fn exp(self) -> Self {
        let e = self.value.exp();
        self.chain(e, e, e)
    }
    fn ln(self) -> Self {
        let x = self.value;
        self.chain(x.ln(), 1.0 / x, -1.0 / (x * x))
    }
    fn sqrt(self) -> Self {
        let (x, s) = (self.value, self.value.sqrt());
        self.chain(s, 0.5 / s, -0.25 / (s * x))
    }
    fn powi(self, n: i32) -> Self {
        let x = self.value;
        let nf = n as f64;
        let f1 = if n == 0 { 0.0 } else { nf * x.powi(n - 1) };
        let f2 = if n == 0 || n == 1 { 0.0 } else { nf * (nf - 1.0) * x.powi(n - 2) };
        self.chain(x.powi(n), f1, f2)
    }
    fn powf(self, c: f64) -> Self {
        let x = self.value;
        self.chain(x.powf(c), c * x.powf(c - 1.0), c * (c - 1.0) * x.powf(c - 2.0))
    }
}

/// Value and gradient of `f` at `x`.
pub fn eval_grad<F>(f: F, x: &[f64]) -> Result<(f64, Vec<f64>), Error>
where
    F: Fn(&[Dual1]) -> Result<Dual1, Error>,
{
    let out = f(&seed1(x))?;
    let grad = (0..x.len()).map(|i| out.partial(i)).collect();
    Ok((out.value, grad))
}

/// Value, gradient and Hessian (row-major `m × m`) of `f` at `x`.
pub fn eval_hess<F>(f: F, x: &[f64]) -> Result<(f64, Vec<f64>, Vec<f64>), Error>
where
    F: Fn(&[Dual2]) -> Result<Dual2, Error>,
{
    let m = x.len();
    let mut out = f(&seed2(x))?;
    out.widen(m);
    Ok((out.value, out.grad, out.hess))
}

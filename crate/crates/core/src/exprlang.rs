//! The small expression language for Lagrangians, Hamiltonians, section
//! components and constraint functions.
//!
//! ```text
//! expr  := term (("+"|"-") term)*
//! term  := unary (("*"|"/") unary)*
//! unary := "-" unary | power
//! power := atom ("^" unary)?
//! atom  := number | var | func "(" expr ")" | "(" expr ")"
//! var   := ("q"|"v"|"p") digits
//! func  := "sin" | "cos" | "exp" | "log" | "sqrt"
//! ```
//!
//! Variables are the reserved families `q`, `v` and `p` with 1-based indices.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::scalars::{self, Dual1, Dual2, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Family {
    Q,
    V,
    P,
}

impl Family {
    pub fn letter(self) -> char {
        match self {
            Family::Q => 'q',
            Family::V => 'v',
            Family::P => 'p',
        }
    }
}

/// A variable reference; `index` is 0-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var {
    pub family: Family,
    pub index: usize,
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.family.letter(), self.index + 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Parses `text` against a system of dimension `dof`.
pub fn parse(text: &str, dof: usize) -> Result<Expr> {
    let mut parser = Parser { bytes: text.as_bytes(), pos: 0, dof };
    parser.skip_ws();
    if parser.at_end() {
        return Err(Error::Syntax { offset: parser.pos, message: "empty expression".into() });
    }
    let expr = parser.expr()?;
    parser.skip_ws();
    if !parser.at_end() {
        return Err(parser.error("unexpected input after expression"));
    }
    Ok(expr)
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
    dof: usize,
}

impl Parser<'_> {
    fn at_end(&self) -> bool {
        self.pos >= self.bytes.len()
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b' ' | b'\t' | b'\n' | b'\r')) {
            self.pos += 1;
        }
    }

    fn error(&self, message: &str) -> Error {
        let message = match self.peek() {
            Some(c) if c.is_ascii_graphic() => format!("{message} (found '{}')", c as char),
            Some(_) => message.to_string(),
            None => format!("{message} (found end of input)"),
        };
        Error::Syntax { offset: self.pos, message }
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected '{}'", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            self.skip_ws();
            let op = match self.peek() {
                Some(b'+') => BinOp::Add,
                Some(b'-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            self.skip_ws();
            let op = match self.peek() {
                Some(b'*') => BinOp::Mul,
                Some(b'/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        self.skip_ws();
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        self.skip_ws();
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        self.skip_ws();
        match self.peek() {
            Some(c) if c.is_ascii_digit() => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.identifier(),
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect(b')')?;
                Ok(inner)
            }
            _ => Err(self.error("expected expression")),
        }
    }

    fn digits(&mut self) -> usize {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        self.pos - start
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        self.digits();
        if self.peek() == Some(b'.') {
            self.pos += 1;
            if self.digits() == 0 {
                return Err(self.error("expected digits after decimal point"));
            }
        }
        if matches!(self.peek(), Some(b'e' | b'E')) {
            self.pos += 1;
            if matches!(self.peek(), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if self.digits() == 0 {
                return Err(self.error("expected exponent digits"));
            }
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii");
        let value: f64 = text.parse().map_err(|_| Error::Syntax {
            offset: start,
            message: format!("invalid number `{text}`"),
        })?;
        if !value.is_finite() {
            return Err(Error::Syntax { offset: start, message: format!("number `{text}` is out of range") });
        }
        Ok(Expr::Num(value))
    }

    fn identifier(&mut self) -> Result<Expr> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii");
        if let Some(func) = Func::from_name(name) {
            self.expect(b'(')?;
            let arg = self.expr()?;
            self.expect(b')')?;
            return Ok(Expr::Call(func, Box::new(arg)));
        }
        let family = match name.as_bytes()[0] {
            b'q' => Some(Family::Q),
            b'v' => Some(Family::V),
            b'p' => Some(Family::P),
            _ => None,
        };
        let digits = &name[1..];
        match family {
            Some(family) if !digits.is_empty() && digits.bytes().all(|c| c.is_ascii_digit()) => {
                let index: usize = digits.parse().unwrap_or(usize::MAX);
                if index == 0 || index > self.dof {
                    return Err(Error::IndexOutOfRange { name: name.to_string(), offset: start, dof: self.dof });
                }
                Ok(Expr::Var(Var { family, index: index - 1 }))
            }
            _ => Err(Error::UnknownIdentifier { name: name.to_string(), offset: start }),
        }
    }
}

/// Canonical, fully parenthesized printer. Re-parsing the output gives back
/// the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(x) => write!(f, "{x:?}"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Binary(op, a, b) => {
                let sym = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                write!(f, "({a} {sym} {b})")
            }
            Expr::Call(func, e) => write!(f, "{}({e})", func.name()),
        }
    }
}

/// Variable values by family, for any scalar type.
#[derive(Clone, Copy, Debug)]
pub struct Vars<'a, S> {
    pub q: Option<&'a [S]>,
    pub v: Option<&'a [S]>,
    pub p: Option<&'a [S]>,
}

impl<'a, S> Vars<'a, S> {
    pub fn qv(q: &'a [S], v: &'a [S]) -> Self {
        Self { q: Some(q), v: Some(v), p: None }
    }

    pub fn qp(q: &'a [S], p: &'a [S]) -> Self {
        Self { q: Some(q), v: None, p: Some(p) }
    }

    pub fn q(q: &'a [S]) -> Self {
        Self { q: Some(q), v: None, p: None }
    }

    fn get(&self, var: Var) -> Result<&'a S> {
        let slice = match var.family {
            Family::Q => self.q,
            Family::V => self.v,
            Family::P => self.p,
        };
        slice
            .and_then(|s| s.get(var.index))
            .ok_or_else(|| Error::UnboundVariable(var.to_string()))
    }
}

impl Expr {
    pub fn eval<S: Scalar>(&self, vars: &Vars<'_, S>) -> Result<S> {
        match self {
            Expr::Num(x) => Ok(S::from_f64(*x)),
            Expr::Var(v) => vars.get(*v).cloned(),
            Expr::Neg(e) => Ok(-e.eval(vars)?),
            Expr::Call(func, e) => {
                let x = e.eval(vars)?;
                match func {
                    Func::Sin => Ok(x.sin()),
                    Func::Cos => Ok(x.cos()),
                    Func::Exp => Ok(x.exp()),
                    Func::Log => scalars::try_ln(x),
                    Func::Sqrt => scalars::try_sqrt(x),
                }
            }
            Expr::Binary(BinOp::Pow, base, exponent) => {
                let b = base.eval(vars)?;
                if exponent.has_vars() {
                    let e = exponent.eval(vars)?;
                    return scalars::try_pow(b, e);
                }
                let e: f64 = exponent.eval(&Vars::<f64> { q: None, v: None, p: None })?;
                if e.fract() == 0.0 && e.abs() <= i32::MAX as f64 {
                    scalars::try_powi(b, e as i32)
                } else {
                    scalars::try_powf(b, e)
                }
            }
            Expr::Binary(op, a, b) => {
                let (x, y) = (a.eval(vars)?, b.eval(vars)?);
                match op {
                    BinOp::Add => Ok(x + y),
                    BinOp::Sub => Ok(x - y),
                    BinOp::Mul => Ok(x * y),
                    BinOp::Div => scalars::try_div(x, y),
                    BinOp::Pow => unreachable!(),
                }
            }
        }
    }

    pub fn eval_real(&self, vars: &Vars<'_, f64>) -> Result<f64> {
        self.eval(vars)
    }

    pub fn has_vars(&self) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(_) => true,
            Expr::Neg(e) | Expr::Call(_, e) => e.has_vars(),
            Expr::Binary(_, a, b) => a.has_vars() || b.has_vars(),
        }
    }

    pub fn variables(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(v) => {
                out.insert(*v);
            }
            Expr::Neg(e) | Expr::Call(_, e) => e.collect_vars(out),
            Expr::Binary(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub fn families(&self) -> BTreeSet<Family> {
        self.variables().into_iter().map(|v| v.family).collect()
    }

    /// Distinct 0-based indices referenced, across all families.
    pub fn indices(&self) -> BTreeSet<usize> {
        self.variables().into_iter().map(|v| v.index).collect()
    }

    pub fn map_vars(&self, f: &impl Fn(Var) -> Var) -> Expr {
        match self {
            Expr::Num(x) => Expr::Num(*x),
            Expr::Var(v) => Expr::Var(f(*v)),
            Expr::Neg(e) => Expr::Neg(Box::new(e.map_vars(f))),
            Expr::Call(func, e) => Expr::Call(*func, Box::new(e.map_vars(f))),
            Expr::Binary(op, a, b) => Expr::Binary(*op, Box::new(a.map_vars(f)), Box::new(b.map_vars(f))),
        }
    }

    /// Flattens top-level sums into signed terms. Products and quotients by
    /// variable-free factors are distributed, so `0.5*(p1^2 + p2^2)` yields two
    /// terms.
    pub fn additive_terms(&self) -> Vec<Expr> {
        let mut out = Vec::new();
        self.push_terms(None, &mut out);
        out
    }

    fn push_terms(&self, scale: Option<&dyn Fn(Expr) -> Expr>, out: &mut Vec<Expr>) {
        let wrap = |e: Expr| match scale {
            Some(s) => s(e),
            None => e,
        };
        match self {
            Expr::Binary(BinOp::Add, a, b) => {
                a.push_terms(scale, out);
                b.push_terms(scale, out);
            }
            Expr::Binary(BinOp::Sub, a, b) => {
                a.push_terms(scale, out);
                let neg = |e: Expr| wrap(Expr::Neg(Box::new(e)));
                b.push_terms(Some(&neg), out);
            }
            Expr::Neg(e) => {
                let neg = |x: Expr| wrap(Expr::Neg(Box::new(x)));
                e.push_terms(Some(&neg), out);
            }
            Expr::Binary(BinOp::Mul, c, e) if !c.has_vars() => {
                let mul = |x: Expr| wrap(Expr::Binary(BinOp::Mul, c.clone(), Box::new(x)));
                e.push_terms(Some(&mul), out);
            }
            Expr::Binary(BinOp::Mul, e, c) if !c.has_vars() => {
                let mul = |x: Expr| wrap(Expr::Binary(BinOp::Mul, Box::new(x), c.clone()));
                e.push_terms(Some(&mul), out);
            }
            Expr::Binary(BinOp::Div, e, c) if !c.has_vars() => {
                let div = |x: Expr| wrap(Expr::Binary(BinOp::Div, Box::new(x), c.clone()));
                e.push_terms(Some(&div), out);
            }
            other => out.push(wrap(other.clone())),
        }
    }

    /// Sum of `terms`, or `0` when empty.
    pub fn sum(terms: impl IntoIterator<Item = Expr>) -> Expr {
        terms
            .into_iter()
            .reduce(|a, b| Expr::Binary(BinOp::Add, Box::new(a), Box::new(b)))
            .unwrap_or(Expr::Num(0.0))
    }
}

/// Concrete values for the variable families of a system of dimension `n`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VarBinding {
    pub n: usize,
    pub q: Option<Vec<f64>>,
    pub v: Option<Vec<f64>>,
    pub p: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScalarKind {
    Real,
    Dual1,
    Dual2,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ScalarValue {
    Real(f64),
    Dual1(Dual1),
    Dual2(Dual2),
}

impl ScalarValue {
    pub fn value(&self) -> f64 {
        match self {
            ScalarValue::Real(x) => *x,
            ScalarValue::Dual1(d) => d.value,
            ScalarValue::Dual2(d) => d.value,
        }
    }
}

impl VarBinding {
    /// Bound values in seeding order: q, then v, then p.
    fn flat(&self) -> Vec<f64> {
        [&self.q, &self.v, &self.p]
            .into_iter()
            .flatten()
            .flat_map(|x| x.iter().copied())
            .collect()
    }

    fn split<'a, S>(&self, flat: &'a [S]) -> Vars<'a, S> {
        let mut rest = flat;
        let mut take = |present: bool| {
            if present {
                let (head, tail) = rest.split_at(self.n);
                rest = tail;
                Some(head)
            } else {
                None
            }
        };
        let q = take(self.q.is_some());
        let v = take(self.v.is_some());
        let p = take(self.p.is_some());
        Vars { q, v, p }
    }

    fn check(&self) -> Result<()> {
        for (name, fam) in [("q", &self.q), ("v", &self.v), ("p", &self.p)] {
            if let Some(x) = fam {
                if x.len() != self.n {
                    return Err(Error::Dimension(format!("{name} has {} values, expected {}", x.len(), self.n)));
                }
            }
        }
        Ok(())
    }
}

/// Evaluates `e` at `b`. Dual kinds seed every bound variable, in the order
/// q, v, p.
pub fn eval_expr(e: &Expr, b: &VarBinding, kind: ScalarKind) -> Result<ScalarValue> {
    b.check()?;
    let flat = b.flat();
    Ok(match kind {
        ScalarKind::Real => ScalarValue::Real(e.eval(&b.split(&flat))?),
        ScalarKind::Dual1 => {
            let seeded = scalars::seed1(&flat);
            ScalarValue::Dual1(e.eval(&b.split(&seeded))?)
        }
        ScalarKind::Dual2 => {
            let seeded = scalars::seed2(&flat);
            ScalarValue::Dual2(e.eval(&b.split(&seeded))?)
        }
    })
}

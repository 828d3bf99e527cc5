use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::exprlang::{parse, Expr, Family, Vars};
use crate::geometry::LagrangianSystem;
use crate::scalars::{seed1, Dual1, Scalar};

/// Value and Jacobian (`∂X^i/∂q^j`) of a vector field on Q.
#[derive(Clone, Debug, PartialEq)]
pub struct SectionJet {
    pub value: Vec<f64>,
    pub jacobian: DMatrix<f64>,
}

/// A vector field `X: Q → TQ`, the unknown of the Hamilton–Jacobi problem.
pub trait Section: Sync {
    fn dof(&self) -> usize;

    fn jet(&self, q: &[f64]) -> Result<SectionJet>;

    fn value(&self, q: &[f64]) -> Result<Vec<f64>> {
        Ok(self.jet(q)?.value)
    }
}

/// A section given by one expression in `q` per component, optionally
/// restricted to a box.
#[derive(Clone, Debug, PartialEq)]
pub struct SectionX {
    components: Vec<Expr>,
    domain: Option<Vec<(f64, f64)>>,
}

pub(crate) fn check_q_only(what: &str, exprs: &[Expr]) -> Result<()> {
    for e in exprs {
        if let Some(f) = e.families().into_iter().find(|f| *f != Family::Q) {
            return Err(Error::InvalidSystem(format!("{what} may only depend on q, found {}", f.letter())));
        }
    }
    Ok(())
}

impl SectionX {
    pub fn new(components: Vec<Expr>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Dimension("a section needs at least one component".into()));
        }
        check_q_only("a section", &components)?;
        if let Some(v) = components.iter().flat_map(|c| c.variables()).find(|v| v.index >= components.len()) {
            return Err(Error::Dimension(format!("{v} exceeds the section dimension {}", components.len())));
        }
        Ok(Self { components, domain: None })
    }

    pub fn parse(texts: &[&str], dof: usize) -> Result<Self> {
        if texts.len() != dof {
            return Err(Error::Dimension(format!("expected {dof} section components, got {}", texts.len())));
        }
        Self::new(texts.iter().map(|t| parse(t, dof)).collect::<Result<_>>()?)
    }

    /// Restricts evaluation to the box `∏ [lo_i, hi_i]`.
    pub fn with_domain(mut self, domain: Vec<(f64, f64)>) -> Result<Self> {
        if domain.len() != self.components.len() {
            return Err(Error::Dimension("domain box has the wrong dimension".into()));
        }
        self.domain = Some(domain);
        Ok(self)
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    fn check_domain(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.components.len() {
            return Err(Error::Dimension(format!("q has {} entries, section has {}", q.len(), self.components.len())));
        }
        if let Some(dom) = &self.domain {
            if let Some((i, _)) = q.iter().zip(dom).enumerate().find(|(_, (x, (lo, hi)))| *x < lo || *x > hi) {
                return Err(Error::Domain { op: "section domain", arg: q[i] });
            }
        }
        Ok(())
    }
}

impl Section for SectionX {
    fn dof(&self) -> usize {
        self.components.len()
    }

    fn jet(&self, q: &[f64]) -> Result<SectionJet> {
        self.check_domain(q)?;
        let n = q.len();
        let seeded = seed1(q);
        let vars = Vars::q(&seeded);
        let mut value = Vec::with_capacity(n);
        let mut jacobian = DMatrix::zeros(n, n);
        for (i, c) in self.components.iter().enumerate() {
            let d: Dual1 = c.eval(&vars)?;
            for j in 0..n {
                jacobian[(i, j)] = d.partial(j);
            }
            value.push(d.value);
        }
        Ok(SectionJet { value, jacobian })
    }

    fn value(&self, q: &[f64]) -> Result<Vec<f64>> {
        self.check_domain(q)?;
        self.components.iter().map(|c| c.eval_real(&Vars::q(q))).collect()
    }
}

/// Parses the components of a 1-form `α_i(q) dq^i`.
pub fn parse_alpha(texts: &[&str], dof: usize) -> Result<Vec<Expr>> {
    if texts.len() != dof {
        return Err(Error::Dimension(format!("expected {dof} 1-form components, got {}", texts.len())));
    }
    let exprs = texts.iter().map(|t| parse(t, dof)).collect::<Result<Vec<_>>>()?;
    check_q_only("a 1-form", &exprs)?;
    Ok(exprs)
}

/// A 1-form on Q: either induced from a section as `FL∘X`, or given directly.
#[derive(Clone, Copy)]
pub enum OneFormAlpha<'a> {
    Induced { sys: &'a LagrangianSystem, section: &'a dyn Section },
    Direct(&'a [Expr]),
}

/// Values and Jacobian (`∂α_i/∂q^j`) of a 1-form.
#[derive(Clone, Debug, PartialEq)]
pub struct AlphaJet {
    pub value: Vec<f64>,
    pub jacobian: DMatrix<f64>,
}

/// Quantities of the induced form computed by nested differentiation of
/// `q ↦ L(q, X(q))`: α, its Jacobian, and the gradient of `E_L∘X`.
#[derive(Clone, Debug)]
pub(crate) struct InducedJet {
    pub alpha: AlphaJet,
    pub energy_grad: Vec<f64>,
}

pub(crate) fn induced_jet(sys: &LagrangianSystem, section: &dyn Section, q: &[f64]) -> Result<InducedJet> {
    let n = sys.dof();
    let x = section.jet(q)?;
    // inner duals track q; outer duals track v at v = X(q)
    let inner_q = seed1(q);
    let inner_x: Vec<Dual1> = (0..n)
        .map(|i| Dual1 { value: x.value[i], partials: x.jacobian.row(i).iter().copied().collect() })
        .collect();
    let outer_q: Vec<Dual1<Dual1>> = inner_q.into_iter().map(Dual1::constant).collect();
    let outer_v: Vec<Dual1<Dual1>> = inner_x
        .iter()
        .enumerate()
        .map(|(i, xi)| Dual1 {
            value: xi.clone(),
            partials: (0..n).map(|k| Dual1::from_f64(if k == i { 1.0 } else { 0.0 })).collect(),
        })
        .collect();
    let l = sys.lagrangian().eval(&Vars::qv(&outer_q, &outer_v))?;
    let alpha: Vec<Dual1> = (0..n).map(|i| l.partial(i)).collect();
    let mut energy = -l.value.clone();
    for i in 0..n {
        energy = inner_x[i].clone() * alpha[i].clone() + energy;
    }
    Ok(InducedJet {
        alpha: AlphaJet {
            value: alpha.iter().map(|a| a.value).collect(),
            jacobian: DMatrix::from_fn(n, n, |i, j| alpha[i].partial(j)),
        },
        energy_grad: (0..n).map(|j| energy.partial(j)).collect(),
    })
}

pub(crate) fn direct_jet(components: &[Expr], q: &[f64]) -> Result<AlphaJet> {
    let n = q.len();
    let seeded = seed1(q);
    let vals: Vec<Dual1> = components.iter().map(|c| c.eval(&Vars::q(&seeded))).collect::<Result<_>>()?;
    Ok(AlphaJet {
        value: vals.iter().map(|a| a.value).collect(),
        jacobian: DMatrix::from_fn(n, n, |i, j| vals[i].partial(j)),
    })
}

impl OneFormAlpha<'_> {
    pub fn jet(&self, q: &[f64]) -> Result<AlphaJet> {
        match self {
            OneFormAlpha::Induced { sys, section } => Ok(induced_jet(sys, *section, q)?.alpha),
            OneFormAlpha::Direct(components) => direct_jet(components, q),
        }
    }

    pub fn value(&self, q: &[f64]) -> Result<Vec<f64>> {
        match self {
            OneFormAlpha::Induced { sys, section } => crate::geometry::pullback_theta(sys, *section, q),
            OneFormAlpha::Direct(components) => components.iter().map(|c| c.eval_real(&Vars::q(q))).collect(),
        }
    }
}

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },

    #[error("variable `{name}` at byte {offset} is outside 1..={dof}")]
    IndexOutOfRange { name: String, offset: usize, dof: usize },

    #[error("unbound variable `{0}`")]
    UnboundVariable(String),

    #[error("domain error in {op} (argument {arg})")]
    Domain { op: &'static str, arg: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("empty grid")]
    EmptyGrid,

    #[error("velocity Hessian is singular{} (condition estimate {condition:e})", fmt_time(.time))]
    SingularHessian { time: Option<f64>, condition: f64 },

    #[error("Newton iteration failed at q = {q} (turning point)")]
    TurningPoint { q: f64 },

    #[error("energy {energy} is below the fiber minimum {minimum} at q = {q}")]
    BelowFiberMinimum { q: f64, energy: f64, minimum: f64 },

    #[error("branch jump at q = {q}: momentum step {step} exceeds {limit}")]
    BranchJump { q: f64, step: f64, limit: f64 },

    #[error("system has no Hamiltonian")]
    MissingHamiltonian,

    #[error("flow left the domain of X at t = {time}")]
    DomainExit { time: f64 },

    #[error("trajectory has {0} samples, at least 3 are needed")]
    TrajectoryTooShort(usize),

    #[error("1-form is not closed: C[{i}][{j}] = {value:e} at q = {point:?}")]
    NotClosed { i: usize, j: usize, value: f64, point: Vec<f64> },

    #[error("Hamiltonian is not FL-projectable: |H(FL(q,v)) - E_L(q,v)| = {residual:e} at {point:?}")]
    NotProjectable { residual: f64, point: Vec<f64> },

    #[error("velocity Hessian rank varies over the grid ({min}..={max})")]
    VaryingRank { min: usize, max: usize },

    #[error("unsupported structure: {0}")]
    UnsupportedStructure(String),

    #[error("unknown builtin system `{0}`")]
    UnknownSystem(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("at q = {point:?}: {source}")]
    AtPoint { point: Vec<f64>, source: Box<Error> },
}

fn fmt_time(time: &Option<f64>) -> String {
    match time {
        Some(t) => format!(" at t = {t}"),
        None => String::new(),
    }
}

impl Error {
    /// Failures of the numerical machinery, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Domain { .. }
            | Error::SingularHessian { .. }
            | Error::TurningPoint { .. }
            | Error::BelowFiberMinimum { .. }
            | Error::BranchJump { .. }
            | Error::DomainExit { .. }
            | Error::VaryingRank { .. } => true,
            Error::AtPoint { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    pub(crate) fn at(self, point: &[f64]) -> Error {
        match self {
            e @ Error::AtPoint { .. } => e,
            e => Error::AtPoint { point: point.to_vec(), source: Box::new(e) },
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("ambiguous normal at corner node ({i}, {j})")]
    AmbiguousNormal { i: usize, j: usize },

    #[error("node ({i}, {j}) is not on the physical boundary")]
    NotBoundary { i: usize, j: usize },

    #[error("point (r = {r}, z = {z}) lies outside the domain")]
    OutsideDomain { r: f64, z: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("velocity truncation tail {estimate:.3e} exceeds tolerance {tolerance:.3e}")]
    QuadratureTail { estimate: f64, tolerance: f64 },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("possible exceptional gamma or fold: Jacobian condition estimate {condition:.3e}")]
    NearSingular { condition: f64 },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

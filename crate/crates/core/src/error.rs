use thiserror::Error;

/// Errors produced by every module of the crate.
///
/// Variants are grouped by [`ErrorClass`] so front ends can map them onto
/// exit codes without matching on individual variants.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("class error: {0}")]
    Class(String),
    #[error("primitivity error: {0}")]
    Primitivity(String),
    #[error("level error: |lambda(u) - 1| = {residual:e} exceeds {tolerance:e}")]
    Level { residual: f64, tolerance: f64 },
    #[error("assumption error: {0}")]
    Assumption(String),
    #[error("precondition error: {0}")]
    Precondition(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("recurrence error: {0}")]
    Recurrence(String),
    #[error("contradiction: {0}")]
    Contradiction(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("resource error: {what} needs {required} cells, budget is {budget}")]
    Resource {
        what: String,
        required: u128,
        budget: u128,
    },
    #[error("tolerance error: {what}: gap {gap:e} above tolerance {tolerance:e}")]
    Tolerance {
        what: String,
        gap: f64,
        tolerance: f64,
    },
    #[error("statistical error: {0}")]
    Statistical(String),
    #[error("inconclusive: {0}")]
    Inconclusive(String),
}

/// Coarse grouping of [`Error`] variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad input, violated precondition or mathematical assumption.
    Domain,
    /// Budget, tolerance or convergence failure.
    Resource,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Resource { .. }
            | Error::Tolerance { .. }
            | Error::Numerical(_)
            | Error::Statistical(_)
            | Error::Inconclusive(_) => ErrorClass::Resource,
            _ => ErrorClass::Domain,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

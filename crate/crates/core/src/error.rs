use num::BigRational;
use thiserror::Error;

use crate::rational::fmt_point;

/// Errors raised by factory construction, evaluation and execution.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum FactoryError {
    /// Bad arguments: out-of-range indices, biases outside their interval,
    /// malformed weights.
    #[error("usage error: {0}")]
    Usage(String),

    /// A configured work limit (lattice size, enumeration size, level cap)
    /// would be exceeded. Never replaced by an approximation.
    #[error("resource limit: {0}")]
    Resource(String),

    /// A point outside the domain of an evaluator.
    #[error("domain error: {0}")]
    Domain(String),

    /// A recursive level function left `[0, 1]`: the level schedule is too
    /// coarse for this target function.
    #[error("level {level} value {value} outside [0,1] at {point}", point = fmt_point(.point))]
    CertificateViolation {
        level: usize,
        point: Vec<BigRational>,
        value: BigRational,
    },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl FactoryError {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self::Usage(msg.into())
    }

    pub fn resource(msg: impl Into<String>) -> Self {
        Self::Resource(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Self::Domain(msg.into())
    }
}

pub type Result<T, E = FactoryError> = std::result::Result<T, E>;

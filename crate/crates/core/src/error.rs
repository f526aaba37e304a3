use std::fmt;

use thiserror::Error;

/// Measure-zero points where a map is undefined or trivially fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Singularity {
    /// Boole's transformation at `x = 0`.
    Pole,
    /// The fixed point at the origin of `T_β` / `F_α`, or the point at
    /// infinity reached by the Farey map from `0`.
    FixedPoint,
}

impl fmt::Display for Singularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Singularity::Pole => f.write_str("pole"),
            Singularity::FixedPoint => f.write_str("fixed point"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what}: argument {value} outside {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("orbit reached a {kind} at step {step}")]
    Singular { kind: Singularity, step: u64 },

    #[error("invalid parameter: {0}")]
    Invalid(String),

    #[error("contract violation: {0}")]
    Contract(String),
}

impl Error {
    pub(crate) fn domain(what: &'static str, value: f64, domain: &'static str) -> Self {
        Error::Domain {
            what,
            value,
            domain,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Evaluation time outside the protocol window.
    #[error("time {t} outside protocol window [{t_min}, {t_max}]")]
    OutOfWindow { t: f64, t_min: f64, t_max: f64 },

    /// Expression text failed to parse.
    #[error("syntax error at byte {offset}: expected {expected}")]
    Syntax { offset: usize, expected: String },

    /// Identifier not among `t`, declared parameters, or reserved constants.
    #[error("unknown symbol `{name}` at byte {offset}")]
    UnknownSymbol { name: String, offset: usize },

    /// Arithmetic left the real domain (sqrt of a negative, division by
    /// zero, non-integer power of a negative base).
    #[error("domain error in `{context}`: {reason}")]
    Domain { context: String, reason: String },

    /// Curve speed dropped below the regularity floor; geometric
    /// quantities are undefined there (adiabatic level crossing).
    #[error("curve not regular at t = {t}: speed {rho:.3e} below floor {floor:.3e}")]
    Regularity { t: f64, rho: f64, floor: f64 },

    /// Adaptive step size underflowed before meeting the local tolerance.
    #[error("integration tolerance not met: step size underflow at t = {t}")]
    ToleranceNotMet { t: f64 },

    /// Catalog lookup failed.
    #[error("unknown protocol `{0}`")]
    NotFound(String),

    /// Malformed protocol spec, profile file, or run configuration.
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn domain(context: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Domain {
            context: context.into(),
            reason: reason.into(),
        }
    }
}

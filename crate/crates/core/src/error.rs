//! Error type shared by all fallible operations in the crate.

use alloc::string::String;
use core::fmt;

/// Why an operation could not produce a result.
///
/// Small-gain or sector conditions that fail to hold are *not* errors; those
/// come back as ordinary values ([`crate::interconnect::Outcome::Failed`]).
/// `GainError` is reserved for misuse: arguments outside an operation's
/// domain, incompatible shapes or modes, unsatisfiable numeric brackets, and
/// diverging integrations.
#[derive(Debug, Clone, PartialEq)]
pub enum GainError {
    /// An argument violated the operation's domain (negative scalar where a
    /// nonnegative one is required, non-positive tuning constant, ...).
    Domain(String),
    /// A bracketing search exhausted its growth cap without enclosing the
    /// target value.
    Range(String),
    /// A stated precondition (typically a K-infinity certification) failed.
    Precondition(String),
    /// Vector length did not match the expected dimension.
    Dimension { expected: usize, got: usize },
    /// Certificate kind and model input arity do not fit together.
    Incompatible(String),
    /// The integrator aborted: the state norm crossed the blow-up guard or
    /// became non-finite at time `t`.
    Diverged { t: f64 },
}

impl fmt::Display for GainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GainError::Domain(msg) => write!(f, "domain error: {msg}"),
            GainError::Range(msg) => write!(f, "range error: {msg}"),
            GainError::Precondition(msg) => write!(f, "precondition failed: {msg}"),
            GainError::Dimension { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            GainError::Incompatible(msg) => write!(f, "incompatible: {msg}"),
            GainError::Diverged { t } => write!(f, "trajectory diverged at t = {t}"),
        }
    }
}

impl core::error::Error for GainError {}

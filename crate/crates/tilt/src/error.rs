//! Error types shared across the engine.

use crate::time::Time;

/// Unified error type for query construction, planning, and execution.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Arithmetic failure during expression evaluation (integer overflow,
    /// invalid operand combination for an operator, ...).
    #[error("arithmetic error: {0}")]
    Arith(String),

    /// Operand types not accepted by an operator.
    #[error("type error: {0}")]
    Type(String),

    /// A read landed at or before a buffer's base: the buffer holds no
    /// information there. Distinct from reads *past* the last snapshot,
    /// which legitimately observe the absent value.
    #[error("read at t={at} is outside coverage of buffer based at {base}")]
    OutOfCoverage { at: Time, base: Time },

    /// A query failed structural validation (unknown names, cycles,
    /// misaligned domains, out-of-range offsets, ...).
    #[error("invalid query: {0}")]
    InvalidQuery(String),

    /// Reference to a definition that does not exist in the query.
    #[error("unknown definition `{0}`")]
    UnknownDef(String),

    /// Reference to a scalar function or reduction that is not registered.
    #[error("unknown function `{0}`")]
    UnknownFunction(String),

    /// Failure while parsing a serialized query or an event file.
    #[error("parse error: {0}")]
    Parse(String),

    /// A worker thread failed while evaluating a partition.
    #[error("worker failed on partition {partition}: {message}")]
    Worker { partition: usize, message: String },

    /// Invalid argument to a public API entry point.
    #[error("invalid argument: {0}")]
    InvalidArg(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

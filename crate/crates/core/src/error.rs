use std::io;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field has {got} values, grid needs {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("operands live on different grids")]
    GridMismatch,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("channel `{name}` of width {width} is under-resolved (needs at least {min_width})")]
    UnderResolved {
        name: &'static str,
        width: f64,
        min_width: f64,
    },

    #[error("CFL condition violated: dt/dx^2 = {ratio} (must be < 0.5)")]
    Cfl { ratio: f64 },

    #[error("solution blew up at t = {t}: |u| = {value}")]
    BlowUp { t: f64, value: f64 },

    #[error("u does not cross 0.5 on the probe line (all values {side} 0.5)")]
    NoCrossing { side: &'static str },

    #[error("relaxation did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("threshold denominator {0} is not positive")]
    DegenerateThreshold(f64),

    #[error("config line {line}, key `{key}`: {message}")]
    Config { line: usize, key: String, message: String },

    #[error("malformed snapshot: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

use thiserror::Error;

use crate::phasor::Frame;

/// Errors produced across model construction, solution and analysis.
#[derive(Debug, Error)]
pub enum Error {
    #[error("frame mismatch: expected {expected}, got {found}")]
    FrameMismatch { expected: Frame, found: Frame },

    #[error("insufficient window: need {needed} samples ending at t, have {available}")]
    InsufficientWindow { needed: usize, available: usize },

    #[error("baseband envelope bandwidth {bandwidth} rad/s is not below the carrier {carrier} rad/s")]
    NotLowPass { bandwidth: f64, carrier: f64 },

    #[error("invalid topology: {0}")]
    Topology(String),

    #[error("network is disconnected: node {0} is unreachable")]
    Disconnected(usize),

    #[error("singular matrix in {0}")]
    Singular(&'static str),

    #[error("power flow did not converge after {iterations} iterations (mismatch {mismatch:.3e})")]
    PowerFlowDiverged { iterations: usize, mismatch: f64 },

    #[error("initialization residual {residual:.3e} at state `{state}` exceeds tolerance")]
    Initialization { residual: f64, state: String },

    #[error("operating point is not an equilibrium (|f(x0,u0)| = {0:.3e})")]
    NotEquilibrium(f64),

    #[error("eigen-decomposition failed: {0}")]
    Eigen(String),

    #[error("prony prediction matrix is rank deficient (rank {rank} < order {order}); try order {rank}")]
    RankDeficient { rank: usize, order: usize },

    #[error("unknown channel `{0}`")]
    UnknownChannel(String),

    #[error("invalid configuration at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

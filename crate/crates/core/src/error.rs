use thiserror::Error;

/// Errors raised anywhere in the simulation and estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("numerical overflow at split step {step}: non-finite samples")]
    NumericalOverflow { step: usize },

    #[error("infeasible shaping target: {0}")]
    Infeasible(String),

    #[error("invalid codeword: {0}")]
    InvalidCodeword(String),

    #[error("no sequence passed the selection threshold (bound is vacuous)")]
    EmptySelection,

    #[error("selection rate {0} outside (0, 1]")]
    InvalidRate(f64),

    #[error("undefined channel gain: transmitted symbols are all zero")]
    UndefinedGain,

    #[error("degenerate auxiliary channel: noise variance {0} is zero")]
    DegenerateChannel(f64),

    #[error("archive format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

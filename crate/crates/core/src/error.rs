use thiserror::Error;

use crate::series::TruncationPolicy;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("truncation policies differ: {left:?} vs {right:?}")]
    PolicyMismatch {
        left: TruncationPolicy,
        right: TruncationPolicy,
    },

    #[error("invalid truncation policy: {0}")]
    InvalidPolicy(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unknown variable: {0}")]
    UnknownVariable(String),

    #[error("degree {degree} exceeds the truncation bound {bound}")]
    DegreeOverflow { degree: usize, bound: usize },

    #[error("series is not uv-diagonal (off-diagonal coefficient of magnitude {magnitude:e})")]
    NotDiagonal { magnitude: f64 },

    #[error("series is not real on real points (imaginary residue {residue:e})")]
    NotReal { residue: f64 },

    #[error("degenerate frequency: |dw/dI| at the origin is {constant:e}")]
    DegenerateFrequency { constant: f64 },

    #[error("series has no invertible constant term (|c0| = {constant:e})")]
    NotInvertible { constant: f64 },

    #[error("polar chart degenerates at rho = {rho:e}")]
    ChartDegenerate { rho: f64 },

    #[error("substitution must raise the eps order (increment has terms of order {order})")]
    NonNilpotentShift { order: u32 },

    #[error("graded fixed point stalled at eps order {order}; the truncation policy is too tight")]
    FixedPointStalled { order: u32 },

    #[error("remainder order did not increase: was {before}, now {after}")]
    RemainderOrder { before: u32, after: u32 },

    #[error(
        "eps = {eps} too large for the implicit transformation (contraction {contraction:.3})"
    )]
    EpsTooLarge { eps: f64, contraction: f64 },

    #[error("implicit midpoint Newton iteration diverged at t = {time} (dt = {dt})")]
    StepSize { time: f64, dt: f64 },

    #[error("invalid flow configuration: {0}")]
    InvalidFlow(String),

    #[error("invalid experiment: {0}")]
    InvalidExperiment(String),

    #[error("problem file: {0}")]
    Problem(String),

    #[error("malformed series document: {0}")]
    SeriesFormat(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures that come from the mathematics rather than from the
    /// input format or from a numeric gate.
    pub fn is_math(&self) -> bool {
        matches!(
            self,
            Error::DegenerateFrequency { .. }
                | Error::NotInvertible { .. }
                | Error::NotDiagonal { .. }
                | Error::FixedPointStalled { .. }
                | Error::RemainderOrder { .. }
                | Error::NonNilpotentShift { .. }
                | Error::ChartDegenerate { .. }
                | Error::NotReal { .. }
                | Error::EpsTooLarge { .. }
                | Error::StepSize { .. }
        )
    }
}

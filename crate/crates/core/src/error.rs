//! Error type shared by all solver modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("non-finite entry at index {index}: {value}")]
    NotFinite { index: usize, value: f64 },

    #[error("empty vector not allowed in {0}")]
    EmptyVector(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("constraint matrix is rank deficient (pivot {pivot:.3e} at row {row}); remove dependent rows")]
    RankDeficient { row: usize, pivot: f64 },

    #[error("point outside the effective domain of h* (value = +inf); project first")]
    OutsideDomain,

    #[error("problem does not carry an Ax=b structure")]
    NotAxb,

    #[error("gap not computable for this problem; supply a comparison pair")]
    GapNotComputable,

    #[error("instance too large: {0}")]
    InstanceTooLarge(String),

    #[error("infeasible instance spec: {0}")]
    InfeasibleInstance(String),
}

pub type Result<T> = std::result::Result<T, Error>;

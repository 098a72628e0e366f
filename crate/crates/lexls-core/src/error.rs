use core::fmt;

#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    DegenerateMatrix,
    SingularTriangular { index: usize },
    NotPositiveDefinite { index: usize },
    NonFiniteEvaluation { level: usize },
    DimensionMismatch { expected: usize, found: usize },
    FullUnderactuation,
    SubsetRankDeficient { stage: usize },
    BasisVerificationFailed { residual: f64 },
    OffsetTooSmall { min_value: f64 },
    IterationBudgetExceeded,
    InvalidSettings(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DegenerateMatrix => write!(f, "matrix has a zero dimension"),
            Error::SingularTriangular { index } => write!(f, "triangular factor singular at diagonal {index}"),
            Error::NotPositiveDefinite { index } => write!(f, "nonpositive pivot at {index}"),
            Error::NonFiniteEvaluation { level } => write!(f, "non-finite evaluation on level {level}"),
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::FullUnderactuation => write!(f, "every degree of freedom is unactuated; no banded basis exists"),
            Error::SubsetRankDeficient { stage } => write!(f, "column subset of stage {stage} is rank deficient"),
            Error::BasisVerificationFailed { residual } => {
                write!(f, "nullspace basis residual {residual:e} above tolerance")
            }
            Error::OffsetTooSmall { min_value } => write!(f, "offset leaves a nonpositive value {min_value}"),
            Error::IterationBudgetExceeded => write!(f, "outer iteration budget exhausted"),
            Error::InvalidSettings(what) => write!(f, "invalid settings: {what}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

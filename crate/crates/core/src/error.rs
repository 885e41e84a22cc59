use thiserror::Error;

/// Broad failure class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad or inconsistent input data.
    Data,
    /// Reading or writing failed.
    Io,
    /// A numerical routine could not produce a result.
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("duplicate tract id `{0}`")]
    DuplicateTract(String),

    #[error("invalid value for `{column}` in tract `{tract}`: {reason}")]
    InvalidValue {
        tract: String,
        column: String,
        reason: String,
    },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("join failed: {0}")]
    Join(String),

    #[error("variable `{0}` has zero variance")]
    ZeroVariance(String),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("weights matrix has no neighbor pairs (all islands)")]
    AllIslands,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("design matrix is rank deficient; collinear columns: {}", .0.join(", "))]
    RankDeficient(Vec<String>),

    #[error("singular system: {0}")]
    Singular(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Io(_) => ErrorClass::Io,
            Error::ZeroVariance(_)
            | Error::AllIslands
            | Error::RankDeficient(_)
            | Error::Singular(_) => ErrorClass::Numerical,
            _ => ErrorClass::Data,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

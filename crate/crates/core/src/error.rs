use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("covariance is not symmetric (max asymmetry {asymmetry:e})")]
    NonSymmetricCovariance { asymmetry: f64 },

    #[error("Cholesky factorization failed after diagonal jitter")]
    DecompositionFailure,

    #[error("quaternion norm is too small to normalize")]
    ZeroQuaternion,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("chain history is empty")]
    EmptyHistory,

    #[error("no jump regions")]
    NoRegions,

    #[error("found only {found} of {requested} demonstrated grasps in {attempts} attempts")]
    DemonstrationFailure {
        found: usize,
        requested: usize,
        attempts: usize,
    },

    #[error("demonstration {index} has zero density on the target object")]
    InvalidDemonstration { index: usize },

    #[error("transfer experiment requires a source model")]
    MissingSourceModel,

    #[error("unknown object `{0}`")]
    UnknownObject(String),

    #[error("unexpected schema tag: expected `{expected}`, found `{found}`")]
    Schema { expected: String, found: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),

    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),
}

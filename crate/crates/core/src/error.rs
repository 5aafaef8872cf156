use std::path::PathBuf;

/// Every failure the library reports.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid optical configuration: {0}")]
    InvalidConfig(String),
    #[error("field is in the {found:?} domain, expected {expected:?}")]
    DomainMismatch {
        expected: crate::field::Domain,
        found: crate::field::Domain,
    },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("gaussian {index} is out of order: depth {depth} follows {previous}")]
    Unsorted {
        index: usize,
        depth: f64,
        previous: f64,
    },
    #[error("world-to-view matrix is not rigid: {0}")]
    NonRigid(String),
    #[error("gaussian lies behind the camera (view depth {0})")]
    BehindCamera(f64),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("scene is empty after culling")]
    EmptyScene,
    #[error("reference wave shift of {shift} samples exceeds half the grid bandwidth ({limit})")]
    ReferenceShift { shift: i64, limit: i64 },
    #[error("field is identically zero")]
    ZeroField,
    #[error("invalid option: {0}")]
    InvalidOption(String),
    #[error("scene configuration: {0}")]
    SceneConfig(String),
    #[error("unsupported PLY format: {0}")]
    UnsupportedFormat(String),
    #[error("missing PLY property `{0}`")]
    MissingProperty(String),
    #[error("malformed file {path}: {reason}")]
    Malformed { path: PathBuf, reason: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Malformed {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("malformed curve: {0}")]
    MalformedCurve(String),

    #[error("no intersection of the exponential and power-law fits in [{lo}, {hi}]")]
    NoIntersection { lo: f64, hi: f64 },

    #[error("non-physical fit: lower-class temperature {t} exceeds mean income {mean}")]
    NonPhysical { t: f64, mean: f64 },

    #[error("insufficient data: {found} points in fit window, need at least {needed}")]
    InsufficientData { found: usize, needed: usize },

    #[error("value out of exact range: {0}")]
    Range(String),

    #[error("singular diffusion: B(r) = {value} at r = {r}")]
    SingularDiffusion { r: f64, value: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("format error in {source_name} at line {line}: {message}")]
    Format {
        source_name: String,
        line: u64,
        message: String,
    },

    #[error("no rows joined between energy and population data ({dropped} rows dropped)")]
    EmptyJoin { dropped: usize },

    #[error("degenerate curve: {0}")]
    DegenerateCurve(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

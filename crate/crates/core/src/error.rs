use std::path::PathBuf;

/// Everything that can go wrong inside the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("under-resolved {what}: {detail}")]
    Resolution { what: &'static str, detail: String },
    #[error("periodic aliasing too large: exp(-L^2/4t) = {bound:e} exceeds {tol:e} at t = {t}")]
    Aliasing { t: f64, bound: f64, tol: f64 },
    #[error("boundary mass fraction {fraction:e} exceeds tolerance {tol:e}")]
    BoundaryDecay { fraction: f64, tol: f64 },
    #[error("ladder too shallow: need level {need}, have K = {have}")]
    LadderDepth { need: usize, have: usize },
    #[error(
        "heated weight bound violated at {point:?}: value {value:e} outside [{lower:e}, {upper:e}]"
    )]
    BoundViolation {
        point: Vec<f64>,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("tail certificate failed: tail bound {tail:e} against value {value:e}")]
    Tail { tail: f64, value: f64 },
    #[error("finite-difference step too large: Richardson disagreement {0:e}")]
    Step(f64),
    #[error("rank drop in subspace basis: smallest singular value {0:e}")]
    RankDrop(f64),
    #[error("{path}:{line}: {msg}")]
    Config {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed file {path}: {msg}")]
    Format { path: PathBuf, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Invalid(msg.into()))
}

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

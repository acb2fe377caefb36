use std::path::PathBuf;

use crate::spectral::WaveVector;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("mode {0} is the zero wave vector; fields must have zero spatial mean")]
    ZeroMode(WaveVector),

    #[error("coefficients at {0} and its negative are not complex conjugates")]
    NotHermitian(WaveVector),

    #[error("mode {mode} violates incompressibility: |k·û(k)| = {residual:e}")]
    NotDivergenceFree { mode: WaveVector, residual: f64 },

    #[error("mode {mode} lies outside the cutoff |k| <= {cutoff}")]
    OutsideCutoff { mode: WaveVector, cutoff: u32 },

    #[error("non-finite coefficient at mode {0}")]
    NonFinite(WaveVector),

    #[error("grid of size {grid} is too small: {required} points per direction are needed ({reason})")]
    GridTooSmall {
        grid: usize,
        required: usize,
        reason: &'static str,
    },

    #[error("incompatible cutoffs: {0}")]
    CutoffMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error("unknown configuration key `{key}` ({origin})")]
    UnknownKey { key: String, origin: String },

    #[error("type mismatch for `{key}`: expected {expected}, got {value:?}")]
    TypeMismatch {
        key: String,
        expected: &'static str,
        value: String,
    },

    #[error("malformed configuration line {line}: `{text}`")]
    Syntax { line: usize, text: String },

    #[error("numerical blow-up at t = {time}: {detail}")]
    Blowup { time: f64, detail: String },

    #[error("time step too large at t = {time}: {detail}")]
    StepTooLarge { time: f64, detail: String },

    #[error("snapshot format error: {0}")]
    Snapshot(String),

    #[error("I/O error on {path:?}: {source}")]
    Io {
        path: Option<PathBuf>,
        #[source]
        source: std::io::Error,
    },
}

impl From<std::io::Error> for Error {
    fn from(source: std::io::Error) -> Self {
        Error::Io { path: None, source }
    }
}

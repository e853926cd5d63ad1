use std::path::PathBuf;
use thiserror::Error;

/// Errors surfaced by simulation, pulse planning, triggering, identification
/// and the scenario harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite value while {context}")]
    NonFinite { context: String },

    /// Neither +u_max nor -u_max admits a pulse that drives the state to zero.
    #[error("insufficient actuator authority: no admissible pulse from x0 = {x0}")]
    InsufficientAuthority { x0: f64 },

    #[error("learning trigger needs a full window: {got} of {need} samples")]
    WindowNotFull { got: usize, need: usize },

    #[error("rank deficient regressors: least squares problem is not identifiable")]
    RankDeficient,

    #[error("sensor bias unidentifiable: |1 - a_d| = {denom:e} too close to zero")]
    BiasUnidentifiable { denom: f64 },

    #[error("non-invertible discretization: a_d = {a_d} is not positive")]
    NonInvertibleDiscretization { a_d: f64 },

    #[error("scenario parse error at line {line}: {reason}")]
    ScenarioParse { line: usize, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

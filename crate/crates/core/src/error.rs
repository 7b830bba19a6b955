use thiserror::Error;

use crate::model::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("network specification has {} violation(s): {}", .0.len(), join(.0))]
    Validation(Vec<Violation>),

    #[error("malformed compressed row storage: {0}")]
    Structure(String),

    #[error("unknown population `{0}`")]
    UnknownPopulation(String),

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("missing gScale entry for synapse group `{0}`")]
    MissingGScale(String),

    #[error("no sweep row at reference (nConn = {n_conn}, gScale = {g_scale})")]
    MissingReference { n_conn: usize, g_scale: f64 },

    #[error("reference row (nConn = {n_conn}, gScale = {g_scale}) has {sum_nans} non-finite neurons")]
    ContaminatedReference { n_conn: usize, g_scale: f64, sum_nans: usize },

    #[error("fit needs at least {needed} points with distinct x, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("duplicate x value {0} in fit input")]
    DuplicateX(f64),

    #[error("model has a pole at nConn = {0} (k2 + nConn = 0)")]
    Pole(f64),

    #[error("percentage error undefined for zero target at x = {0}")]
    ZeroTarget(f64),

    #[error("kernel uses {threads} threads per block, device allows {max}")]
    ThreadsExceedDevice { threads: u32, max: u32 },

    #[error("unknown device preset `{0}`")]
    UnknownPreset(String),

    #[error("invalid device specification: {0}")]
    InvalidDevice(String),

    #[error("no block size fits a single block on the device")]
    NoFeasibleBlockSize,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn join(violations: &[Violation]) -> String {
    violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

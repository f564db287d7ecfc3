use std::io;

use thiserror::Error;

/// Errors produced anywhere in the simulation / learning pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid simulation condition: {0}")]
    InvalidCondition(String),

    #[error("depth {depth_m} m maps to bin {bin:.3}, beyond t_bin_max {t_bin_max}")]
    OutOfRange { depth_m: f64, bin: f64, t_bin_max: u32 },

    #[error("empty condition list")]
    EmptyConditions,

    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("impossible observation: {count} photon(s) at pixel ({x}, {y}) bin {bin} with zero rate")]
    ImpossibleObservation {
        x: usize,
        y: usize,
        bin: u32,
        count: u32,
    },

    #[error("no photons detected in any pixel")]
    NoPhotons,

    #[error("degenerate dynamic range")]
    DegenerateRange,

    #[error("unknown class: {0}")]
    UnknownClass(String),

    #[error("label {label} out of range for {class_count} classes")]
    LabelOutOfRange { label: usize, class_count: usize },

    #[error("unknown group id: {0}")]
    UnknownGroup(String),

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("invalid selection request: {0}")]
    InvalidRequest(String),

    #[error("labeling budget infeasible: {needed} groups needed, {available} available")]
    BudgetInfeasible { needed: usize, available: usize },

    #[error("oracle: {0}")]
    Oracle(String),

    #[error("bad file format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

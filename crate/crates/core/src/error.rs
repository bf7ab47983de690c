use std::io;

use thiserror::Error;

/// Errors produced by density estimation, constrained sampling and the
/// surrounding IO helpers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("too few points: need at least {needed}, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("bandwidth matrix is not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("inconsistent constraint: residual {residual:e} outside the column space of A")]
    InconsistentConstraint { residual: f64 },

    #[error("over-constrained: {rank} independent constraints on {dim} dimensions")]
    OverConstrained { rank: usize, dim: usize },

    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    #[error(
        "unsupported dimension: conditional density line needs exactly one free dimension, got {0}"
    )]
    UnsupportedDimension(usize),

    #[error("acceptance too low: {accepted} of {requested} samples accepted after {tries} tries")]
    AcceptanceTooLow {
        accepted: usize,
        requested: usize,
        tries: usize,
    },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("series too short: spans {span} s, need {needed} s")]
    TooShort { span: f64, needed: f64 },

    #[error("refusing to write non-finite value at row {row}, column {col}")]
    RefusedNonFinite { row: usize, col: usize },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

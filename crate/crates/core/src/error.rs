use thiserror::Error;

use crate::geometry::ConfigViolation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    #[error("invalid quadrature rule: {0}")]
    InvalidRule(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("kernel evaluated at |x| = {0:e}, below the singular floor")]
    SingularEvaluation(f64),

    #[error("target ({x}, {y}) lies within the guard band of a source curve (distance {distance:e} < {band:e})")]
    GuardBand {
        x: f64,
        y: f64,
        distance: f64,
        band: f64,
    },

    #[error("target ({x}, {y}) lies inside a hole")]
    InsideHole { x: f64, y: f64 },

    #[error("target ({x}, {y}) lies outside the outer domain")]
    OutsideDomain { x: f64, y: f64 },

    #[error("geometry violation: {0}")]
    Geometry(ConfigViolation),

    #[error("mapped curves intersect or touch")]
    CurvesIntersect,

    #[error("singular linear system (condition estimate {0:e})")]
    SingularSystem(f64),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

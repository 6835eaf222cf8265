use thiserror::Error;

use crate::geom::Vec3;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error("profile `{profile}` is not normalizable: {reason}")]
    NotNormalizable { profile: String, reason: String },

    #[error("near-singular evaluation: index {index} at distance {distance:e}")]
    NearSingularity { index: usize, distance: f64 },

    #[error("singular kernel evaluated at the origin")]
    SingularKernel,

    #[error("unknown {kind} `{name}` (known: {known})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        known: String,
    },

    #[error("flow records do not share a seed set")]
    MismatchedSeeds,

    #[error("empty grid")]
    EmptyGrid,

    #[error("degenerate grid: {0}")]
    DegenerateGrid(String),

    #[error("scale {scale} exceeds grid extent {extent}")]
    ScaleExceedsGrid { scale: f64, extent: f64 },

    #[error("grid node {node} collides with atom {atom} (distance {distance:e})")]
    NodeAtomCollision {
        node: usize,
        atom: usize,
        distance: f64,
    },

    #[error("integration aborted at t = {}: {reason}", snapshot.time)]
    Aborted {
        reason: String,
        snapshot: Box<StateSnapshot>,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(field: &str, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}

/// Full integrator state captured when a run aborts.
#[derive(Debug, Clone)]
pub struct StateSnapshot {
    pub time: f64,
    pub dt: f64,
    pub positions: Vec<Vec3>,
    pub velocities: Vec<Vec3>,
    pub charge: Option<(Vec3, Vec3)>,
    /// Seed closest to the charge and its distance.
    pub closest: Option<(u64, f64)>,
}

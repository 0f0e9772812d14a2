use thiserror::Error;

use crate::model::MonthId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("value {0} is outside [0, 1]")]
    OutOfRange(f64),
    #[error("value is not finite")]
    NotFinite,
    #[error("invalid month {year}-{month:02}")]
    InvalidMonth { year: i32, month: u32 },
    #[error("invalid thresholds: need 0 < dem_max ({dem_max}) < rep_min ({rep_min}) < 1")]
    InvalidThresholds { dem_max: f64, rep_min: f64 },
    #[error("empty post set")]
    EmptyPostSet,
    #[error("posts belong to different (user, month) keys")]
    MixedKeys,
    #[error("unknown user {0:?}")]
    UnknownUser(String),
    #[error("duplicate opinion entry for user {user:?} in {month}")]
    DuplicateEntry { user: String, month: MonthId },
    #[error("self-interaction of user {0:?}")]
    SelfInteraction(String),
    #[error("interaction count must be positive")]
    NonPositiveCount,
    #[error("month mismatch: expected {expected}, found {found}")]
    MonthMismatch { expected: MonthId, found: MonthId },
    #[error("graph has no edges")]
    NoEdges,
    #[error("assortativity undefined: all edge endpoints fall in a single category")]
    DegenerateAssortativity,
    #[error("empty sequence")]
    EmptySequence,
    #[error("no users in month {0}")]
    EmptyMonth(MonthId),
    #[error("no pair of contiguous months in the table")]
    InsufficientMonths,
    #[error("user {0:?} has no neighbors")]
    NoNeighbors(String),
    #[error("user {0:?} is not a node of the snapshot")]
    UnknownNode(String),
    #[error("invalid simulator configuration: {0}")]
    InvalidConfig(String),
    #[error("empty vector")]
    EmptyVector,
    #[error("window of {window} steps does not fit a trajectory of {steps} recorded steps")]
    WindowLargerThanTrajectory { window: u64, steps: u64 },
    #[error("window of {window} steps is not a multiple of the snapshot interval {snapshot_every}")]
    WindowMisaligned { window: u64, snapshot_every: u64 },
    #[error("empty sample")]
    EmptySample,
    #[error("too few observations: need at least {needed}, got {got}")]
    TooFewObservations { needed: usize, got: usize },
    #[error("sample is constant")]
    ConstantSample,
    #[error("bad histogram range or bin count")]
    BadRange,
    #[error(transparent)]
    Parse(#[from] crate::io::ParseError),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("cannot open {path}: {source}")]
    Open { path: std::path::PathBuf, source: std::io::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no calibration frames")]
    NoCalibrationFrames,
    #[error("calibration frames mix sensors {0} and {1}")]
    MixedSensors(u32, u32),
    #[error("voxel cell must be positive, got {0}")]
    InvalidCell(f64),
    #[error("empty segment")]
    EmptySegment,
    #[error("degenerate norm")]
    DegenerateNorm,
    #[error("insufficient classes: need at least 2 persons with 2 segments each")]
    InsufficientClasses,
    #[error("non-causal pair: {0} does not precede {1}")]
    NonCausalPair(u64, u64),
    #[error("non-causal pair: travel time {0} must be positive")]
    NonPositiveTravelTime(f64),
    #[error("route point ({0}, {1}) lies outside the floor polygon")]
    RouteOutsideFloor(f64, f64),
    #[error("unsupported subject count {0}")]
    UnsupportedSubjects(usize),
    #[error("unknown sub-trajectory id {0}")]
    UnknownId(u64),
    #[error("missing model: {0}")]
    MissingModel(String),
    #[error("unknown experiment {0}")]
    UnknownExperiment(String),
    #[error("model file: {0}")]
    ModelFormat(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("config: {0}")]
    Config(#[from] toml::de::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

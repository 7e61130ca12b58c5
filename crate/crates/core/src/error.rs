use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("kernel is singular at p = 0")]
    DegenerateMomentum,
    #[error("Z = {z} is supercritical (Z*alpha >= 1)")]
    SupercriticalZ { z: f64 },
    #[error("momentum kernel is singular at the zero mode and the zero-mode policy forbids a limit")]
    KernelSingularAtZeroMode,
    #[error("field is not normalized (norm = {norm})")]
    NotNormalized { norm: f64 },
    #[error("box too small: captured norm {captured}")]
    BoxTooSmall { captured: f64 },
    #[error("norm drift {drift:e} after {steps} steps, time step too large")]
    UnstableStep { drift: f64, steps: usize },
    #[error("laser field is on at t = {t} (w = {w})")]
    FieldOn { t: f64, w: f64 },
    #[error("total rotation angle {angle:e} rad is below resolution")]
    FitDegenerate { angle: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("malformed field dump: {0}")]
    MalformedDump(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

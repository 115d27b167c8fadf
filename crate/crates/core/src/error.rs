use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("unknown vaccine '{0}'")]
    UnknownVaccine(String),
    #[error("unknown arc {0} -> {1}")]
    UnknownArc(String, String),
    #[error("tier not removable: {0:?}")]
    TierNotRemovable(crate::model::Tier),
    #[error("empty schedule")]
    EmptySchedule,
    #[error("sample size must be positive")]
    EmptySample,
    #[error("index mismatch: {0}")]
    IndexMismatch(String),
    #[error("unpaired arms: {0}")]
    Unpaired(String),
    #[error("solver failed with status {0:?}")]
    SolverFailed(coldchain_lp::LpStatus),
    #[error(transparent)]
    Lp(#[from] coldchain_lp::LpError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;

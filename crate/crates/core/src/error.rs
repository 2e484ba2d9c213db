use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("integration failed at t = {t}: {reason}")]
    IntegrationFailure {
        t: f64,
        reason: String,
        partial: Option<Box<crate::dynamics::TrajectoryRecord>>,
    },
    #[error(transparent)]
    Bessel(#[from] crate::control::BesselError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

use thiserror::Error;

/// Errors raised by the library. Each variant maps onto one CLI exit class.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("construction failure: {0}")]
    Construction(String),
    #[error("invalid flow box: {0}")]
    InvalidBox(String),
    #[error("step size underflow at t = {time} near ({x:.6}, {y:.6})")]
    StepUnderflow { time: f64, x: f64, y: f64 },
    #[error("no return to the transversal within flow time {0}")]
    NoReturn(f64),
    #[error("seed is labelled {0}, expected LD or ExceptionalSuspect")]
    WrongLabel(String),
    #[error("decomposition failed for {} seeds: {}", .0.len(), .0.join("; "))]
    Decomposition(Vec<String>),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

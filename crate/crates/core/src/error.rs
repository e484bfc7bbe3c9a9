use nlgame_lp::LpError;

use crate::game::Violation;

#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("invalid axis: {0}")]
    InvalidAxis(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid mass {value} at cell {cell}")]
    InvalidMass { cell: usize, value: f64 },
    #[error("{kind} has total mass {total}, outside tolerance")]
    NotNormalized { kind: &'static str, total: f64 },
    #[error("invalid game: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidGame(Vec<Violation>),
    #[error("unknown builtin game {0:?}")]
    UnknownBuiltin(String),
    #[error("size budget exceeded: {what} needs {cells} cells, budget is {budget}")]
    Budget { what: String, cells: u128, budget: u128 },
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("linear program for {what} ended with status {status}")]
    LpStatus { what: String, status: String },
    #[error("event has zero probability")]
    ZeroProbabilityEvent,
    #[error("precondition failed at {step}: {detail}")]
    Precondition { step: String, detail: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

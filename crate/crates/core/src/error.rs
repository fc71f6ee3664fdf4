use thiserror::Error;

use crate::geometry::Cell;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("scene generation failed: could not place `{category}` after {attempts} attempts")]
    Placement { category: String, attempts: usize },

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParam { field: &'static str, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("no path from {start} to the goal")]
    NoPath { start: Cell },

    #[error("planning failed: {0}")]
    Planning(String),

    #[error("projection failed: no mask pixel carries a valid depth")]
    Projection,

    #[error("aggregation requires at least one valid episode")]
    NoValidEpisodes,

    #[error("unknown goal category `{0}` for this scene")]
    UnknownCategory(String),

    #[error(transparent)]
    Advisor(#[from] crate::advisor::AdvisorError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParam { field, reason: reason.into() }
    }
}

//! The three worked meta-game families: duopoly subsidy lobbying, security
//! standards lock-in, and platform marketplace regulation. Each family builds a
//! `MetaGame` from a small parameter struct, carries its own within-game
//! solver, and ships the comparative-statics checks its claims rest on.

pub mod cyber;
pub mod platform;
pub mod subsidy;

use crate::meta::MetaError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FamilyError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("within-game equilibrium leaves the price interior: {0}")]
    BoundaryEquilibrium(String),
    #[error("claim hypotheses violated: {0}")]
    HypothesisViolated(String),
    #[error("price grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("transformed game {id} has multiple equilibria")]
    UniquenessViolated { id: String },
    #[error(transparent)]
    Meta(#[from] MetaError),
}

impl From<crate::game::GameError> for FamilyError {
    fn from(e: crate::game::GameError) -> FamilyError {
        FamilyError::Meta(MetaError::Game(e))
    }
}

impl From<FamilyError> for MetaError {
    fn from(e: FamilyError) -> MetaError {
        match e {
            FamilyError::Meta(inner) => inner,
            FamilyError::UniquenessViolated { id } => MetaError::UniquenessViolated { id },
            other => MetaError::Family(other.to_string()),
        }
    }
}

use thiserror::Error;

use crate::market::BuyerId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected} bands, found {found}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("buyer {buyer} has zero demand in every band; its equivalent price is undefined")]
    UndefinedPrice { buyer: BuyerId },

    #[error("invalid SEM coefficients: {0}")]
    InvalidCoefficients(String),

    #[error("invalid bid from buyer {buyer}: {reason}")]
    InvalidBid { buyer: BuyerId, reason: String },

    #[error("invalid ask: {0}")]
    InvalidAsk(String),

    #[error("duplicate buyer id {0}")]
    DuplicateBuyer(BuyerId),

    #[error("unknown buyer id {0}")]
    UnknownBuyer(BuyerId),

    #[error("outcome does not belong to this instance: {0}")]
    OutcomeMismatch(String),

    #[error("exact solver limited to {max} buyers, instance has {found}")]
    SizeLimit { max: usize, found: usize },

    #[error(
        "cannot place substituted spectrum for buyer {buyer}: {missing} equivalent units left over"
    )]
    AllocationInfeasible { buyer: BuyerId, missing: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("replication {replication} (seed {seed}) failed: {source}")]
    Replication {
        seed: u64,
        replication: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True for errors caused by bad input rather than by a defect in the engine.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::AllocationInfeasible { .. } => false,
            Error::Replication { source, .. } => source.is_validation(),
            _ => true,
        }
    }
}

//! The session state machine, the two-party driver and the N-party reduction.

mod nparty;
mod session;
mod state;

use thiserror::Error;

use crate::agents::AgentError;
use crate::codec::{CodecError, TransportError};
use crate::domain::DomainError;

pub use nparty::{reduce_nparty, PairPolicy, PairingError};
pub use session::{run_session, Transcript};
pub use state::{
    init_session, FailureReason, ProtocolMode, RoundRecord, SessionConfig, SessionState,
    SessionStatus,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("invalid session configuration: {0}")]
    InvalidConfig(String),
    #[error("round requested after the session stopped")]
    RoundAfterTermination,
    #[error("finalize called while the round loop can still continue")]
    FinalizeWhileRunnable,
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("transport closed")]
    TransportClosed,
    #[error(transparent)]
    Codec(#[from] CodecError),
}

impl From<TransportError> for ProtocolError {
    fn from(e: TransportError) -> Self {
        match e {
            TransportError::Closed => ProtocolError::TransportClosed,
            TransportError::Codec(c) => ProtocolError::Codec(c),
        }
    }
}

//! Scenario-driven evaluation: running every declared session, sweeping
//! thresholds for error rates, exact acceptance probabilities and transcript
//! replay.

mod experiment;
mod oracle;
mod replay;
pub mod scenario;
mod sweep;

use thiserror::Error;

use crate::codec::TranscriptFileError;
use crate::protocol::ProtocolError;

pub use experiment::{run_experiment, run_plan, ExperimentReport, SessionVerdict, REPORT_FILE};
pub use oracle::{monte_carlo_acceptance, oracle_acceptance, rational_to_f64, ORACLE_LIMIT};
pub use replay::{
    replay_messages, replay_transcript, ReplayError, ReplayLocation, ReplayMismatch, ReplaySummary,
};
pub use scenario::{
    load_scenario, parse_scenario, ExperimentSpec, ImpostorSpec, ScenarioConfig, SessionKind,
    SessionPlan, SessionTemplate,
};
pub use sweep::{sweep_thresholds, RateRow, RateTable};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error("{file}{}: {field}: {message}", line_suffix(*.line))]
    Config {
        file: String,
        line: Option<usize>,
        field: String,
        message: String,
    },
    #[error("{file}{}: {field}: unresolved reference `{reference}`", line_suffix(*.line))]
    UnresolvedReference {
        file: String,
        line: Option<usize>,
        field: String,
        reference: String,
    },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("exact enumeration needs RANDOM_SEEDED agents, `{0}` uses another strategy")]
    OracleNeedsRandom(String),
    #[error("instance too large for exact enumeration: {paths} paths exceed {limit}")]
    InstanceTooLarge { paths: u128, limit: u128 },
    #[error("session {session}: {error}")]
    Protocol {
        session: String,
        error: ProtocolError,
    },
    #[error(transparent)]
    Transcript(#[from] TranscriptFileError),
}

fn line_suffix(line: Option<usize>) -> String {
    line.map(|l| format!(":{l}")).unwrap_or_default()
}

pub(crate) fn io_err(path: &std::path::Path, e: std::io::Error) -> HarnessError {
    HarnessError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

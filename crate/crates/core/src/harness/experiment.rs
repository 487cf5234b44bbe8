//! Runs every session of a scenario and writes transcripts plus a report.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::codec::{encode_transcript, open_loopback_pair};
use crate::protocol::{run_session, Transcript};

use super::scenario::{ScenarioConfig, SessionKind, SessionPlan};
use super::{io_err, HarnessError};

pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SessionVerdict {
    pub session: String,
    pub kind: &'static str,
    pub initiator: String,
    pub responder: String,
    /// Status wire string, or `ERROR` when the session could not run.
    pub verdict: String,
    pub rounds: u64,
    pub matched_rounds: usize,
    pub c_i: u64,
    pub c_j: u64,
    /// Transcript file name relative to the output directory.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transcript: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExperimentReport {
    pub scenario: String,
    /// Hex SHA-256 of the scenario file.
    pub digest: String,
    pub sessions: Vec<SessionVerdict>,
    /// Number of sessions per verdict string.
    pub counts: BTreeMap<String, usize>,
}

/// Runs one planned session over a fresh loopback pair.
pub fn run_plan(plan: &SessionPlan) -> Result<Transcript, HarnessError> {
    let mut ai = plan.agent_i.clone();
    let mut aj = plan.agent_j.clone();
    run_session(&mut ai, &mut aj, &plan.config, open_loopback_pair()).map_err(|error| {
        HarnessError::Protocol {
            session: plan.config.session_id.clone(),
            error,
        }
    })
}

/// Runs every legitimate pair and the impostor session, if any. Sessions are
/// independent: one failing to run is recorded as `ERROR` and the rest proceed.
/// Output is a deterministic function of the scenario.
pub fn run_experiment(
    config: &ScenarioConfig,
    out_dir: &Path,
) -> Result<ExperimentReport, HarnessError> {
    fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let mut sessions = Vec::new();
    for plan in config.all_plans() {
        let plan = plan.with_seed_offset(config.experiment.base_seed);
        let mut verdict = SessionVerdict {
            session: plan.config.session_id.clone(),
            kind: match plan.kind {
                SessionKind::Legitimate => "LEGITIMATE",
                SessionKind::Impostor => "IMPOSTOR",
            },
            initiator: plan.agent_i.user_id().to_owned(),
            responder: plan.agent_j.user_id().to_owned(),
            verdict: "ERROR".to_owned(),
            rounds: 0,
            matched_rounds: 0,
            c_i: 0,
            c_j: 0,
            transcript: None,
            error: None,
        };
        match run_plan(&plan) {
            Ok(t) => {
                let name = format!("{}.transcript.jsonl", t.session_id);
                let path = out_dir.join(&name);
                fs::write(&path, encode_transcript(&t.session_id, &t.messages))
                    .map_err(|e| io_err(&path, e))?;
                verdict.verdict = t.status.as_str().to_owned();
                verdict.rounds = t.rounds.len() as u64;
                verdict.matched_rounds = t.matched_rounds();
                verdict.c_i = t.c_i;
                verdict.c_j = t.c_j;
                verdict.transcript = Some(name);
            }
            Err(e) => verdict.error = Some(e.to_string()),
        }
        sessions.push(verdict);
    }
    let mut counts = BTreeMap::new();
    for s in &sessions {
        *counts.entry(s.verdict.clone()).or_insert(0) += 1;
    }
    let report = ExperimentReport {
        scenario: config.name.clone(),
        digest: config.digest.clone(),
        sessions,
        counts,
    };
    let path = out_dir.join(REPORT_FILE);
    let mut json = serde_json::to_vec_pretty(&report).expect("report serializes");
    json.push(b'\n');
    fs::write(&path, json).map_err(|e| io_err(&path, e))?;
    Ok(report)
}

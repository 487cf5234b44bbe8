//! Offline verification of a transcript file: re-derives every round result
//! and the verdict, and reports the first field that disagrees.

use std::fmt;
use std::path::Path;

use thiserror::Error;

use crate::codec::{decode_transcript, Message, TranscriptFileError};
use crate::domain::Fact;
use crate::protocol::{init_session, FailureReason, SessionConfig, SessionState, SessionStatus};

use super::scenario::ScenarioConfig;
use super::{io_err, HarnessError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplayLocation {
    Handshake,
    Round(u64),
    Final,
}

impl fmt::Display for ReplayLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReplayLocation::Handshake => f.write_str("handshake"),
            ReplayLocation::Round(r) => write!(f, "round {r}"),
            ReplayLocation::Final => f.write_str("final"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{location}: {field}: expected {expected}, found {found}")]
pub struct ReplayMismatch {
    pub location: ReplayLocation,
    pub field: String,
    pub expected: String,
    pub found: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReplayError {
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Malformed(#[from] TranscriptFileError),
    #[error("transcript mismatch at {0}")]
    Mismatch(#[from] ReplayMismatch),
    #[error("session `{0}` is not declared by the scenario")]
    UnknownSession(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplaySummary {
    pub session_id: String,
    pub status: SessionStatus,
    pub rounds: u64,
    pub c_i: u64,
    pub c_j: u64,
}

pub fn replay_transcript(
    path: &Path,
    scenario: Option<&ScenarioConfig>,
) -> Result<ReplaySummary, ReplayError> {
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    let file = decode_transcript(&bytes)?;
    replay_messages(&file.session_id, &file.messages, scenario)
}

/// Checks a decoded message sequence as recorded by the initiator.
///
/// With a scenario, both agents are re-simulated: every exchanged fact must be
/// the one the agent's policy selects, and match flags are recomputed. The
/// matching rules and target views are not on the wire, so without a
/// scenario the responder's reported flag is taken as given and everything
/// derived from it (both parties' counters, the verdict, round numbering) is
/// checked.
pub fn replay_messages(
    session_id: &str,
    messages: &[Message],
    scenario: Option<&ScenarioConfig>,
) -> Result<ReplaySummary, ReplayError> {
    let mut r = Replayer {
        session_id,
        messages,
        pos: 0,
    };
    let final_status = messages.iter().rev().find_map(|m| match m {
        Message::Final { status, .. } => Some(*status),
        _ => None,
    });

    let loc = ReplayLocation::Handshake;
    let hello = r.expect(loc, "HELLO")?;
    let mut agents = None;
    let config = match scenario {
        Some(s) => {
            let plan = s
                .all_plans()
                .into_iter()
                .find(|p| p.config.session_id == session_id)
                .ok_or_else(|| ReplayError::UnknownSession(session_id.to_owned()))?
                .with_seed_offset(s.experiment.base_seed);
            agents = Some((plan.agent_i, plan.agent_j));
            plan.config
        }
        None => match hello {
            Message::Hello {
                i_threshold,
                j_threshold,
                r_max,
                mode,
                ..
            } => {
                SessionConfig::new(session_id, *i_threshold, *j_threshold, *r_max).with_mode(*mode)
            }
            _ => unreachable!("expect checked the type"),
        },
    };
    if let Message::Hello {
        user_id,
        mode,
        i_threshold,
        j_threshold,
        r_max,
        combiner,
        ..
    } = hello
    {
        if let Some((ai, _)) = &agents {
            check(loc, "user_id", ai.user_id(), user_id.as_str())?;
        }
        check(loc, "mode", config.mode.as_str(), mode.as_str())?;
        check(loc, "i_threshold", config.i_threshold, *i_threshold)?;
        check(loc, "j_threshold", config.j_threshold, *j_threshold)?;
        check(loc, "r_max", config.r_max, *r_max)?;
        if scenario.is_some() {
            check(
                loc,
                "combiner",
                config.combiner.wire_name(),
                combiner.clone(),
            )?;
        }
    }
    if let (Message::HelloAck { user_id, .. }, Some((_, aj))) =
        (r.expect(loc, "HELLO_ACK")?, &agents)
    {
        check(loc, "user_id", aj.user_id(), user_id.as_str())?;
    }

    let mut state = init_session(config).map_err(|error| HarnessError::Protocol {
        session: session_id.to_owned(),
        error,
    })?;
    // after a violation each party reports its own, diverged, counters
    let mut violated = false;
    while state.should_continue() {
        let round = state.round();
        let loc = ReplayLocation::Round(round);
        let fact_i = r.fact(loc, round)?;
        let fact_j = r.fact(loc, round)?;
        let rr_i = r.expect(loc, "ROUND_RESULT")?;
        let rr_j = r.expect(loc, "ROUND_RESULT")?;
        let matched = match &mut agents {
            Some((ai, aj)) => {
                for (agent, fact) in [(&*ai, &fact_i), (&*aj, &fact_j)] {
                    let expected =
                        agent
                            .select_fact(round)
                            .map_err(|e| HarnessError::Protocol {
                                session: session_id.to_owned(),
                                error: e.into(),
                            })?;
                    check_fact(loc, &expected, fact)?;
                }
                let record = state.step_round_local(&fact_i, &fact_j).map_err(|error| {
                    HarnessError::Protocol {
                        session: session_id.to_owned(),
                        error,
                    }
                })?;
                if record.matched {
                    ai.absorb(record.resultant.clone());
                    aj.absorb(record.resultant);
                }
                record.matched
            }
            None => {
                let Message::RoundResult { matched, .. } = rr_j else {
                    unreachable!()
                };
                state.advance(*matched).expect("loop condition checked");
                *matched
            }
        };
        let checked = check_round_result(loc, rr_i, round, matched, &state)
            .and_then(|()| check_round_result(loc, rr_j, round, matched, &state));
        if let Err(mismatch) = checked {
            // the parties disagreed on the wire and both gave up
            if final_status == Some(SessionStatus::Failed(FailureReason::ProtocolViolation)) {
                state.fail(FailureReason::ProtocolViolation);
                violated = true;
                break;
            }
            return Err(mismatch.into());
        }
    }
    let status = state.finalize().expect("loop has stopped");
    let loc = ReplayLocation::Final;
    for _ in 0..2 {
        let fin = r.expect(loc, "FINAL")?;
        if let Message::Final {
            status: s,
            c_i,
            c_j,
            rounds,
            ..
        } = fin
        {
            check(loc, "status", status.as_str(), s.as_str())?;
            if !violated {
                check(loc, "c_i", state.c_i(), *c_i)?;
                check(loc, "c_j", state.c_j(), *c_j)?;
            }
            check(loc, "rounds", state.round(), *rounds)?;
        }
    }
    if let Some(extra) = messages.get(r.pos) {
        return Err(mismatch(loc, "type", "end of transcript", extra.kind()).into());
    }
    Ok(ReplaySummary {
        session_id: session_id.to_owned(),
        status,
        rounds: state.round(),
        c_i: state.c_i(),
        c_j: state.c_j(),
    })
}

struct Replayer<'a> {
    session_id: &'a str,
    messages: &'a [Message],
    pos: usize,
}

impl<'a> Replayer<'a> {
    fn expect(&mut self, loc: ReplayLocation, kind: &str) -> Result<&'a Message, ReplayMismatch> {
        let Some(msg) = self.messages.get(self.pos) else {
            return Err(mismatch(loc, "type", kind, "end of transcript"));
        };
        check(loc, "type", kind, msg.kind())?;
        check(loc, "session", self.session_id, msg.session_id())?;
        self.pos += 1;
        Ok(msg)
    }

    fn fact(&mut self, loc: ReplayLocation, round: u64) -> Result<Fact, ReplayMismatch> {
        match self.expect(loc, "FACT")? {
            Message::Fact {
                round: r,
                form,
                fact_id,
                domain_id,
                label,
                magnitude,
                ..
            } => {
                check(loc, "round", round, *r)?;
                Ok(Fact {
                    fact_id: fact_id.clone(),
                    domain_id: domain_id.clone(),
                    form: *form,
                    label: label.clone(),
                    magnitude: *magnitude,
                })
            }
            _ => unreachable!("expect checked the type"),
        }
    }
}

fn check_fact(loc: ReplayLocation, expected: &Fact, found: &Fact) -> Result<(), ReplayMismatch> {
    check(
        loc,
        "fact_id",
        expected.fact_id.as_str(),
        found.fact_id.as_str(),
    )?;
    check(
        loc,
        "domain_id",
        expected.domain_id.as_str(),
        found.domain_id.as_str(),
    )?;
    check(loc, "form", expected.form.as_str(), found.form.as_str())?;
    check(loc, "label", expected.label.as_str(), found.label.as_str())?;
    check(
        loc,
        "magnitude",
        expected.magnitude.value(),
        found.magnitude.value(),
    )
}

fn check_round_result(
    loc: ReplayLocation,
    msg: &Message,
    round: u64,
    matched: bool,
    state: &SessionState,
) -> Result<(), ReplayMismatch> {
    let Message::RoundResult {
        round: r,
        matched: m,
        c_i,
        c_j,
        ..
    } = msg
    else {
        unreachable!("expect checked the type")
    };
    check(loc, "round", round, *r)?;
    check(loc, "matched", matched, *m)?;
    check(loc, "c_i", state.c_i(), *c_i)?;
    check(loc, "c_j", state.c_j(), *c_j)
}

fn mismatch(
    location: ReplayLocation,
    field: &str,
    expected: impl ToString,
    found: impl ToString,
) -> ReplayMismatch {
    ReplayMismatch {
        location,
        field: field.to_owned(),
        expected: expected.to_string(),
        found: found.to_string(),
    }
}

fn check<T: PartialEq + ToString>(
    loc: ReplayLocation,
    field: &str,
    expected: T,
    found: T,
) -> Result<(), ReplayMismatch> {
    if expected == found {
        Ok(())
    } else {
        Err(mismatch(
            loc,
            field,
            expected.to_string(),
            found.to_string(),
        ))
    }
}

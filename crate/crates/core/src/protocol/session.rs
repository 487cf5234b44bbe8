//! Two-party session driver over a loopback transport.
//!
//! Each party runs its own copy of the state machine on its own thread and
//! cross-checks the peer's `ROUND_RESULT` every round. The message flow seen
//! by the initiator is:
//!
//! ```text
//! -> HELLO        <- HELLO_ACK
//! -> FACT         <- FACT           (per round)
//! -> ROUND_RESULT <- ROUND_RESULT   (per round)
//! -> FINAL        <- FINAL
//! ```

use std::thread;

use crate::agents::PartyAgent;
use crate::codec::{Endpoint, Message};
use crate::domain::Fact;

use super::state::{
    init_session, FailureReason, RoundRecord, SessionConfig, SessionState, SessionStatus,
};
use super::ProtocolError;

/// Complete record of one rendezvous, as seen by the initiating party.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transcript {
    pub session_id: String,
    pub config: SessionConfig,
    pub rounds: Vec<RoundRecord>,
    pub status: SessionStatus,
    pub c_i: u64,
    pub c_j: u64,
    /// Every message sent or received by the initiator, in order.
    pub messages: Vec<Message>,
}

impl Transcript {
    pub fn matched_rounds(&self) -> usize {
        self.rounds.iter().filter(|r| r.matched).count()
    }

    /// Re-runs the recorded facts through a fresh state machine and checks
    /// every match flag, counter and the verdict.
    pub fn replay(&self) -> Result<(), String> {
        let mut state = init_session(self.config.clone()).map_err(|e| e.to_string())?;
        for rec in &self.rounds {
            if !state.should_continue() {
                // only a protocol violation stops a session early
                break;
            }
            let got = state
                .step_round_local(&rec.fact_i, &rec.fact_j)
                .map_err(|e| format!("round {}: {e}", rec.round))?;
            if &got != rec {
                return Err(format!(
                    "round {}: recorded {rec:?}, replayed {got:?}",
                    rec.round
                ));
            }
        }
        if self.status == SessionStatus::Failed(FailureReason::ProtocolViolation) {
            state.fail(FailureReason::ProtocolViolation);
        }
        let status = state.finalize().map_err(|e| e.to_string())?;
        if (status, state.c_i(), state.c_j()) != (self.status, self.c_i, self.c_j) {
            return Err(format!(
                "final: recorded {} ({}, {}), replayed {} ({}, {})",
                self.status,
                self.c_i,
                self.c_j,
                status,
                state.c_i(),
                state.c_j()
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Role {
    Initiator,
    Responder,
}

struct PartyOutcome {
    /// Verdict after the FINAL cross-check.
    status: SessionStatus,
    state: SessionState,
    rounds: Vec<RoundRecord>,
    messages: Vec<Message>,
}

struct Party<'a> {
    role: Role,
    agent: &'a mut PartyAgent,
    endpoint: Endpoint,
    state: SessionState,
    rounds: Vec<RoundRecord>,
    messages: Vec<Message>,
    peer_final: Option<Message>,
}

impl Party<'_> {
    fn send(&mut self, msg: Message) -> Result<(), ProtocolError> {
        self.endpoint.send(&msg)?;
        self.messages.push(msg);
        Ok(())
    }

    fn recv(&mut self) -> Result<Message, ProtocolError> {
        let msg = self.endpoint.recv()?;
        if matches!(msg, Message::Final { .. }) {
            self.peer_final = Some(msg.clone());
        }
        self.messages.push(msg.clone());
        Ok(msg)
    }

    fn session_id(&self) -> String {
        self.state.config().session_id.clone()
    }

    fn hello(&self) -> Message {
        let c = self.state.config();
        Message::Hello {
            session_id: c.session_id.clone(),
            user_id: self.agent.user_id().to_owned(),
            mode: c.mode,
            i_threshold: c.i_threshold,
            j_threshold: c.j_threshold,
            r_max: c.r_max,
            combiner: c.combiner.wire_name(),
        }
    }

    /// `true` when the handshake succeeded.
    fn handshake(&mut self) -> Result<bool, ProtocolError> {
        match self.role {
            Role::Initiator => {
                let hello = self.hello();
                self.send(hello)?;
                let ack = self.recv()?;
                Ok(
                    matches!(&ack, Message::HelloAck { session_id, .. } if *session_id == self.session_id()),
                )
            }
            Role::Responder => {
                let hello = self.recv()?;
                let expected = self.hello();
                let agrees = match (&hello, &expected) {
                    (
                        Message::Hello {
                            user_id: _,
                            session_id,
                            mode,
                            i_threshold,
                            j_threshold,
                            r_max,
                            combiner,
                        },
                        Message::Hello {
                            session_id: s2,
                            mode: m2,
                            i_threshold: i2,
                            j_threshold: j2,
                            r_max: r2,
                            combiner: c2,
                            ..
                        },
                    ) => {
                        (session_id, mode, i_threshold, j_threshold, r_max, combiner)
                            == (s2, m2, i2, j2, r2, c2)
                    }
                    _ => false,
                };
                if agrees {
                    let ack = Message::HelloAck {
                        session_id: self.session_id(),
                        user_id: self.agent.user_id().to_owned(),
                    };
                    self.send(ack)?;
                }
                Ok(agrees)
            }
        }
    }

    /// Plays one round; `false` on a cross-check failure.
    fn play_round(&mut self) -> Result<bool, ProtocolError> {
        let session_id = self.session_id();
        let round = self.state.round();
        let own = self.agent.select_fact(round)?;
        self.send(Message::fact(&session_id, round, &own))?;
        let peer = match self.recv()? {
            Message::Fact {
                session_id: s,
                round: r,
                form,
                fact_id,
                domain_id,
                label,
                magnitude,
            } if s == session_id && r == round => Fact {
                fact_id,
                domain_id,
                form,
                label,
                magnitude,
            },
            _ => return Ok(false),
        };
        let (f_k, f_m) = match self.role {
            Role::Initiator => (&own, &peer),
            Role::Responder => (&peer, &own),
        };
        let record = self.state.step_round_local(f_k, f_m)?;
        if record.matched {
            self.agent.absorb(record.resultant.clone());
        }
        let ours = Message::RoundResult {
            session_id: session_id.clone(),
            round,
            matched: record.matched,
            c_i: record.c_i_after,
            c_j: record.c_j_after,
        };
        self.rounds.push(record);
        self.send(ours.clone())?;
        let theirs = self.recv()?;
        Ok(theirs == ours)
    }

    fn run(mut self) -> Result<PartyOutcome, ProtocolError> {
        let mut consistent = self.handshake()?;
        while consistent && self.state.should_continue() {
            consistent = self.play_round()?;
        }
        if !consistent {
            self.state.fail(FailureReason::ProtocolViolation);
        }
        let status = self.state.finalize()?;
        let fin = Message::Final {
            session_id: self.session_id(),
            status,
            c_i: self.state.c_i(),
            c_j: self.state.c_j(),
            rounds: self.state.round(),
        };
        self.send(fin.clone())?;
        while self.peer_final.is_none() {
            self.recv()?;
        }
        let agreed = match (&fin, &self.peer_final) {
            (
                Message::Final {
                    status,
                    c_i,
                    c_j,
                    rounds,
                    ..
                },
                Some(Message::Final {
                    status: s2,
                    c_i: i2,
                    c_j: j2,
                    rounds: r2,
                    ..
                }),
            ) => (status, c_i, c_j, rounds) == (s2, i2, j2, r2),
            _ => false,
        };
        let status = if agreed {
            status
        } else {
            SessionStatus::Failed(FailureReason::ProtocolViolation)
        };
        Ok(PartyOutcome {
            status,
            state: self.state,
            rounds: self.rounds,
            messages: self.messages,
        })
    }
}

/// Runs one complete session between `agent_i` (initiator) and `agent_j`.
///
/// Each party evaluates its own side with its agent's target view and the
/// peer's side with the view declared in `config`; disagreement surfaces as
/// `Failed(ProtocolViolation)`. Matched resultants are absorbed into both
/// agents' domains.
pub fn run_session(
    agent_i: &mut PartyAgent,
    agent_j: &mut PartyAgent,
    config: &SessionConfig,
    transport: (Endpoint, Endpoint),
) -> Result<Transcript, ProtocolError> {
    let mut view_i = config.clone();
    view_i.target_i = agent_i.target_view().clone();
    let mut view_j = config.clone();
    view_j.target_j = agent_j.target_view().clone();
    let state_i = init_session(view_i)?;
    let state_j = init_session(view_j)?;
    let (ep_i, ep_j) = transport;

    let party = |role, agent, endpoint, state| Party {
        role,
        agent,
        endpoint,
        state,
        rounds: Vec::new(),
        messages: Vec::new(),
        peer_final: None,
    };
    let pi = party(Role::Initiator, agent_i, ep_i, state_i);
    let pj = party(Role::Responder, agent_j, ep_j, state_j);

    let (res_i, res_j) = thread::scope(|s| {
        let handle = s.spawn(move || pj.run());
        let res_i = pi.run();
        (res_i, handle.join().expect("responder thread panicked"))
    });
    let outcome = match (res_i, res_j) {
        (Ok(outcome), Ok(_)) => outcome,
        (Err(ProtocolError::TransportClosed), Err(e)) => return Err(e),
        (Err(e), _) | (Ok(_), Err(e)) => return Err(e),
    };
    Ok(Transcript {
        session_id: config.session_id.clone(),
        config: config.clone(),
        status: outcome.status,
        c_i: outcome.state.c_i(),
        c_j: outcome.state.c_j(),
        rounds: outcome.rounds,
        messages: outcome.messages,
    })
}

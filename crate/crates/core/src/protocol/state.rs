use std::fmt;

use crate::comparison::{in_target, joint_match, Combiner, TargetSet};
use crate::domain::{check_token, Domain, Fact, Magnitude};

use super::ProtocolError;

/// Loop condition used by the round loop.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum ProtocolMode {
    /// Continue while *both* counters are at or below their thresholds. With
    /// unequal thresholds this exits as soon as the smaller one is passed.
    #[default]
    PaperLiteral,
    /// Continue while *either* counter is at or below its threshold.
    BothThresholds,
}

impl ProtocolMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ProtocolMode::PaperLiteral => "PAPER_LITERAL",
            ProtocolMode::BothThresholds => "BOTH_THRESHOLDS",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "PAPER_LITERAL" => Some(ProtocolMode::PaperLiteral),
            "BOTH_THRESHOLDS" => Some(ProtocolMode::BothThresholds),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FailureReason {
    InsufficientConfidence,
    RoundLimitExceeded,
    ProtocolViolation,
}

/// Authentication status of a session. `NotDone` is only ever an in-progress state.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum SessionStatus {
    #[default]
    NotDone,
    Done,
    Failed(FailureReason),
}

impl SessionStatus {
    pub fn is_terminal(self) -> bool {
        self != SessionStatus::NotDone
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SessionStatus::NotDone => "NOT_DONE",
            SessionStatus::Done => "DONE",
            SessionStatus::Failed(FailureReason::InsufficientConfidence) => {
                "FAILED_INSUFFICIENT_CONFIDENCE"
            }
            SessionStatus::Failed(FailureReason::RoundLimitExceeded) => {
                "FAILED_ROUND_LIMIT_EXCEEDED"
            }
            SessionStatus::Failed(FailureReason::ProtocolViolation) => "FAILED_PROTOCOL_VIOLATION",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            SessionStatus::NotDone,
            SessionStatus::Done,
            SessionStatus::Failed(FailureReason::InsufficientConfidence),
            SessionStatus::Failed(FailureReason::RoundLimitExceeded),
            SessionStatus::Failed(FailureReason::ProtocolViolation),
        ]
        .into_iter()
        .find(|status| status.as_str() == s)
    }
}

impl fmt::Display for SessionStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionConfig {
    pub session_id: String,
    pub i_threshold: u64,
    pub j_threshold: u64,
    /// Hard bound on the number of rounds.
    pub r_max: u64,
    pub mode: ProtocolMode,
    pub combiner: Combiner,
    pub target_i: TargetSet,
    pub target_j: TargetSet,
    /// Lookup tolerance for [`Combiner::MapThenDifference`].
    pub epsilon: Magnitude,
}

impl SessionConfig {
    /// Difference combiner, `{0}` targets on both sides, literal loop condition.
    pub fn new(
        session_id: impl Into<String>,
        i_threshold: u64,
        j_threshold: u64,
        r_max: u64,
    ) -> Self {
        SessionConfig {
            session_id: session_id.into(),
            i_threshold,
            j_threshold,
            r_max,
            mode: ProtocolMode::PaperLiteral,
            combiner: Combiner::Difference,
            target_i: TargetSet::zero(),
            target_j: TargetSet::zero(),
            epsilon: Magnitude::ZERO,
        }
    }

    pub fn with_mode(mut self, mode: ProtocolMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_combiner(mut self, combiner: Combiner) -> Self {
        self.combiner = combiner;
        self
    }

    pub fn with_targets(mut self, target_i: TargetSet, target_j: TargetSet) -> Self {
        self.target_i = target_i;
        self.target_j = target_j;
        self
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        let invalid = |msg: String| Err(ProtocolError::InvalidConfig(msg));
        if check_token(&self.session_id).is_err() {
            return invalid(format!("session id {:?} is not a token", self.session_id));
        }
        if self.r_max == 0 {
            return invalid("r_max must be at least 1".into());
        }
        if self.epsilon < Magnitude::ZERO {
            return invalid(format!("epsilon {} is negative", self.epsilon));
        }
        for (side, target) in [("target_i", &self.target_i), ("target_j", &self.target_j)] {
            if let Err(e) = target.validate() {
                return invalid(format!("{side}: {e}"));
            }
        }
        Ok(())
    }
}

/// Outcome of one round of fact exchange.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundRecord {
    pub round: u64,
    pub fact_i: Fact,
    pub fact_j: Fact,
    pub resultant: Fact,
    pub match_i: bool,
    pub match_j: bool,
    pub matched: bool,
    pub c_i_after: u64,
    pub c_j_after: u64,
}

/// Confidence counters, round counter and verdict of one session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionState {
    config: SessionConfig,
    c_i: u64,
    c_j: u64,
    round: u64,
    status: SessionStatus,
}

/// Starts a session: both counters at zero, round zero, not yet authenticated.
pub fn init_session(config: SessionConfig) -> Result<SessionState, ProtocolError> {
    config.validate()?;
    Ok(SessionState {
        config,
        c_i: 0,
        c_j: 0,
        round: 0,
        status: SessionStatus::NotDone,
    })
}

impl SessionState {
    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn c_i(&self) -> u64 {
        self.c_i
    }

    pub fn c_j(&self) -> u64 {
        self.c_j
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn status(&self) -> SessionStatus {
        self.status
    }

    fn counters_allow(&self) -> bool {
        let below_i = self.c_i <= self.config.i_threshold;
        let below_j = self.c_j <= self.config.j_threshold;
        match self.config.mode {
            ProtocolMode::PaperLiteral => below_i && below_j,
            ProtocolMode::BothThresholds => below_i || below_j,
        }
    }

    /// The round-loop condition. Always `false` once a verdict has been reached.
    pub fn should_continue(&self) -> bool {
        self.status == SessionStatus::NotDone
            && self.counters_allow()
            && self.round < self.config.r_max
    }

    /// Plays one round without touching any domain: combines the two facts,
    /// tests both target views and advances the counters.
    pub fn step_round_local(
        &mut self,
        f_k: &Fact,
        f_m: &Fact,
    ) -> Result<RoundRecord, ProtocolError> {
        if !self.should_continue() {
            return Err(ProtocolError::RoundAfterTermination);
        }
        let round = self.round;
        let resultant = self
            .config
            .combiner
            .combine(f_k, f_m, round, self.config.epsilon)?;
        let match_i = in_target(&resultant, &self.config.target_i);
        let match_j = in_target(&resultant, &self.config.target_j);
        let matched = joint_match(match_i, match_j);
        self.advance(matched)?;
        Ok(RoundRecord {
            round,
            fact_i: f_k.clone(),
            fact_j: f_m.clone(),
            resultant,
            match_i,
            match_j,
            matched,
            c_i_after: self.c_i,
            c_j_after: self.c_j,
        })
    }

    /// Plays one round and, on a joint match, grows both domains with the
    /// resultant fact. Mismatched rounds leave the domains untouched.
    pub fn step_round(
        &mut self,
        f_k: &Fact,
        f_m: &Fact,
        domain_i: &mut Domain,
        domain_j: &mut Domain,
    ) -> Result<RoundRecord, ProtocolError> {
        let record = self.step_round_local(f_k, f_m)?;
        if record.matched {
            domain_i.absorb(record.resultant.clone());
            domain_j.absorb(record.resultant.clone());
        }
        Ok(record)
    }

    /// Advances the counters for a round whose joint match was decided elsewhere.
    pub fn advance(&mut self, matched: bool) -> Result<(), ProtocolError> {
        if !self.should_continue() {
            return Err(ProtocolError::RoundAfterTermination);
        }
        if matched {
            self.c_i += 1;
            self.c_j += 1;
        }
        self.round += 1;
        Ok(())
    }

    /// Reaches a verdict once the loop has stopped. Terminal states are returned unchanged.
    pub fn finalize(&mut self) -> Result<SessionStatus, ProtocolError> {
        if self.status.is_terminal() {
            return Ok(self.status);
        }
        if self.should_continue() {
            return Err(ProtocolError::FinalizeWhileRunnable);
        }
        self.status = if self.c_i >= self.config.i_threshold && self.c_j >= self.config.j_threshold
        {
            SessionStatus::Done
        } else if !self.counters_allow() {
            SessionStatus::Failed(FailureReason::InsufficientConfidence)
        } else {
            SessionStatus::Failed(FailureReason::RoundLimitExceeded)
        };
        Ok(self.status)
    }

    /// Aborts an in-progress session. No effect on a terminal state.
    pub fn fail(&mut self, reason: FailureReason) {
        if self.status == SessionStatus::NotDone {
            self.status = SessionStatus::Failed(reason);
        }
    }
}

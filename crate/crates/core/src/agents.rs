//! Party agents: fact selection policies, absorption, and the impostor model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::comparison::TargetSet;
use crate::domain::{
    check_token, DefiningProperty, Domain, DomainError, Fact, FactForm, Magnitude,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AgentError {
    #[error("agent domain {0:?} has no facts to choose from")]
    EmptyDomain(String),
    #[error("scripted fact {0:?} is not in the agent's domain")]
    UnresolvedFactId(String),
    #[error("scripted policy needs at least one fact id")]
    EmptyScript,
    #[error("overlap {0} is outside [0, 1]")]
    InvalidOverlap(f64),
    #[error("decoy offset must be non-zero")]
    ZeroDecoyOffset,
    #[error(transparent)]
    Domain(#[from] DomainError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Strategy {
    /// Fact ids played in order, cycling.
    Scripted(Vec<String>),
    /// Native then absorbed facts in insertion order, cycling.
    RoundRobin,
    /// Uniform over native and absorbed facts, driven by `(seed, round)`.
    RandomSeeded,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum FormRule {
    /// Question on even rounds, answer on odd rounds.
    #[default]
    Alternate,
    FixedQuestion,
    FixedAnswer,
}

impl FormRule {
    pub fn form_for(self, round: u64) -> FactForm {
        match self {
            FormRule::Alternate if round.is_multiple_of(2) => FactForm::Question,
            FormRule::Alternate => FactForm::Answer,
            FormRule::FixedQuestion => FactForm::Question,
            FormRule::FixedAnswer => FactForm::Answer,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionPolicy {
    pub strategy: Strategy,
    pub form_rule: FormRule,
}

impl SelectionPolicy {
    pub fn scripted<S: Into<String>>(ids: impl IntoIterator<Item = S>) -> Self {
        SelectionPolicy {
            strategy: Strategy::Scripted(ids.into_iter().map(Into::into).collect()),
            form_rule: FormRule::default(),
        }
    }

    pub fn round_robin() -> Self {
        SelectionPolicy {
            strategy: Strategy::RoundRobin,
            form_rule: FormRule::default(),
        }
    }

    pub fn random_seeded() -> Self {
        SelectionPolicy {
            strategy: Strategy::RandomSeeded,
            form_rule: FormRule::default(),
        }
    }

    pub fn with_form_rule(mut self, form_rule: FormRule) -> Self {
        self.form_rule = form_rule;
        self
    }
}

/// A user taking part in sessions: its domain, its view of the target set,
/// and how it picks facts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartyAgent {
    user_id: String,
    domain: Domain,
    target_view: TargetSet,
    policy: SelectionPolicy,
    seed: u64,
}

impl PartyAgent {
    pub fn new(
        user_id: impl Into<String>,
        domain: Domain,
        target_view: TargetSet,
        policy: SelectionPolicy,
        seed: u64,
    ) -> Result<Self, AgentError> {
        let user_id = user_id.into();
        check_token(&user_id)?;
        if let Strategy::Scripted(ids) = &policy.strategy {
            if ids.is_empty() {
                return Err(AgentError::EmptyScript);
            }
            if let Some(missing) = ids.iter().find(|id| domain.fact(id).is_none()) {
                return Err(AgentError::UnresolvedFactId(missing.clone()));
            }
        }
        Ok(PartyAgent {
            user_id,
            domain,
            target_view,
            policy,
            seed,
        })
    }

    pub fn user_id(&self) -> &str {
        &self.user_id
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn target_view(&self) -> &TargetSet {
        &self.target_view
    }

    pub fn policy(&self) -> &SelectionPolicy {
        &self.policy
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_user_id(mut self, user_id: impl Into<String>) -> Result<Self, AgentError> {
        let user_id = user_id.into();
        check_token(&user_id)?;
        self.user_id = user_id;
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_target_view(mut self, target_view: TargetSet) -> Self {
        self.target_view = target_view;
        self
    }

    pub fn with_policy(self, policy: SelectionPolicy) -> Result<Self, AgentError> {
        PartyAgent::new(
            self.user_id,
            self.domain,
            self.target_view,
            policy,
            self.seed,
        )
    }

    /// Every fact the agent could play in `round`, with the form already applied.
    /// Random selection is uniform over this list.
    pub fn candidates(&self, round: u64) -> Vec<Fact> {
        let form = self.policy.form_rule.form_for(round);
        self.domain
            .members()
            .map(|f| f.clone().with_form(form))
            .collect()
    }

    pub fn select_fact(&self, round: u64) -> Result<Fact, AgentError> {
        let pool_len = self.domain.len();
        if pool_len == 0 {
            return Err(AgentError::EmptyDomain(self.domain.id().to_owned()));
        }
        let fact = match &self.policy.strategy {
            Strategy::Scripted(ids) => {
                let id = &ids[cyclic_index(round, ids.len())];
                self.domain
                    .fact(id)
                    .ok_or_else(|| AgentError::UnresolvedFactId(id.clone()))?
            }
            Strategy::RoundRobin => self
                .domain
                .members()
                .nth(cyclic_index(round, pool_len))
                .expect("index below pool length"),
            Strategy::RandomSeeded => {
                let k = random_index(self.seed, round, pool_len);
                self.domain
                    .members()
                    .nth(k)
                    .expect("index below pool length")
            }
        };
        Ok(fact
            .clone()
            .with_form(self.policy.form_rule.form_for(round)))
    }

    /// Adds a resultant fact to the agent's domain; idempotent per fact id.
    pub fn absorb(&mut self, f_p: Fact) -> bool {
        self.domain.absorb(f_p)
    }
}

fn cyclic_index(round: u64, len: usize) -> usize {
    (round % len as u64) as usize
}

/// Uniform index in `0..len` determined only by `(seed, round)`.
pub fn random_index(seed: u64, round: u64, len: usize) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(round);
    rng.random_range(0..len)
}

/// Builds an agent that knows the first `ceil(overlap * N)` facts of
/// `reference` exactly and holds decoys for the rest: same labels, magnitudes
/// shifted by `decoy_offset`, ids suffixed with `~decoy`.
///
/// The impostor plays `RandomSeeded` against a `{0}` target view until
/// reconfigured with the `with_*` builders.
pub fn make_impostor(
    reference: &Domain,
    overlap: f64,
    seed: u64,
    decoy_offset: Magnitude,
) -> Result<PartyAgent, AgentError> {
    if !(0.0..=1.0).contains(&overlap) {
        return Err(AgentError::InvalidOverlap(overlap));
    }
    if decoy_offset == Magnitude::ZERO {
        return Err(AgentError::ZeroDecoyOffset);
    }
    let facts = reference.native_facts();
    if facts.is_empty() {
        return Err(AgentError::EmptyDomain(reference.id().to_owned()));
    }
    let known = known_prefix(overlap, facts.len());
    let mut domain = Domain::new(
        reference.id(),
        reference.name(),
        DefiningProperty::always_true(),
    )?;
    for (k, fact) in facts.iter().enumerate() {
        let copy = if k < known {
            fact.clone()
        } else {
            Fact {
                fact_id: format!("{}~decoy", fact.fact_id),
                magnitude: fact.magnitude.checked_add(decoy_offset)?,
                ..fact.clone()
            }
        };
        domain.add_fact(copy)?;
    }
    PartyAgent::new(
        "impostor",
        domain,
        TargetSet::zero(),
        SelectionPolicy::random_seeded(),
        seed,
    )
}

/// `ceil(overlap * n)`, ignoring floating-point noise just above an integer.
fn known_prefix(overlap: f64, n: usize) -> usize {
    let exact = overlap * n as f64;
    let rounded = exact.round();
    let count = if (exact - rounded).abs() < 1e-9 {
        rounded
    } else {
        exact.ceil()
    };
    (count as usize).min(n)
}

//! The fact-combination operator, resultant facts and target sets.

use std::collections::BTreeSet;
use std::fmt;

use crate::domain::{DefiningProperty, DomainError, DomainMapping, Fact, FactForm, Magnitude};

/// Domain id shared by every resultant fact.
pub const RESULTANT_DOMAIN: &str = "resultant";

/// The operator combining one fact from each party into a resultant fact.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum Combiner {
    /// `m(f_k) - m(f_m)`. With target `{0}` this accepts exactly equal outcomes.
    #[default]
    Difference,
    Sum,
    /// Maps `f_m` into `f_k`'s domain through the mapping, then takes the difference.
    MapThenDifference(DomainMapping),
}

impl Combiner {
    /// Stable textual name, used on the wire.
    pub fn wire_name(&self) -> String {
        match self {
            Combiner::Difference => "DIFFERENCE".to_owned(),
            Combiner::Sum => "SUM".to_owned(),
            Combiner::MapThenDifference(m) => format!("MAP_THEN_DIFFERENCE:{}", m.id()),
        }
    }

    /// Produces the resultant fact for one round.
    ///
    /// `epsilon` is the tolerance of the mapping lookup and is ignored by the
    /// other combiners.
    pub fn combine(
        &self,
        f_k: &Fact,
        f_m: &Fact,
        round: u64,
        epsilon: Magnitude,
    ) -> Result<Fact, DomainError> {
        let magnitude = match self {
            Combiner::Difference => f_k.magnitude.checked_sub(f_m.magnitude)?,
            Combiner::Sum => f_k.magnitude.checked_add(f_m.magnitude)?,
            Combiner::MapThenDifference(mapping) => {
                let mapped = mapping.map_facts_within(std::slice::from_ref(f_m), epsilon)?;
                f_k.magnitude.checked_sub(mapped.magnitude)?
            }
        };
        Ok(Fact {
            fact_id: resultant_id(&f_k.fact_id, &f_m.fact_id, round),
            domain_id: RESULTANT_DOMAIN.to_owned(),
            form: FactForm::Answer,
            label: format!("{} ⊗ {}", f_k.label, f_m.label),
            magnitude,
        })
    }
}

impl fmt::Display for Combiner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.wire_name())
    }
}

fn resultant_id(k: &str, m: &str, round: u64) -> String {
    format!("r{round}:{k}*{m}")
}

/// A party's (possibly partial) view of the acceptable resultant facts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TargetSet {
    pub accepted_magnitudes: BTreeSet<Magnitude>,
    pub label_predicate: DefiningProperty,
}

impl TargetSet {
    pub fn new(accepted: impl IntoIterator<Item = Magnitude>) -> Self {
        TargetSet {
            accepted_magnitudes: accepted.into_iter().collect(),
            label_predicate: DefiningProperty::always_true(),
        }
    }

    /// `{0}`: "same outcome" under the difference combiner.
    pub fn zero() -> Self {
        Self::new([Magnitude::ZERO])
    }

    pub fn with_predicate(mut self, predicate: DefiningProperty) -> Self {
        self.label_predicate = predicate;
        self
    }

    pub fn contains(&self, f_p: &Fact) -> bool {
        self.accepted_magnitudes.contains(&f_p.magnitude) && self.label_predicate.holds(f_p)
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        self.label_predicate.validate()
    }
}

/// `F_p in T` for one party's view.
pub fn in_target(f_p: &Fact, t: &TargetSet) -> bool {
    t.contains(f_p)
}

/// A round matches only when both parties' local target tests pass.
pub fn joint_match(local_match_i: bool, local_match_j: bool) -> bool {
    local_match_i && local_match_j
}

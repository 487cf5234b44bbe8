//! Knowledge domains, facts and the magnitude arithmetic they share.
//!
//! A [`Domain`] is a finite working set of native facts that all satisfy a
//! declarative [`DefiningProperty`], plus an annex of absorbed facts picked up
//! during sessions. Facts are compared across domains only by their
//! [`Magnitude`] (their "outcome"), never by label.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised by domain construction and fact operations.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("invalid identifier {0:?}: must be non-empty and contain no whitespace")]
    InvalidIdentifier(String),
    #[error("fact {fact_id:?} violates the defining property of domain {domain_id:?}")]
    PropertyViolation { domain_id: String, fact_id: String },
    #[error("fact id {fact_id:?} already present in domain {domain_id:?}")]
    DuplicateFactId { domain_id: String, fact_id: String },
    #[error("operator {op_name:?} already defined on domain {domain_id:?}")]
    DuplicateOperator { domain_id: String, op_name: String },
    #[error("fact belongs to domain {found:?}, expected {expected:?}")]
    DomainMismatch { expected: String, found: String },
    #[error("operator {op_name:?} is not defined on domain {domain_id:?}")]
    UnknownOperator { domain_id: String, op_name: String },
    #[error("fact {fact_id:?} is not a member of domain {domain_id:?}")]
    NotAMember { domain_id: String, fact_id: String },
    #[error("result {fact_id:?} of operator {op_name:?} is not closed under domain {domain_id:?}")]
    ClosureViolation {
        domain_id: String,
        op_name: String,
        fact_id: String,
    },
    #[error("magnitude arithmetic left the range [-2^62, 2^62)")]
    MagnitudeOverflow,
    #[error("magnitude {0} is outside the range [-2^62, 2^62)")]
    MagnitudeOutOfRange(i128),
    #[error("fact index {index} out of range (available: {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("magnitude range [{lo}, {hi}] is empty")]
    EmptyRange { lo: Magnitude, hi: Magnitude },
    #[error("no mapping entry for source facts {0:?}")]
    MappingIncomplete(Vec<String>),
    #[error("mapping entry {sources:?} -> {target:?} breaks the aggregator invariant")]
    MappingInconsistent {
        sources: Vec<String>,
        target: String,
    },
    #[error("invalid mapping entry: {0}")]
    InvalidMappingEntry(String),
}

/// Returns `true` when `s` is usable as an identifier: non-empty, no whitespace.
pub fn is_token(s: &str) -> bool {
    !s.is_empty() && !s.chars().any(char::is_whitespace)
}

pub(crate) fn check_token(s: &str) -> Result<(), DomainError> {
    if is_token(s) {
        Ok(())
    } else {
        Err(DomainError::InvalidIdentifier(s.to_owned()))
    }
}

/// Exact signed outcome of a fact, restricted to `[-2^62, 2^62)`.
///
/// Arithmetic is checked: a result outside the range is an error, never a
/// wrapped value.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(try_from = "i64", into = "i64")]
pub struct Magnitude(i64);

impl Magnitude {
    pub const MIN: Magnitude = Magnitude(-(1 << 62));
    pub const MAX: Magnitude = Magnitude((1 << 62) - 1);
    pub const ZERO: Magnitude = Magnitude(0);

    pub fn new(value: i64) -> Result<Self, DomainError> {
        Self::from_wide(i128::from(value))
    }

    fn from_wide(value: i128) -> Result<Self, DomainError> {
        if value < i128::from(Self::MIN.0) || value > i128::from(Self::MAX.0) {
            Err(DomainError::MagnitudeOutOfRange(value))
        } else {
            Ok(Magnitude(value as i64))
        }
    }

    pub fn value(self) -> i64 {
        self.0
    }

    pub fn checked_add(self, rhs: Magnitude) -> Result<Magnitude, DomainError> {
        Self::from_wide(i128::from(self.0) + i128::from(rhs.0))
            .map_err(|_| DomainError::MagnitudeOverflow)
    }

    pub fn checked_sub(self, rhs: Magnitude) -> Result<Magnitude, DomainError> {
        Self::from_wide(i128::from(self.0) - i128::from(rhs.0))
            .map_err(|_| DomainError::MagnitudeOverflow)
    }

    /// Absolute difference. Always representable as a `u64` for in-range values.
    pub fn abs_diff(self, rhs: Magnitude) -> u64 {
        self.0.abs_diff(rhs.0)
    }
}

impl TryFrom<i64> for Magnitude {
    type Error = DomainError;

    fn try_from(value: i64) -> Result<Self, Self::Error> {
        Magnitude::new(value)
    }
}

impl From<Magnitude> for i64 {
    fn from(m: Magnitude) -> i64 {
        m.0
    }
}

impl fmt::Display for Magnitude {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Whether a fact is offered as a question or as an answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FactForm {
    Question,
    Answer,
}

impl FactForm {
    pub fn as_str(self) -> &'static str {
        match self {
            FactForm::Question => "QUESTION",
            FactForm::Answer => "ANSWER",
        }
    }
}

/// Atomic unit of knowledge exchanged between users.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Fact {
    pub fact_id: String,
    pub domain_id: String,
    pub form: FactForm,
    pub label: String,
    pub magnitude: Magnitude,
}

impl Fact {
    pub fn new(
        fact_id: impl Into<String>,
        domain_id: impl Into<String>,
        form: FactForm,
        label: impl Into<String>,
        magnitude: Magnitude,
    ) -> Result<Self, DomainError> {
        let fact_id = fact_id.into();
        let domain_id = domain_id.into();
        check_token(&fact_id)?;
        check_token(&domain_id)?;
        Ok(Fact {
            fact_id,
            domain_id,
            form,
            label: label.into(),
            magnitude,
        })
    }

    /// The fact's outcome: the only value that takes part in cross-domain comparison.
    pub fn outcome(&self) -> Magnitude {
        self.magnitude
    }

    pub fn with_form(mut self, form: FactForm) -> Self {
        self.form = form;
        self
    }
}

/// One clause of a [`DefiningProperty`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PropertyAtom {
    /// `lo <= m <= hi` when inclusive, otherwise `lo <= m < hi`.
    MagnitudeInRange {
        lo: Magnitude,
        hi: Magnitude,
        #[serde(default = "default_true")]
        inclusive: bool,
    },
    LabelHasPrefix {
        prefix: String,
    },
    AlwaysTrue,
}

fn default_true() -> bool {
    true
}

impl PropertyAtom {
    pub fn holds(&self, fact: &Fact) -> bool {
        match self {
            PropertyAtom::MagnitudeInRange { lo, hi, inclusive } => {
                let m = fact.magnitude;
                m >= *lo && if *inclusive { m <= *hi } else { m < *hi }
            }
            PropertyAtom::LabelHasPrefix { prefix } => fact.label.starts_with(prefix.as_str()),
            PropertyAtom::AlwaysTrue => true,
        }
    }
}

/// Conjunction of [`PropertyAtom`]s. The empty conjunction always holds.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DefiningProperty {
    pub atoms: Vec<PropertyAtom>,
}

impl DefiningProperty {
    pub fn always_true() -> Self {
        Self::default()
    }

    pub fn magnitude_in_range(lo: i64, hi: i64) -> Result<Self, DomainError> {
        Ok(Self {
            atoms: vec![PropertyAtom::MagnitudeInRange {
                lo: Magnitude::new(lo)?,
                hi: Magnitude::new(hi)?,
                inclusive: true,
            }],
        })
    }

    pub fn label_has_prefix(prefix: impl Into<String>) -> Self {
        Self {
            atoms: vec![PropertyAtom::LabelHasPrefix {
                prefix: prefix.into(),
            }],
        }
    }

    pub fn and(mut self, atom: PropertyAtom) -> Self {
        self.atoms.push(atom);
        self
    }

    pub fn holds(&self, fact: &Fact) -> bool {
        self.atoms.iter().all(|atom| atom.holds(fact))
    }

    /// Rejects ranges that no magnitude can satisfy.
    pub fn validate(&self) -> Result<(), DomainError> {
        for atom in &self.atoms {
            if let PropertyAtom::MagnitudeInRange { lo, hi, inclusive } = atom {
                if lo > hi || (!inclusive && lo == hi) {
                    return Err(DomainError::EmptyRange { lo: *lo, hi: *hi });
                }
            }
        }
        Ok(())
    }
}

/// How an operator derives the magnitude of its result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MagnitudeRule {
    Sum,
    Min,
    Max,
    First,
}

impl MagnitudeRule {
    pub fn apply(self, a: Magnitude, b: Magnitude) -> Result<Magnitude, DomainError> {
        match self {
            MagnitudeRule::Sum => a.checked_add(b),
            MagnitudeRule::Min => Ok(a.min(b)),
            MagnitudeRule::Max => Ok(a.max(b)),
            MagnitudeRule::First => Ok(a),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OperatorDef {
    pub op_name: String,
    pub magnitude_rule: MagnitudeRule,
}

/// A named collection of facts sharing a defining property.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Domain {
    domain_id: String,
    name: String,
    property: DefiningProperty,
    native_facts: Vec<Fact>,
    absorbed_facts: Vec<Fact>,
    operators: Vec<OperatorDef>,
}

impl Domain {
    pub fn new(
        domain_id: impl Into<String>,
        name: impl Into<String>,
        property: DefiningProperty,
    ) -> Result<Self, DomainError> {
        let domain_id = domain_id.into();
        check_token(&domain_id)?;
        Ok(Domain {
            domain_id,
            name: name.into(),
            property,
            native_facts: Vec::new(),
            absorbed_facts: Vec::new(),
            operators: Vec::new(),
        })
    }

    pub fn id(&self) -> &str {
        &self.domain_id
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn property(&self) -> &DefiningProperty {
        &self.property
    }

    pub fn native_facts(&self) -> &[Fact] {
        &self.native_facts
    }

    pub fn absorbed_facts(&self) -> &[Fact] {
        &self.absorbed_facts
    }

    pub fn operators(&self) -> &[OperatorDef] {
        &self.operators
    }

    /// Native facts followed by absorbed facts, each in insertion order.
    pub fn members(&self) -> impl Iterator<Item = &Fact> {
        self.native_facts.iter().chain(self.absorbed_facts.iter())
    }

    pub fn len(&self) -> usize {
        self.native_facts.len() + self.absorbed_facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn fact(&self, fact_id: &str) -> Option<&Fact> {
        self.members().find(|f| f.fact_id == fact_id)
    }

    pub fn contains(&self, fact: &Fact) -> bool {
        self.fact(&fact.fact_id) == Some(fact)
    }

    /// Appends a native fact. The domain is left untouched on error.
    pub fn add_fact(&mut self, fact: Fact) -> Result<(), DomainError> {
        if fact.domain_id != self.domain_id {
            return Err(DomainError::DomainMismatch {
                expected: self.domain_id.clone(),
                found: fact.domain_id,
            });
        }
        check_token(&fact.fact_id)?;
        if self.fact(&fact.fact_id).is_some() {
            return Err(DomainError::DuplicateFactId {
                domain_id: self.domain_id.clone(),
                fact_id: fact.fact_id,
            });
        }
        if !self.property.holds(&fact) {
            return Err(DomainError::PropertyViolation {
                domain_id: self.domain_id.clone(),
                fact_id: fact.fact_id,
            });
        }
        self.native_facts.push(fact);
        Ok(())
    }

    /// Builder-style [`Domain::add_fact`].
    pub fn with_fact(mut self, fact: Fact) -> Result<Self, DomainError> {
        self.add_fact(fact)?;
        Ok(self)
    }

    pub fn add_operator(&mut self, op: OperatorDef) -> Result<(), DomainError> {
        check_token(&op.op_name)?;
        if self.operators.iter().any(|o| o.op_name == op.op_name) {
            return Err(DomainError::DuplicateOperator {
                domain_id: self.domain_id.clone(),
                op_name: op.op_name,
            });
        }
        self.operators.push(op);
        Ok(())
    }

    /// Adds a resultant fact to the absorbed annex with set-union semantics:
    /// returns `false` (and changes nothing) when the fact id is already known.
    ///
    /// Absorbed facts are exempt from the defining property.
    pub fn absorb(&mut self, fact: Fact) -> bool {
        if self.fact(&fact.fact_id).is_some() {
            return false;
        }
        self.absorbed_facts.push(fact);
        true
    }

    /// Applies a domain operator to two members, yielding a new fact in this
    /// domain. The result is not inserted.
    pub fn apply_operator(&self, op_name: &str, f1: &Fact, f2: &Fact) -> Result<Fact, DomainError> {
        let op = self
            .operators
            .iter()
            .find(|o| o.op_name == op_name)
            .ok_or_else(|| DomainError::UnknownOperator {
                domain_id: self.domain_id.clone(),
                op_name: op_name.to_owned(),
            })?;
        for f in [f1, f2] {
            if !self.contains(f) {
                return Err(DomainError::NotAMember {
                    domain_id: self.domain_id.clone(),
                    fact_id: f.fact_id.clone(),
                });
            }
        }
        let magnitude = op.magnitude_rule.apply(f1.magnitude, f2.magnitude)?;
        let result = Fact {
            fact_id: format!("{}({},{})", op.op_name, f1.fact_id, f2.fact_id),
            domain_id: self.domain_id.clone(),
            form: FactForm::Answer,
            label: format!("{}({}, {})", op.op_name, f1.label, f2.label),
            magnitude,
        };
        if !self.property.holds(&result) {
            return Err(DomainError::ClosureViolation {
                domain_id: self.domain_id.clone(),
                op_name: op.op_name.clone(),
                fact_id: result.fact_id,
            });
        }
        Ok(result)
    }
}

/// Whether the `k`-th native facts (insertion order, 0-based) of two domains
/// have outcomes within `epsilon` of each other.
pub fn domains_comparable_at(
    d_i: &Domain,
    d_j: &Domain,
    k: usize,
    epsilon: Magnitude,
) -> Result<bool, DomainError> {
    let len = d_i.native_facts.len().min(d_j.native_facts.len());
    if k >= len {
        return Err(DomainError::IndexOutOfRange { index: k, len });
    }
    let tolerance = u64::try_from(epsilon.value()).map_err(|_| DomainError::MagnitudeOverflow)?;
    Ok(d_i.native_facts[k]
        .outcome()
        .abs_diff(d_j.native_facts[k].outcome())
        <= tolerance)
}

/// How a [`DomainMapping`] folds several source magnitudes into one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Aggregator {
    Sum,
    Min,
    Max,
    Identity,
}

impl Aggregator {
    pub fn aggregate(self, magnitudes: &[Magnitude]) -> Result<Magnitude, DomainError> {
        let (first, rest) = magnitudes
            .split_first()
            .ok_or_else(|| DomainError::InvalidMappingEntry("no source facts".into()))?;
        match self {
            Aggregator::Identity if rest.is_empty() => Ok(*first),
            Aggregator::Identity => Err(DomainError::InvalidMappingEntry(
                "identity entries take exactly one source fact".into(),
            )),
            Aggregator::Sum => rest.iter().try_fold(*first, |acc, m| acc.checked_add(*m)),
            Aggregator::Min => Ok(rest.iter().fold(*first, |acc, m| acc.min(*m))),
            Aggregator::Max => Ok(rest.iter().fold(*first, |acc, m| acc.max(*m))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappingEntry {
    /// Source fact ids, sorted so that lookup is multiset equality.
    pub sources: Vec<String>,
    pub target: Fact,
}

/// Magnitude-preserving translation of facts from one domain into another.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainMapping {
    mapping_id: String,
    source_domain_id: String,
    target_domain_id: String,
    aggregator: Aggregator,
    entries: Vec<MappingEntry>,
}

impl DomainMapping {
    pub fn new(
        mapping_id: impl Into<String>,
        source: &Domain,
        target: &Domain,
        aggregator: Aggregator,
    ) -> Result<Self, DomainError> {
        let mapping_id = mapping_id.into();
        check_token(&mapping_id)?;
        Ok(DomainMapping {
            mapping_id,
            source_domain_id: source.domain_id.clone(),
            target_domain_id: target.domain_id.clone(),
            aggregator,
            entries: Vec::new(),
        })
    }

    pub fn id(&self) -> &str {
        &self.mapping_id
    }

    pub fn source_domain_id(&self) -> &str {
        &self.source_domain_id
    }

    pub fn target_domain_id(&self) -> &str {
        &self.target_domain_id
    }

    pub fn aggregator(&self) -> Aggregator {
        self.aggregator
    }

    pub fn entries(&self) -> &[MappingEntry] {
        &self.entries
    }

    /// Adds `sources -> target`, resolving ids against the two domains and
    /// checking that the aggregator reproduces the target magnitude.
    pub fn add_entry(
        &mut self,
        source: &Domain,
        target: &Domain,
        source_ids: &[&str],
        target_id: &str,
    ) -> Result<(), DomainError> {
        for (domain, expected) in [
            (source, &self.source_domain_id),
            (target, &self.target_domain_id),
        ] {
            if domain.domain_id != *expected {
                return Err(DomainError::DomainMismatch {
                    expected: expected.clone(),
                    found: domain.domain_id.clone(),
                });
            }
        }
        let magnitudes = source_ids
            .iter()
            .map(|id| {
                source
                    .fact(id)
                    .map(|f| f.magnitude)
                    .ok_or_else(|| DomainError::NotAMember {
                        domain_id: source.domain_id.clone(),
                        fact_id: (*id).to_owned(),
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let target_fact = target
            .fact(target_id)
            .ok_or_else(|| DomainError::NotAMember {
                domain_id: target.domain_id.clone(),
                fact_id: target_id.to_owned(),
            })?
            .clone();
        let mut sources: Vec<String> = source_ids.iter().map(|s| (*s).to_owned()).collect();
        sources.sort();
        if self.entries.iter().any(|e| e.sources == sources) {
            return Err(DomainError::InvalidMappingEntry(format!(
                "duplicate source multiset {sources:?}"
            )));
        }
        if self.aggregator.aggregate(&magnitudes)? != target_fact.magnitude {
            return Err(DomainError::MappingInconsistent {
                sources,
                target: target_fact.fact_id,
            });
        }
        self.entries.push(MappingEntry {
            sources,
            target: target_fact,
        });
        Ok(())
    }

    /// Maps a multiset of source facts to its target fact, with exact
    /// magnitude conservation.
    pub fn map_facts(&self, source_facts: &[Fact]) -> Result<Fact, DomainError> {
        self.map_facts_within(source_facts, Magnitude::ZERO)
    }

    /// Like [`DomainMapping::map_facts`], accepting an aggregate that differs
    /// from the target magnitude by at most `epsilon`.
    pub fn map_facts_within(
        &self,
        source_facts: &[Fact],
        epsilon: Magnitude,
    ) -> Result<Fact, DomainError> {
        if let Some(f) = source_facts
            .iter()
            .find(|f| f.domain_id != self.source_domain_id)
        {
            return Err(DomainError::DomainMismatch {
                expected: self.source_domain_id.clone(),
                found: f.domain_id.clone(),
            });
        }
        let mut ids: Vec<String> = source_facts.iter().map(|f| f.fact_id.clone()).collect();
        ids.sort();
        let entry = self
            .entries
            .iter()
            .find(|e| e.sources == ids)
            .ok_or(DomainError::MappingIncomplete(ids))?;
        let magnitudes: Vec<Magnitude> = source_facts.iter().map(|f| f.magnitude).collect();
        let aggregate = self.aggregator.aggregate(&magnitudes)?;
        let tolerance =
            u64::try_from(epsilon.value()).map_err(|_| DomainError::MagnitudeOverflow)?;
        if aggregate.abs_diff(entry.target.magnitude) > tolerance {
            return Err(DomainError::MappingInconsistent {
                sources: entry.sources.clone(),
                target: entry.target.fact_id.clone(),
            });
        }
        Ok(entry.target.clone())
    }
}

//! Scenario files: the JSON document declaring domains, mappings, agents,
//! the session template and experiment parameters.

use std::path::Path;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::agents::{make_impostor, FormRule, PartyAgent, SelectionPolicy, Strategy};
use crate::comparison::{Combiner, TargetSet};
use crate::domain::{
    Aggregator, DefiningProperty, Domain, DomainMapping, Fact, FactForm, Magnitude, MagnitudeRule,
    OperatorDef,
};
use crate::protocol::{reduce_nparty, PairPolicy, ProtocolMode, SessionConfig};

use super::HarnessError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: String,
    domains: Vec<DomainSpec>,
    #[serde(default)]
    mappings: Vec<MappingSpec>,
    agents: Vec<AgentSpec>,
    session: SessionSpec,
    #[serde(default)]
    pairing: Option<PairingSpec>,
    #[serde(default)]
    experiment: ExperimentFileSpec,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DomainSpec {
    id: String,
    name: String,
    #[serde(default)]
    property: DefiningProperty,
    #[serde(default)]
    operators: Vec<OperatorSpec>,
    facts: Vec<FactSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OperatorSpec {
    name: String,
    rule: MagnitudeRule,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FactSpec {
    id: String,
    label: String,
    magnitude: Magnitude,
    #[serde(default = "answer")]
    form: FactForm,
}

fn answer() -> FactForm {
    FactForm::Answer
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MappingSpec {
    id: String,
    source: String,
    target: String,
    aggregator: Aggregator,
    entries: Vec<EntrySpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntrySpec {
    sources: Vec<String>,
    target: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AgentSpec {
    user: String,
    domain: String,
    policy: PolicySpec,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    target: TargetSpec,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
enum FormRuleSpec {
    #[default]
    Alternate,
    FixedQuestion,
    FixedAnswer,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum PolicySpec {
    Scripted {
        script: Vec<String>,
        #[serde(default)]
        form_rule: FormRuleSpec,
    },
    RoundRobin {
        #[serde(default)]
        form_rule: FormRuleSpec,
    },
    RandomSeeded {
        #[serde(default)]
        form_rule: FormRuleSpec,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TargetSpec {
    accepted: Vec<Magnitude>,
    #[serde(default)]
    predicate: DefiningProperty,
}

impl Default for TargetSpec {
    fn default() -> Self {
        TargetSpec {
            accepted: vec![Magnitude::ZERO],
            predicate: DefiningProperty::default(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SessionSpec {
    id: String,
    i_threshold: u64,
    j_threshold: u64,
    r_max: u64,
    #[serde(default)]
    mode: ModeSpec,
    #[serde(default)]
    combiner: CombinerSpec,
    #[serde(default)]
    epsilon: Magnitude,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
enum ModeSpec {
    #[default]
    PaperLiteral,
    BothThresholds,
}

#[derive(Debug, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE", deny_unknown_fields)]
enum CombinerSpec {
    #[default]
    Difference,
    Sum,
    MapThenDifference {
        mapping: String,
    },
}

#[derive(Debug, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case", deny_unknown_fields)]
enum PairingSpec {
    Full {
        users: Vec<String>,
    },
    Explicit {
        users: Vec<String>,
        pairs: Vec<(String, String)>,
    },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentFileSpec {
    #[serde(default)]
    base_seed: u64,
    #[serde(default)]
    trials: Option<u64>,
    #[serde(default)]
    t_min: Option<u64>,
    #[serde(default)]
    t_max: Option<u64>,
    #[serde(default)]
    impostor: Option<ImpostorFileSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ImpostorFileSpec {
    impersonates: String,
    overlap: f64,
    decoy_offset: Magnitude,
    #[serde(default)]
    seed: Option<u64>,
}

/// Adversary taking the place of one legitimate agent.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpostorSpec {
    /// User id of the agent being impersonated.
    pub impersonates: String,
    pub overlap: f64,
    pub decoy_offset: Magnitude,
    /// Defaults to the impersonated agent's seed.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub base_seed: u64,
    pub trials: u64,
    pub t_min: u64,
    pub t_max: u64,
    pub impostor: Option<ImpostorSpec>,
}

/// Protocol parameters shared by every session the scenario declares.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionTemplate {
    pub session_id: String,
    pub i_threshold: u64,
    pub j_threshold: u64,
    pub r_max: u64,
    pub mode: ProtocolMode,
    pub combiner: Combiner,
    pub epsilon: Magnitude,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionKind {
    Legitimate,
    Impostor,
}

/// One runnable session: a config plus the two agents, initiator first.
#[derive(Debug, Clone)]
pub struct SessionPlan {
    pub kind: SessionKind,
    pub config: SessionConfig,
    pub agent_i: PartyAgent,
    pub agent_j: PartyAgent,
}

impl SessionPlan {
    /// Shifts both agents' seeds for trial-indexed repetitions.
    pub fn with_seed_offset(mut self, offset: u64) -> Self {
        let si = self.agent_i.seed().wrapping_add(offset);
        let sj = self.agent_j.seed().wrapping_add(offset);
        self.agent_i = self.agent_i.with_seed(si);
        self.agent_j = self.agent_j.with_seed(sj);
        self
    }

    pub fn with_thresholds(mut self, i_threshold: u64, j_threshold: u64) -> Self {
        self.config.i_threshold = i_threshold;
        self.config.j_threshold = j_threshold;
        self
    }
}

/// A fully validated scenario.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub name: String,
    /// Hex SHA-256 of the scenario file bytes.
    pub digest: String,
    pub domains: Vec<Domain>,
    pub mappings: Vec<DomainMapping>,
    pub agents: Vec<PartyAgent>,
    pub session: SessionTemplate,
    /// Expanded unordered pairs of user ids, initiator first.
    pub pairs: Vec<(String, String)>,
    pub experiment: ExperimentSpec,
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, HarnessError> {
    let bytes = std::fs::read(path).map_err(|e| HarnessError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_scenario(&bytes, &path.display().to_string())
}

/// Parses and validates scenario text; `file` is used in diagnostics only.
pub fn parse_scenario(bytes: &[u8], file: &str) -> Result<ScenarioConfig, HarnessError> {
    let raw: ScenarioFile = serde_json::from_slice(bytes).map_err(|e| HarnessError::Config {
        file: file.to_owned(),
        line: (e.line() > 0).then_some(e.line()),
        field: String::new(),
        message: e.to_string(),
    })?;
    let text = String::from_utf8_lossy(bytes);
    let mut v = Validator { file, text: &text };
    let mut config = v.build(raw)?;
    config.digest = hex::encode(Sha256::digest(bytes));
    Ok(config)
}

struct Validator<'a> {
    file: &'a str,
    text: &'a str,
}

impl Validator<'_> {
    /// Line of the first occurrence of `"needle"` in the file, for diagnostics.
    fn line_of(&self, needle: &str) -> Option<usize> {
        let quoted = format!("\"{needle}\"");
        let offset = self.text.find(&quoted)?;
        Some(self.text[..offset].matches('\n').count() + 1)
    }

    fn config_err(
        &self,
        field: impl Into<String>,
        near: &str,
        message: impl ToString,
    ) -> HarnessError {
        HarnessError::Config {
            file: self.file.to_owned(),
            line: self.line_of(near),
            field: field.into(),
            message: message.to_string(),
        }
    }

    fn unresolved(&self, field: impl Into<String>, reference: &str) -> HarnessError {
        HarnessError::UnresolvedReference {
            file: self.file.to_owned(),
            line: self.line_of(reference),
            field: field.into(),
            reference: reference.to_owned(),
        }
    }

    fn build(&mut self, raw: ScenarioFile) -> Result<ScenarioConfig, HarnessError> {
        let domains = self.domains(&raw.domains)?;
        let domain_by_id = |id: &str| domains.iter().find(|d| d.id() == id);

        let mut mappings: Vec<DomainMapping> = Vec::new();
        for (n, spec) in raw.mappings.iter().enumerate() {
            let field = format!("mappings[{n}]");
            let source = domain_by_id(&spec.source)
                .ok_or_else(|| self.unresolved(format!("{field}.source"), &spec.source))?;
            let target = domain_by_id(&spec.target)
                .ok_or_else(|| self.unresolved(format!("{field}.target"), &spec.target))?;
            if mappings.iter().any(|m| m.id() == spec.id) {
                return Err(self.config_err(
                    format!("{field}.id"),
                    &spec.id,
                    "duplicate mapping id",
                ));
            }
            let mut mapping = DomainMapping::new(&spec.id, source, target, spec.aggregator)
                .map_err(|e| self.config_err(format!("{field}.id"), &spec.id, e))?;
            for (k, entry) in spec.entries.iter().enumerate() {
                let ef = format!("{field}.entries[{k}]");
                for s in &entry.sources {
                    if source.fact(s).is_none() {
                        return Err(self.unresolved(format!("{ef}.sources"), s));
                    }
                }
                if target.fact(&entry.target).is_none() {
                    return Err(self.unresolved(format!("{ef}.target"), &entry.target));
                }
                let ids: Vec<&str> = entry.sources.iter().map(String::as_str).collect();
                mapping
                    .add_entry(source, target, &ids, &entry.target)
                    .map_err(|e| self.config_err(ef.clone(), &entry.target, e))?;
            }
            mappings.push(mapping);
        }

        let mut agents: Vec<PartyAgent> = Vec::new();
        for (n, spec) in raw.agents.iter().enumerate() {
            let field = format!("agents[{n}]");
            if !file_safe(&spec.user) {
                return Err(self.config_err(
                    format!("{field}.user"),
                    &spec.user,
                    "user ids name transcript files and must be file-safe",
                ));
            }
            if agents.iter().any(|a| a.user_id() == spec.user) {
                return Err(self.config_err(
                    format!("{field}.user"),
                    &spec.user,
                    "duplicate user id",
                ));
            }
            let domain = domain_by_id(&spec.domain)
                .ok_or_else(|| self.unresolved(format!("{field}.domain"), &spec.domain))?
                .clone();
            let policy = policy_from(&spec.policy);
            if let Strategy::Scripted(ids) = &policy.strategy {
                if let Some(missing) = ids.iter().find(|id| domain.fact(id).is_none()) {
                    return Err(self.unresolved(format!("{field}.policy.script"), missing));
                }
            }
            let target = TargetSet::new(spec.target.accepted.iter().copied())
                .with_predicate(spec.target.predicate.clone());
            target
                .validate()
                .map_err(|e| self.config_err(format!("{field}.target"), &spec.user, e))?;
            let agent = PartyAgent::new(&spec.user, domain, target, policy, spec.seed)
                .map_err(|e| self.config_err(field.clone(), &spec.user, e))?;
            agents.push(agent);
        }

        let session = self.session(&raw.session, &mappings)?;
        let pairs = self.pairs(raw.pairing.as_ref(), &agents)?;
        let experiment = self.experiment(&raw.experiment, &agents, &pairs)?;

        Ok(ScenarioConfig {
            name: raw.name,
            digest: String::new(),
            domains,
            mappings,
            agents,
            session,
            pairs,
            experiment,
        })
    }

    fn domains(&self, specs: &[DomainSpec]) -> Result<Vec<Domain>, HarnessError> {
        if specs.is_empty() {
            return Err(self.config_err("domains", "domains", "at least one domain is required"));
        }
        let mut out: Vec<Domain> = Vec::new();
        for (n, spec) in specs.iter().enumerate() {
            let field = format!("domains[{n}]");
            if out.iter().any(|d| d.id() == spec.id) {
                return Err(self.config_err(
                    format!("{field}.id"),
                    &spec.id,
                    "duplicate domain id",
                ));
            }
            spec.property
                .validate()
                .map_err(|e| self.config_err(format!("{field}.property"), &spec.id, e))?;
            let mut domain = Domain::new(&spec.id, &spec.name, spec.property.clone())
                .map_err(|e| self.config_err(format!("{field}.id"), &spec.id, e))?;
            for (k, op) in spec.operators.iter().enumerate() {
                domain
                    .add_operator(OperatorDef {
                        op_name: op.name.clone(),
                        magnitude_rule: op.rule,
                    })
                    .map_err(|e| self.config_err(format!("{field}.operators[{k}]"), &op.name, e))?;
            }
            for (k, f) in spec.facts.iter().enumerate() {
                let fact = Fact::new(&f.id, &spec.id, f.form, &f.label, f.magnitude)
                    .map_err(|e| self.config_err(format!("{field}.facts[{k}].id"), &f.id, e))?;
                domain
                    .add_fact(fact)
                    .map_err(|e| self.config_err(format!("{field}.facts[{k}]"), &f.id, e))?;
            }
            out.push(domain);
        }
        Ok(out)
    }

    fn session(
        &self,
        spec: &SessionSpec,
        mappings: &[DomainMapping],
    ) -> Result<SessionTemplate, HarnessError> {
        if !file_safe(&spec.id) {
            return Err(self.config_err(
                "session.id",
                &spec.id,
                "session ids name transcript files and must be file-safe",
            ));
        }
        let combiner = match &spec.combiner {
            CombinerSpec::Difference => Combiner::Difference,
            CombinerSpec::Sum => Combiner::Sum,
            CombinerSpec::MapThenDifference { mapping } => Combiner::MapThenDifference(
                mappings
                    .iter()
                    .find(|m| m.id() == mapping)
                    .ok_or_else(|| self.unresolved("session.combiner.mapping", mapping))?
                    .clone(),
            ),
        };
        let template = SessionTemplate {
            session_id: spec.id.clone(),
            i_threshold: spec.i_threshold,
            j_threshold: spec.j_threshold,
            r_max: spec.r_max,
            mode: match spec.mode {
                ModeSpec::PaperLiteral => ProtocolMode::PaperLiteral,
                ModeSpec::BothThresholds => ProtocolMode::BothThresholds,
            },
            combiner,
            epsilon: spec.epsilon,
        };
        template
            .config(&spec.id)
            .validate()
            .map_err(|e| self.config_err("session", &spec.id, e))?;
        Ok(template)
    }

    fn pairs(
        &self,
        spec: Option<&PairingSpec>,
        agents: &[PartyAgent],
    ) -> Result<Vec<(String, String)>, HarnessError> {
        let Some(spec) = spec else {
            if agents.len() != 2 {
                return Err(self.config_err(
                    "agents",
                    "agents",
                    format!(
                        "exactly two agents are required without a pairing section, found {}",
                        agents.len()
                    ),
                ));
            }
            return Ok(vec![(
                agents[0].user_id().to_owned(),
                agents[1].user_id().to_owned(),
            )]);
        };
        let (users, policy) = match spec {
            PairingSpec::Full { users } => (users, PairPolicy::Full),
            PairingSpec::Explicit { users, pairs } => (users, PairPolicy::Explicit(pairs.clone())),
        };
        for u in users {
            if !agents.iter().any(|a| a.user_id() == u) {
                return Err(self.unresolved("pairing.users", u));
            }
        }
        reduce_nparty(users, &policy).map_err(|e| self.config_err("pairing", "pairing", e))
    }

    fn experiment(
        &self,
        spec: &ExperimentFileSpec,
        agents: &[PartyAgent],
        pairs: &[(String, String)],
    ) -> Result<ExperimentSpec, HarnessError> {
        let trials = spec.trials.unwrap_or(1000);
        if trials == 0 {
            return Err(self.config_err(
                "experiment.trials",
                "trials",
                "trials must be at least 1",
            ));
        }
        let t_min = spec.t_min.unwrap_or(0);
        let t_max = spec.t_max.unwrap_or(t_min);
        if t_min > t_max {
            return Err(self.config_err("experiment.t_min", "t_min", "t_min exceeds t_max"));
        }
        let impostor = match &spec.impostor {
            None => None,
            Some(imp) => {
                let field = "experiment.impostor.impersonates";
                let reference = agents
                    .iter()
                    .find(|a| a.user_id() == imp.impersonates)
                    .ok_or_else(|| self.unresolved(field, &imp.impersonates))?;
                if !pairs
                    .iter()
                    .any(|(a, b)| *a == imp.impersonates || *b == imp.impersonates)
                {
                    return Err(self.config_err(
                        field,
                        &imp.impersonates,
                        "impersonated user takes part in no session",
                    ));
                }
                let spec = ImpostorSpec {
                    impersonates: imp.impersonates.clone(),
                    overlap: imp.overlap,
                    decoy_offset: imp.decoy_offset,
                    seed: imp.seed,
                };
                // surfaces overlap/offset/script problems at load time
                build_impostor(reference, &spec)
                    .map_err(|e| self.config_err("experiment.impostor", &imp.impersonates, e))?;
                Some(spec)
            }
        };
        Ok(ExperimentSpec {
            base_seed: spec.base_seed,
            trials,
            t_min,
            t_max,
            impostor,
        })
    }
}

/// ASCII letters, digits, `-`, `_` and `.`, not starting with a dot.
fn file_safe(id: &str) -> bool {
    !id.is_empty()
        && !id.starts_with('.')
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

fn policy_from(spec: &PolicySpec) -> SelectionPolicy {
    let (strategy, rule) = match spec {
        PolicySpec::Scripted { script, form_rule } => {
            (Strategy::Scripted(script.clone()), form_rule)
        }
        PolicySpec::RoundRobin { form_rule } => (Strategy::RoundRobin, form_rule),
        PolicySpec::RandomSeeded { form_rule } => (Strategy::RandomSeeded, form_rule),
    };
    let form_rule = match rule {
        FormRuleSpec::Alternate => FormRule::Alternate,
        FormRuleSpec::FixedQuestion => FormRule::FixedQuestion,
        FormRuleSpec::FixedAnswer => FormRule::FixedAnswer,
    };
    SelectionPolicy {
        strategy,
        form_rule,
    }
}

/// The impostor claims the impersonated user's identity and reuses its
/// policy and target view; only its domain knowledge differs.
pub(crate) fn build_impostor(
    reference: &PartyAgent,
    spec: &ImpostorSpec,
) -> Result<PartyAgent, crate::agents::AgentError> {
    let seed = spec.seed.unwrap_or(reference.seed());
    make_impostor(reference.domain(), spec.overlap, seed, spec.decoy_offset)?
        .with_user_id(reference.user_id())?
        .with_target_view(reference.target_view().clone())
        .with_policy(reference.policy().clone())
}

impl SessionTemplate {
    pub fn config(&self, session_id: &str) -> SessionConfig {
        SessionConfig {
            session_id: session_id.to_owned(),
            i_threshold: self.i_threshold,
            j_threshold: self.j_threshold,
            r_max: self.r_max,
            mode: self.mode,
            combiner: self.combiner.clone(),
            target_i: TargetSet::zero(),
            target_j: TargetSet::zero(),
            epsilon: self.epsilon,
        }
    }
}

impl ScenarioConfig {
    pub fn agent(&self, user_id: &str) -> Option<&PartyAgent> {
        self.agents.iter().find(|a| a.user_id() == user_id)
    }

    fn pair_session_id(&self, a: &str, b: &str) -> String {
        if self.pairs.len() == 1 {
            self.session.session_id.clone()
        } else {
            format!("{}.{a}-{b}", self.session.session_id)
        }
    }

    fn plan(
        &self,
        kind: SessionKind,
        session_id: String,
        agent_i: PartyAgent,
        agent_j: PartyAgent,
    ) -> SessionPlan {
        let mut config = self.session.config(&session_id);
        config.target_i = agent_i.target_view().clone();
        config.target_j = agent_j.target_view().clone();
        SessionPlan {
            kind,
            config,
            agent_i,
            agent_j,
        }
    }

    /// Every legitimate pairwise session, in pairing order.
    pub fn legitimate_plans(&self) -> Vec<SessionPlan> {
        self.pairs
            .iter()
            .map(|(a, b)| {
                let ai = self.agent(a).expect("validated pair").clone();
                let aj = self.agent(b).expect("validated pair").clone();
                self.plan(SessionKind::Legitimate, self.pair_session_id(a, b), ai, aj)
            })
            .collect()
    }

    /// The legitimate session the impostor attacks: the first pair containing
    /// the impersonated user, or the first pair when there is no impostor.
    pub fn primary_plan(&self) -> SessionPlan {
        let target = self
            .experiment
            .impostor
            .as_ref()
            .map(|i| i.impersonates.as_str());
        let plans = self.legitimate_plans();
        let k = plans
            .iter()
            .position(|p| {
                Some(p.agent_i.user_id()) == target || Some(p.agent_j.user_id()) == target
            })
            .unwrap_or(0);
        plans.into_iter().nth(k).expect("at least one pair")
    }

    /// The primary session with the impersonated agent swapped for the impostor.
    pub fn impostor_plan(&self) -> Option<SessionPlan> {
        let spec = self.experiment.impostor.as_ref()?;
        let legit = self.primary_plan();
        let session_id = format!("{}.impostor", legit.config.session_id);
        let (mut ai, mut aj) = (legit.agent_i, legit.agent_j);
        if ai.user_id() == spec.impersonates {
            ai = build_impostor(&ai, spec).expect("validated impostor");
        } else {
            aj = build_impostor(&aj, spec).expect("validated impostor");
        }
        Some(self.plan(SessionKind::Impostor, session_id, ai, aj))
    }

    /// Every session `run` executes: all legitimate pairs, then the impostor session if declared.
    pub fn all_plans(&self) -> Vec<SessionPlan> {
        let mut plans = self.legitimate_plans();
        plans.extend(self.impostor_plan());
        plans
    }
}

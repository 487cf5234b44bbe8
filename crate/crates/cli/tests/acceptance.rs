//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use zeus_core::agents::{FormRule, PartyAgent, SelectionPolicy};
use zeus_core::codec::{
    decode_message, decode_transcript, encode_message, open_loopback_pair, Message,
};
use zeus_core::comparison::{Combiner, TargetSet};
use zeus_core::domain::{DefiningProperty, Domain, Fact, FactForm, Magnitude};
use zeus_core::harness::{
    load_scenario, monte_carlo_acceptance, oracle_acceptance, rational_to_f64, replay_messages,
    run_experiment, sweep_thresholds, ReplayError, ScenarioConfig,
};
use zeus_core::protocol::{
    init_session, reduce_nparty, run_session, FailureReason, PairPolicy, ProtocolMode,
    SessionConfig, SessionStatus,
};

type Outcome = Result<String, String>;

/// Name, runtime limit in seconds, check.
type Criterion = (&'static str, u64, fn() -> Outcome);

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn load(name: &str) -> ScenarioConfig {
    load_scenario(&fixture(name)).expect("fixture loads")
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("1 scripted tom_mary session", 1, c1_pseudocode_fidelity),
        ("2 asymmetric-threshold dead end", 1, c2_dead_end),
        ("3 counter synchronization", 10, c3_counter_sync),
        ("4 domain-growth exactness", 10, c4_domain_growth),
        ("5 oracle equivalence", 5, c5_oracle),
        ("6 FAR/FRR behaviour", 30, c6_rates),
        ("7 codec and replay", 10, c7_codec_replay),
        ("8 N-party reduction", 1, c8_nparty),
        ("9 determinism", 2, c9_determinism),
    ];
    let mut failed = 0;
    for (name, limit, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > Duration::from_secs(limit) => {
                Err(format!("{detail}; took {elapsed:.2?}, limit {limit} s"))
            }
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS criterion {name}: {detail} [{elapsed:.2?} / {limit} s]"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {name}: {why} [{elapsed:.2?} / {limit} s]");
            }
        }
    }
    println!("{} of 9 criteria passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn tom_mary_verdict(
    j_threshold: u64,
    mode: ProtocolMode,
) -> Result<(SessionStatus, u64, u64, usize), String> {
    let mut config = load("tom_mary.json");
    config.session.j_threshold = j_threshold;
    config.session.mode = mode;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let report = run_experiment(&config, dir.path()).map_err(|e| e.to_string())?;
    ensure(report.sessions.len() == 1, || {
        format!("{} sessions", report.sessions.len())
    })?;
    let s = &report.sessions[0];
    let status =
        SessionStatus::parse(&s.verdict).ok_or_else(|| format!("session error: {:?}", s.error))?;
    Ok((status, s.c_i, s.c_j, s.matched_rounds))
}

fn c1_pseudocode_fidelity() -> Outcome {
    let got = tom_mary_verdict(3, ProtocolMode::PaperLiteral)?;
    ensure(got == (SessionStatus::Done, 4, 4, 4), || {
        format!("got {got:?}")
    })?;
    Ok("DONE after 4 matching rounds, counters (4,4)".into())
}

fn c2_dead_end() -> Outcome {
    let literal = tom_mary_verdict(5, ProtocolMode::PaperLiteral)?;
    let expected = (
        SessionStatus::Failed(FailureReason::InsufficientConfidence),
        4,
        4,
        4,
    );
    ensure(literal == expected, || {
        format!("PAPER_LITERAL gave {literal:?}")
    })?;
    let both = tom_mary_verdict(5, ProtocolMode::BothThresholds)?;
    ensure(both == (SessionStatus::Done, 6, 6, 6), || {
        format!("BOTH_THRESHOLDS gave {both:?}")
    })?;
    Ok("(3,5) literal -> FAILED_INSUFFICIENT_CONFIDENCE (4,4); both-thresholds -> DONE after 6 (6,6)".into())
}

/// A randomly shaped session: domains, policies, seeds, thresholds and mode.
#[derive(Debug, Clone)]
struct RandomSession {
    agent_i: PartyAgent,
    agent_j: PartyAgent,
    config: SessionConfig,
}

fn arb_agent(user: &'static str) -> impl Strategy<Value = PartyAgent> {
    (
        prop::collection::vec(-3i64..=3, 1..6),
        0u8..3,
        prop::collection::vec(any::<prop::sample::Index>(), 1..5),
        0u8..3,
        any::<u64>(),
    )
        .prop_map(move |(mags, strategy, script, form, seed)| {
            let dom_id = format!("{user}_dom");
            let mut d = Domain::new(&dom_id, &dom_id, DefiningProperty::always_true()).unwrap();
            for (k, m) in mags.iter().enumerate() {
                let id = format!("{user}{k}");
                d.add_fact(
                    Fact::new(
                        &id,
                        &dom_id,
                        FactForm::Answer,
                        &id,
                        Magnitude::new(*m).unwrap(),
                    )
                    .unwrap(),
                )
                .unwrap();
            }
            let policy = match strategy {
                0 => SelectionPolicy::scripted(
                    script
                        .iter()
                        .map(|ix| format!("{user}{}", ix.index(mags.len()))),
                ),
                1 => SelectionPolicy::round_robin(),
                _ => SelectionPolicy::random_seeded(),
            };
            let rule = [
                FormRule::Alternate,
                FormRule::FixedQuestion,
                FormRule::FixedAnswer,
            ][form as usize];
            PartyAgent::new(
                user,
                d,
                TargetSet::zero(),
                policy.with_form_rule(rule),
                seed,
            )
            .unwrap()
        })
}

fn arb_session() -> impl Strategy<Value = RandomSession> {
    (
        arb_agent("ui"),
        arb_agent("uj"),
        0u64..5,
        0u64..5,
        1u64..12,
        any::<bool>(),
        any::<bool>(),
    )
        .prop_map(|(agent_i, agent_j, ti, tj, r_max, both, sum)| {
            let config = SessionConfig::new("rand", ti, tj, r_max)
                .with_mode(if both {
                    ProtocolMode::BothThresholds
                } else {
                    ProtocolMode::PaperLiteral
                })
                .with_combiner(if sum {
                    Combiner::Sum
                } else {
                    Combiner::Difference
                });
            RandomSession {
                agent_i,
                agent_j,
                config,
            }
        })
}

/// Runs `cases` generated sessions through the transport and applies `check`
/// to each; returns the number of sessions checked. The generator is seeded
/// identically on every call, so every caller sees the same sessions.
fn for_random_sessions(
    cases: u32,
    check: impl Fn(
        &RandomSession,
        &mut PartyAgent,
        &mut PartyAgent,
        &zeus_core::protocol::Transcript,
    ) -> Result<(), String>,
) -> Result<u32, String> {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner =
        TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner
        .run(&arb_session(), |s| {
            let (mut ai, mut aj) = (s.agent_i.clone(), s.agent_j.clone());
            let t = run_session(&mut ai, &mut aj, &s.config, open_loopback_pair())
                .map_err(|e| TestCaseError::fail(e.to_string()))?;
            check(&s, &mut ai, &mut aj, &t).map_err(TestCaseError::fail)
        })
        .map_err(|e| e.to_string())?;
    Ok(cases)
}

fn c3_counter_sync() -> Outcome {
    let n = for_random_sessions(1000, |_, _, _, t| {
        for r in &t.rounds {
            ensure(r.c_i_after == r.c_j_after, || {
                format!("round {}: ({}, {})", r.round, r.c_i_after, r.c_j_after)
            })?;
        }
        // both parties' reported ROUND_RESULTs agree too
        for m in &t.messages {
            if let Message::RoundResult {
                round, c_i, c_j, ..
            } = m
            {
                ensure(c_i == c_j, || {
                    format!("ROUND_RESULT round {round}: ({c_i}, {c_j})")
                })?;
            }
        }
        ensure(
            t.status != SessionStatus::Failed(FailureReason::ProtocolViolation),
            || "violation".into(),
        )
    })?;
    Ok(format!("{n} sessions, 0 violations"))
}

fn c4_domain_growth() -> Outcome {
    let n = for_random_sessions(1000, |s, ai, aj, t| {
        let matched = t.matched_rounds();
        ensure(ai.domain().absorbed_facts().len() == matched, || {
            format!(
                "initiator absorbed {} for {matched} matches",
                ai.domain().absorbed_facts().len()
            )
        })?;
        ensure(aj.domain().absorbed_facts().len() == matched, || {
            format!(
                "responder absorbed {} for {matched} matches",
                aj.domain().absorbed_facts().len()
            )
        })?;
        // re-run the recorded facts through the pure path with explicit domains
        let mut state = init_session(s.config.clone()).map_err(|e| e.to_string())?;
        let (mut di, mut dj) = (s.agent_i.domain().clone(), s.agent_j.domain().clone());
        for r in &t.rounds {
            let before = (di.clone(), dj.clone(), state.c_i(), state.c_j());
            let rec = state
                .step_round(&r.fact_i, &r.fact_j, &mut di, &mut dj)
                .map_err(|e| e.to_string())?;
            if rec.matched {
                ensure(
                    di.absorbed_facts().len() == before.0.absorbed_facts().len() + 1,
                    || "no growth".into(),
                )?;
            } else {
                ensure(
                    (di.clone(), dj.clone(), state.c_i(), state.c_j()) == before,
                    || format!("round {} changed state without a match", r.round),
                )?;
            }
        }
        ensure(&di == ai.domain() && &dj == aj.domain(), || {
            "pure and transported domains differ".into()
        })
    })?;
    Ok(format!("{n} sessions, 0 violations"))
}

fn c5_oracle() -> Outcome {
    let config = load("oracle_3x3.json");
    let plan = config.primary_plan();
    ensure(
        plan.agent_i.domain().len() == 3
            && plan.agent_j.domain().len() == 3
            && plan.config.r_max == 3,
        || "fixture is not 3x3 with r_max 3".into(),
    )?;
    let exact = oracle_acceptance(&config).map_err(|e| e.to_string())?;
    let estimate = monte_carlo_acceptance(&config, 10_000).map_err(|e| e.to_string())?;
    let diff = (rational_to_f64(&exact) - estimate).abs();
    ensure(diff <= 0.03, || {
        format!("exact {exact}, monte carlo {estimate:.4}, diff {diff:.4}")
    })?;
    Ok(format!(
        "exact {exact} = {:.4}, monte carlo {estimate:.4} over 10000, diff {diff:.4}",
        rational_to_f64(&exact)
    ))
}

fn c6_rates() -> Outcome {
    let config = load("sweep_impostor.json");
    ensure(
        config.experiment.impostor.as_ref().map(|i| i.overlap) == Some(0.5),
        || "overlap is not 0.5".into(),
    )?;
    let table = sweep_thresholds(&config, 1, 6, 500).map_err(|e| e.to_string())?;
    for w in table.rows.windows(2) {
        ensure(w[1].far <= w[0].far, || {
            format!(
                "FAR rises from t={} to t={}",
                w[0].threshold, w[1].threshold
            )
        })?;
        ensure(w[1].frr >= w[0].frr, || {
            format!(
                "FRR falls from t={} to t={}",
                w[0].threshold, w[1].threshold
            )
        })?;
    }

    let mut blind = config.clone();
    blind.experiment.impostor.as_mut().unwrap().overlap = 0.0;
    let blind_table = sweep_thresholds(&blind, 1, 6, 500).map_err(|e| e.to_string())?;
    ensure(blind_table.rows.iter().all(|r| r.far == 0.0), || {
        format!("overlap 0: {:?}", blind_table.rows)
    })?;

    let mut twin = config.clone();
    twin.experiment.impostor.as_mut().unwrap().overlap = 1.0;
    let twin_table = sweep_thresholds(&twin, 1, 6, 500).map_err(|e| e.to_string())?;
    for r in &twin_table.rows {
        ensure(r.far == 1.0 - r.frr, || {
            format!(
                "overlap 1 at t={}: FAR {} vs 1-FRR {}",
                r.threshold,
                r.far,
                1.0 - r.frr
            )
        })?;
    }
    let far: Vec<String> = table.rows.iter().map(|r| format!("{:.3}", r.far)).collect();
    let frr: Vec<String> = table.rows.iter().map(|r| format!("{:.3}", r.frr)).collect();
    Ok(format!(
        "t=1..6 FAR [{}] non-increasing, FRR [{}] non-decreasing; overlap 0 FAR all 0; overlap 1 FAR = 1-FRR",
        far.join(" "),
        frr.join(" ")
    ))
}

fn arb_token() -> impl Strategy<Value = String> {
    "[A-Za-z0-9_.:~*-]{1,10}"
}

fn arb_magnitude() -> impl Strategy<Value = Magnitude> {
    (Magnitude::MIN.value()..=Magnitude::MAX.value()).prop_map(|v| Magnitude::new(v).unwrap())
}

fn arb_status() -> impl Strategy<Value = SessionStatus> {
    prop_oneof![
        Just(SessionStatus::NotDone),
        Just(SessionStatus::Done),
        Just(SessionStatus::Failed(FailureReason::InsufficientConfidence)),
        Just(SessionStatus::Failed(FailureReason::RoundLimitExceeded)),
        Just(SessionStatus::Failed(FailureReason::ProtocolViolation)),
    ]
}

fn arb_message() -> impl Strategy<Value = Message> {
    let combiner = prop_oneof![
        Just("DIFFERENCE".to_owned()),
        Just("SUM".to_owned()),
        arb_token().prop_map(|id| format!("MAP_THEN_DIFFERENCE:{id}")),
    ];
    let mode = prop_oneof![
        Just(ProtocolMode::PaperLiteral),
        Just(ProtocolMode::BothThresholds)
    ];
    let form = prop_oneof![Just(FactForm::Question), Just(FactForm::Answer)];
    prop_oneof![
        (
            arb_token(),
            arb_token(),
            mode,
            any::<u64>(),
            any::<u64>(),
            any::<u64>(),
            combiner
        )
            .prop_map(
                |(session_id, user_id, mode, i_threshold, j_threshold, r_max, combiner)| {
                    Message::Hello {
                        session_id,
                        user_id,
                        mode,
                        i_threshold,
                        j_threshold,
                        r_max,
                        combiner,
                    }
                }
            ),
        (arb_token(), arb_token()).prop_map(|(session_id, user_id)| Message::HelloAck {
            session_id,
            user_id
        }),
        (
            arb_token(),
            any::<u64>(),
            form,
            arb_token(),
            arb_token(),
            any::<String>(),
            arb_magnitude()
        )
            .prop_map(
                |(session_id, round, form, fact_id, domain_id, label, magnitude)| Message::Fact {
                    session_id,
                    round,
                    form,
                    fact_id,
                    domain_id,
                    label,
                    magnitude
                }
            ),
        (
            arb_token(),
            any::<u64>(),
            any::<bool>(),
            any::<u64>(),
            any::<u64>()
        )
            .prop_map(
                |(session_id, round, matched, c_i, c_j)| Message::RoundResult {
                    session_id,
                    round,
                    matched,
                    c_i,
                    c_j
                }
            ),
        (
            arb_token(),
            arb_status(),
            any::<u64>(),
            any::<u64>(),
            any::<u64>()
        )
            .prop_map(|(session_id, status, c_i, c_j, rounds)| Message::Final {
                session_id,
                status,
                c_i,
                c_j,
                rounds
            }),
    ]
}

/// A different value of the same JSON type.
fn perturb(field: &str, v: &serde_json::Value) -> serde_json::Value {
    use serde_json::Value;
    match (field, v) {
        ("status", Value::String(s)) => Value::from(if s == "DONE" {
            "FAILED_ROUND_LIMIT_EXCEEDED"
        } else {
            "DONE"
        }),
        ("mode", Value::String(s)) => Value::from(if s == "PAPER_LITERAL" {
            "BOTH_THRESHOLDS"
        } else {
            "PAPER_LITERAL"
        }),
        ("form", Value::String(s)) => Value::from(if s == "QUESTION" {
            "ANSWER"
        } else {
            "QUESTION"
        }),
        ("combiner", Value::String(s)) => {
            Value::from(if s == "SUM" { "DIFFERENCE" } else { "SUM" })
        }
        (_, Value::String(s)) => Value::from(format!("{s}x")),
        (_, Value::Bool(b)) => Value::from(!b),
        (_, Value::Number(n)) => match n.as_u64() {
            Some(u) => Value::from(u + 1),
            None => Value::from(n.as_i64().unwrap() + 1),
        },
        _ => v.clone(),
    }
}

fn c7_codec_replay() -> Outcome {
    let mut runner = TestRunner::new(Config {
        cases: 10_000,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(&arb_message(), |m| {
            let bytes = encode_message(&m);
            prop_assert_eq!(&bytes, &encode_message(&m));
            prop_assert_eq!(
                decode_message(&bytes).map_err(|e| TestCaseError::fail(e.to_string()))?,
                m
            );
            Ok(())
        })
        .map_err(|e| format!("codec round trip: {e}"))?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (mut transcripts, mut tampers) = (0, 0);
    for name in [
        "tom_mary.json",
        "oracle_3x3.json",
        "sweep_impostor.json",
        "impostor_round_robin.json",
        "nparty.json",
    ] {
        let config = load(name);
        let out = dir.path().join(name);
        let report = run_experiment(&config, &out).map_err(|e| e.to_string())?;
        for s in &report.sessions {
            let file = s
                .transcript
                .as_ref()
                .ok_or_else(|| format!("{}: {:?}", s.session, s.error))?;
            let text = std::fs::read_to_string(out.join(file)).map_err(|e| e.to_string())?;
            let replay = |text: &str| -> Result<(), ReplayError> {
                let t = decode_transcript(text.as_bytes()).map_err(ReplayError::Malformed)?;
                replay_messages(&t.session_id, &t.messages, Some(&config)).map(|_| ())
            };
            replay(&text).map_err(|e| format!("{file}: clean transcript rejected: {e}"))?;
            zeus_core::harness::replay_transcript(&out.join(file), None)
                .map_err(|e| format!("{file}: clean transcript rejected without scenario: {e}"))?;
            transcripts += 1;

            let lines: Vec<&str> = text.lines().collect();
            for (k, line) in lines.iter().enumerate() {
                let obj: serde_json::Map<String, serde_json::Value> =
                    serde_json::from_str(line).map_err(|e| e.to_string())?;
                for field in obj
                    .keys()
                    .filter(|f| !matches!(f.as_str(), "type" | "version"))
                {
                    let mut edited = obj.clone();
                    edited.insert(field.clone(), perturb(field, &obj[field]));
                    let mut tampered = lines.clone();
                    let new_line = serde_json::to_string(&edited).unwrap();
                    tampered[k] = &new_line;
                    let tampered = tampered.join("\n") + "\n";
                    match replay(&tampered) {
                        Err(ReplayError::Mismatch(_)) => tampers += 1,
                        other => {
                            return Err(format!(
                                "{file} line {}: tampered `{field}` gave {other:?}",
                                k + 1
                            ));
                        }
                    }
                }
            }
        }
    }
    Ok(format!(
        "10000 generated messages round-trip; {transcripts} transcripts replay clean; {tampers}/{tampers} single-field tampers detected"
    ))
}

fn c8_nparty() -> Outcome {
    for (n, expected) in [(3usize, 3usize), (4, 6), (5, 10)] {
        let users: Vec<String> = (0..n).map(|k| format!("u{k}")).collect();
        let pairs = reduce_nparty(&users, &PairPolicy::Full).map_err(|e| e.to_string())?;
        let unique: BTreeSet<BTreeSet<&String>> =
            pairs.iter().map(|(a, b)| BTreeSet::from([a, b])).collect();
        ensure(pairs.len() == expected && unique.len() == expected, || {
            format!("N={n}: {pairs:?}")
        })?;
    }
    let users: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
    let explicit = PairPolicy::Explicit(vec![("a".into(), "b".into()), ("b".into(), "a".into())]);
    let pairs = reduce_nparty(&users, &explicit).map_err(|e| e.to_string())?;
    ensure(pairs.len() == 1, || format!("explicit: {pairs:?}"))?;
    Ok("Full gives 3/6/10 unique pairs for N=3/4/5; reversed duplicate reduces to M=1".into())
}

fn read_tree(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        files.push((name, std::fs::read(&path).map_err(|e| e.to_string())?));
    }
    files.sort();
    Ok(files)
}

fn c9_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut checked = 0;
    for name in ["tom_mary.json", "sweep_impostor.json", "nparty.json"] {
        let mut outputs = Vec::new();
        for run in 0..2 {
            let out = dir.path().join(format!("{name}.{run}"));
            let status = Command::new(env!("CARGO_BIN_EXE_zeus"))
                .arg("--out-dir")
                .arg(&out)
                .arg("run")
                .arg(fixture(name))
                .output()
                .map_err(|e| e.to_string())?;
            ensure(status.status.code() == Some(0), || {
                format!("{name}: exit {:?}", status.status.code())
            })?;
            outputs.push(read_tree(&out)?);
        }
        ensure(outputs[0] == outputs[1], || {
            format!("{name}: outputs differ between runs")
        })?;
        checked += outputs[0].len();
    }
    Ok(format!(
        "two `zeus run` invocations per fixture gave byte-identical output ({checked} files)"
    ))
}

//! Exact acceptance probability by exhaustive enumeration, and its Monte
//! Carlo counterpart.

use num::{BigInt, BigRational, One, Zero};

use crate::agents::{PartyAgent, Strategy};
use crate::protocol::{init_session, SessionState, SessionStatus};

use super::experiment::run_plan;
use super::scenario::ScenarioConfig;
use super::HarnessError;

/// Upper bound on `|D_i|^r_max * |D_j|^r_max` accepted by [`oracle_acceptance`].
pub const ORACLE_LIMIT: u128 = 1_000_000;

fn path_bound(n_i: usize, n_j: usize, r_max: u64) -> u128 {
    let r = u32::try_from(r_max).unwrap_or(u32::MAX);
    let side = |n: usize| (n as u128).checked_pow(r).unwrap_or(u128::MAX);
    side(n_i).saturating_mul(side(n_j))
}

/// Probability that the scenario's primary legitimate session ends `Done`
/// when both agents draw uniformly from their current pools each round.
///
/// Pools grow as resultants are absorbed, so every branch is weighted by the
/// pool sizes at that point rather than by a fixed `1/|D|^r`.
pub fn oracle_acceptance(config: &ScenarioConfig) -> Result<BigRational, HarnessError> {
    let plan = config.primary_plan();
    for a in [&plan.agent_i, &plan.agent_j] {
        if !matches!(a.policy().strategy, Strategy::RandomSeeded) {
            return Err(HarnessError::OracleNeedsRandom(a.user_id().to_owned()));
        }
    }
    let paths = path_bound(
        plan.agent_i.domain().len(),
        plan.agent_j.domain().len(),
        plan.config.r_max,
    );
    if paths > ORACLE_LIMIT {
        return Err(HarnessError::InstanceTooLarge {
            paths,
            limit: ORACLE_LIMIT,
        });
    }
    let session = plan.config.session_id.clone();
    let wrap = |error| HarnessError::Protocol {
        session: session.clone(),
        error,
    };
    let state = init_session(plan.config.clone()).map_err(wrap)?;
    explore(&state, &plan.agent_i, &plan.agent_j).map_err(wrap)
}

fn explore(
    state: &SessionState,
    agent_i: &PartyAgent,
    agent_j: &PartyAgent,
) -> Result<BigRational, crate::protocol::ProtocolError> {
    if !state.should_continue() {
        let mut end = state.clone();
        return Ok(if end.finalize()? == SessionStatus::Done {
            BigRational::one()
        } else {
            BigRational::zero()
        });
    }
    let round = state.round();
    let pool_i = agent_i.candidates(round);
    let pool_j = agent_j.candidates(round);
    let mut total = BigRational::zero();
    for f_k in &pool_i {
        for f_m in &pool_j {
            let mut next = state.clone();
            let record = next.step_round_local(f_k, f_m)?;
            total += if record.matched {
                let (mut ai, mut aj) = (agent_i.clone(), agent_j.clone());
                ai.absorb(record.resultant.clone());
                aj.absorb(record.resultant);
                explore(&next, &ai, &aj)?
            } else {
                explore(&next, agent_i, agent_j)?
            };
        }
    }
    let branches = BigInt::from(pool_i.len()) * BigInt::from(pool_j.len());
    Ok(total / BigRational::from_integer(branches))
}

/// Fraction of `trials` runs of the primary legitimate session that end
/// `Done`, trial `n` shifting agent seeds by `base_seed + n`.
pub fn monte_carlo_acceptance(config: &ScenarioConfig, trials: u64) -> Result<f64, HarnessError> {
    let plan = config.primary_plan();
    let mut done = 0u64;
    for n in 0..trials {
        let offset = config.experiment.base_seed.wrapping_add(n);
        if run_plan(&plan.clone().with_seed_offset(offset))?.status == SessionStatus::Done {
            done += 1;
        }
    }
    Ok(done as f64 / trials.max(1) as f64)
}

/// Nearest `f64` to an exact probability.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    use num::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

//! False-acceptance / false-rejection rates over a range of thresholds.

use std::fmt::Write;

use crate::protocol::SessionStatus;

use super::experiment::run_plan;
use super::scenario::ScenarioConfig;
use super::HarnessError;

#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub threshold: u64,
    /// Fraction of impostor sessions that ended `Done`.
    pub far: f64,
    /// Fraction of legitimate sessions that ended `Failed`.
    pub frr: f64,
    pub trials: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RateTable {
    pub rows: Vec<RateRow>,
}

impl RateTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,far,frr,trials\n");
        for r in &self.rows {
            writeln!(
                out,
                "{},{:.6},{:.6},{}",
                r.threshold, r.far, r.frr, r.trials
            )
            .expect("write to String");
        }
        out
    }

    pub fn row(&self, threshold: u64) -> Option<&RateRow> {
        self.rows.iter().find(|r| r.threshold == threshold)
    }
}

/// Sets both thresholds to each `t` in `t_min..=t_max` and runs `trials`
/// legitimate and `trials` impostor sessions per threshold. Trial `n` shifts
/// every agent seed by `base_seed + n`, so the same trial index sees the same
/// fact choices at every threshold.
pub fn sweep_thresholds(
    config: &ScenarioConfig,
    t_min: u64,
    t_max: u64,
    trials: u64,
) -> Result<RateTable, HarnessError> {
    let impostor = config.impostor_plan().ok_or_else(|| HarnessError::Config {
        file: config.name.clone(),
        line: None,
        field: "experiment.impostor".to_owned(),
        message: "a threshold sweep needs an impostor".to_owned(),
    })?;
    let legit = config.primary_plan();
    let mut table = RateTable::default();
    for t in t_min..=t_max {
        let (mut accepted, mut rejected) = (0u64, 0u64);
        for n in 0..trials {
            let offset = config.experiment.base_seed.wrapping_add(n);
            let l = run_plan(&legit.clone().with_thresholds(t, t).with_seed_offset(offset))?;
            if matches!(l.status, SessionStatus::Failed(_)) {
                rejected += 1;
            }
            let i = run_plan(
                &impostor
                    .clone()
                    .with_thresholds(t, t)
                    .with_seed_offset(offset),
            )?;
            if i.status == SessionStatus::Done {
                accepted += 1;
            }
        }
        let denom = trials.max(1) as f64;
        table.rows.push(RateRow {
            threshold: t,
            far: accepted as f64 / denom,
            frr: rejected as f64 / denom,
            trials,
        });
    }
    Ok(table)
}

//! Statistics over run logs: sub-ensembles, rates with honest error bars,
//! and empirical-vs-exact comparison.
//!
//! Rates carry a Wilson 95% interval rather than the Wald one: Wilson stays
//! inside [0, 1] and behaves at the extremes, which matters here because
//! sharp couplings legitimately produce rates of exactly 0 or 1. Standard
//! errors are computed from the Jeffreys-smoothed proportion
//! (k + 1/2)/(n + 1) so a finite sample never reports a zero error bar.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::protocols::{FinalOutcome, OutcomeKey, ProbabilityTable, RunLog, RunRecord};
use crate::unsharp::PointerOutcome;

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// An empirical proportion with smoothed standard error and Wilson bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct RateEstimate {
    pub count: u64,
    pub total: u64,
    pub rate: f64,
    pub stderr: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
}

/// Wilson score interval for `k` successes in `n` trials at quantile `z`.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    assert!(n > 0, "interval needs at least one trial");
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

fn rate_estimate(k: u64, n: u64) -> RateEstimate {
    let smoothed = (k as f64 + 0.5) / (n as f64 + 1.0);
    let (lo, hi) = wilson_interval(k, n, Z_95);
    RateEstimate {
        count: k,
        total: n,
        rate: k as f64 / n as f64,
        stderr: (smoothed * (1.0 - smoothed) / n as f64).sqrt(),
        wilson_low: lo,
        wilson_high: hi,
    }
}

/// A view of the records that passed some selection.
#[derive(Debug, Clone)]
pub struct SubEnsemble<'a> {
    records: Vec<&'a RunRecord>,
}

impl<'a> SubEnsemble<'a> {
    pub fn records(&self) -> &[&'a RunRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Select the records satisfying `criterion`.
pub fn subensemble<'a, F>(log: &'a RunLog, criterion: F) -> SubEnsemble<'a>
where
    F: Fn(&RunRecord) -> bool,
{
    SubEnsemble {
        records: log.records.iter().filter(|r| criterion(r)).collect(),
    }
}

/// Records whose final measurement gave `f`.
pub fn by_final(log: &RunLog, f: FinalOutcome) -> SubEnsemble<'_> {
    subensemble(log, |r| r.final_outcome == f)
}

/// Records whose pointer at `step` read `o`.
pub fn by_pointer(log: &RunLog, step: usize, o: PointerOutcome) -> Result<SubEnsemble<'_>> {
    let steps = log.config.steps().len();
    if step >= steps {
        return Err(Error::BadSubsystemIndex {
            index: step,
            count: steps,
        });
    }
    Ok(subensemble(log, |r| r.pointer_outcomes[step] == o))
}

/// Fraction of single-step trials whose pointer reading and final outcome
/// disagree in sign. Only defined for single-step runs.
pub fn mismatch_rate(log: &RunLog) -> Result<RateEstimate> {
    if log.config.steps().len() != 1 {
        return Err(Error::MultiStepLog(log.config.steps().len()));
    }
    if log.records.is_empty() {
        return Err(Error::EmptySubEnsemble);
    }
    let k = log
        .records
        .iter()
        .filter(|r| r.mismatch == Some(true))
        .count() as u64;
    Ok(rate_estimate(k, log.records.len() as u64))
}

/// Frequency of `event` within a sub-ensemble.
pub fn conditional_frequency<F>(sub: &SubEnsemble<'_>, event: F) -> Result<RateEstimate>
where
    F: Fn(&RunRecord) -> bool,
{
    if sub.is_empty() {
        return Err(Error::EmptySubEnsemble);
    }
    let k = sub.records().iter().filter(|r| event(r)).count() as u64;
    Ok(rate_estimate(k, sub.len() as u64))
}

/// Mean ±1 pointer reading at `step` within a sub-ensemble, with its
/// smoothed standard error.
pub fn pointer_mean(sub: &SubEnsemble<'_>, step: usize) -> Result<(f64, f64)> {
    if sub.is_empty() {
        return Err(Error::EmptySubEnsemble);
    }
    let n = sub.len() as u64;
    let bad = sub
        .records()
        .iter()
        .any(|r| step >= r.pointer_outcomes.len());
    if bad {
        return Err(Error::BadSubsystemIndex {
            index: step,
            count: sub.records()[0].pointer_outcomes.len(),
        });
    }
    let k = sub
        .records()
        .iter()
        .filter(|r| r.pointer_outcomes[step] == PointerOutcome::U)
        .count() as u64;
    let mean = (2.0 * k as f64 - n as f64) / n as f64;
    let smoothed = (k as f64 + 0.5) / (n as f64 + 1.0);
    let stderr = 2.0 * (smoothed * (1.0 - smoothed) / n as f64).sqrt();
    Ok((mean, stderr))
}

/// Observed counts per joint outcome.
pub fn empirical_counts(log: &RunLog) -> BTreeMap<OutcomeKey, u64> {
    let mut counts = BTreeMap::new();
    for r in &log.records {
        *counts
            .entry((r.pointer_outcomes.clone(), r.final_outcome))
            .or_insert(0u64) += 1;
    }
    counts
}

/// One line of an empirical-vs-exact comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub key: OutcomeKey,
    pub exact: f64,
    pub empirical: f64,
    pub count: u64,
    /// Binomial z-score of the observed frequency against the exact
    /// probability. Infinite when an exactly-impossible outcome was
    /// observed (or an exactly-certain one missed).
    pub z: f64,
}

/// Full comparison of a run log against an exact outcome table.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    pub trials: u64,
    pub max_abs_z: f64,
    pub total_variation: f64,
}

/// Compare observed outcome frequencies against the exact distribution.
/// The log and table must describe the same number of steps.
pub fn compare(log: &RunLog, table: &ProbabilityTable) -> Result<ComparisonReport> {
    let steps = log.config.steps().len();
    if steps != table.steps() {
        return Err(Error::ConfigMismatch(format!(
            "log has {steps} steps, table has {}",
            table.steps()
        )));
    }
    if log.records.is_empty() {
        return Err(Error::EmptySubEnsemble);
    }
    let counts = empirical_counts(log);
    for key in counts.keys() {
        if table.probability(key).is_none() {
            return Err(Error::ConfigMismatch(format!(
                "log contains outcome {key:?} the table does not list"
            )));
        }
    }
    let n = log.records.len() as u64;
    let nf = n as f64;
    let mut rows = Vec::with_capacity(table.len());
    let mut max_abs_z = 0.0f64;
    let mut tv = 0.0;
    for (key, p) in table.entries() {
        let count = counts.get(key).copied().unwrap_or(0);
        let freq = count as f64 / nf;
        let z = if p <= 0.0 || p >= 1.0 {
            if (freq - p).abs() == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (freq - p) / (p * (1.0 - p) / nf).sqrt()
        };
        max_abs_z = max_abs_z.max(z.abs());
        tv += (freq - p).abs();
        rows.push(ComparisonRow {
            key: key.clone(),
            exact: p,
            empirical: freq,
            count,
            z,
        });
    }
    Ok(ComparisonReport {
        rows,
        trials: n,
        max_abs_z,
        total_variation: 0.5 * tv,
    })
}

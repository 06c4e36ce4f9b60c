//! Simultaneous confidence-set coverage over repeated runs.

use serde::{Deserialize, Serialize};

use crate::harness::runner::{run_experiment_on, RunRecord};
use crate::harness::{ExperimentConfig, HarnessError};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverageReport {
    pub reps: usize,
    pub covered: usize,
    /// Fraction of runs whose true coefficients stayed inside the ellipsoid
    /// at every round simultaneously.
    pub coverage: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    /// Repetition indices that broke coverage at some round.
    pub failures: Vec<usize>,
}

/// Wilson 95% score interval for a binomial proportion.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    let z = 1.959963984540054_f64;
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Runs `m` repetitions and reports the simultaneous-coverage frequency.
pub fn coverage_study(
    config: &ExperimentConfig,
    m: usize,
) -> Result<(CoverageReport, Vec<RunRecord>), HarnessError> {
    let mut cfg = config.clone();
    cfg.reps = m;
    cfg.validate()?;
    let env = cfg.env.build()?;
    let records = run_experiment_on(&env, &cfg)?;
    let failures: Vec<usize> = records
        .iter()
        .filter(|r| !r.summary.all_rounds_in_set || r.summary.aborted.is_some())
        .map(|r| r.summary.rep)
        .collect();
    let covered = m - failures.len();
    let (lo, hi) = wilson_interval(covered, m);
    Ok((
        CoverageReport {
            reps: m,
            covered,
            coverage: covered as f64 / m as f64,
            wilson_low: lo,
            wilson_high: hi,
            failures,
        },
        records,
    ))
}

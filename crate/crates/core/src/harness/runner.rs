//! Repetition runner: executes the learning loop against a shared
//! environment, one derived noise stream per repetition.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bandit::{EntUcbAgent, EpsSchedule};
use crate::env::BanditEnv;
use crate::harness::{ExperimentConfig, HarnessError};

/// One CSV row of a run log. The serialized column set is the export schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRow {
    pub t: usize,
    pub eps_t: f64,
    pub n_t: usize,
    pub reward: f64,
    pub pseudo_regret_kant: f64,
    pub pseudo_regret_ent: Option<f64>,
    pub cum_kant_lo: f64,
    pub cum_kant_hi: f64,
    pub cum_ent: Option<f64>,
    pub beta_t: f64,
    pub theta_norm: f64,
    pub optimism_value: f64,
    pub in_confidence_set: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub rep: usize,
    /// ChaCha stream id of this repetition's noise stream.
    pub noise_stream: u64,
    pub env_hash: String,
    pub rounds: usize,
    pub final_cum_kant_lo: f64,
    pub final_cum_kant_hi: f64,
    pub final_cum_ent: Option<f64>,
    pub all_rounds_in_set: bool,
    pub wall_time_s: f64,
    /// Error text when the repetition aborted mid-run.
    pub aborted: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub rows: Vec<RoundRow>,
    /// Per-round `log det(I + (2λC)⁻¹ Σ ϑϑᵀ)` of the realized design, when
    /// the bound-report diagnostic is on.
    pub realized_logdet: Option<Vec<f64>>,
    pub summary: RunSummary,
}

impl RunRecord {
    /// Rows compare equal (wall time aside) — the determinism contract.
    pub fn same_trajectory(&self, other: &RunRecord) -> bool {
        self.rows == other.rows
            && self.realized_logdet == other.realized_logdet
            && self.summary.rep == other.summary.rep
            && self.summary.noise_stream == other.summary.noise_stream
            && self.summary.env_hash == other.summary.env_hash
            && self.summary.final_cum_kant_lo == other.summary.final_cum_kant_lo
            && self.summary.final_cum_kant_hi == other.summary.final_cum_kant_hi
            && self.summary.final_cum_ent == other.summary.final_cum_ent
            && self.summary.aborted == other.summary.aborted
    }
}

/// Runs `config.reps` independent repetitions on one shared environment.
/// A failure inside a repetition aborts that repetition with a diagnostic
/// record; the other repetitions are unaffected.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RunRecord>, HarnessError> {
    config.validate()?;
    let env = config.env.build()?;
    run_experiment_on(&env, config)
}

/// Same as [`run_experiment`] but reusing an already-built environment (and
/// its baseline memo).
pub fn run_experiment_on(
    env: &BanditEnv,
    config: &ExperimentConfig,
) -> Result<Vec<RunRecord>, HarnessError> {
    (0..config.reps)
        .into_par_iter()
        .map(|rep| run_single(env, config, rep))
        .collect()
}

fn run_single(
    env: &BanditEnv,
    config: &ExperimentConfig,
    rep: usize,
) -> Result<RunRecord, HarnessError> {
    let started = Instant::now();
    // Counter-derived noise stream: same master key, per-rep stream id.
    let stream = rep as u64 + 1;
    let mut rng = ChaCha12Rng::seed_from_u64(config.master_seed);
    rng.set_stream(stream);

    let mut agent = EntUcbAgent::new(env, config.agent)?;
    let fixed_eps = matches!(config.agent.schedules.eps, EpsSchedule::Fixed { .. });
    let want_ent = fixed_eps || config.diagnostics.entropic_excess_at_eps_t;

    let mut rows: Vec<RoundRow> = Vec::with_capacity(config.horizon);
    let mut logdets = config.diagnostics.bound_report.then(Vec::new);
    let mut cum_kant_lo = 0.0;
    let mut cum_kant_hi = 0.0;
    let mut cum_ent = want_ent.then_some(0.0);
    let mut all_in_set = true;
    let mut aborted = None;

    for _ in 0..config.horizon {
        let log = match agent.step(env, &mut rng) {
            Ok(l) => l,
            Err(e) => {
                aborted = Some(e.to_string());
                break;
            }
        };
        let (kant, ent) = if want_ent {
            match env.regret_terms(&log.plan, log.eps_t) {
                Ok(terms) => (terms.kant, Some(terms.ent)),
                Err(e) => {
                    aborted = Some(e.to_string());
                    break;
                }
            }
        } else {
            match env.kant_instant(&log.plan) {
                Ok(k) => (k, None),
                Err(e) => {
                    aborted = Some(e.to_string());
                    break;
                }
            }
        };
        cum_kant_lo += kant.0;
        cum_kant_hi += kant.2;
        if let (Some(c), Some(e)) = (cum_ent.as_mut(), ent) {
            *c += e;
        }
        all_in_set &= log.in_confidence_set;
        if let Some(ld) = logdets.as_mut() {
            ld.push(agent.rls().width_log_det(config.agent.c_bound));
        }
        rows.push(RoundRow {
            t: log.t,
            eps_t: log.eps_t,
            n_t: log.n_t,
            reward: log.reward,
            pseudo_regret_kant: kant.1,
            pseudo_regret_ent: ent,
            cum_kant_lo,
            cum_kant_hi,
            cum_ent,
            beta_t: log.beta,
            theta_norm: log.theta_norm,
            optimism_value: log.optimism_value,
            in_confidence_set: log.in_confidence_set,
        });
    }

    let summary = RunSummary {
        rep,
        noise_stream: stream,
        env_hash: env.hash_hex(),
        rounds: rows.len(),
        final_cum_kant_lo: cum_kant_lo,
        final_cum_kant_hi: cum_kant_hi,
        final_cum_ent: cum_ent,
        all_rounds_in_set: all_in_set,
        wall_time_s: started.elapsed().as_secs_f64(),
        aborted,
    };
    Ok(RunRecord { rows, realized_logdet: logdets, summary })
}

/// Median across records of the cumulative entropic pseudo-regret at each
/// round (records must share the horizon).
pub fn median_cum_ent(records: &[RunRecord]) -> Option<Vec<f64>> {
    let horizon = records.first()?.rows.len();
    let mut out = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let mut vals: Vec<f64> = records
            .iter()
            .map(|r| r.rows.get(t).and_then(|row| row.cum_ent))
            .collect::<Option<Vec<f64>>>()?;
        vals.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        let m = vals.len();
        out.push(if m % 2 == 1 { vals[m / 2] } else { 0.5 * (vals[m / 2 - 1] + vals[m / 2]) });
    }
    Some(out)
}

/// Least-squares slope of `log y` against `log t` over `t ∈ [t_lo, t_hi]`
/// (1-based rounds); values are floored at `1e-12` before the log.
pub fn loglog_slope(series: &[f64], t_lo: usize, t_hi: usize) -> f64 {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (idx, &v) in series.iter().enumerate() {
        let t = idx + 1;
        if t >= t_lo && t <= t_hi {
            xs.push((t as f64).ln());
            ys.push(v.max(1e-12).ln());
        }
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

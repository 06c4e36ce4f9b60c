//! Behavioral checks of the optimism loop against ground truth the agent
//! never sees.

mod common;

use otbandit::bandit::{
    beta_width, optimism_step, ConfidenceEllipsoid, EntUcbAgent, EntUcbConfig, EpsSchedule,
    OrderSchedule, RlsState, Schedules,
};
use otbandit::basis::{features, synthesize, CoefficientVector};
use otbandit::env::{make_matching_env, make_smooth_env, CostGen};
use otbandit::harness::coverage::coverage_study;
use otbandit::harness::runner::run_experiment;
use otbandit::harness::{Diagnostics, EnvSpec, ExperimentConfig};
use otbandit::measures::{pairing, relative_entropy};
use otbandit::transport::sinkhorn;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn agent_cfg(sigma: f64, c_bound: f64, n: usize, eps: f64) -> EntUcbConfig {
    EntUcbConfig::defaults_with(
        Schedules {
            eps: EpsSchedule::Fixed { value: eps },
            order: OrderSchedule::Fixed { n },
        },
        sigma,
        c_bound,
    )
}

#[test]
fn optimism_value_beats_truth_when_truth_is_in_the_set() {
    let env = make_matching_env(3, 3, CostGen::RandomUniform, 0.2, 9).unwrap();
    let eps = 0.1;
    let c_bound = env.coeff_norm() * 1.05;
    let cfg = agent_cfg(0.2, c_bound, 9, eps);

    // A few observed rounds to move the center off zero.
    let mut rls = RlsState::new(9, cfg.lambda).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(4);
    let mut agent_env_rng = ChaCha12Rng::seed_from_u64(5);
    for _ in 0..10 {
        let pi = otbandit::transport::random_coupling(env.mu(), env.nu(), &mut rng).unwrap();
        let reward = env.pull(&pi, &mut agent_env_rng).unwrap();
        let theta = features(&pi, env.basis(), 9).unwrap();
        rls.update(theta.as_slice(), reward).unwrap();
    }
    let beta = beta_width(&rls, cfg.delta, cfg.c_bound, cfg.sigma);
    let ellipsoid = ConfidenceEllipsoid::from_state(&rls, beta, cfg.delta).unwrap();
    let truth = env.true_coeffs().prefix(9);
    assert!(ellipsoid.contains(truth), "width too small for this check");

    let out = optimism_step(
        &ellipsoid,
        env.basis(),
        9,
        eps,
        env.mu(),
        env.nu(),
        &cfg,
        None,
    )
    .unwrap();

    // Optimistic value is below the true-cost entropic optimum, up to the
    // alternation tolerance and solver slack.
    let truth_solve = sinkhorn(env.true_cost(), env.mu(), env.nu(), eps, 1e-9, 200_000).unwrap();
    let slack = cfg.alt_tol + truth_solve.gap + 1e-6;
    assert!(
        out.value <= truth_solve.primal_value + slack,
        "optimism {} vs truth {}",
        out.value,
        truth_solve.primal_value
    );

    // The returned pair is consistent: value = pairing(synth(belief), plan) + eps H.
    let cost = synthesize(&out.belief, env.basis()).unwrap();
    let recomputed = pairing(&cost, &out.plan).unwrap()
        + eps * relative_entropy(&out.plan, env.rho());
    assert!((recomputed - out.value).abs() <= 1e-9);
}

#[test]
fn zero_radius_optimism_reduces_to_center_solve() {
    let env = make_matching_env(3, 3, CostGen::RandomUniform, 0.1, 31).unwrap();
    let eps = 0.2;
    let cfg = agent_cfg(0.1, 1.0, 9, eps);
    let rls = RlsState::new(9, 1.0).unwrap();
    let ellipsoid = ConfidenceEllipsoid::from_state(&rls, 0.0, 0.1).unwrap();
    let out =
        optimism_step(&ellipsoid, env.basis(), 9, eps, env.mu(), env.nu(), &cfg, None).unwrap();
    // Center is the zero belief: the solve is the reference coupling and the
    // value is the zero-cost entropic optimum, 0.
    assert!(out.value.abs() <= 1e-9);
    assert!(out.plan.mass().max_abs_diff(env.rho().weights()) <= 1e-6);
}

#[test]
fn optimism_value_is_monitored_nonincreasing_across_alternations() {
    // The joint value of the best pair can only improve as alternations add
    // candidates; verify on instances with real ellipsoid movement.
    let env = make_matching_env(4, 4, CostGen::RandomUniform, 0.3, 17).unwrap();
    let cfg = agent_cfg(0.3, env.coeff_norm() * 1.1, 16, 0.05);
    let mut rls = RlsState::new(16, 1.0).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(3);
    let mut env_rng = ChaCha12Rng::seed_from_u64(8);
    for _ in 0..5 {
        let pi = otbandit::transport::random_coupling(env.mu(), env.nu(), &mut rng).unwrap();
        let reward = env.pull(&pi, &mut env_rng).unwrap();
        let theta = features(&pi, env.basis(), 16).unwrap();
        rls.update(theta.as_slice(), reward).unwrap();
    }
    let beta = beta_width(&rls, 0.1, cfg.c_bound, cfg.sigma);
    let ellipsoid = ConfidenceEllipsoid::from_state(&rls, beta, 0.1).unwrap();
    let full = optimism_step(
        &ellipsoid,
        env.basis(),
        16,
        0.05,
        env.mu(),
        env.nu(),
        &cfg,
        None,
    )
    .unwrap();
    // Rerun with the alternation budget capped at one round: the restricted
    // search cannot beat the full one beyond solver noise.
    let mut capped = cfg;
    capped.alt_max_rounds = 1;
    let first = optimism_step(
        &ellipsoid,
        env.basis(),
        16,
        0.05,
        env.mu(),
        env.nu(),
        &capped,
        None,
    )
    .unwrap();
    assert!(full.value <= first.value + 1e-6);
}

#[test]
fn noiseless_finite_basis_run_converges_to_optimal_plans() {
    // sigma = 0 in the environment; the agent still assumes a small sigma.
    let env = make_matching_env(2, 2, CostGen::RandomUniform, 0.0, 23).unwrap();
    let eps = 0.02;
    let mut cfg = agent_cfg(1e-3, env.coeff_norm() * 1.05, 4, eps);
    cfg.delta = 0.1;
    let mut agent = EntUcbAgent::new(&env, cfg).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(0);
    let horizon = 500;
    let mut tail_excess = Vec::new();
    for t in 0..horizon {
        let log = agent.step(&env, &mut rng).unwrap();
        let (_, mid, _) = env.kant_instant(&log.plan).unwrap();
        if t >= horizon - 50 {
            tail_excess.push(mid);
        }
    }
    let avg_tail: f64 = tail_excess.iter().sum::<f64>() / tail_excess.len() as f64;
    // Late plans pay at most the entropic approximation gap plus a little
    // width-driven exploration.
    let budget = eps * env.lipschitz() + 0.05;
    assert!(avg_tail <= budget, "late excess {avg_tail} vs budget {budget}");
}

#[test]
fn schedule_values_match_formulas() {
    let s = Schedules {
        eps: EpsSchedule::Power { alpha: 0.5 },
        order: OrderSchedule::Growing { q: 1.0 },
    };
    assert!((s.epsilon(4) - 0.25).abs() <= 1e-15);
    let growing: Vec<usize> = (1..=30).map(|t| s.order(t, 100)).collect();
    assert_eq!(growing[0], 1);
    assert!(growing.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(growing[26], 3); // ceil(27^(1/3)) = 3
}

#[test]
fn beta_scaling_controls_coverage_extremes() {
    let base = ExperimentConfig {
        env: EnvSpec::Matching {
            k: 2,
            kp: 2,
            cost_gen: CostGen::RandomUniform,
            sigma: 0.3,
            seed: 40,
        },
        agent: agent_cfg(0.3, 1.0, 4, 0.1),
        horizon: 40,
        reps: 1,
        master_seed: 9,
        diagnostics: Diagnostics::default(),
        out_dir: None,
    };
    // Inflated widths: everything covered.
    let mut wide = base.clone();
    wide.agent.beta_scale = 10.0;
    let (report, _) = coverage_study(&wide, 20).unwrap();
    assert_eq!(report.coverage, 1.0);

    // Zero width with noise on: nothing covered.
    let mut collapsed = base;
    collapsed.agent.beta_scale = 0.0;
    let (report, _) = coverage_study(&collapsed, 20).unwrap();
    assert_eq!(report.coverage, 0.0);
}

#[test]
fn checkpoint_restores_identical_state() {
    let env = make_matching_env(3, 3, CostGen::RandomUniform, 0.2, 51).unwrap();
    let cfg = agent_cfg(0.2, env.coeff_norm() * 1.1, 9, 0.1);
    let mut agent = EntUcbAgent::new(&env, cfg).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(12);
    for _ in 0..15 {
        agent.step(&env, &mut rng).unwrap();
    }
    let ck = agent.checkpoint();
    let json = serde_json::to_string(&ck).unwrap();
    let back: otbandit::bandit::AgentCheckpoint = serde_json::from_str(&json).unwrap();
    let restored = EntUcbAgent::restore(&env, cfg, &back).unwrap();
    assert_eq!(restored.round(), agent.round());
    assert!((restored.rls().design() - agent.rls().design()).norm() <= 1e-12);
    assert!((restored.rls().estimate() - agent.rls().estimate()).norm() <= 1e-12);

    // Subsequent rounds agree given identical noise streams, up to solver
    // tolerance: the warm-start potential cache is an accelerator and is
    // deliberately not part of the checkpoint.
    let mut a = agent;
    let mut b = restored;
    let mut rng_a = ChaCha12Rng::seed_from_u64(99);
    let mut rng_b = ChaCha12Rng::seed_from_u64(99);
    let qa = a.step(&env, &mut rng_a).unwrap();
    let qb = b.step(&env, &mut rng_b).unwrap();
    assert!((qa.reward - qb.reward).abs() <= 1e-6);
    assert!(qa.plan.mass().max_abs_diff(qb.plan.mass()) <= 1e-5);
}

#[test]
fn growing_order_rebases_and_stays_consistent() {
    let env = make_smooth_env(4, 4, 1.0, 1.0, 0.1, 61).unwrap();
    let cfg = EntUcbConfig::defaults_with(
        Schedules {
            eps: EpsSchedule::Fixed { value: 0.1 },
            order: OrderSchedule::Growing { q: 1.0 },
        },
        0.1,
        1.0,
    );
    let mut agent = EntUcbAgent::new(&env, cfg).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(2);
    let mut prev_n = 0;
    for _ in 0..40 {
        let log = agent.step(&env, &mut rng).unwrap();
        assert!(log.n_t >= prev_n);
        prev_n = log.n_t;
        assert!(agent.rls().normal_equation_residual() <= 1e-9);
    }
    assert!(prev_n >= 3); // ceil(39^(1/3)) = 4 at the cap-free order
}

#[test]
fn healthy_run_reports_no_abort() {
    let cfg = ExperimentConfig {
        env: EnvSpec::Matching {
            k: 2,
            kp: 2,
            cost_gen: CostGen::Structured,
            sigma: 0.1,
            seed: 3,
        },
        agent: agent_cfg(0.1, 1.0, 4, 0.1),
        horizon: 10,
        reps: 1,
        master_seed: 4,
        diagnostics: Diagnostics::default(),
        out_dir: None,
    };
    let records = run_experiment(&cfg).unwrap();
    assert!(records[0].summary.aborted.is_none());
    assert_eq!(records[0].rows.len(), 10);
}

// inspect per-rep final regrets and bounds for the decaying-eps experiment
use otbandit::bandit::{EntUcbConfig, EpsSchedule, OrderSchedule, Schedules};
use otbandit::env::{make_matching_env, CostGen};
use otbandit::harness::bounds::{theorem_bound, BoundExtras, BoundParams};
use otbandit::harness::runner::run_experiment_on;
use otbandit::harness::{Diagnostics, EnvSpec, ExperimentConfig};

fn main() {
    let env = make_matching_env(4, 4, CostGen::RandomUniform, 0.1, 1106).unwrap();
    let cfg = ExperimentConfig {
        env: EnvSpec::Matching { k: 4, kp: 4, cost_gen: CostGen::RandomUniform, sigma: 0.1, seed: 1106 },
        agent: EntUcbConfig {
            delta: 0.1, lambda: 1.0, sigma: 0.1, c_bound: env.coeff_norm() * 1.05,
            ..EntUcbConfig::defaults_with(
                Schedules { eps: EpsSchedule::Power { alpha: 0.5 }, order: OrderSchedule::Fixed { n: 16 } },
                0.1, 1.0)
        },
        horizon: 5000, reps: 20, master_seed: 707,
        diagnostics: Diagnostics::default(), out_dir: None,
    };
    let records = run_experiment_on(&env, &cfg).unwrap();
    let params = BoundParams { sigma: 0.1, delta: 0.1, lambda: 1.0, c_bound: cfg.agent.c_bound };
    let extras = BoundExtras { kappa_alpha: Some((env.lipschitz(), 0.5)), ..Default::default() };
    println!("L = {:.3}, c_bound = {:.3}", env.lipschitz(), cfg.agent.c_bound);
    for r in &records {
        let b = theorem_bound(r, &params, &extras).unwrap();
        let last = b.last().unwrap();
        let final_regret = r.rows.last().unwrap().cum_kant_hi;
        println!(
            "rep {:02}: final {:8.2}  bound {:8.2} (noise {:.1} width {:.1} eps_sum {:.1}) in_set {} {}",
            r.summary.rep, final_regret, last.realized_total, last.noise, last.width_term,
            last.eps_sum.unwrap(), r.summary.all_rounds_in_set,
            if final_regret > last.realized_total { "<-- EXCEEDS" } else { "" }
        );
    }
}

//! Built-in invariant suites behind `otbandit verify`.
//!
//! Each suite re-checks the contracts that the unit tests pin down, but on
//! freshly drawn random instances, so a binary install can be smoke-checked
//! without the test harness.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::bandit::{beta_width, EntUcbConfig, EpsSchedule, OrderSchedule, RlsState, Schedules};
use crate::basis::{
    cosine_basis, features, loci_indicator_basis, synthesize, tail_bound, CoefficientVector,
};
use crate::env::CostGen;
use crate::harness::bounds::{direct_epsilon_sum, epsilon_sum_bound, noise_term};
use crate::harness::runner::run_experiment;
use crate::harness::{Diagnostics, EnvSpec, ExperimentConfig};
use crate::measures::{
    pairing, product_measure, relative_entropy, CostTable, DiscreteMeasure,
};
use crate::table::Table;
use crate::transport::{
    certify_result, kantorovich_exact, random_coupling, recover_primal, sinkhorn,
    DualPotentials,
};

pub type SuiteResult = (String, Result<(), String>);

/// Run every suite; the bool is the overall verdict.
pub fn run_all(seed: u64) -> (Vec<SuiteResult>, bool) {
    let suites: Vec<(&str, fn(u64) -> Result<(), String>)> = vec![
        ("measures: pairing bilinear, entropy nonnegative", measures_suite),
        ("transport: duality, feasibility, gauge, LP optimality", transport_suite),
        ("basis: gram identity, parseval, truncation bound", basis_suite),
        ("bandit: normal equations, widths, rebase replay", bandit_suite),
        ("bounds: summation lemma domination, noise scaling", bounds_suite),
        ("harness: prefix sums and determinism", harness_suite),
    ];
    let mut results = Vec::new();
    let mut ok = true;
    for (name, f) in suites {
        let r = f(seed);
        ok &= r.is_ok();
        results.push((name.to_string(), r));
    }
    (results, ok)
}

fn check(cond: bool, msg: &str) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.to_string())
    }
}

fn random_cost(k: usize, kp: usize, rng: &mut ChaCha12Rng) -> CostTable {
    CostTable::new(
        Table::from_vec(k, kp, (0..k * kp).map(|_| rng.gen::<f64>()).collect()).unwrap(),
    )
    .unwrap()
}

fn measures_suite(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    for _ in 0..20 {
        let k = rng.gen_range(2..=5);
        let kp = rng.gen_range(2..=5);
        let mu = DiscreteMeasure::uniform_loci(k);
        let nu = DiscreteMeasure::uniform_loci(kp);
        let rho = product_measure(&mu, &nu);
        let pi = random_coupling(&mu, &nu, &mut rng).map_err(|e| e.to_string())?;
        let c1 = random_cost(k, kp, &mut rng);
        let c2 = random_cost(k, kp, &mut rng);
        let a = rng.gen_range(-2.0..2.0);
        let b = rng.gen_range(-2.0..2.0);
        let mix = CostTable::new(
            c1.values().map(|v| a * v).add_scaled(c2.values(), b).unwrap(),
        )
        .unwrap();
        let lhs = pairing(&mix, &pi).unwrap();
        let rhs = a * pairing(&c1, &pi).unwrap() + b * pairing(&c2, &pi).unwrap();
        check((lhs - rhs).abs() <= 1e-12, "pairing bilinearity violated")?;
        check(relative_entropy(&pi, &rho) >= 0.0, "relative entropy negative")?;
    }
    Ok(())
}

fn transport_suite(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed.wrapping_add(1));
    for _ in 0..15 {
        let k = rng.gen_range(2..=5);
        let kp = rng.gen_range(2..=5);
        let mu = DiscreteMeasure::uniform_loci(k);
        let nu = DiscreteMeasure::uniform_loci(kp);
        let rho = product_measure(&mu, &nu);
        let cost = random_cost(k, kp, &mut rng);
        let eps = 10f64.powf(rng.gen_range(-1.5..0.5));
        let res = sinkhorn(&cost, &mu, &nu, eps, 1e-9, 100_000).map_err(|e| e.to_string())?;
        certify_result(&res, &mu, &nu)?;

        // Gauge invariance of the recovered plan.
        let shifted = DualPotentials {
            phi: res.potentials.phi.iter().map(|p| p + 10.0).collect(),
            psi: res.potentials.psi.iter().map(|p| p - 10.0).collect(),
        };
        let base = recover_primal(&res.potentials, &cost, eps, &rho);
        let moved = recover_primal(&shifted, &cost, eps, &rho);
        check(base.max_abs_diff(&moved) <= 1e-12, "gauge shift changed the plan")?;

        // LP value is below the pairing of any feasible coupling, and the
        // entropic value sits above it.
        let kant = kantorovich_exact(&cost, &mu, &nu).map_err(|e| e.to_string())?;
        for _ in 0..20 {
            let pi = random_coupling(&mu, &nu, &mut rng).map_err(|e| e.to_string())?;
            check(
                kant.value <= pairing(&cost, &pi).unwrap() + 1e-9,
                "LP value above a feasible pairing",
            )?;
        }
        check(res.primal_value >= kant.value - 1e-9, "entropic value below Kantorovich")?;
    }
    Ok(())
}

fn basis_suite(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed.wrapping_add(2));
    let mu = DiscreteMeasure::uniform_loci(4);
    let nu = DiscreteMeasure::uniform_loci(4);
    let rho = product_measure(&mu, &nu);
    for basis in [loci_indicator_basis(&rho).unwrap(), cosine_basis(&rho, 16).unwrap()] {
        check(basis.gram_error() <= 1e-10, "gram matrix deviates from identity")?;
        for _ in 0..50 {
            let gamma = CoefficientVector((0..16).map(|_| rng.gen_range(-1.0..1.0)).collect());
            let cost = synthesize(&gamma, &basis).unwrap();
            let norm2: f64 = cost
                .values()
                .as_slice()
                .iter()
                .zip(rho.weights().as_slice())
                .map(|(c, r)| c * c * r)
                .sum();
            check((norm2 - gamma.l2_norm().powi(2)).abs() <= 1e-10, "parseval violated")?;

            let pi = random_coupling(&mu, &nu, &mut rng).map_err(|e| e.to_string())?;
            let theta = features(&pi, &basis, 16).unwrap();
            let n = rng.gen_range(0..16);
            let head: f64 =
                gamma.prefix(n).iter().zip(theta.prefix(n)).map(|(a, b)| a * b).sum();
            let err = (pairing(&cost, &pi).unwrap() - head).abs();
            let tmax = theta.as_slice()[n..].iter().fold(0.0_f64, |m, t| m.max(t.abs()));
            check(err <= tail_bound(&gamma, n) * tmax + 1e-12, "truncation bound violated")?;
        }
    }
    Ok(())
}

fn bandit_suite(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed.wrapping_add(3));
    let n = 8;
    let mut state = RlsState::new(n, 1.0).map_err(|e| e.to_string())?;
    let mut prev_beta = beta_width(&state, 0.1, 1.0, 0.5);
    for _ in 0..200 {
        let theta: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        state.update(&theta, rng.gen_range(-1.0..1.0)).map_err(|e| e.to_string())?;
        check(state.normal_equation_residual() <= 1e-9, "normal-equation residual too large")?;
        let beta = beta_width(&state, 0.1, 1.0, 0.5);
        check(beta >= prev_beta - 1e-12, "width decreased")?;
        prev_beta = beta;
    }
    // Rebase replay: a narrow state fed the same full-width features must
    // rebuild into the wide state exactly.
    let mut narrow = RlsState::new(4, 1.0).map_err(|e| e.to_string())?;
    for (theta, reward) in state.history() {
        narrow.update(theta, *reward).map_err(|e| e.to_string())?;
    }
    let rebased = narrow.rebase(n).map_err(|e| e.to_string())?;
    check(
        (rebased.design() - state.design()).norm() <= 1e-9
            && (rebased.estimate() - state.estimate()).norm() <= 1e-9,
        "rebase does not match from-scratch accumulation",
    )
}

fn bounds_suite(_seed: u64) -> Result<(), String> {
    for i in 1..=9 {
        let alpha = i as f64 / 10.0;
        for &t in &[10usize, 100, 1000, 10_000] {
            check(
                direct_epsilon_sum(t, alpha) <= epsilon_sum_bound(t, alpha, 1.0),
                "direct epsilon sum exceeds the closed form",
            )?;
        }
    }
    check(
        (noise_term(4000, 0.3, 1.0) - 2.0 * noise_term(1000, 0.3, 1.0)).abs() <= 1e-9,
        "noise term does not scale as sqrt(T)",
    )
}

fn harness_suite(seed: u64) -> Result<(), String> {
    let cfg = ExperimentConfig {
        env: EnvSpec::Matching {
            k: 2,
            kp: 2,
            cost_gen: CostGen::RandomUniform,
            sigma: 0.1,
            seed,
        },
        agent: EntUcbConfig::defaults_with(
            Schedules {
                eps: EpsSchedule::Fixed { value: 0.1 },
                order: OrderSchedule::Fixed { n: 4 },
            },
            0.1,
            1.0,
        ),
        horizon: 20,
        reps: 2,
        master_seed: seed,
        diagnostics: Diagnostics::default(),
        out_dir: None,
    };
    let a = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let b = run_experiment(&cfg).map_err(|e| e.to_string())?;
    for (ra, rb) in a.iter().zip(&b) {
        check(ra.same_trajectory(rb), "records are not deterministic")?;
        let mut lo = 0.0;
        for row in &ra.rows {
            lo += row.pseudo_regret_kant;
            check((row.cum_kant_lo - lo).abs() <= 1e-9, "cumulative column drifts")?;
        }
    }
    Ok(())
}

//! Synthetic environments for the transport learning game.
//!
//! An environment owns the (known) marginals, a hidden true cost with its
//! exact coefficients in a chosen basis, a sub-Gaussian noise model, and
//! lazily cached ground-truth baselines (exact Kantorovich value, entropic
//! values per requested `ε`) for regret accounting. Environments are
//! immutable except for the guarded baseline memo; per-run reward streams
//! are owned by the caller.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::basis::{
    analyze, cosine_basis, decay_cost, gram_schmidt, loci_indicator_basis, tail_bound,
    BasisError, CoefficientVector, DecayProfile, OrthonormalBasis,
};
use crate::measures::{
    check_coupling, pairing, product_measure, relative_entropy, CostTable, Coupling,
    DiscreteMeasure, FeasibilityReport, MeasureError, ProductMeasure, FEAS_TOL,
};
use crate::table::Table;
use crate::transport::{
    kantorovich_certified, kantorovich_exact, sinkhorn_allow_unconverged, BaselineMethod,
    EntropicValue, SinkhornOptions, TransportError,
};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("action rejected: infeasible coupling (row err {0:.3e}, col err {1:.3e}, min {2:.3e})")]
    InfeasibleAction(f64, f64, f64),
    #[error("invalid environment spec: {0}")]
    InvalidSpec(String),
    #[error("baseline computation failed: {0}")]
    Baseline(String),
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Shape(#[from] crate::table::TableError),
}

/// Reward noise: `σ²`-sub-Gaussian by construction. The declared parameter
/// equals the exact sub-Gaussian constant for both kinds (`σ²` for the
/// Gaussian, `b²/3` for the symmetric uniform).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseModel {
    Gaussian { sigma: f64 },
    UniformBounded { b: f64 },
}

impl NoiseModel {
    pub fn declared_sigma(&self) -> f64 {
        match *self {
            NoiseModel::Gaussian { sigma } => sigma,
            NoiseModel::UniformBounded { b } => b / 3.0_f64.sqrt(),
        }
    }

    pub fn sample(&self, rng: &mut ChaCha12Rng) -> f64 {
        match *self {
            NoiseModel::Gaussian { sigma } => {
                if sigma == 0.0 {
                    0.0
                } else {
                    Normal::new(0.0, sigma).expect("valid sigma").sample(rng)
                }
            }
            NoiseModel::UniformBounded { b } => {
                if b == 0.0 {
                    0.0
                } else {
                    rng.gen_range(-b..=b)
                }
            }
        }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let ok = match *self {
            NoiseModel::Gaussian { sigma } => sigma.is_finite() && sigma >= 0.0,
            NoiseModel::UniformBounded { b } => b.is_finite() && b >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(EnvError::InvalidSpec("noise parameter must be finite and >= 0".into()))
        }
    }
}

/// Cached Kantorovich ground truth (interval form).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct KantInterval {
    pub lower: f64,
    pub value: f64,
    pub upper: f64,
    pub method: BaselineMethod,
}

/// Instantaneous regret terms of a played coupling.
#[derive(Debug, Clone, Copy)]
pub struct RegretTerms {
    /// `pairing - Kant` as an interval `(lo, mid, hi)`.
    pub kant: (f64, f64, f64),
    /// `pairing + ε·H(π|ρ) - Ent(ε)`.
    pub ent: f64,
    /// Certification gap of the entropic baseline at this `ε`.
    pub ent_baseline_gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostGen {
    RandomUniform,
    Structured,
}

/// A synthetic instance of the learning game.
#[derive(Debug)]
pub struct BanditEnv {
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    rho: ProductMeasure,
    basis: Arc<OrthonormalBasis>,
    true_cost: CostTable,
    true_coeffs: CoefficientVector,
    noise: NoiseModel,
    seed: u64,
    lipschitz: f64,
    coeff_norm: f64,
    baseline_tol: f64,
    kant: OnceLock<Result<KantInterval, String>>,
    ent_memo: Mutex<HashMap<u64, EntropicValue>>,
}

impl BanditEnv {
    fn assemble(
        mu: DiscreteMeasure,
        nu: DiscreteMeasure,
        basis: OrthonormalBasis,
        true_cost: CostTable,
        true_coeffs: CoefficientVector,
        noise: NoiseModel,
        seed: u64,
    ) -> Result<Self, EnvError> {
        noise.validate()?;
        let rho = product_measure(&mu, &nu);
        let lipschitz = discrete_lipschitz(&true_cost, &mu, &nu);
        let coeff_norm = true_coeffs.l2_norm();
        Ok(BanditEnv {
            mu,
            nu,
            rho,
            basis: Arc::new(basis),
            true_cost,
            true_coeffs,
            noise,
            seed,
            lipschitz,
            coeff_norm,
            baseline_tol: 1e-10,
            kant: OnceLock::new(),
            ent_memo: Mutex::new(HashMap::new()),
        })
    }

    pub fn mu(&self) -> &DiscreteMeasure {
        &self.mu
    }

    pub fn nu(&self) -> &DiscreteMeasure {
        &self.nu
    }

    pub fn rho(&self) -> &ProductMeasure {
        &self.rho
    }

    pub fn basis(&self) -> &OrthonormalBasis {
        &self.basis
    }

    pub fn basis_arc(&self) -> Arc<OrthonormalBasis> {
        Arc::clone(&self.basis)
    }

    pub fn true_cost(&self) -> &CostTable {
        &self.true_cost
    }

    pub fn true_coeffs(&self) -> &CoefficientVector {
        &self.true_coeffs
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Max finite-difference slope of the true cost over grid-point pairs.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// `‖γ*‖₂`, the exact coefficient norm of the true cost.
    pub fn coeff_norm(&self) -> f64 {
        self.coeff_norm
    }

    /// Coefficient tail `Σ_{k>n}|γ*_k|`.
    pub fn coeff_tail(&self, n: usize) -> f64 {
        tail_bound(&self.true_coeffs, n)
    }

    /// Stable identity of the instance (marginals, cost, noise, seed).
    pub fn hash_hex(&self) -> String {
        let mut h = Sha256::new();
        let mut feed_measure = |m: &DiscreteMeasure| {
            for p in m.points() {
                for &x in p {
                    h.update(x.to_le_bytes());
                }
            }
            for &w in m.weights() {
                h.update(w.to_le_bytes());
            }
        };
        feed_measure(&self.mu);
        feed_measure(&self.nu);
        for &c in self.true_cost.values().as_slice() {
            h.update(c.to_le_bytes());
        }
        match self.noise {
            NoiseModel::Gaussian { sigma } => {
                h.update([0u8]);
                h.update(sigma.to_le_bytes());
            }
            NoiseModel::UniformBounded { b } => {
                h.update([1u8]);
                h.update(b.to_le_bytes());
            }
        }
        h.update(self.seed.to_le_bytes());
        let digest = h.finalize();
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// Noisy reward for a feasible action; infeasible actions are rejected.
    pub fn pull(&self, pi: &Coupling, rng: &mut ChaCha12Rng) -> Result<f64, EnvError> {
        let report = self.check_action(pi);
        if !report.feasible {
            return Err(EnvError::InfeasibleAction(
                report.max_row_error,
                report.max_col_error,
                report.min_entry,
            ));
        }
        Ok(pairing(&self.true_cost, pi)? + self.noise.sample(rng))
    }

    pub fn check_action(&self, pi: &Coupling) -> FeasibilityReport {
        check_coupling(pi, &self.mu, &self.nu, FEAS_TOL)
    }

    /// Noise-free expected reward of an action.
    pub fn mean_reward(&self, pi: &Coupling) -> Result<f64, EnvError> {
        Ok(pairing(&self.true_cost, pi)?)
    }

    /// Kantorovich ground truth, computed once (exact LP under the cell cap,
    /// certified interval otherwise).
    pub fn kant_baseline(&self) -> Result<KantInterval, EnvError> {
        let cached = self.kant.get_or_init(|| {
            let exact = kantorovich_exact(&self.true_cost, &self.mu, &self.nu);
            let base = match exact {
                Ok(b) => b,
                Err(TransportError::SizeCapExceeded { .. }) => {
                    match kantorovich_certified(&self.true_cost, &self.mu, &self.nu, 1e-8) {
                        Ok(b) => b,
                        Err(e) => return Err(e.to_string()),
                    }
                }
                Err(e) => return Err(e.to_string()),
            };
            Ok(KantInterval {
                lower: base.lower,
                value: base.value,
                upper: base.upper,
                method: base.method,
            })
        });
        cached.clone().map_err(EnvError::Baseline)
    }

    /// Entropic ground truth at `ε`, memoized per `ε`.
    pub fn ent_baseline(&self, epsilon: f64) -> Result<EntropicValue, EnvError> {
        let key = epsilon.to_bits();
        if let Some(v) = self.ent_memo.lock().expect("memo lock").get(&key) {
            return Ok(*v);
        }
        let opts = SinkhornOptions {
            tol: self.baseline_tol,
            max_iter: 2_000_000,
            ..SinkhornOptions::default()
        };
        let res = sinkhorn_allow_unconverged(&self.true_cost, &self.mu, &self.nu, epsilon, &opts)?;
        let value =
            EntropicValue { value: res.primal_value, dual_lower: res.dual_value, gap: res.gap };
        self.ent_memo.lock().expect("memo lock").insert(key, value);
        Ok(value)
    }

    /// Instantaneous Kantorovich regret of an action, as an interval.
    pub fn kant_instant(&self, pi: &Coupling) -> Result<(f64, f64, f64), EnvError> {
        let kant = self.kant_baseline()?;
        let pair = pairing(&self.true_cost, pi)?;
        Ok((pair - kant.upper, pair - kant.value, pair - kant.lower))
    }

    /// Both regret terms at entropy level `ε` (entropic baseline cached).
    pub fn regret_terms(&self, pi: &Coupling, epsilon: f64) -> Result<RegretTerms, EnvError> {
        let kant = self.kant_instant(pi)?;
        let ent_base = self.ent_baseline(epsilon)?;
        let pair = pairing(&self.true_cost, pi)?;
        let ent = pair + epsilon * relative_entropy(pi, &self.rho) - ent_base.value;
        Ok(RegretTerms { kant, ent, ent_baseline_gap: ent_base.gap })
    }
}

/// Max discrete Lipschitz ratio `|c(z) - c(z')| / ‖z - z'‖₂` over distinct
/// grid points `z = (x_i, y_j)` of the product support.
pub fn discrete_lipschitz(cost: &CostTable, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
    let (k, kp) = cost.shape();
    let mut lip = 0.0_f64;
    for a in 0..k * kp {
        let (i, j) = (a / kp, a % kp);
        for b in (a + 1)..k * kp {
            let (p, q) = (b / kp, b % kp);
            let mut d2 = 0.0;
            for (xi, xp) in mu.point(i).iter().zip(mu.point(p)) {
                d2 += (xi - xp) * (xi - xp);
            }
            for (yj, yq) in nu.point(j).iter().zip(nu.point(q)) {
                d2 += (yj - yq) * (yj - yq);
            }
            if d2 > 0.0 {
                lip = lip.max((cost.values().get(i, j) - cost.values().get(p, q)).abs() / d2.sqrt());
            }
        }
    }
    lip
}

/// Matching instance: uniform marginals on `K` and `K'` integer loci, the
/// cell-indicator basis, and exact coefficients (all `K·K'` nonzero).
pub fn make_matching_env(
    k: usize,
    kp: usize,
    cost_gen: CostGen,
    sigma: f64,
    seed: u64,
) -> Result<BanditEnv, EnvError> {
    if k == 0 || kp == 0 {
        return Err(EnvError::InvalidSpec("marginals need at least one locus".into()));
    }
    let mu = DiscreteMeasure::uniform_loci(k);
    let nu = DiscreteMeasure::uniform_loci(kp);
    let rho = product_measure(&mu, &nu);
    let basis = loci_indicator_basis(&rho)?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let cost = generate_cost(k, kp, cost_gen, &mu, &nu, &mut rng)?;
    let coeffs = analyze(&cost, &basis);
    BanditEnv::assemble(mu, nu, basis, cost, coeffs, NoiseModel::Gaussian { sigma }, seed)
}

fn generate_cost(
    k: usize,
    kp: usize,
    cost_gen: CostGen,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    rng: &mut ChaCha12Rng,
) -> Result<CostTable, EnvError> {
    let mut t = Table::zeros(k, kp);
    match cost_gen {
        CostGen::RandomUniform => {
            for i in 0..k {
                for j in 0..kp {
                    t.set(i, j, rng.gen::<f64>());
                }
            }
        }
        CostGen::Structured => {
            // Normalized distance cost on the loci.
            let span = ((k.max(kp) as f64) - 1.0).max(1.0);
            for i in 0..k {
                for j in 0..kp {
                    let mut d2 = 0.0;
                    for (x, y) in mu.point(i).iter().zip(nu.point(j)) {
                        d2 += (x - y) * (x - y);
                    }
                    t.set(i, j, d2.sqrt() / span);
                }
            }
        }
    }
    Ok(CostTable::new(t)?)
}

/// Parametric instance: `c* = Σ_i θ*_i Φ_i`, basis from Gram-Schmidt over the
/// embeddings (exactly `p` nonzero coefficients).
pub fn make_parametric_env(
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    embeddings: Vec<CostTable>,
    theta_star: Vec<f64>,
    sigma: f64,
    seed: u64,
) -> Result<BanditEnv, EnvError> {
    if embeddings.is_empty() || embeddings.len() != theta_star.len() {
        return Err(EnvError::InvalidSpec(
            "embeddings and theta_star must be nonempty and equal-length".into(),
        ));
    }
    let rho = product_measure(&mu, &nu);
    let p = embeddings.len();
    let basis = gram_schmidt(&embeddings, &rho, rho.cells())?;
    let (k, kp) = rho.shape();
    let mut cost = Table::zeros(k, kp);
    for (emb, &th) in embeddings.iter().zip(&theta_star) {
        cost = cost.add_scaled(emb.values(), th)?;
    }
    let cost = CostTable::new(cost)?;
    let mut coeffs = analyze(&cost, &basis);
    // The cost lives in the span of the first p functions; the analyzer's
    // tail is numerical noise, which we pin to exact zeros.
    let spill = tail_bound(&coeffs, p);
    if spill > 1e-8 {
        return Err(EnvError::InvalidSpec(format!(
            "parametric cost leaks {spill:.3e} outside the embedding span"
        )));
    }
    for g in coeffs.0.iter_mut().skip(p) {
        *g = 0.0;
    }
    BanditEnv::assemble(mu, nu, basis, cost, coeffs, NoiseModel::Gaussian { sigma }, seed)
}

/// Smooth instance on the unit grid: cosine basis with power-law coefficient
/// decay of exponent `q` and scale `c_scale`.
pub fn make_smooth_env(
    k: usize,
    kp: usize,
    q: f64,
    c_scale: f64,
    sigma: f64,
    seed: u64,
) -> Result<BanditEnv, EnvError> {
    if k == 0 || kp == 0 {
        return Err(EnvError::InvalidSpec("marginals need at least one locus".into()));
    }
    if !(q > 0.0) {
        return Err(EnvError::InvalidSpec(format!("q must be > 0, got {q}")));
    }
    let mu = DiscreteMeasure::uniform_unit_grid(k);
    let nu = DiscreteMeasure::uniform_unit_grid(kp);
    let rho = product_measure(&mu, &nu);
    let basis = cosine_basis(&rho, rho.cells())?;
    let (cost, coeffs) = decay_cost(&basis, &DecayProfile::PowerLaw { q }, c_scale, seed)?;
    BanditEnv::assemble(mu, nu, basis, cost, coeffs, NoiseModel::Gaussian { sigma }, seed)
}

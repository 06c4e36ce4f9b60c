//! Optimistic learning of the unknown cost in coefficient space.
//!
//! Rewards are regressed against played-plan features by regularized
//! least-squares ([`RlsState`]); uncertainty is carried by a
//! [`ConfidenceEllipsoid`] whose radius is the log-determinant width
//! [`beta_width`]; actions come from the entropy-regularized optimism step
//! ([`optimism_step`]), which alternates between an entropic transport solve
//! at the current belief and the ellipsoid point most favorable to the
//! current plan. [`EntUcbAgent`] runs the full loop against a synthetic
//! environment, playing the reference coupling on round zero.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::{features, synthesize, BasisError, CoefficientVector, OrthonormalBasis};
use crate::env::{BanditEnv, EnvError};
use crate::measures::{pairing, relative_entropy, Coupling, DiscreteMeasure, MeasureError};
use crate::table::Table;
use crate::transport::{
    sinkhorn_allow_unconverged, DualPotentials, SinkhornOptions, TransportError,
};

#[derive(Debug, Error)]
pub enum BanditError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("feature vector has length {got}, state needs at least {need}")]
    DimensionMismatch { got: usize, need: usize },
    #[error("cannot rebase from order {0} down to {1}")]
    OrderShrink(usize, usize),
    #[error("history entry {0} has only {1} feature coordinates, {2} required")]
    HistoryUnavailable(usize, usize, usize),
    #[error("design matrix lost positive definiteness")]
    DesignNotPd,
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// Regularized least-squares state at order `n`:
/// `design = λI + Σ_s ϑ^(s)ϑ^(s)ᵀ`, `moment = Σ_s ϑ^(s) R_s`, with the full
/// observation history retained so the state can be rebuilt at a wider order.
#[derive(Debug, Clone)]
pub struct RlsState {
    n: usize,
    lambda: f64,
    t: usize,
    design: DMatrix<f64>,
    moment: DVector<f64>,
    estimate: DVector<f64>,
    history: Vec<(Vec<f64>, f64)>,
}

impl RlsState {
    pub fn new(n: usize, lambda: f64) -> Result<Self, BanditError> {
        if !(lambda > 0.0) {
            return Err(BanditError::InvalidConfig(format!("lambda must be > 0, got {lambda}")));
        }
        if n == 0 {
            return Err(BanditError::InvalidConfig("order must be >= 1".into()));
        }
        Ok(RlsState {
            n,
            lambda,
            t: 0,
            design: DMatrix::identity(n, n) * lambda,
            moment: DVector::zeros(n),
            estimate: DVector::zeros(n),
            history: Vec::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn moment(&self) -> &DVector<f64> {
        &self.moment
    }

    /// `γ̂ = design⁻¹ · moment`.
    pub fn estimate(&self) -> &DVector<f64> {
        &self.estimate
    }

    pub fn history(&self) -> &[(Vec<f64>, f64)] {
        &self.history
    }

    /// Rank-one update with the played features and observed reward.
    ///
    /// `theta` may be longer than the current order; the prefix enters the
    /// design and the full vector is retained for later [`RlsState::rebase`].
    pub fn update(&mut self, theta: &[f64], reward: f64) -> Result<(), BanditError> {
        if theta.len() < self.n {
            return Err(BanditError::DimensionMismatch { got: theta.len(), need: self.n });
        }
        for i in 0..self.n {
            for j in 0..self.n {
                self.design[(i, j)] += theta[i] * theta[j];
            }
        }
        for i in 0..self.n {
            self.moment[i] += theta[i] * reward;
        }
        self.t += 1;
        self.history.push((theta.to_vec(), reward));
        self.resolve()
    }

    fn resolve(&mut self) -> Result<(), BanditError> {
        let chol = self.cholesky()?;
        self.estimate = chol.solve(&self.moment);
        Ok(())
    }

    fn cholesky(&self) -> Result<Cholesky<f64, Dyn>, BanditError> {
        self.design.clone().cholesky().ok_or(BanditError::DesignNotPd)
    }

    /// Rebuild at a wider order from the stored history.
    pub fn rebase(&self, new_n: usize) -> Result<RlsState, BanditError> {
        if new_n < self.n {
            return Err(BanditError::OrderShrink(self.n, new_n));
        }
        if new_n == self.n {
            return Ok(self.clone());
        }
        let mut out = RlsState::new(new_n, self.lambda)?;
        for (idx, (theta, reward)) in self.history.iter().enumerate() {
            if theta.len() < new_n {
                return Err(BanditError::HistoryUnavailable(idx, theta.len(), new_n));
            }
            out.update(theta, *reward)?;
        }
        Ok(out)
    }

    /// `‖design·γ̂ - moment‖₂`, the normal-equation residual.
    pub fn normal_equation_residual(&self) -> f64 {
        (&self.design * &self.estimate - &self.moment).norm()
    }

    /// `log det(I + λ⁻¹ Σ ϑϑᵀ) = log det(design) - n log λ`.
    pub fn log_det_design_over_lambda(&self) -> f64 {
        let chol = self.design.clone().cholesky().expect("design is SPD");
        let logdet: f64 = chol.l().diagonal().iter().map(|d: &f64| d.ln()).sum::<f64>() * 2.0;
        logdet - self.n as f64 * self.lambda.ln()
    }

    /// `log det(I + (2λC)⁻¹ Σ ϑϑᵀ)`: the width-term determinant of the
    /// realized design.
    pub fn width_log_det(&self, c_bound: f64) -> f64 {
        let n = self.n;
        let scale = 1.0 / (2.0 * self.lambda * c_bound);
        let mut m = DMatrix::identity(n, n);
        for i in 0..n {
            for j in 0..n {
                let gram = self.design[(i, j)] - if i == j { self.lambda } else { 0.0 };
                m[(i, j)] += scale * gram;
            }
        }
        let chol = m.cholesky().expect("I + scaled Gram is SPD");
        chol.l().diagonal().iter().map(|d: &f64| d.ln()).sum::<f64>() * 2.0
    }
}

/// Confidence width
/// `β = σ·sqrt(log(4·det(I + λ⁻¹ Σ ϑϑᵀ)/δ²)) + sqrt(λ)·C`.
pub fn beta_width(state: &RlsState, delta: f64, c_bound: f64, sigma: f64) -> f64 {
    let logdet = state.log_det_design_over_lambda();
    sigma * (4.0_f64.ln() + logdet - 2.0 * delta.ln()).sqrt() + state.lambda.sqrt() * c_bound
}

/// `{γ : ‖γ - center‖_metric ≤ radius}` with the regularized design as metric.
#[derive(Debug, Clone)]
pub struct ConfidenceEllipsoid {
    center: DVector<f64>,
    metric: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    radius: f64,
    delta: f64,
}

impl ConfidenceEllipsoid {
    pub fn new(
        center: DVector<f64>,
        metric: DMatrix<f64>,
        radius: f64,
        delta: f64,
    ) -> Result<Self, BanditError> {
        if !(radius >= 0.0) {
            return Err(BanditError::InvalidConfig(format!("radius must be >= 0, got {radius}")));
        }
        let chol = metric.clone().cholesky().ok_or(BanditError::DesignNotPd)?;
        Ok(ConfidenceEllipsoid { center, metric, chol, radius, delta })
    }

    pub fn from_state(state: &RlsState, radius: f64, delta: f64) -> Result<Self, BanditError> {
        ConfidenceEllipsoid::new(state.estimate.clone(), state.design.clone(), radius, delta)
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Quadratic-form membership test: `(γ-c)ᵀ D (γ-c) ≤ β²`.
    pub fn contains(&self, gamma: &[f64]) -> bool {
        let d = DVector::from_column_slice(gamma) - &self.center;
        let q = (&self.metric * &d).dot(&d);
        q <= self.radius * self.radius
    }

    /// `argmin_{γ ∈ ellipsoid} ⟨γ|ϑ⟩ = center - β·D⁻¹ϑ / ‖ϑ‖_{D⁻¹}`;
    /// the center when `ϑ = 0`.
    pub fn optimistic_belief(&self, theta: &CoefficientVector) -> CoefficientVector {
        let th = DVector::from_column_slice(theta.as_slice());
        let w = self.chol.solve(&th);
        let denom = th.dot(&w).max(0.0).sqrt();
        if denom == 0.0 || self.radius == 0.0 {
            return CoefficientVector(self.center.iter().copied().collect());
        }
        let scale = self.radius / denom;
        CoefficientVector(
            self.center.iter().zip(w.iter()).map(|(c, wi)| c - scale * wi).collect(),
        )
    }
}

/// Entropy level per round: fixed, or `ε_t = α·t^{-α}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EpsSchedule {
    Fixed { value: f64 },
    Power { alpha: f64 },
}

/// Truncation order per round: fixed `n`, or `n_t = ⌈t^{1/(2q+1)}⌉`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OrderSchedule {
    Fixed { n: usize },
    Growing { q: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedules {
    pub eps: EpsSchedule,
    pub order: OrderSchedule,
}

impl Schedules {
    pub fn validate(&self) -> Result<(), BanditError> {
        match self.eps {
            EpsSchedule::Fixed { value } if !(value > 0.0) => {
                return Err(BanditError::InvalidConfig(format!("fixed eps must be > 0: {value}")))
            }
            EpsSchedule::Power { alpha } if !(alpha > 0.0 && alpha < 1.0) => {
                return Err(BanditError::InvalidConfig(format!("alpha must be in (0,1): {alpha}")))
            }
            _ => {}
        }
        match self.order {
            OrderSchedule::Fixed { n } if n == 0 => {
                Err(BanditError::InvalidConfig("fixed order must be >= 1".into()))
            }
            OrderSchedule::Growing { q } if !(q > 0.0) => {
                Err(BanditError::InvalidConfig(format!("growing order requires q > 0: {q}")))
            }
            _ => Ok(()),
        }
    }

    pub fn epsilon(&self, t: usize) -> f64 {
        let t = t.max(1) as f64;
        match self.eps {
            EpsSchedule::Fixed { value } => value,
            EpsSchedule::Power { alpha } => alpha * t.powf(-alpha),
        }
    }

    /// Order at round `t`, capped by the basis dimension.
    pub fn order(&self, t: usize, n_max: usize) -> usize {
        let raw = match self.order {
            OrderSchedule::Fixed { n } => n,
            OrderSchedule::Growing { q } => {
                (t.max(1) as f64).powf(1.0 / (2.0 * q + 1.0)).ceil() as usize
            }
        };
        raw.clamp(1, n_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntUcbConfig {
    pub delta: f64,
    pub lambda: f64,
    /// Declared sub-Gaussian noise level used in the width.
    pub sigma: f64,
    /// A-priori bound on the coefficient norm of the true cost.
    pub c_bound: f64,
    pub schedules: Schedules,
    /// Alternating-minimization stopping tolerance on the optimism value.
    #[serde(default = "defaults::alt_tol")]
    pub alt_tol: f64,
    #[serde(default = "defaults::alt_max_rounds")]
    pub alt_max_rounds: usize,
    #[serde(default = "defaults::sinkhorn_tol")]
    pub sinkhorn_tol: f64,
    #[serde(default = "defaults::sinkhorn_max_iter")]
    pub sinkhorn_max_iter: usize,
    /// Diagnostic multiplier on the width (1.0 for the calibrated agent).
    #[serde(default = "defaults::beta_scale")]
    pub beta_scale: f64,
}

mod defaults {
    pub fn alt_tol() -> f64 {
        1e-8
    }
    pub fn alt_max_rounds() -> usize {
        50
    }
    pub fn sinkhorn_tol() -> f64 {
        1e-6
    }
    pub fn sinkhorn_max_iter() -> usize {
        3_000
    }
    pub fn beta_scale() -> f64 {
        1.0
    }
}

impl EntUcbConfig {
    pub fn validate(&self) -> Result<(), BanditError> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(BanditError::InvalidConfig(format!("delta must be in (0,1): {}", self.delta)));
        }
        if !(self.lambda > 0.0) {
            return Err(BanditError::InvalidConfig(format!("lambda must be > 0: {}", self.lambda)));
        }
        if !(self.sigma > 0.0) {
            return Err(BanditError::InvalidConfig(format!("sigma must be > 0: {}", self.sigma)));
        }
        if !(self.c_bound > 0.0) {
            return Err(BanditError::InvalidConfig(format!("c_bound must be > 0: {}", self.c_bound)));
        }
        if !(self.alt_tol > 0.0) || self.alt_max_rounds == 0 {
            return Err(BanditError::InvalidConfig("alternation parameters invalid".into()));
        }
        if !(self.beta_scale >= 0.0) {
            return Err(BanditError::InvalidConfig("beta_scale must be >= 0".into()));
        }
        self.schedules.validate()
    }

    pub fn defaults_with(schedules: Schedules, sigma: f64, c_bound: f64) -> Self {
        EntUcbConfig {
            delta: 0.1,
            lambda: 1.0,
            sigma,
            c_bound,
            schedules,
            alt_tol: defaults::alt_tol(),
            alt_max_rounds: defaults::alt_max_rounds(),
            sinkhorn_tol: defaults::sinkhorn_tol(),
            sinkhorn_max_iter: defaults::sinkhorn_max_iter(),
            beta_scale: defaults::beta_scale(),
        }
    }
}

/// Best belief-action pair found by alternating minimization.
#[derive(Debug, Clone)]
pub struct OptimismOutcome {
    pub plan: Coupling,
    pub belief: CoefficientVector,
    /// `⟨synth(belief)|plan⟩ + ε·H(plan|ρ)` for the returned pair.
    pub value: f64,
    pub alternations: usize,
    pub potentials: DualPotentials,
}

/// Joint minimization of `⟨c_γ|π⟩ + ε·H(π|ρ)` over the ellipsoid and the
/// transport polytope by alternation: (a) solve the entropic problem at the
/// current belief and round; (b) move the belief to the ellipsoid point
/// minimizing the pairing with the plan's features. Both half-steps are exact
/// minimizations, so the value decreases up to rounding perturbation; ties
/// keep the earlier iterate.
#[allow(clippy::too_many_arguments)]
pub fn optimism_step(
    ellipsoid: &ConfidenceEllipsoid,
    basis: &OrthonormalBasis,
    n: usize,
    epsilon: f64,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cfg: &EntUcbConfig,
    warm: Option<&DualPotentials>,
) -> Result<OptimismOutcome, BanditError> {
    let rho = basis.rho();
    let mut gamma = CoefficientVector(ellipsoid.center().iter().copied().collect());
    let mut potentials = warm.cloned();
    let mut best: Option<OptimismOutcome> = None;
    let mut prev_value = f64::INFINITY;

    for round in 0..cfg.alt_max_rounds {
        let alternations = round + 1;
        let cost = synthesize(&gamma, basis)?;
        let opts = SinkhornOptions {
            tol: cfg.sinkhorn_tol,
            max_iter: cfg.sinkhorn_max_iter,
            anneal: potentials.is_none(),
            init: potentials.take(),
            trace: false,
        };
        let res = sinkhorn_allow_unconverged(&cost, mu, nu, epsilon, &opts)?;
        let entropy = relative_entropy(&res.plan, rho);
        let value = pairing(&cost, &res.plan)? + epsilon * entropy;
        if best.as_ref().map_or(true, |b| value < b.value) {
            best = Some(OptimismOutcome {
                plan: res.plan.clone(),
                belief: gamma.clone(),
                value,
                alternations,
                potentials: res.potentials.clone(),
            });
        }
        if round > 0 && prev_value - value < cfg.alt_tol {
            break;
        }
        prev_value = value;

        let theta = features(&res.plan, basis, n)?;
        gamma = ellipsoid.optimistic_belief(&theta);
        // The belief half-step value for the same plan is available cheaply
        // and (gamma, plan) is itself a feasible pair.
        let lin: f64 =
            gamma.as_slice().iter().zip(theta.as_slice()).map(|(g, t)| g * t).sum();
        let half_value = lin + epsilon * entropy;
        if best.as_ref().map_or(true, |b| half_value < b.value) {
            best = Some(OptimismOutcome {
                plan: res.plan.clone(),
                belief: gamma.clone(),
                value: half_value,
                alternations,
                potentials: res.potentials.clone(),
            });
        }
        potentials = Some(res.potentials);
    }
    Ok(best.expect("at least one alternation ran"))
}

/// One logged round of the learning loop.
#[derive(Debug, Clone)]
pub struct RoundLog {
    pub t: usize,
    pub eps_t: f64,
    pub n_t: usize,
    pub plan: Coupling,
    pub belief: CoefficientVector,
    pub reward: f64,
    pub beta: f64,
    pub theta_norm: f64,
    pub optimism_value: f64,
    pub in_confidence_set: bool,
}

/// Serializable agent state sufficient to resume a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgentCheckpoint {
    pub round: usize,
    pub n: usize,
    pub lambda: f64,
    pub design: Table,
    pub moment: Vec<f64>,
    pub history: Vec<(Vec<f64>, f64)>,
}

/// Optimism-in-the-face-of-uncertainty agent for the transport learning game.
#[derive(Debug, Clone)]
pub struct EntUcbAgent {
    cfg: EntUcbConfig,
    rls: RlsState,
    round: usize,
    warm: Option<DualPotentials>,
}

impl EntUcbAgent {
    pub fn new(env: &BanditEnv, cfg: EntUcbConfig) -> Result<Self, BanditError> {
        cfg.validate()?;
        let n_max = env.basis().n_max();
        let n1 = cfg.schedules.order(1, n_max);
        Ok(EntUcbAgent { cfg, rls: RlsState::new(n1, cfg.lambda)?, round: 0, warm: None })
    }

    pub fn config(&self) -> &EntUcbConfig {
        &self.cfg
    }

    pub fn rls(&self) -> &RlsState {
        &self.rls
    }

    pub fn round(&self) -> usize {
        self.round
    }

    /// Play one round: round 0 plays the reference coupling `μ⊗ν`, later
    /// rounds rebase to the scheduled order, build the ellipsoid and play the
    /// optimism step's plan; the reward updates the regression state.
    pub fn step(
        &mut self,
        env: &BanditEnv,
        noise: &mut rand_chacha::ChaCha12Rng,
    ) -> Result<RoundLog, BanditError> {
        let t = self.round;
        let basis = env.basis();
        let n_max = basis.n_max();
        let sched_t = t.max(1);
        let n_t = self.cfg.schedules.order(sched_t, n_max);
        let eps_t = self.cfg.schedules.epsilon(sched_t);
        if n_t > self.rls.n() {
            self.rls = self.rls.rebase(n_t)?;
        }
        let beta = beta_width(&self.rls, self.cfg.delta, self.cfg.c_bound, self.cfg.sigma)
            * self.cfg.beta_scale;
        let ellipsoid = ConfidenceEllipsoid::from_state(&self.rls, beta, self.cfg.delta)?;
        let in_confidence_set = ellipsoid.contains(env.true_coeffs().prefix(self.rls.n()));

        let (plan, belief, optimism_value) = if t == 0 {
            // Round zero explores with the reference coupling.
            let plan = basis.rho().as_coupling();
            let belief = CoefficientVector(ellipsoid.center().iter().copied().collect());
            let cost = synthesize(&belief, basis)?;
            let value = pairing(&cost, &plan)? + eps_t * relative_entropy(&plan, basis.rho());
            (plan, belief, value)
        } else {
            let out = optimism_step(
                &ellipsoid,
                basis,
                self.rls.n(),
                eps_t,
                env.mu(),
                env.nu(),
                &self.cfg,
                self.warm.as_ref(),
            )?;
            self.warm = Some(out.potentials);
            (out.plan, out.belief, out.value)
        };

        let reward = env.pull(&plan, noise)?;
        let theta_full = features(&plan, basis, n_max)?;
        let theta_norm = theta_full
            .prefix(self.rls.n())
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt();
        self.rls.update(theta_full.as_slice(), reward)?;
        self.round += 1;

        Ok(RoundLog {
            t,
            eps_t,
            n_t,
            plan,
            belief,
            reward,
            beta,
            theta_norm,
            optimism_value,
            in_confidence_set,
        })
    }

    pub fn checkpoint(&self) -> AgentCheckpoint {
        let n = self.rls.n();
        let design = Table::from_vec(
            n,
            n,
            (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| self.rls.design[(i, j)]).collect(),
        )
        .expect("square design");
        AgentCheckpoint {
            round: self.round,
            n,
            lambda: self.rls.lambda,
            design,
            moment: self.rls.moment.iter().copied().collect(),
            history: self.rls.history.clone(),
        }
    }

    pub fn restore(
        env: &BanditEnv,
        cfg: EntUcbConfig,
        ck: &AgentCheckpoint,
    ) -> Result<Self, BanditError> {
        cfg.validate()?;
        let mut rls = RlsState::new(ck.n, ck.lambda)?;
        for (theta, reward) in &ck.history {
            rls.update(theta, *reward)?;
        }
        if rls.t != ck.round {
            return Err(BanditError::InvalidConfig(format!(
                "checkpoint round {} does not match history length {}",
                ck.round, rls.t
            )));
        }
        let _ = env.basis(); // checkpoint is only meaningful against the same env
        Ok(EntUcbAgent { cfg, rls, round: ck.round, warm: None })
    }
}

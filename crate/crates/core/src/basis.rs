//! Orthonormal bases of the weighted space `L²(ρ)` on the support grid.
//!
//! Basis functions are tabulated on the `K × K'` grid cells (cell index
//! `k = i·K' + j`), orthonormal under `⟨f|g⟩_ρ = Σ_ij f_ij g_ij ρ_ij`. Costs
//! live in this space through coefficient vectors `γ` ([`synthesize`] /
//! [`analyze`]); couplings act on it through feature vectors `ϑ_k = ∫ φ_k dπ`
//! ([`features`]). Truncating at order `n` incurs an error controlled by the
//! coefficient tail `Σ_{k>n} |γ_k|` ([`tail_bound`]).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measures::{CostTable, Coupling, ProductMeasure};
use crate::table::Table;

/// Residual-norm threshold below which Gram-Schmidt declares rank deficiency.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum BasisError {
    #[error("reference measure has a zero-mass cell (index {0})")]
    ZeroReferenceMass(usize),
    #[error("embedding {0} is linearly dependent on its predecessors (pivot norm {1:.3e})")]
    RankDeficient(usize, f64),
    #[error("requested order {0} exceeds grid dimension {1}")]
    OrderTooLarge(usize, usize),
    #[error("requested order {0} exceeds basis order {1}")]
    TruncationTooLarge(usize, usize),
    #[error("invalid decay profile: {0}")]
    InvalidProfile(String),
}

/// Coefficient sequence `γ` in a chosen basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientVector(pub Vec<f64>);

impl CoefficientVector {
    pub fn zeros(n: usize) -> Self {
        CoefficientVector(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// First `n` coefficients (`γ|_n`).
    pub fn prefix(&self, n: usize) -> &[f64] {
        &self.0[..n.min(self.0.len())]
    }

    pub fn l2_norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn l1_norm(&self) -> f64 {
        self.0.iter().map(|v| v.abs()).sum()
    }
}

/// Basis functions tabulated on the grid, orthonormal in `L²(ρ)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrthonormalBasis {
    /// `n_max` rows, each of length `K·K'` (row-major grid values).
    eval: Vec<Vec<f64>>,
    rho: ProductMeasure,
    n_max: usize,
}

impl OrthonormalBasis {
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn rho(&self) -> &ProductMeasure {
        &self.rho
    }

    pub fn grid_shape(&self) -> (usize, usize) {
        self.rho.shape()
    }

    pub fn function(&self, k: usize) -> &[f64] {
        &self.eval[k]
    }

    /// `⟨f|g⟩_ρ` for grid tabulations.
    fn inner_rho(&self, f: &[f64], g: &[f64]) -> f64 {
        inner_rho(f, g, self.rho.weights().as_slice())
    }

    /// Worst deviation of the Gram matrix from the identity.
    pub fn gram_error(&self) -> f64 {
        let mut worst = 0.0_f64;
        for k in 0..self.n_max {
            for l in k..self.n_max {
                let target = if k == l { 1.0 } else { 0.0 };
                worst = worst.max((self.inner_rho(&self.eval[k], &self.eval[l]) - target).abs());
            }
        }
        worst
    }
}

fn inner_rho(f: &[f64], g: &[f64], rho: &[f64]) -> f64 {
    f.iter().zip(g).zip(rho).map(|((a, b), r)| a * b * r).sum()
}

fn norm_rho(f: &[f64], rho: &[f64]) -> f64 {
    inner_rho(f, f, rho).max(0.0).sqrt()
}

/// Indicator basis on the grid cells: `φ_(i,j) = 1_[cell (i,j)] / √ρ_ij`,
/// indexed `k = i·K' + j`. Exactly `K·K'` functions.
pub fn loci_indicator_basis(rho: &ProductMeasure) -> Result<OrthonormalBasis, BasisError> {
    let cells = rho.cells();
    let w = rho.weights().as_slice();
    let mut eval = Vec::with_capacity(cells);
    for k in 0..cells {
        if w[k] <= 0.0 {
            return Err(BasisError::ZeroReferenceMass(k));
        }
        let mut row = vec![0.0; cells];
        row[k] = 1.0 / w[k].sqrt();
        eval.push(row);
    }
    Ok(OrthonormalBasis { eval, rho: rho.clone(), n_max: cells })
}

/// Modified Gram-Schmidt with re-orthogonalization; the first `p` functions
/// span the embeddings, the rest complete the system with orthogonalized cell
/// indicators up to `n_max` functions.
pub fn gram_schmidt(
    embeddings: &[CostTable],
    rho: &ProductMeasure,
    n_max: usize,
) -> Result<OrthonormalBasis, BasisError> {
    let cells = rho.cells();
    if n_max > cells {
        return Err(BasisError::OrderTooLarge(n_max, cells));
    }
    let w = rho.weights().as_slice();
    if let Some(k) = w.iter().position(|&r| r <= 0.0) {
        return Err(BasisError::ZeroReferenceMass(k));
    }
    let mut eval: Vec<Vec<f64>> = Vec::with_capacity(n_max);

    let push_orthogonalized = |eval: &mut Vec<Vec<f64>>, mut v: Vec<f64>| -> f64 {
        // Two projection sweeps (re-orthogonalization) keep the Gram matrix
        // at identity to ~1e-14 even for ill-conditioned embeddings.
        for _ in 0..2 {
            for prev in eval.iter() {
                let proj = inner_rho(&v, prev, w);
                for (x, p) in v.iter_mut().zip(prev) {
                    *x -= proj * p;
                }
            }
        }
        let norm = norm_rho(&v, w);
        if norm >= RANK_TOL {
            for x in v.iter_mut() {
                *x /= norm;
            }
            eval.push(v);
        }
        norm
    };

    for (idx, emb) in embeddings.iter().enumerate() {
        if eval.len() == n_max {
            break;
        }
        let norm = push_orthogonalized(&mut eval, emb.values().as_slice().to_vec());
        if norm < RANK_TOL {
            return Err(BasisError::RankDeficient(idx, norm));
        }
    }

    // Complete with cell indicators; dependent ones are skipped silently.
    for k in 0..cells {
        if eval.len() == n_max {
            break;
        }
        let mut v = vec![0.0; cells];
        v[k] = 1.0 / w[k].sqrt();
        push_orthogonalized(&mut eval, v);
    }
    debug_assert_eq!(eval.len(), n_max);
    Ok(OrthonormalBasis { eval, rho: rho.clone(), n_max })
}

/// Separable discrete cosine products on the index grid, ordered by total
/// frequency (ties by row frequency), then re-orthonormalized against `ρ`.
///
/// For uniform `ρ` on a regular grid this is the standard 2-D DCT-II system
/// and the Gram-Schmidt pass is numerically a no-op.
pub fn cosine_basis(rho: &ProductMeasure, n_max: usize) -> Result<OrthonormalBasis, BasisError> {
    let (k_rows, k_cols) = rho.shape();
    let cells = k_rows * k_cols;
    if n_max > cells {
        return Err(BasisError::OrderTooLarge(n_max, cells));
    }
    let mut freqs: Vec<(usize, usize)> = (0..k_rows)
        .flat_map(|fx| (0..k_cols).map(move |fy| (fx, fy)))
        .collect();
    freqs.sort_by_key(|&(fx, fy)| (fx + fy, fx, fy));

    let amp = |f: usize| if f == 0 { 1.0 } else { std::f64::consts::SQRT_2 };
    let mut tables = Vec::with_capacity(n_max);
    for &(fx, fy) in freqs.iter().take(n_max) {
        let mut t = Table::zeros(k_rows, k_cols);
        for i in 0..k_rows {
            let gx = amp(fx)
                * (std::f64::consts::PI * fx as f64 * (i as f64 + 0.5) / k_rows as f64).cos();
            for j in 0..k_cols {
                let gy = amp(fy)
                    * (std::f64::consts::PI * fy as f64 * (j as f64 + 0.5) / k_cols as f64).cos();
                t.set(i, j, gx * gy);
            }
        }
        tables.push(CostTable::new(t).expect("cosine values are finite"));
    }
    gram_schmidt(&tables, rho, n_max)
}

/// Known decay of the coefficient mass: `ζ(n)` is the fraction of the
/// `ℓ1` coefficient mass captured by the first `n` functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DecayProfile {
    /// Linear ramp up to order `n`: all mass within the first `n` coefficients.
    FiniteOrder { n: usize },
    /// `ζ(n) = 1 - n^{-q}`; larger `q` means faster decay.
    PowerLaw { q: f64 },
}

impl DecayProfile {
    pub fn validate(&self) -> Result<(), BasisError> {
        match *self {
            DecayProfile::FiniteOrder { n } if n == 0 => {
                Err(BasisError::InvalidProfile("finite order requires n >= 1".into()))
            }
            DecayProfile::PowerLaw { q } if !(q > 0.0) => {
                Err(BasisError::InvalidProfile(format!("power law requires q > 0, got {q}")))
            }
            _ => Ok(()),
        }
    }

    /// `ζ(n)`, monotone increasing with range in `[0, 1]` and `ζ(0) = 0`.
    pub fn zeta(&self, n: usize) -> f64 {
        if n == 0 {
            return 0.0;
        }
        match *self {
            DecayProfile::FiniteOrder { n: order } => (n as f64 / order as f64).min(1.0),
            DecayProfile::PowerLaw { q } => 1.0 - (n as f64).powf(-q),
        }
    }
}

/// Draws a cost whose coefficient magnitudes follow the decay profile:
/// `|γ_i| = C·(ζ(i) - ζ(i-1))` so that `Σ_{i≤n} |γ_i| = C·ζ(n)` and
/// `Σ_{i>n} |γ_i| = C·(1 - ζ(n))` exactly; the top-order coefficient absorbs
/// the remaining mass (the basis is finite, the profile's tail is not).
/// Signs are Rademacher from the seeded stream.
pub fn decay_cost(
    basis: &OrthonormalBasis,
    profile: &DecayProfile,
    scale: f64,
    seed: u64,
) -> Result<(CostTable, CoefficientVector), BasisError> {
    profile.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let n_max = basis.n_max();
    let mut coeffs = Vec::with_capacity(n_max);
    let mut prev = 0.0;
    for i in 1..=n_max {
        let z = if i == n_max { 1.0 } else { profile.zeta(i) };
        let mag = scale * (z - prev);
        prev = z;
        let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        coeffs.push(sign * mag);
    }
    let gamma = CoefficientVector(coeffs);
    let cost = synthesize(&gamma, basis)?;
    Ok((cost, gamma))
}

/// Feature vector `ϑ_k = ∫ φ_k dπ = Σ_ij φ_k(i,j) π_ij` for `k < n`.
pub fn features(pi: &Coupling, basis: &OrthonormalBasis, n: usize) -> Result<CoefficientVector, BasisError> {
    if n > basis.n_max() {
        return Err(BasisError::TruncationTooLarge(n, basis.n_max()));
    }
    let mass = pi.mass().as_slice();
    let theta = (0..n)
        .map(|k| basis.eval[k].iter().zip(mass).map(|(p, m)| p * m).sum())
        .collect();
    Ok(CoefficientVector(theta))
}

/// `Σ_i γ_i φ_i` evaluated on the grid.
pub fn synthesize(gamma: &CoefficientVector, basis: &OrthonormalBasis) -> Result<CostTable, BasisError> {
    if gamma.len() > basis.n_max() {
        return Err(BasisError::TruncationTooLarge(gamma.len(), basis.n_max()));
    }
    let (rows, cols) = basis.grid_shape();
    let mut values = vec![0.0; rows * cols];
    for (k, &g) in gamma.as_slice().iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        for (v, p) in values.iter_mut().zip(&basis.eval[k]) {
            *v += g * p;
        }
    }
    let table = Table::from_vec(rows, cols, values).expect("shape by construction");
    Ok(CostTable::new(table).expect("finite by construction"))
}

/// Coefficients `γ_k = ⟨c|φ_k⟩_ρ` of a cost in the basis (full order).
pub fn analyze(cost: &CostTable, basis: &OrthonormalBasis) -> CoefficientVector {
    let c = cost.values().as_slice();
    let w = basis.rho.weights().as_slice();
    CoefficientVector(
        (0..basis.n_max())
            .map(|k| inner_rho(c, &basis.eval[k], w))
            .collect(),
    )
}

/// Coefficient tail `Σ_{k>n} |γ_k|`: bounds the pairing error of truncation
/// at order `n` against any coupling with unit-bounded features.
pub fn tail_bound(gamma_full: &CoefficientVector, n: usize) -> f64 {
    gamma_full.as_slice().iter().skip(n).map(|g| g.abs()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{product_measure, pairing, DiscreteMeasure};
    use crate::transport::round_to_feasible;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn uniform_rho(k: usize, kp: usize) -> ProductMeasure {
        product_measure(
            &DiscreteMeasure::uniform_loci(k),
            &DiscreteMeasure::uniform_loci(kp),
        )
    }

    fn random_coupling(rho: &ProductMeasure, rng: &mut impl Rng) -> Coupling {
        let (k, kp) = rho.shape();
        let raw = Table::from_vec(k, kp, (0..k * kp).map(|_| rng.gen::<f64>() + 0.05).collect())
            .unwrap();
        round_to_feasible(&raw, rho.row_measure(), rho.col_measure()).unwrap()
    }

    #[test]
    fn loci_basis_on_uniform_grid() {
        let rho = uniform_rho(2, 2);
        let basis = loci_indicator_basis(&rho).unwrap();
        assert_eq!(basis.n_max(), 4);
        // 1/sqrt(0.25) = 2 on the own cell, 0 elsewhere.
        for k in 0..4 {
            for c in 0..4 {
                let expect = if k == c { 2.0 } else { 0.0 };
                assert_eq!(basis.function(k)[c], expect);
            }
        }
        assert_eq!(basis.gram_error(), 0.0);
    }

    #[test]
    fn loci_round_trip_is_exact() {
        let rho = uniform_rho(3, 4);
        let basis = loci_indicator_basis(&rho).unwrap();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(11);
        let c = CostTable::new(
            Table::from_vec(3, 4, (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap(),
        )
        .unwrap();
        let gamma = analyze(&c, &basis);
        let back = synthesize(&gamma, &basis).unwrap();
        assert!(back.values().max_abs_diff(c.values()) <= 1e-14);
    }

    #[test]
    fn loci_rejects_zero_reference_mass() {
        // A zero marginal weight is legal for a measure but kills the loci basis.
        let mu = DiscreteMeasure::new(vec![vec![0.0], vec![1.0]], vec![1.0, 0.0]).unwrap();
        let nu = DiscreteMeasure::uniform_loci(2);
        let rho = product_measure(&mu, &nu);
        assert!(matches!(
            loci_indicator_basis(&rho),
            Err(BasisError::ZeroReferenceMass(2))
        ));
    }

    #[test]
    fn gram_schmidt_single_embedding_normalizes() {
        let rho = uniform_rho(2, 2);
        let phi = CostTable::new(Table::fill(2, 2, 3.0)).unwrap();
        let basis = gram_schmidt(std::slice::from_ref(&phi), &rho, 1).unwrap();
        for c in 0..4 {
            assert_abs_diff_eq!(basis.function(0)[c], 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn gram_schmidt_random_embeddings_span_and_orthonormal() {
        let rho = uniform_rho(4, 4);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(3);
        let embeddings: Vec<CostTable> = (0..3)
            .map(|_| {
                CostTable::new(
                    Table::from_vec(4, 4, (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect())
                        .unwrap(),
                )
                .unwrap()
            })
            .collect();
        let basis = gram_schmidt(&embeddings, &rho, 16).unwrap();
        assert!(basis.gram_error() <= 1e-10);
        // Each embedding reconstructs from its first-3 coefficients.
        for emb in &embeddings {
            let gamma = analyze(emb, &basis);
            let head = CoefficientVector(gamma.prefix(3).to_vec());
            let recon = synthesize(&head, &basis).unwrap();
            assert!(recon.values().max_abs_diff(emb.values()) <= 1e-9);
        }
    }

    #[test]
    fn gram_schmidt_detects_rank_deficiency() {
        let rho = uniform_rho(2, 2);
        let a = CostTable::new(Table::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]])).unwrap();
        let b = CostTable::new(Table::from_rows(&[vec![2.0, 4.0], vec![6.0, 8.0]])).unwrap();
        match gram_schmidt(&[a, b], &rho, 2) {
            Err(BasisError::RankDeficient(1, _)) => {}
            other => panic!("expected rank deficiency at index 1, got {other:?}"),
        }
    }

    #[test]
    fn cosine_basis_matches_dct_on_uniform_grid() {
        let rho = uniform_rho(4, 4);
        let basis = cosine_basis(&rho, 16).unwrap();
        assert!(basis.gram_error() <= 1e-10);
        // First function is the constant 1.
        for c in 0..16 {
            assert_abs_diff_eq!(basis.function(0)[c], 1.0, epsilon = 1e-12);
        }
        // Compare against direct DCT-II evaluation for the second function
        // (frequencies (0,1) after total-frequency ordering).
        for i in 0..4 {
            for j in 0..4 {
                let expect = std::f64::consts::SQRT_2
                    * (std::f64::consts::PI * (j as f64 + 0.5) / 4.0).cos();
                assert_abs_diff_eq!(basis.function(1)[i * 4 + j], expect, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn decay_cost_telescopes() {
        let rho = uniform_rho(8, 8);
        let basis = cosine_basis(&rho, 64).unwrap();
        let scale = 1.7;
        for q in [0.5, 1.0] {
            let profile = DecayProfile::PowerLaw { q };
            let (_, gamma) = decay_cost(&basis, &profile, scale, 5).unwrap();
            for n in [1usize, 5, 50] {
                let head: f64 = gamma.prefix(n).iter().map(|g| g.abs()).sum();
                assert_abs_diff_eq!(head, scale * profile.zeta(n), epsilon = 1e-12);
                assert_abs_diff_eq!(
                    tail_bound(&gamma, n),
                    scale * (n as f64).powf(-q),
                    epsilon = 1e-12
                );
            }
        }
        // Finite order: zero tail past N.
        let profile = DecayProfile::FiniteOrder { n: 6 };
        let (_, gamma) = decay_cost(&basis, &profile, scale, 5).unwrap();
        assert_eq!(tail_bound(&gamma, 6), 0.0);
        assert!(gamma.as_slice()[6..].iter().all(|&g| g == 0.0));
    }

    #[test]
    fn features_and_pairing_identity() {
        let rho = uniform_rho(3, 3);
        let basis = cosine_basis(&rho, 9).unwrap();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(17);

        // theta_1 = 1 for any coupling when phi_1 is the constant.
        let pi = random_coupling(&rho, &mut rng);
        let theta = features(&pi, &basis, 9).unwrap();
        assert_abs_diff_eq!(theta.as_slice()[0], 1.0, epsilon = 1e-12);

        // Pairing identity for gamma supported on the first n coordinates.
        for _ in 0..20 {
            let n = rng.gen_range(1..=9);
            let mut gamma = CoefficientVector::zeros(9);
            for g in gamma.0.iter_mut().take(n) {
                *g = rng.gen_range(-1.0..1.0);
            }
            let cost = synthesize(&gamma, &basis).unwrap();
            let pi = random_coupling(&rho, &mut rng);
            let theta = features(&pi, &basis, 9).unwrap();
            let dot: f64 = gamma.as_slice().iter().zip(theta.as_slice()).map(|(a, b)| a * b).sum();
            assert_abs_diff_eq!(dot, pairing(&cost, &pi).unwrap(), epsilon = 1e-12);
        }
    }

    #[test]
    fn loci_features_are_mass_over_sqrt_rho() {
        let rho = uniform_rho(2, 3);
        let basis = loci_indicator_basis(&rho).unwrap();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(23);
        let pi = random_coupling(&rho, &mut rng);
        let theta = features(&pi, &basis, 6).unwrap();
        let bound = rho
            .weights()
            .as_slice()
            .iter()
            .fold(0.0_f64, |m, &r| m.max(1.0 / r.sqrt()));
        let mut norm2 = 0.0;
        for cell in 0..6 {
            let expect = pi.mass().as_slice()[cell] / rho.weights().as_slice()[cell].sqrt();
            assert_abs_diff_eq!(theta.as_slice()[cell], expect, epsilon = 1e-14);
            norm2 += expect * expect;
        }
        assert!(norm2.sqrt() <= bound + 1e-12);
    }

    #[test]
    fn parseval_for_synthesized_costs() {
        let rho = uniform_rho(3, 4);
        let basis = cosine_basis(&rho, 12).unwrap();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(29);
        for _ in 0..10 {
            let gamma =
                CoefficientVector((0..12).map(|_| rng.gen_range(-2.0..2.0)).collect());
            let cost = synthesize(&gamma, &basis).unwrap();
            let norm2: f64 = cost
                .values()
                .as_slice()
                .iter()
                .zip(rho.weights().as_slice())
                .map(|(c, r)| c * c * r)
                .sum();
            assert_abs_diff_eq!(norm2, gamma.l2_norm().powi(2), epsilon = 1e-10);
            // analyze . synthesize = identity.
            let back = analyze(&cost, &basis);
            for (a, b) in back.as_slice().iter().zip(gamma.as_slice()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn truncation_error_bounded_by_tail() {
        let rho = uniform_rho(4, 4);
        let basis = cosine_basis(&rho, 16).unwrap();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(31);
        for _ in 0..100 {
            let gamma =
                CoefficientVector((0..16).map(|_| rng.gen_range(-1.0..1.0)).collect());
            let cost = synthesize(&gamma, &basis).unwrap();
            let pi = random_coupling(&rho, &mut rng);
            let theta = features(&pi, &basis, 16).unwrap();
            let n = rng.gen_range(0..16);
            let head: f64 = gamma.prefix(n).iter().zip(theta.prefix(n)).map(|(a, b)| a * b).sum();
            let err = (pairing(&cost, &pi).unwrap() - head).abs();
            let theta_tail_max = theta.as_slice()[n..]
                .iter()
                .fold(0.0_f64, |m, t| m.max(t.abs()));
            assert!(err <= tail_bound(&gamma, n) * theta_tail_max + 1e-12);
        }
    }

    #[test]
    fn features_linear_in_coupling() {
        let rho = uniform_rho(3, 3);
        let basis = cosine_basis(&rho, 9).unwrap();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(37);
        for _ in 0..20 {
            let pi1 = random_coupling(&rho, &mut rng);
            let pi2 = random_coupling(&rho, &mut rng);
            let a = rng.gen_range(0.0..1.0);
            let mixed = pi1.mass().map(|v| v * a).add_scaled(pi2.mass(), 1.0 - a).unwrap();
            let mix = Coupling::new(mixed).unwrap();
            let t1 = features(&pi1, &basis, 9).unwrap();
            let t2 = features(&pi2, &basis, 9).unwrap();
            let tm = features(&mix, &basis, 9).unwrap();
            for k in 0..9 {
                let expect = a * t1.as_slice()[k] + (1.0 - a) * t2.as_slice()[k];
                assert_abs_diff_eq!(tm.as_slice()[k], expect, epsilon = 1e-12);
            }
        }
    }
}

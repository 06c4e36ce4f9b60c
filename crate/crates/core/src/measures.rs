//! Discrete probability measures, couplings and the entropic geometry on the
//! support grid.
//!
//! A [`DiscreteMeasure`] is a weighted finite support in `ℝ^d`. Marginals
//! `μ` (size `K`) and `ν` (size `K'`) induce the product reference measure
//! `ρ = μ⊗ν` on the `K × K'` grid, against which couplings are measured by
//! [`relative_entropy`]. Actions of the learning game are [`Coupling`]s; costs
//! are [`CostTable`]s; the two meet in the bilinear [`pairing`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::table::{Table, TableError};

/// Construction-time weight tolerance: weights must sum to 1 within this
/// before exact renormalization.
pub const WEIGHT_TOL: f64 = 1e-12;

/// Default feasibility tolerance for coupling marginals.
pub const FEAS_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("weights must be nonnegative, got {0}")]
    NegativeWeight(f64),
    #[error("weights sum to {0}, expected 1 within {WEIGHT_TOL}")]
    WeightSum(f64),
    #[error("support points {0} and {1} coincide")]
    DuplicatePoint(usize, usize),
    #[error("point {0} has dimension {1}, expected {2}")]
    DimensionMismatch(usize, usize, usize),
    #[error("empty support")]
    EmptySupport,
    #[error("non-finite value encountered")]
    NonFinite,
    #[error("coupling has negative entry {0}")]
    NegativeMass(f64),
    #[error(transparent)]
    Shape(#[from] TableError),
}

/// Weighted finite support in `ℝ^d`: pairwise-distinct points and
/// probability weights (renormalized exactly at construction).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self, MeasureError> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(MeasureError::EmptySupport);
        }
        let dim = points[0].len();
        for (k, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(MeasureError::DimensionMismatch(k, p.len(), dim));
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(MeasureError::NonFinite);
            }
        }
        for i in 0..points.len() {
            for j in (i + 1)..points.len() {
                if points[i] == points[j] {
                    return Err(MeasureError::DuplicatePoint(i, j));
                }
            }
        }
        let mut sum = 0.0;
        for &w in &weights {
            if !w.is_finite() {
                return Err(MeasureError::NonFinite);
            }
            if w < 0.0 {
                return Err(MeasureError::NegativeWeight(w));
            }
            sum += w;
        }
        if (sum - 1.0).abs() > WEIGHT_TOL {
            return Err(MeasureError::WeightSum(sum));
        }
        // Renormalize exactly so downstream sums cannot drift over long runs.
        let weights = weights.iter().map(|w| w / sum).collect();
        Ok(DiscreteMeasure { points, weights })
    }

    /// Uniform measure on the 1-D loci `0, 1, ..., n-1`.
    pub fn uniform_loci(n: usize) -> Self {
        let points = (0..n).map(|i| vec![i as f64]).collect();
        DiscreteMeasure::new(points, vec![1.0 / n as f64; n]).expect("uniform loci are valid")
    }

    /// Uniform measure on the half-integer 1-D grid `(i + 1/2)/n ∈ (0,1)`.
    pub fn uniform_unit_grid(n: usize) -> Self {
        let points = (0..n).map(|i| vec![(i as f64 + 0.5) / n as f64]).collect();
        DiscreteMeasure::new(points, vec![1.0 / n as f64; n]).expect("unit grid is valid")
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }
}

/// The independent coupling `ρ = μ⊗ν` with exact product weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProductMeasure {
    row_measure: DiscreteMeasure,
    col_measure: DiscreteMeasure,
    weight_table: Table,
}

/// `ρ = μ⊗ν`.
pub fn product_measure(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> ProductMeasure {
    let mut table = Table::zeros(mu.len(), nu.len());
    for i in 0..mu.len() {
        for j in 0..nu.len() {
            table.set(i, j, mu.weights()[i] * nu.weights()[j]);
        }
    }
    ProductMeasure { row_measure: mu.clone(), col_measure: nu.clone(), weight_table: table }
}

impl ProductMeasure {
    pub fn row_measure(&self) -> &DiscreteMeasure {
        &self.row_measure
    }

    pub fn col_measure(&self) -> &DiscreteMeasure {
        &self.col_measure
    }

    pub fn weights(&self) -> &Table {
        &self.weight_table
    }

    pub fn shape(&self) -> (usize, usize) {
        self.weight_table.shape()
    }

    pub fn cells(&self) -> usize {
        self.row_measure.len() * self.col_measure.len()
    }

    /// The reference measure as a coupling (it is one).
    pub fn as_coupling(&self) -> Coupling {
        Coupling { mass: self.weight_table.clone() }
    }
}

/// Nonnegative `K × K'` mass table; the bandit action. Marginal feasibility
/// against concrete `(μ, ν)` is checked by [`check_coupling`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    mass: Table,
}

impl Coupling {
    pub fn new(mass: Table) -> Result<Self, MeasureError> {
        for &v in mass.as_slice() {
            if !v.is_finite() {
                return Err(MeasureError::NonFinite);
            }
            if v < 0.0 {
                return Err(MeasureError::NegativeMass(v));
            }
        }
        Ok(Coupling { mass })
    }

    pub fn mass(&self) -> &Table {
        &self.mass
    }

    pub fn shape(&self) -> (usize, usize) {
        self.mass.shape()
    }
}

/// Real-valued costs on the grid; all entries finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostTable {
    values: Table,
}

impl CostTable {
    pub fn new(values: Table) -> Result<Self, MeasureError> {
        if values.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(MeasureError::NonFinite);
        }
        Ok(CostTable { values })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        CostTable { values: Table::zeros(rows, cols) }
    }

    pub fn values(&self) -> &Table {
        &self.values
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.shape()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.max_abs()
    }
}

/// Duality pairing `⟨c|π⟩ = Σ_ij c_ij π_ij`.
pub fn pairing(c: &CostTable, pi: &Coupling) -> Result<f64, MeasureError> {
    c.values().same_shape(pi.mass())?;
    Ok(c
        .values()
        .as_slice()
        .iter()
        .zip(pi.mass().as_slice())
        .map(|(a, b)| a * b)
        .sum())
}

/// Relative entropy `H(π|ρ) = Σ π_ij log(π_ij/ρ_ij)` with `0·log 0 = 0`;
/// `+∞` when `π` puts mass on a `ρ`-null cell (absolute continuity fails).
pub fn relative_entropy(pi: &Coupling, rho: &ProductMeasure) -> f64 {
    debug_assert_eq!(pi.shape(), rho.shape());
    let mut h = 0.0;
    for (&p, &r) in pi.mass().as_slice().iter().zip(rho.weights().as_slice()) {
        if p > 0.0 {
            if r <= 0.0 {
                return f64::INFINITY;
            }
            h += p * (p / r).ln();
        }
    }
    h
}

/// Marginal feasibility report for a coupling against `(μ, ν)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub max_row_error: f64,
    pub max_col_error: f64,
    pub min_entry: f64,
    pub feasible: bool,
}

/// Reports the worst row/column marginal violation and the minimum entry;
/// feasible iff all within `tol` and the minimum entry is `≥ -tol`.
pub fn check_coupling(
    pi: &Coupling,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    tol: f64,
) -> FeasibilityReport {
    let rows = pi.mass().row_sums();
    let cols = pi.mass().col_sums();
    let max_row_error = rows
        .iter()
        .zip(mu.weights())
        .fold(0.0_f64, |m, (r, w)| m.max((r - w).abs()));
    let max_col_error = cols
        .iter()
        .zip(nu.weights())
        .fold(0.0_f64, |m, (s, w)| m.max((s - w).abs()));
    let min_entry = pi.mass().min_entry();
    FeasibilityReport {
        max_row_error,
        max_col_error,
        min_entry,
        feasible: max_row_error <= tol && max_col_error <= tol && min_entry >= -tol,
    }
}

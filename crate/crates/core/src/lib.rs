//! Entropic optimal transport meets sequential decision making.
//!
//! This crate implements, on discrete (finitely supported) marginals:
//!
//! - [`measures`]: probability measures, couplings, the product reference
//!   measure, the cost/plan duality pairing and relative entropy;
//! - [`transport`]: a log-domain Sinkhorn solver with primal recovery,
//!   feasibility rounding and duality-gap certificates, plus an exact
//!   Kantorovich baseline via the transportation simplex;
//! - [`basis`]: orthonormal bases of the weighted `L²(ρ)` space on the
//!   support grid, coefficient/feature algebra and coefficient-decay cost
//!   generators;
//! - [`bandit`]: regularized least-squares in coefficient space, confidence
//!   ellipsoids, and the entropy-regularized optimistic agent;
//! - [`env`]: synthetic bandit environments with sub-Gaussian reward noise
//!   and cached ground-truth baselines for regret accounting;
//! - [`harness`]: the experiment runner, regret-bound evaluators, coverage
//!   studies and CSV/JSON/SVG export behind the `otbandit` CLI.

pub mod bandit;
pub mod basis;
pub mod env;
pub mod harness;
pub mod measures;
pub mod table;
pub mod transport;

pub use bandit::{ConfidenceEllipsoid, EntUcbAgent, EntUcbConfig, RlsState, Schedules};
pub use basis::{CoefficientVector, DecayProfile, OrthonormalBasis};
pub use env::{BanditEnv, NoiseModel};
pub use measures::{Coupling, CostTable, DiscreteMeasure, ProductMeasure};
pub use table::Table;
pub use transport::{DualPotentials, KantorovichBaseline, SinkhornResult};

//! Penalized distributionally robust control through its mean–variance
//! reformulation.
//!
//! * [`dro`]: exact finite-support worst case under a χ² penalty and the
//!   mean–variance surrogate that bounds it.
//! * [`riccati`]: robust LQ synthesis by fixed-point iteration, Lyapunov
//!   evaluation of arbitrary gains, and Bellman residual checks.
//! * [`tabular`]: value iteration for both Bellman operators on a 1-D grid.
//! * [`rollout`]: Monte-Carlo closed-loop simulation and the empirical
//!   equivalence-condition statistic.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dro;
pub mod error;
pub mod numerics;
pub mod presets;
pub mod riccati;
pub mod rollout;
pub mod tabular;

pub use dro::{brute_force_worst_case, chi2_penalty, DroInstance, FiniteDistribution, WorstCaseResult};
pub use error::{Error, Result};
pub use numerics::{sample_gaussian, solve_spd, SymMatrix};
pub use riccati::{
    bellman_residual, conventional_lqr, evaluate_gain, p_tilde, riccati_iterate, synthesize, IterationOptions,
    LqSystem, LyapunovSolution, MomentConvention, QuadraticValue, RiccatiSolution, TildeConvention,
};
pub use rollout::{empirical_vs_theoretical, rollout, BoundComparison, NoiseKind, RolloutConfig, RolloutReport};
pub use tabular::{
    assumption_margin, drc_bellman_step, interpolate, mv_bellman_step, solve_fixed_point, FixedPoint, Operator,
    TabularModel, TabularModelSpec, ValueTable,
};

//! Value iteration on a one-dimensional state grid.
//!
//! Two operators are provided over a finite disturbance support:
//!
//! * the mean–variance operator
//!   `V(x) = min_u C(x,u) + α E₀[V(f)] + Var₀[α V(f)] / 4γ`, and
//! * the robust operator
//!   `V(x) = min_u C(x,u) + max_Q α E_Q[V(f)] − γ D(Q, P₀)`,
//!   whose inner maximum is solved exactly by [`crate::dro`].
//!
//! Successor states are clamped to the grid hull and values are linearly
//! interpolated between grid points.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dro::{self, FiniteDistribution};
use crate::error::{Error, Result};

pub type DynamicsFn = dyn Fn(f64, f64, f64) -> f64 + Send + Sync;
pub type CostFn = dyn Fn(f64, f64) -> f64 + Send + Sync;

/// Grid, action set, scalar noise, dynamics `f(x, u, ξ)` and stage cost `C(x, u)`.
#[derive(Clone)]
pub struct TabularModel {
    grid: Vec<f64>,
    actions: Vec<f64>,
    noise: FiniteDistribution,
    noise_atoms: Vec<f64>,
    dynamics: Arc<DynamicsFn>,
    stage_cost: Arc<CostFn>,
    alpha: f64,
    gamma: f64,
}

impl fmt::Debug for TabularModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TabularModel")
            .field("grid", &self.grid)
            .field("actions", &self.actions)
            .field("noise", &self.noise)
            .field("alpha", &self.alpha)
            .field("gamma", &self.gamma)
            .finish_non_exhaustive()
    }
}

impl TabularModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        grid: Vec<f64>,
        actions: Vec<f64>,
        noise: FiniteDistribution,
        dynamics: Arc<DynamicsFn>,
        stage_cost: Arc<CostFn>,
        alpha: f64,
        gamma: f64,
    ) -> Result<Self> {
        if grid.len() < 3 {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least 3 points, got {}",
                grid.len()
            )));
        }
        if grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidParameter("grid must be strictly increasing".into()));
        }
        if actions.is_empty() {
            return Err(Error::InvalidParameter("action set is empty".into()));
        }
        if noise.dim() != 1 {
            return Err(Error::ShapeMismatch(format!(
                "noise atoms must be scalar, got dimension {}",
                noise.dim()
            )));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("alpha = {alpha} is outside (0, 1)")));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gamma = {gamma} must be finite and positive"
            )));
        }
        for &x in &grid {
            for &u in &actions {
                let c = stage_cost(x, u);
                if !(c >= 0.0 && c.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "stage cost at (x = {x}, u = {u}) is {c}; it must be finite and nonnegative"
                    )));
                }
            }
        }
        let noise_atoms = noise.atoms().iter().map(|a| a[0]).collect();
        Ok(Self {
            grid,
            actions,
            noise,
            noise_atoms,
            dynamics,
            stage_cost,
            alpha,
            gamma,
        })
    }

    /// `f(x,u,ξ) = 0.8x + u + ξ` on 41 points of `[−2, 2]`, five actions in
    /// `[−0.5, 0.5]`, noise `±0.1` with equal weight, cost `x² + u²`, `α = 0.9`.
    pub fn default_verification(gamma: f64) -> Result<Self> {
        TabularModelSpec::default_verification(gamma).build()
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }
    pub fn actions(&self) -> &[f64] {
        &self.actions
    }
    pub fn noise(&self) -> &FiniteDistribution {
        &self.noise
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gamma = {gamma} must be finite and positive"
            )));
        }
        Ok(Self { gamma, ..self.clone() })
    }

    pub fn stage_cost(&self, x: f64, u: f64) -> f64 {
        (self.stage_cost)(x, u)
    }

    pub fn successor(&self, x: f64, u: f64, xi: f64) -> f64 {
        (self.dynamics)(x, u, xi)
    }

    /// `α V(f(x, u, ξⁱ))` for every noise atom.
    fn discounted_successor_values(&self, table: &ValueTable, x: f64, u: f64, out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.noise_atoms
                .iter()
                .map(|&xi| self.alpha * interpolate(table, &self.grid, self.successor(x, u, xi))),
        );
    }

    fn check_table(&self, table: &ValueTable) -> Result<()> {
        if table.values.len() != self.grid.len() {
            return Err(Error::LengthMismatch {
                expected: self.grid.len(),
                actual: table.values.len(),
            });
        }
        Ok(())
    }
}

/// Serializable description of an affine-dynamics, quadratic-cost tabular model.
///
/// `f(x, u, ξ) = state_coef·x + action_coef·u + noise_coef·ξ` and
/// `C(x, u) = state_weight·x² + action_weight·u² + constant_cost`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularModelSpec {
    pub grid: GridSpec,
    pub actions: Vec<f64>,
    pub noise: FiniteDistribution,
    pub state_coef: f64,
    pub action_coef: f64,
    #[serde(default = "one")]
    pub noise_coef: f64,
    pub state_weight: f64,
    pub action_weight: f64,
    #[serde(default)]
    pub constant_cost: f64,
    pub alpha: f64,
    pub gamma: f64,
}

fn one() -> f64 {
    1.0
}

/// Either explicit points or an evenly spaced range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Points(Vec<f64>),
    Uniform { min: f64, max: f64, points: usize },
}

impl GridSpec {
    pub fn points(&self) -> Vec<f64> {
        match self {
            GridSpec::Points(p) => p.clone(),
            GridSpec::Uniform { min, max, points } => {
                let n = *points;
                if n < 2 {
                    return vec![*min; n];
                }
                let step = (max - min) / (n - 1) as f64;
                (0..n)
                    .map(|i| if i + 1 == n { *max } else { min + step * i as f64 })
                    .collect()
            }
        }
    }
}

impl TabularModelSpec {
    pub fn default_verification(gamma: f64) -> Self {
        Self {
            grid: GridSpec::Uniform {
                min: -2.0,
                max: 2.0,
                points: 41,
            },
            actions: vec![-0.5, -0.25, 0.0, 0.25, 0.5],
            noise: FiniteDistribution::scalar(&[-0.1, 0.1], &[0.5, 0.5]).expect("valid"),
            state_coef: 0.8,
            action_coef: 1.0,
            noise_coef: 1.0,
            state_weight: 1.0,
            action_weight: 1.0,
            constant_cost: 0.0,
            alpha: 0.9,
            gamma,
        }
    }

    pub fn build(&self) -> Result<TabularModel> {
        let (a, b, e) = (self.state_coef, self.action_coef, self.noise_coef);
        let (qw, rw, c0) = (self.state_weight, self.action_weight, self.constant_cost);
        TabularModel::new(
            self.grid.points(),
            self.actions.clone(),
            self.noise.clone(),
            Arc::new(move |x, u, xi| a * x + b * u + e * xi),
            Arc::new(move |x, u| qw * x * x + rw * u * u + c0),
            self.alpha,
            self.gamma,
        )
    }
}

/// Values aligned with a model's grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueTable {
    pub values: Vec<f64>,
}

impl ValueTable {
    pub fn zeros(len: usize) -> Self {
        Self { values: vec![0.0; len] }
    }

    pub fn sup_distance(&self, other: &ValueTable) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Piecewise-linear interpolation with `x` clamped to the grid hull.
pub fn interpolate(table: &ValueTable, grid: &[f64], x: f64) -> f64 {
    let v = &table.values;
    let last = grid.len() - 1;
    if !(x > grid[0]) {
        return v[0];
    }
    if x >= grid[last] {
        return v[last];
    }
    // first index with grid[i] > x; 1 ≤ hi ≤ last
    let hi = grid.partition_point(|&g| g <= x);
    let lo = hi - 1;
    let t = (x - grid[lo]) / (grid[hi] - grid[lo]);
    v[lo] + t * (v[hi] - v[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operator {
    MeanVariance,
    Drc,
}

impl Operator {
    pub fn name(self) -> &'static str {
        match self {
            Operator::MeanVariance => "mean_variance",
            Operator::Drc => "drc",
        }
    }
}

fn apply(model: &TabularModel, table: &ValueTable, op: Operator) -> Result<ValueTable> {
    model.check_table(table)?;
    let p0 = model.noise.weights();
    let values = model
        .grid
        .par_iter()
        .map_init(Vec::new, |buf, &x| {
            model
                .actions
                .iter()
                .map(|&u| {
                    model.discounted_successor_values(table, x, u, buf);
                    let tail = match op {
                        Operator::MeanVariance => dro::mean_variance_value(p0, buf, model.gamma),
                        Operator::Drc => dro::penalized_worst_case(p0, buf, model.gamma).objective,
                    };
                    model.stage_cost(x, u) + tail
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    Ok(ValueTable { values })
}

/// One sweep of the mean–variance Bellman operator.
pub fn mv_bellman_step(model: &TabularModel, table: &ValueTable) -> Result<ValueTable> {
    apply(model, table, Operator::MeanVariance)
}

/// One sweep of the robust (penalized worst-case) Bellman operator.
pub fn drc_bellman_step(model: &TabularModel, table: &ValueTable) -> Result<ValueTable> {
    apply(model, table, Operator::Drc)
}

/// One sweep of the chosen operator.
pub fn bellman_step(model: &TabularModel, table: &ValueTable, op: Operator) -> Result<ValueTable> {
    apply(model, table, op)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub table: ValueTable,
    pub iterations: usize,
    /// Sup-norm change of every sweep, in order.
    pub changes: Vec<f64>,
}

impl FixedPoint {
    pub fn last_change(&self) -> f64 {
        self.changes.last().copied().unwrap_or(f64::INFINITY)
    }
}

/// Value iteration from the zero table until the sup-norm change is at most `tol`.
pub fn solve_fixed_point(model: &TabularModel, op: Operator, tol: f64, max_iter: usize) -> Result<FixedPoint> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol = {tol} must be positive")));
    }
    let mut table = ValueTable::zeros(model.grid.len());
    let mut changes = Vec::new();
    for k in 1..=max_iter {
        let next = apply(model, &table, op)?;
        let change = next.sup_distance(&table);
        changes.push(change);
        table = next;
        if !change.is_finite() {
            return Err(Error::NoConvergence {
                iterations: k,
                residual: change,
            });
        }
        if change <= tol {
            return Ok(FixedPoint {
                table,
                iterations: k,
                changes,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: changes.last().copied().unwrap_or(f64::INFINITY),
    })
}

/// `min over (x, u, ξ) of α V(f) − α E₀[V(f)] + 2γ`.
pub fn assumption_margin(model: &TabularModel, table: &ValueTable) -> Result<f64> {
    model.check_table(table)?;
    let p0 = model.noise.weights();
    let mut buf = Vec::new();
    let mut margin = f64::INFINITY;
    for &x in &model.grid {
        for &u in &model.actions {
            model.discounted_successor_values(table, x, u, &mut buf);
            margin = margin.min(dro::equality_margin(p0, &buf, model.gamma));
        }
    }
    Ok(margin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn constant_model(cost: f64, alpha: f64) -> TabularModel {
        TabularModel::new(
            vec![0.0, 1.0, 2.0],
            vec![0.0],
            FiniteDistribution::scalar(&[-1.0, 1.0], &[0.3, 0.7]).unwrap(),
            Arc::new(|x, _, _| x),
            Arc::new(move |_, _| cost),
            alpha,
            1.0,
        )
        .unwrap()
    }

    /// 3-point grid, 2 actions, 2 atoms with irregular dynamics and costs.
    fn small_model(seed: u64, gamma: f64) -> TabularModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coefs: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let w: f64 = rng.random_range(0.2..0.8);
        TabularModel::new(
            vec![-1.0, 0.0, 1.0],
            vec![-0.5, 0.5],
            FiniteDistribution::scalar(&[-0.4, 0.6], &[w, 1.0 - w]).unwrap(),
            Arc::new(move |x, u, xi| coefs[0] * x + coefs[1] * u + xi + coefs[2] * x * xi),
            Arc::new(move |x, u| x * x + 0.5 * u * u + coefs[3].abs()),
            0.8,
            gamma,
        )
        .unwrap()
    }

    /// Independent value iteration written without the shared helpers.
    fn reference_mv_fixed_point(model: &TabularModel, tol: f64) -> Vec<f64> {
        let g = model.grid().to_vec();
        let atoms: Vec<f64> = model.noise().atoms().iter().map(|a| a[0]).collect();
        let w = model.noise().weights().to_vec();
        let lookup = |v: &[f64], x: f64| -> f64 {
            let x = x.clamp(g[0], g[g.len() - 1]);
            for i in 0..g.len() - 1 {
                if x <= g[i + 1] {
                    let t = (x - g[i]) / (g[i + 1] - g[i]);
                    return (1.0 - t) * v[i] + t * v[i + 1];
                }
            }
            v[g.len() - 1]
        };
        let mut v = vec![0.0; g.len()];
        loop {
            let mut next = vec![0.0; g.len()];
            for (i, &x) in g.iter().enumerate() {
                let mut best = f64::MAX;
                for &u in model.actions() {
                    let succ: Vec<f64> = atoms
                        .iter()
                        .map(|&xi| model.alpha() * lookup(&v, model.successor(x, u, xi)))
                        .collect();
                    let m: f64 = succ.iter().zip(&w).map(|(s, p)| s * p).sum();
                    let var: f64 = succ.iter().zip(&w).map(|(s, p)| p * (s - m) * (s - m)).sum();
                    best = best.min(model.stage_cost(x, u) + m + var / (4.0 * model.gamma()));
                }
                next[i] = best;
            }
            let d = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            v = next;
            if d <= tol {
                return v;
            }
        }
    }

    #[test]
    fn interpolation_contract() {
        let grid = [0.0, 1.0, 2.0];
        let table = ValueTable {
            values: vec![2.0, 4.0, 10.0],
        };
        assert_eq!(interpolate(&table, &grid, 1.0), 4.0);
        assert_eq!(interpolate(&table, &grid, 0.5), 3.0);
        assert_eq!(interpolate(&table, &grid, -3.0), 2.0);
        assert_eq!(interpolate(&table, &grid, 7.0), 10.0);
        assert_eq!(interpolate(&table, &grid, 2.0), 10.0);
        assert_eq!(interpolate(&table, &grid, 1.5), 7.0);
    }

    #[test]
    fn model_validation() {
        let noise = FiniteDistribution::scalar(&[0.0], &[1.0]).unwrap();
        let f: Arc<DynamicsFn> = Arc::new(|x, _, _| x);
        let c: Arc<CostFn> = Arc::new(|_, _| 1.0);
        let ok = |grid: Vec<f64>, acts: Vec<f64>, cost: Arc<CostFn>| {
            TabularModel::new(grid, acts, noise.clone(), f.clone(), cost, 0.5, 1.0)
        };
        assert!(ok(vec![0.0, 1.0], vec![0.0], c.clone()).is_err());
        assert!(ok(vec![0.0, 2.0, 1.0], vec![0.0], c.clone()).is_err());
        assert!(ok(vec![0.0, 1.0, 2.0], vec![], c.clone()).is_err());
        assert!(ok(vec![0.0, 1.0, 2.0], vec![0.0], Arc::new(|_, _| -1.0)).is_err());
        assert!(ok(vec![0.0, 1.0, 2.0], vec![0.0], c).is_ok());
    }

    #[test]
    fn degenerate_recursion_is_geometric() {
        let model = constant_model(3.0, 0.75);
        for op in [Operator::MeanVariance, Operator::Drc] {
            let fp = solve_fixed_point(&model, op, 1e-12, 10_000).unwrap();
            for v in &fp.table.values {
                assert!((v - 12.0).abs() < 1e-10, "{op:?}: {v}");
            }
        }
        let fp = solve_fixed_point(&constant_model(1.0, 0.5), Operator::Drc, 1e-10, 1000).unwrap();
        assert!(fp.table.values.iter().all(|v| (v - 2.0).abs() <= 1e-10));
    }

    #[test]
    fn large_gamma_is_risk_neutral() {
        let model = TabularModel::default_verification(1e15).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let table = ValueTable {
            values: (0..41).map(|_| rng.random_range(0.0..5.0)).collect(),
        };
        let mv = mv_bellman_step(&model, &table).unwrap();
        let drc = drc_bellman_step(&model, &table).unwrap();
        // plain expected-value step
        let neutral: Vec<f64> = model
            .grid()
            .iter()
            .map(|&x| {
                model
                    .actions()
                    .iter()
                    .map(|&u| {
                        let e: f64 = [-0.1, 0.1]
                            .iter()
                            .map(|xi| 0.5 * 0.9 * interpolate(&table, model.grid(), 0.8 * x + u + xi))
                            .sum();
                        x * x + u * u + e
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        for ((m, d), n) in mv.values.iter().zip(&drc.values).zip(&neutral) {
            assert!((m - n).abs() <= 1e-12);
            assert!((d - n).abs() <= 1e-10);
        }
    }

    #[test]
    fn single_atom_is_deterministic() {
        let spec = TabularModelSpec {
            noise: FiniteDistribution::scalar(&[0.05], &[1.0]).unwrap(),
            ..TabularModelSpec::default_verification(0.01)
        };
        let model = spec.build().unwrap();
        let table = ValueTable {
            values: model.grid().iter().map(|x| 3.0 * x * x + 0.1).collect(),
        };
        let mv = mv_bellman_step(&model, &table).unwrap();
        let drc = drc_bellman_step(&model, &table).unwrap();
        for (i, &x) in model.grid().iter().enumerate() {
            let det = model
                .actions()
                .iter()
                .map(|&u| x * x + u * u + 0.9 * interpolate(&table, model.grid(), 0.8 * x + u + 0.05))
                .fold(f64::INFINITY, f64::min);
            assert!((mv.values[i] - det).abs() <= 1e-14 * det);
            assert!((drc.values[i] - det).abs() <= 1e-14 * det);
        }
        assert_eq!(assumption_margin(&model, &table).unwrap(), 2.0 * 0.01);
    }

    #[test]
    fn mv_fixed_point_matches_reference() {
        for seed in 0..5 {
            let model = small_model(seed, 0.7);
            let fp = solve_fixed_point(&model, Operator::MeanVariance, 1e-13, 100_000).unwrap();
            let reference = reference_mv_fixed_point(&model, 1e-13);
            let gap = fp
                .table
                .values
                .iter()
                .zip(&reference)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(gap <= 1e-8, "seed {seed}: {gap}");
        }
    }

    #[test]
    fn operators_agree_when_margin_positive() {
        for seed in 0..5 {
            let model = small_model(seed, 50.0);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
            let table = ValueTable {
                values: (0..3).map(|_| rng.random_range(0.0..4.0)).collect(),
            };
            assert!(assumption_margin(&model, &table).unwrap() > 0.0);
            let mv = mv_bellman_step(&model, &table).unwrap();
            let drc = drc_bellman_step(&model, &table).unwrap();
            assert!(mv.sup_distance(&drc) <= 1e-10);
        }
    }

    #[test]
    fn margin_cases() {
        let model = TabularModel::default_verification(100.0).unwrap();
        let table = ValueTable {
            values: model.grid().iter().map(|x| x * x).collect(),
        };
        assert!(assumption_margin(&model, &table).unwrap() > 0.0);
        // γ → 0⁺ leaves only the (strictly negative) deviation term
        let model = model.with_gamma(1e-300).unwrap();
        assert!(assumption_margin(&model, &table).unwrap() < 0.0);
    }

    #[test]
    fn drc_contraction_factor() {
        let model = TabularModel::default_verification(0.05).unwrap();
        let fp = solve_fixed_point(&model, Operator::Drc, 1e-12, 10_000).unwrap();
        for w in fp.changes.windows(2) {
            // below ~1e-6 the sweep differences are dominated by rounding
            if w[0] > 1e-6 {
                assert!(w[1] <= (0.9 + 1e-6) * w[0], "{} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn no_convergence_reported() {
        let model = TabularModel::default_verification(1.0).unwrap();
        let err = solve_fixed_point(&model, Operator::Drc, 1e-12, 3).unwrap_err();
        assert!(matches!(err, Error::NoConvergence { iterations: 3, .. }));
    }

    #[test]
    fn table_length_checked() {
        let model = TabularModel::default_verification(1.0).unwrap();
        assert!(mv_bellman_step(&model, &ValueTable::zeros(3)).is_err());
    }

    #[test]
    fn spec_document_round_trip() {
        let spec = TabularModelSpec::default_verification(100.0);
        let text = serde_json::to_string(&spec).unwrap();
        let back: TabularModelSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
        let grid = back.grid.points();
        assert_eq!(grid.len(), 41);
        assert_eq!(grid[0], -2.0);
        assert_eq!(grid[40], 2.0);
        assert!((grid[20]).abs() < 1e-15);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn drc_step_is_monotone(base in prop::collection::vec(0.0f64..5.0, 41),
                                    bump in prop::collection::vec(0.0f64..1.0, 41),
                                    log_gamma in -2.0f64..2.0) {
                let model = TabularModel::default_verification(10f64.powf(log_gamma)).unwrap();
                let lo = ValueTable { values: base.clone() };
                let hi = ValueTable { values: base.iter().zip(&bump).map(|(a, b)| a + b).collect() };
                let a = drc_bellman_step(&model, &lo).unwrap();
                let b = drc_bellman_step(&model, &hi).unwrap();
                for (x, y) in a.values.iter().zip(&b.values) {
                    prop_assert!(*x <= y + 1e-12);
                }
            }

            // the mean-variance bracket is nondecreasing in each successor
            // value only where the margin is positive, so γ is kept large
            // relative to the spread of the tables
            #[test]
            fn mv_step_is_monotone_under_margin(base in prop::collection::vec(0.0f64..5.0, 41),
                                                bump in prop::collection::vec(0.0f64..1.0, 41),
                                                gamma in 5.0f64..100.0) {
                let model = TabularModel::default_verification(gamma).unwrap();
                let lo = ValueTable { values: base.clone() };
                let hi = ValueTable { values: base.iter().zip(&bump).map(|(a, b)| a + b).collect() };
                let a = mv_bellman_step(&model, &lo).unwrap();
                let b = mv_bellman_step(&model, &hi).unwrap();
                for (x, y) in a.values.iter().zip(&b.values) {
                    prop_assert!(*x <= y + 1e-12);
                }
            }

            #[test]
            fn mv_step_dominates_drc_step(values in prop::collection::vec(0.0f64..20.0, 41),
                                          log_gamma in -3.0f64..2.0) {
                let model = TabularModel::default_verification(10f64.powf(log_gamma)).unwrap();
                let t = ValueTable { values };
                let mv = mv_bellman_step(&model, &t).unwrap();
                let drc = drc_bellman_step(&model, &t).unwrap();
                for (m, d) in mv.values.iter().zip(&drc.values) {
                    prop_assert!(*m >= d - 1e-9);
                }
            }
        }
    }
}

//! Finite-support DRO with a Pearson χ² penalty.
//!
//! For a fixed decision the inner problem is
//!
//! ```text
//! max_{q ∈ Δ_N}  Σ qᵢ cᵢ − γ Σ p₀ᵢ (1 − qᵢ/p₀ᵢ)²
//! ```
//!
//! Its Lagrange dual in the simplex multiplier `s` is
//!
//! ```text
//! g(s) = γ Σ p₀ᵢ [((cᵢ + 2γ − s)⁺ / 2γ)²] − γ + s
//! ```
//!
//! which is convex and piecewise quadratic with breakpoints at `cᵢ + 2γ`.
//! [`DroInstance::worst_case`] minimizes it exactly by walking those
//! breakpoints. The primal maximizer is `qᵢ = p₀ᵢ (cᵢ + 2γ − s*)⁺ / 2γ`.
//!
//! When `min c − E_{p₀}[c] + 2γ > 0` no clamp is active, `s* = E_{p₀}[c]`, and
//! the penalized worst case equals the mean–variance surrogate
//! `E_{p₀}[c] + Var_{p₀}[c] / 4γ`; otherwise the surrogate is an upper bound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `Σ p₀ᵢ = 1`.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Atoms and strictly positive reference weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionDoc", into = "DistributionDoc")]
pub struct FiniteDistribution {
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct DistributionDoc {
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl TryFrom<DistributionDoc> for FiniteDistribution {
    type Error = Error;

    fn try_from(doc: DistributionDoc) -> Result<Self> {
        FiniteDistribution::new(doc.atoms, doc.weights)
    }
}

impl From<FiniteDistribution> for DistributionDoc {
    fn from(d: FiniteDistribution) -> Self {
        DistributionDoc {
            atoms: d.atoms,
            weights: d.weights,
        }
    }
}

impl FiniteDistribution {
    pub fn new(atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(Error::LengthMismatch {
                expected: atoms.len(),
                actual: weights.len(),
            });
        }
        if weights.is_empty() {
            return Err(Error::InvalidDistribution("no atoms".into()));
        }
        let dim = atoms[0].len();
        if atoms.iter().any(|a| a.len() != dim) {
            return Err(Error::InvalidDistribution("atoms have differing dimensions".into()));
        }
        if atoms.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDistribution("non-finite atom".into()));
        }
        if let Some((i, &w)) = weights.iter().enumerate().find(|(_, w)| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidDistribution(format!(
                "weight {i} is {w}; every reference weight must be strictly positive"
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidDistribution(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { atoms, weights })
    }

    /// Scalar atoms with the given weights.
    pub fn scalar(atoms: &[f64], weights: &[f64]) -> Result<Self> {
        Self::new(atoms.iter().map(|&a| vec![a]).collect(), weights.to_vec())
    }

    /// Uniform weights over the given atoms.
    pub fn uniform(atoms: Vec<Vec<f64>>) -> Result<Self> {
        let n = atoms.len();
        Self::new(atoms, vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].len()
    }

    pub fn atoms(&self) -> &[Vec<f64>] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn expectation(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(p, v)| p * v).sum()
    }

    /// Mean and (population) variance of `values` under the reference weights.
    pub fn mean_variance(&self, values: &[f64]) -> (f64, f64) {
        let mean = self.expectation(values);
        let var = self
            .weights
            .iter()
            .zip(values)
            .map(|(p, v)| p * (v - mean).powi(2))
            .sum();
        (mean, var)
    }
}

/// Pearson χ² divergence `Σ p₀ᵢ (1 − qᵢ/p₀ᵢ)²`.
pub fn chi2_penalty(q: &[f64], reference: &FiniteDistribution) -> Result<f64> {
    check_weights(q, reference.len())?;
    Ok(chi2_unchecked(q, reference.weights()))
}

fn chi2_unchecked(q: &[f64], p0: &[f64]) -> f64 {
    q.iter().zip(p0).map(|(q, p)| p * (1.0 - q / p).powi(2)).sum()
}

fn check_weights(q: &[f64], n: usize) -> Result<()> {
    if q.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: q.len(),
        });
    }
    if let Some((index, &value)) = q.iter().enumerate().find(|(_, &v)| v < 0.0) {
        return Err(Error::NegativeWeight { index, value });
    }
    Ok(())
}

/// Inner problem for one fixed decision: reference law, per-atom costs, penalty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceDoc", into = "InstanceDoc")]
pub struct DroInstance {
    reference: FiniteDistribution,
    costs: Vec<f64>,
    gamma: f64,
}

#[derive(Serialize, Deserialize)]
struct InstanceDoc {
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
    costs: Vec<f64>,
    gamma: f64,
}

impl TryFrom<InstanceDoc> for DroInstance {
    type Error = Error;

    fn try_from(doc: InstanceDoc) -> Result<Self> {
        let reference = FiniteDistribution::new(doc.atoms, doc.weights)?;
        DroInstance::new(reference, doc.costs, doc.gamma)
    }
}

impl From<DroInstance> for InstanceDoc {
    fn from(inst: DroInstance) -> Self {
        InstanceDoc {
            atoms: inst.reference.atoms,
            weights: inst.reference.weights,
            costs: inst.costs,
            gamma: inst.gamma,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstCaseResult {
    /// Worst-case probabilities, aligned with the reference atoms.
    pub weights: Vec<f64>,
    /// Optimal multiplier `s*` of the simplex constraint.
    pub dual: f64,
    /// `E_Q[c] − γ D(Q, P₀)` at the returned weights.
    pub objective: f64,
}

impl DroInstance {
    pub fn new(reference: FiniteDistribution, costs: Vec<f64>, gamma: f64) -> Result<Self> {
        if costs.len() != reference.len() {
            return Err(Error::LengthMismatch {
                expected: reference.len(),
                actual: costs.len(),
            });
        }
        if let Some((i, c)) = costs.iter().enumerate().find(|(_, c)| !(c.is_finite() && **c >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "cost {i} is {c}; costs must be finite and nonnegative"
            )));
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma is {gamma}; it must be finite and strictly positive"
            )));
        }
        Ok(Self {
            reference,
            costs,
            gamma,
        })
    }

    pub fn reference(&self) -> &FiniteDistribution {
        &self.reference
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `Σ qᵢ cᵢ − γ χ²(q, p₀)` for an arbitrary weight vector.
    pub fn penalized_objective(&self, q: &[f64]) -> Result<f64> {
        check_weights(q, self.reference.len())?;
        Ok(penalized(q, &self.costs, self.reference.weights(), self.gamma))
    }

    pub fn worst_case(&self) -> WorstCaseResult {
        penalized_worst_case(self.reference.weights(), &self.costs, self.gamma)
    }

    /// `E_{p₀}[c] + Var_{p₀}[c] / 4γ`.
    pub fn mean_variance_objective(&self) -> f64 {
        mean_variance_value(self.reference.weights(), &self.costs, self.gamma)
    }

    /// Whether `min c − E_{p₀}[c] + 2γ > 0`.
    pub fn equality_condition_holds(&self) -> bool {
        equality_margin(self.reference.weights(), &self.costs, self.gamma) > 0.0
    }

    /// `min c − E_{p₀}[c] + 2γ`; positive exactly when the surrogate is tight.
    pub fn equality_margin(&self) -> f64 {
        equality_margin(self.reference.weights(), &self.costs, self.gamma)
    }
}

fn penalized(q: &[f64], costs: &[f64], p0: &[f64], gamma: f64) -> f64 {
    let expected: f64 = q.iter().zip(costs).map(|(q, c)| q * c).sum();
    expected - gamma * chi2_unchecked(q, p0)
}

pub(crate) fn mean_variance_value(p0: &[f64], costs: &[f64], gamma: f64) -> f64 {
    let mean: f64 = p0.iter().zip(costs).map(|(p, c)| p * c).sum();
    let var: f64 = p0.iter().zip(costs).map(|(p, c)| p * (c - mean).powi(2)).sum();
    mean + var / (4.0 * gamma)
}

pub(crate) fn equality_margin(p0: &[f64], costs: &[f64], gamma: f64) -> f64 {
    let mean: f64 = p0.iter().zip(costs).map(|(p, c)| p * c).sum();
    let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
    min - mean + 2.0 * gamma
}

/// Exact worst case over the simplex for raw weight/cost slices.
///
/// Works in the shifted multiplier `λ = s − 2γ`, so the active set is
/// `{i : cᵢ > λ}` and `qᵢ = p₀ᵢ (cᵢ − λ)⁺ / 2γ`. Stationarity of the dual on a
/// segment with active set `S` gives `λ = (Σ_S p₀ᵢcᵢ − 2γ) / Σ_S p₀ᵢ`. Atoms are
/// visited in decreasing cost order, one tie group at a time, and the first
/// segment whose stationary point lies inside it is the global minimizer.
pub(crate) fn penalized_worst_case(p0: &[f64], costs: &[f64], gamma: f64) -> WorstCaseResult {
    let n = costs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| costs[b].total_cmp(&costs[a]));

    let two_gamma = 2.0 * gamma;
    let mut mass = 0.0;
    let mut weighted = 0.0;
    let mut lambda = f64::NAN;
    let mut k = 0;
    while k < n {
        let level = costs[order[k]];
        while k < n && costs[order[k]] == level {
            mass += p0[order[k]];
            weighted += p0[order[k]] * costs[order[k]];
            k += 1;
        }
        let candidate = (weighted - two_gamma) / mass;
        let next = if k < n { costs[order[k]] } else { f64::NEG_INFINITY };
        if candidate < level && candidate >= next {
            lambda = candidate;
            break;
        }
    }
    // With every atom active g'(λ) is affine and the last segment always
    // contains its root, so the loop cannot fall through.
    debug_assert!(lambda.is_finite());

    let weights: Vec<f64> = p0
        .iter()
        .zip(costs)
        .map(|(p, c)| p * (c - lambda).max(0.0) / two_gamma)
        .collect();
    let objective = penalized(&weights, costs, p0, gamma);
    WorstCaseResult {
        weights,
        dual: lambda + two_gamma,
        objective,
    }
}

/// Grid-plus-coordinate-ascent search over the simplex, for cross-checking
/// [`DroInstance::worst_case`] on small instances.
///
/// Every grid point `k / resolution` with `Σ kᵢ = resolution` is scored; the
/// best one is then polished by pairwise mass transfers, each of which solves
/// a one-dimensional concave quadratic exactly. The reported `dual` is
/// recovered from the stationarity condition on the largest-weight atom.
pub fn brute_force_worst_case(instance: &DroInstance, resolution: usize) -> Result<WorstCaseResult> {
    let n = instance.reference.len();
    if n > 4 {
        return Err(Error::TooManyAtoms(n));
    }
    if resolution < 100 {
        return Err(Error::InvalidParameter(format!(
            "grid resolution {resolution} is below the minimum of 100"
        )));
    }
    let p0 = instance.reference.weights();
    let costs = instance.costs();
    let gamma = instance.gamma();
    let score = |q: &[f64]| penalized(q, costs, p0, gamma);

    let mut best = vec![0.0; n];
    best[0] = 1.0;
    let mut best_val = score(&best);
    let mut counts = vec![0usize; n];
    let mut q = vec![0.0; n];
    let step = 1.0 / resolution as f64;
    enumerate_compositions(&mut counts, 0, resolution, &mut |c| {
        for (qi, &ci) in q.iter_mut().zip(c) {
            *qi = ci as f64 * step;
        }
        let v = score(&q);
        if v > best_val {
            best_val = v;
            best.copy_from_slice(&q);
        }
    });

    for _sweep in 0..10_000 {
        let before = score(&best);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                // move t from j to i; the objective is concave quadratic in t
                let slope = costs[i] - costs[j] - 2.0 * gamma * ((best[i] - p0[i]) / p0[i] - (best[j] - p0[j]) / p0[j]);
                let curvature = 2.0 * gamma * (1.0 / p0[i] + 1.0 / p0[j]);
                let t = (slope / curvature).clamp(-best[i], best[j]);
                best[i] += t;
                best[j] -= t;
            }
        }
        if score(&best) - before <= 1e-15 * before.abs().max(1.0) {
            break;
        }
    }

    let top = (0..n).max_by(|&a, &b| best[a].total_cmp(&best[b])).expect("nonempty");
    let dual = costs[top] + 2.0 * gamma - 2.0 * gamma * best[top] / p0[top];
    Ok(WorstCaseResult {
        objective: score(&best),
        weights: best,
        dual,
    })
}

fn enumerate_compositions(counts: &mut [usize], idx: usize, remaining: usize, f: &mut impl FnMut(&[usize])) {
    if idx + 1 == counts.len() {
        counts[idx] = remaining;
        f(counts);
        return;
    }
    for k in 0..=remaining {
        counts[idx] = k;
        enumerate_compositions(counts, idx + 1, remaining - k, f);
    }
}

//! Robust linear-quadratic synthesis for the mean–variance Bellman equation.
//!
//! With stage cost `xᵀQx + uᵀRu`, dynamics `x⁺ = Ax + Bu + ξ` and a reference
//! disturbance of mean zero and covariance `Σ`, the mean–variance Bellman
//! equation is solved by `V(x) = xᵀPx + r` where `P` is a fixed point of
//!
//! ```text
//! P = αAᵀP̃A + Q − α²AᵀP̃B (R + αBᵀP̃B)⁻¹ BᵀP̃A,     P̃ = P + (α/γ) PΣP
//! r = α/(1−α) · Tr[PΣ + (α/2γ) PΣPΣ]
//! ```
//!
//! and the optimal input is `u = −Kx`, `K = (R + αBᵀP̃B)⁻¹ αBᵀP̃A`.
//! Letting `γ → ∞` recovers the discounted LQR.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dro::FiniteDistribution;
use crate::error::{Error, Result};
use crate::numerics::{matrix_from_rows, matrix_to_rows, solve_spd, SymMatrix};

/// Iteration budget for the fixed-point solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationOptions {
    pub max_iter: usize,
    /// Relative Frobenius tolerance on successive iterates.
    pub tol: f64,
}

impl Default for IterationOptions {
    fn default() -> Self {
        Self {
            max_iter: 100_000,
            tol: 1e-12,
        }
    }
}

/// Linear dynamics, quadratic cost, reference covariance, discount and penalty.
///
/// Serialized with matrices as nested row arrays; an absent `gamma` means
/// `γ = ∞` (the risk-neutral problem).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SystemDoc", into = "SystemDoc")]
pub struct LqSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    q: SymMatrix,
    r: SymMatrix,
    sigma: SymMatrix,
    alpha: f64,
    gamma: f64,
}

impl LqSystem {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        q: SymMatrix,
        r: SymMatrix,
        sigma: SymMatrix,
        alpha: f64,
        gamma: f64,
    ) -> Result<Self> {
        let n = a.nrows();
        if !a.is_square() {
            return Err(Error::NotSquare {
                rows: a.nrows(),
                cols: a.ncols(),
            });
        }
        let m = b.ncols();
        if b.nrows() != n {
            return Err(Error::ShapeMismatch(format!("B has {} rows, A is {n}x{n}", b.nrows())));
        }
        for (name, mat, dim) in [("Q", &q, n), ("R", &r, m), ("Sigma", &sigma, n)] {
            if mat.dim() != dim {
                return Err(Error::ShapeMismatch(format!(
                    "{name} is {d}x{d}, expected {dim}x{dim}",
                    d = mat.dim()
                )));
            }
        }
        q.check_pd()?;
        r.check_pd()?;
        sigma.check_psd()?;
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("alpha = {alpha} is outside (0, 1)")));
        }
        if !(gamma > 0.0 && !gamma.is_nan()) {
            return Err(Error::InvalidParameter(format!("gamma = {gamma} must be positive")));
        }
        Ok(Self {
            a,
            b,
            q,
            r,
            sigma,
            alpha,
            gamma,
        })
    }

    /// Same system with a different penalty coefficient.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && !gamma.is_nan()) {
            return Err(Error::InvalidParameter(format!("gamma = {gamma} must be positive")));
        }
        Ok(Self { gamma, ..self.clone() })
    }

    /// Same system with a different disturbance covariance.
    pub fn with_sigma(&self, sigma: SymMatrix) -> Result<Self> {
        Self::new(
            self.a.clone(),
            self.b.clone(),
            self.q.clone(),
            self.r.clone(),
            sigma,
            self.alpha,
            self.gamma,
        )
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn q(&self) -> &SymMatrix {
        &self.q
    }
    pub fn r(&self) -> &SymMatrix {
        &self.r
    }
    pub fn sigma(&self) -> &SymMatrix {
        &self.sigma
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }
    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    /// `α/γ`, the weight of the `PΣP` correction; zero for `γ = ∞`.
    fn penalty_weight(&self) -> f64 {
        self.alpha / self.gamma
    }

    pub fn stage_cost(&self, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        self.q.quad_form(x) + self.r.quad_form(u)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemDoc {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    #[serde(rename = "Q")]
    q: Vec<Vec<f64>>,
    #[serde(rename = "R")]
    r: Vec<Vec<f64>>,
    #[serde(rename = "Sigma")]
    sigma: Vec<Vec<f64>>,
    alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
}

impl TryFrom<SystemDoc> for LqSystem {
    type Error = Error;

    fn try_from(doc: SystemDoc) -> Result<Self> {
        let mut b = matrix_from_rows(&doc.b)?;
        if doc.b.is_empty() {
            b = DMatrix::zeros(doc.a.len(), 0);
        }
        LqSystem::new(
            matrix_from_rows(&doc.a)?,
            b,
            SymMatrix::from_rows(&doc.q)?,
            SymMatrix::from_rows(&doc.r)?,
            SymMatrix::from_rows(&doc.sigma)?,
            doc.alpha,
            doc.gamma.unwrap_or(f64::INFINITY),
        )
    }
}

impl From<LqSystem> for SystemDoc {
    fn from(sys: LqSystem) -> Self {
        SystemDoc {
            a: matrix_to_rows(&sys.a),
            b: matrix_to_rows(&sys.b),
            q: matrix_to_rows(sys.q.as_matrix()),
            r: matrix_to_rows(sys.r.as_matrix()),
            sigma: matrix_to_rows(sys.sigma.as_matrix()),
            alpha: sys.alpha,
            gamma: sys.gamma.is_finite().then_some(sys.gamma),
        }
    }
}

/// `V(x) = xᵀPx + r`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticValue {
    pub p: SymMatrix,
    pub r: f64,
}

impl QuadraticValue {
    pub fn evaluate(&self, x: &DVector<f64>) -> f64 {
        self.p.quad_form(x) + self.r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution {
    pub value: QuadraticValue,
    /// Feedback gain; the control is `u = −K x`.
    pub gain: DMatrix<f64>,
    pub iterations: usize,
    /// Frobenius norm of the last fixed-point step.
    pub residual: f64,
}

/// Which `Ỹ` the Lyapunov evaluation uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TildeConvention {
    /// `Ỹ = Y + (α/γ) YΣY`, matching `P̃`.
    #[default]
    Consistent,
    /// `Ỹ = (α/γ) YΣY` without the leading `Y`; kept for comparison only.
    AsPrinted,
}

impl TildeConvention {
    pub fn as_str(self) -> &'static str {
        match self {
            TildeConvention::Consistent => "consistent",
            TildeConvention::AsPrinted => "as_printed",
        }
    }
}

fn tilde(p: &DMatrix<f64>, sigma: &SymMatrix, weight: f64) -> DMatrix<f64> {
    if weight == 0.0 {
        return p.clone();
    }
    p + p * sigma.as_matrix() * p * weight
}

/// `P̃ = P + (α/γ) PΣP`.
pub fn p_tilde(p: &SymMatrix, sys: &LqSystem) -> SymMatrix {
    SymMatrix::symmetrize(tilde(p.as_matrix(), &sys.sigma, sys.penalty_weight()))
}

/// One application of the Riccati map with a given penalty weight.
/// Returns the next iterate and the gain computed from the current one.
fn riccati_map(sys: &LqSystem, p: &DMatrix<f64>, weight: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let alpha = sys.alpha;
    let pt = tilde(p, &sys.sigma, weight);
    let at_pt = sys.a.transpose() * &pt;
    let mut next = &at_pt * &sys.a * alpha + sys.q.as_matrix();
    let gain = if sys.input_dim() == 0 {
        DMatrix::zeros(0, sys.state_dim())
    } else {
        let bt_pt = sys.b.transpose() * &pt;
        let h = SymMatrix::symmetrize(sys.r.as_matrix() + &bt_pt * &sys.b * alpha);
        let gain = solve_spd(&h, &(&bt_pt * &sys.a * alpha))?;
        next -= &at_pt * &sys.b * &gain * alpha;
        gain
    };
    Ok((SymMatrix::symmetrize(next).into_matrix(), gain))
}

fn constant_term(sys: &LqSystem, p: &DMatrix<f64>, weight: f64) -> f64 {
    let ps = p * sys.sigma.as_matrix();
    let alpha = sys.alpha;
    alpha / (1.0 - alpha) * (ps.trace() + 0.5 * weight * (&ps * &ps).trace())
}

fn iterate_riccati(sys: &LqSystem, p0: &SymMatrix, opts: IterationOptions, weight: f64) -> Result<RiccatiSolution> {
    if p0.dim() != sys.state_dim() {
        return Err(Error::ShapeMismatch(format!(
            "initial matrix is {d}x{d}, state dimension is {}",
            sys.state_dim(),
            d = p0.dim()
        )));
    }
    p0.check_psd()?;
    check_opts(opts)?;
    let mut p = p0.as_matrix().clone();
    let mut residual = f64::INFINITY;
    for k in 1..=opts.max_iter {
        let (next, _) = riccati_map(sys, &p, weight)?;
        residual = (&next - &p).norm();
        let scale = p.norm().max(1.0);
        p = next;
        if !residual.is_finite() || !p.iter().all(|v| v.is_finite()) {
            return Err(Error::NoConvergence {
                iterations: k,
                residual,
            });
        }
        if residual <= opts.tol * scale {
            let (_, gain) = riccati_map(sys, &p, weight)?;
            let r = constant_term(sys, &p, weight);
            return Ok(RiccatiSolution {
                value: QuadraticValue {
                    p: SymMatrix::symmetrize(p),
                    r,
                },
                gain,
                iterations: k,
                residual,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual,
    })
}

fn check_opts(opts: IterationOptions) -> Result<()> {
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(Error::InvalidParameter(format!(
            "need tol > 0 and max_iter > 0, got tol = {}, max_iter = {}",
            opts.tol, opts.max_iter
        )));
    }
    Ok(())
}

/// Fixed-point iteration of the penalized Riccati map from `p0`.
pub fn riccati_iterate(sys: &LqSystem, p0: &SymMatrix, opts: IterationOptions) -> Result<RiccatiSolution> {
    iterate_riccati(sys, p0, opts, sys.penalty_weight())
}

/// [`riccati_iterate`] started from `P₀ = Q`.
pub fn synthesize(sys: &LqSystem, opts: IterationOptions) -> Result<RiccatiSolution> {
    riccati_iterate(sys, sys.q(), opts)
}

/// Discounted LQR: the same iteration with `P̃ ≡ P`, started from `Q`.
pub fn conventional_lqr(sys: &LqSystem, opts: IterationOptions) -> Result<RiccatiSolution> {
    iterate_riccati(sys, sys.q(), opts, 0.0)
}

/// Worst-case value `X(x) = xᵀYx + r` of the fixed gain `u = −Kx`.
///
/// Iterates `Y ← α(A−BK)ᵀỸ(A−BK) + Q + KᵀRK` from `Y₀ = Q + KᵀRK`.
pub fn evaluate_gain(sys: &LqSystem, gain: &DMatrix<f64>, opts: IterationOptions) -> Result<LyapunovSolution> {
    evaluate_gain_with(sys, gain, opts, TildeConvention::Consistent)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovSolution {
    pub value: QuadraticValue,
    pub iterations: usize,
    pub residual: f64,
}

pub fn evaluate_gain_with(
    sys: &LqSystem,
    gain: &DMatrix<f64>,
    opts: IterationOptions,
    convention: TildeConvention,
) -> Result<LyapunovSolution> {
    if gain.shape() != (sys.input_dim(), sys.state_dim()) {
        return Err(Error::ShapeMismatch(format!(
            "gain is {}x{}, expected {}x{}",
            gain.nrows(),
            gain.ncols(),
            sys.input_dim(),
            sys.state_dim()
        )));
    }
    check_opts(opts)?;
    let alpha = sys.alpha;
    let weight = sys.penalty_weight();
    let closed = &sys.a - &sys.b * gain;
    let closed_t = closed.transpose();
    let base = SymMatrix::symmetrize(sys.q.as_matrix() + gain.transpose() * sys.r.as_matrix() * gain).into_matrix();
    let mut y = base.clone();
    let mut residual = f64::INFINITY;
    for k in 1..=opts.max_iter {
        let yt = match convention {
            TildeConvention::Consistent => tilde(&y, &sys.sigma, weight),
            TildeConvention::AsPrinted => &y * sys.sigma.as_matrix() * &y * weight,
        };
        let next = SymMatrix::symmetrize(&closed_t * yt * &closed * alpha + &base).into_matrix();
        residual = (&next - &y).norm();
        let scale = y.norm().max(1.0);
        y = next;
        if !residual.is_finite() || !y.iter().all(|v| v.is_finite()) {
            return Err(Error::NoConvergence {
                iterations: k,
                residual,
            });
        }
        if residual <= opts.tol * scale {
            let r = constant_term(sys, &y, weight);
            return Ok(LyapunovSolution {
                value: QuadraticValue {
                    p: SymMatrix::symmetrize(y),
                    r,
                },
                iterations: k,
                residual,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual,
    })
}

/// How the mean and variance of `V(z + ξ)` under the reference law are formed.
#[derive(Debug, Clone, PartialEq)]
pub enum MomentConvention {
    /// Zero-mean Gaussian with the system covariance; uses
    /// `Var[ξᵀPξ] = 2 Tr[(PΣ)²]` and vanishing third moments.
    Gaussian,
    /// Exact moments of a finite reference distribution.
    Finite(FiniteDistribution),
}

impl MomentConvention {
    pub fn name(&self) -> &'static str {
        match self {
            MomentConvention::Gaussian => "gaussian_fourth_moment",
            MomentConvention::Finite(_) => "finite_support_exact",
        }
    }
}

/// Moments of `ξ` and of `w = ξᵀPξ` that determine `E` and `Var` of `V(z + ξ)`.
struct QuadMoments {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    /// `Cov(ξ, w)`.
    cross: DVector<f64>,
    mean_w: f64,
    var_w: f64,
}

fn quad_moments(p: &SymMatrix, sigma: &SymMatrix, conv: &MomentConvention) -> Result<QuadMoments> {
    let n = p.dim();
    match conv {
        MomentConvention::Gaussian => {
            let ps = p.as_matrix() * sigma.as_matrix();
            Ok(QuadMoments {
                mean: DVector::zeros(n),
                cov: sigma.as_matrix().clone(),
                cross: DVector::zeros(n),
                mean_w: ps.trace(),
                var_w: 2.0 * (&ps * &ps).trace(),
            })
        }
        MomentConvention::Finite(dist) => {
            if dist.dim() != n {
                return Err(Error::ShapeMismatch(format!(
                    "disturbance atoms have dimension {}, state dimension is {n}",
                    dist.dim()
                )));
            }
            let atoms: Vec<DVector<f64>> = dist.atoms().iter().map(|a| DVector::from_column_slice(a)).collect();
            let w: Vec<f64> = atoms.iter().map(|a| p.quad_form(a)).collect();
            let weights = dist.weights();
            let mean = atoms
                .iter()
                .zip(weights)
                .fold(DVector::zeros(n), |acc, (a, &pw)| acc + a * pw);
            let (mean_w, var_w) = dist.mean_variance(&w);
            let mut cov = DMatrix::zeros(n, n);
            let mut cross = DVector::zeros(n);
            for ((a, &wi), &pw) in atoms.iter().zip(&w).zip(weights) {
                let d = a - &mean;
                cov += &d * d.transpose() * pw;
                cross += &d * ((wi - mean_w) * pw);
            }
            Ok(QuadMoments {
                mean,
                cov,
                cross,
                mean_w,
                var_w,
            })
        }
    }
}

/// `|RHS(x) − V(x)|` for the mean–variance Bellman operator under Gaussian moments.
pub fn bellman_residual(sys: &LqSystem, value: &QuadraticValue, x: &DVector<f64>) -> Result<f64> {
    bellman_residual_with(sys, value, x, &MomentConvention::Gaussian)
}

/// Right-hand side of the mean–variance Bellman equation at `x` and its minimizer.
///
/// With `z = Ax + Bu` and `V(y) = yᵀPy + r`,
/// `E[V(z+ξ)] = zᵀPz + 2zᵀPμ + E[w] + r` and
/// `Var[V(z+ξ)] = 4zᵀPCPz + 4zᵀP Cov(ξ,w) + Var[w]`, so the bracket is a
/// quadratic in `u` minimized by one linear solve.
pub fn bellman_rhs(
    sys: &LqSystem,
    value: &QuadraticValue,
    x: &DVector<f64>,
    conv: &MomentConvention,
) -> Result<(f64, DVector<f64>)> {
    let n = sys.state_dim();
    if x.len() != n || value.p.dim() != n {
        return Err(Error::ShapeMismatch(format!(
            "state has length {}, value is {}x{}, system dimension is {n}",
            x.len(),
            value.p.dim(),
            value.p.dim()
        )));
    }
    let alpha = sys.alpha;
    let var_scale = alpha * alpha / (4.0 * sys.gamma);
    let mom = quad_moments(&value.p, &sys.sigma, conv)?;
    let p = value.p.as_matrix();

    // J(u) = xᵀQx + uᵀRu + zᵀMz + 2hᵀz + const
    let m = p * alpha + p * &mom.cov * p * (4.0 * var_scale);
    let h = p * &mom.mean * alpha + p * &mom.cross * (2.0 * var_scale);

    let ax = &sys.a * x;
    let u = if sys.input_dim() == 0 {
        DVector::zeros(0)
    } else {
        let hess = SymMatrix::symmetrize(sys.r.as_matrix() + sys.b.transpose() * &m * &sys.b);
        let rhs = -(sys.b.transpose() * (&m * &ax + &h));
        let rhs = DMatrix::from_column_slice(rhs.len(), 1, rhs.as_slice());
        let sol = solve_spd(&hess, &rhs)?;
        DVector::from_column_slice(sol.as_slice())
    };
    let z = &ax + &sys.b * &u;

    let mean_v = z.dot(&(p * &z)) + 2.0 * z.dot(&(p * &mom.mean)) + mom.mean_w + value.r;
    let pz = p * &z;
    let var_v = 4.0 * pz.dot(&(&mom.cov * &pz)) + 4.0 * pz.dot(&mom.cross) + mom.var_w;
    let rhs = sys.stage_cost(x, &u) + alpha * mean_v + var_scale * var_v;
    Ok((rhs, u))
}

pub fn bellman_residual_with(
    sys: &LqSystem,
    value: &QuadraticValue,
    x: &DVector<f64>,
    conv: &MomentConvention,
) -> Result<f64> {
    let (rhs, _) = bellman_rhs(sys, value, x, conv)?;
    Ok((rhs - value.evaluate(x)).abs())
}

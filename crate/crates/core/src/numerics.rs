//! Dense linear-algebra helpers shared by the solvers.
//!
//! Everything here works on `nalgebra` dynamic matrices. [`SymMatrix`] keeps
//! its entries exactly symmetric, which the Riccati and Lyapunov iterations
//! rely on to stay in the PSD cone.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Relative factor applied to the spectral scale when testing semidefiniteness.
pub const PSD_REL_TOL: f64 = 1e-9;

/// A square matrix whose entries satisfy `m[(i, j)] == m[(j, i)]` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Accepts a square matrix that is symmetric up to rounding and stores its
    /// exact symmetric part.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        let asymmetry = (&m - m.transpose()).amax();
        let scale = m.amax().max(1.0);
        if !(asymmetry <= 1e-9 * scale) {
            return Err(Error::NotSymmetric { asymmetry });
        }
        Ok(Self::symmetrize(m))
    }

    /// Replaces `m` by `(m + mᵀ) / 2`.
    pub fn symmetrize(mut m: DMatrix<f64>) -> Self {
        assert!(m.is_square(), "symmetrize requires a square matrix");
        let n = m.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = avg;
                m[(j, i)] = avg;
            }
        }
        SymMatrix(m)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(matrix_from_rows(rows)?)
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(DMatrix::identity(n, n))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn eigenvalues(&self) -> DVector<f64> {
        SymmetricEigen::new(self.0.clone()).eigenvalues
    }

    /// Largest absolute eigenvalue.
    pub fn spectral_scale(&self) -> f64 {
        if self.dim() == 0 {
            return 0.0;
        }
        self.eigenvalues().amax()
    }

    pub fn psd_tol(&self) -> f64 {
        PSD_REL_TOL * self.spectral_scale().max(1.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        if self.dim() == 0 {
            return 0.0;
        }
        self.eigenvalues().min()
    }

    pub fn is_psd(&self) -> bool {
        self.check_psd().is_ok()
    }

    pub fn check_psd(&self) -> Result<()> {
        if self.dim() == 0 {
            return Ok(());
        }
        let eig = self.eigenvalues();
        let tolerance = PSD_REL_TOL * eig.amax().max(1.0);
        let min_eigenvalue = eig.min();
        if min_eigenvalue >= -tolerance {
            Ok(())
        } else {
            Err(Error::NotPsd {
                min_eigenvalue,
                tolerance,
            })
        }
    }

    /// Fails unless the smallest eigenvalue is positive relative to the scale.
    pub fn check_pd(&self) -> Result<()> {
        if self.dim() == 0 {
            return Ok(());
        }
        let eig = self.eigenvalues();
        if eig.min() > 1e-12 * eig.amax() {
            Ok(())
        } else {
            Err(Error::NotPositiveDefinite)
        }
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// `xᵀ M x`.
    pub fn quad_form(&self, x: &DVector<f64>) -> f64 {
        x.dot(&(&self.0 * x))
    }
}

impl AsRef<DMatrix<f64>> for SymMatrix {
    fn as_ref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// Builds a dense matrix from row vectors, rejecting ragged input.
pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
        return Err(Error::ShapeMismatch(format!(
            "row {i} has {} entries, expected {ncols}",
            row.len()
        )));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Solves `M X = rhs` for symmetric positive definite `M` via Cholesky.
pub fn solve_spd(m: &SymMatrix, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if rhs.nrows() != m.dim() {
        return Err(Error::ShapeMismatch(format!(
            "solve_spd: matrix is {n}x{n} but rhs has {} rows",
            rhs.nrows(),
            n = m.dim()
        )));
    }
    let chol = Cholesky::new(m.as_matrix().clone()).ok_or(Error::NotPositiveDefinite)?;
    Ok(chol.solve(rhs))
}

/// Draws standard-normal-driven samples `mean + F z` with `F Fᵀ = cov`.
///
/// The factor comes from a symmetric eigendecomposition, so singular (even
/// zero) covariances are accepted as long as they pass the PSD check.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    mean: DVector<f64>,
    factor: DMatrix<f64>,
}

impl GaussianSampler {
    pub fn new(mean: DVector<f64>, cov: &SymMatrix) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::ShapeMismatch(format!(
                "mean has length {} but covariance is {n}x{n}",
                mean.len(),
                n = cov.dim()
            )));
        }
        cov.check_psd()?;
        let eig = SymmetricEigen::new(cov.as_matrix().clone());
        let sqrt_vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
        let factor = &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals);
        Ok(Self { mean, factor })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let z = DVector::from_fn(self.dim(), |_, _| StandardNormal.sample(rng));
        &self.mean + &self.factor * z
    }
}

/// `count` seeded draws from `N(mean, cov)`; bitwise reproducible per seed.
pub fn sample_gaussian(mean: &DVector<f64>, cov: &SymMatrix, count: usize, seed: u64) -> Result<Vec<DVector<f64>>> {
    let sampler = GaussianSampler::new(mean.clone(), cov)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count).map(|_| sampler.sample(&mut rng)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn random_spd(n: usize, seed: u64) -> SymMatrix {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        SymMatrix::symmetrize(&g * g.transpose() + DMatrix::identity(n, n) * 0.1)
    }

    #[test]
    fn symmetrize_is_exact() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.1, 2.0]);
        let s = SymMatrix::symmetrize(m);
        assert_eq!(s.as_matrix()[(0, 1)], s.as_matrix()[(1, 0)]);
        assert_eq!(s.as_matrix()[(0, 1)], 0.2);
    }

    #[test]
    fn new_rejects_asymmetric_and_nonsquare() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(matches!(SymMatrix::new(m), Err(Error::NotSymmetric { .. })));
        let m = DMatrix::zeros(2, 3);
        assert!(matches!(SymMatrix::new(m), Err(Error::NotSquare { .. })));
    }

    #[test]
    fn psd_check_is_scale_relative() {
        // -1e-4 is negligible next to an eigenvalue of 1e7
        let m = SymMatrix::from_diagonal(&[1e7, -1e-4]);
        assert!(m.is_psd());
        let m = SymMatrix::from_diagonal(&[1.0, -1e-4]);
        assert!(matches!(m.check_psd(), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn solve_identity() {
        let i3 = SymMatrix::identity(3);
        let x = solve_spd(&i3, &DMatrix::identity(3, 3)).unwrap();
        assert_eq!(x, DMatrix::identity(3, 3));
    }

    #[test]
    fn solve_diagonal() {
        let m = SymMatrix::from_diagonal(&[2.0, 4.0]);
        let x = solve_spd(&m, &DMatrix::from_column_slice(2, 1, &[1.0, 1.0])).unwrap();
        assert_relative_eq!(x[(0, 0)], 0.5);
        assert_relative_eq!(x[(1, 0)], 0.25);
    }

    #[test]
    fn solve_rejects_indefinite() {
        let m = SymMatrix::from_diagonal(&[1.0, -1.0]);
        assert_eq!(solve_spd(&m, &DMatrix::identity(2, 2)), Err(Error::NotPositiveDefinite));
    }

    #[test]
    fn solve_rejects_bad_rhs_shape() {
        let m = SymMatrix::identity(2);
        assert!(matches!(
            solve_spd(&m, &DMatrix::zeros(3, 1)),
            Err(Error::ShapeMismatch(_))
        ));
    }

    proptest! {
        #[test]
        fn solve_spd_reconstructs_rhs(n in 1usize..=8, seed in any::<u64>(), k in 1usize..=3) {
            let m = random_spd(n, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
            let b = DMatrix::from_fn(n, k, |_, _| StandardNormal.sample(&mut rng));
            let x = solve_spd(&m, &b).unwrap();
            let resid = (m.as_matrix() * &x - &b).norm();
            prop_assert!(resid <= 1e-10 * b.norm().max(f64::MIN_POSITIVE));
        }
    }

    #[test]
    fn zero_covariance_gives_mean() {
        let draws = sample_gaussian(&DVector::zeros(3), &SymMatrix::zeros(3), 5, 1).unwrap();
        assert_eq!(draws.len(), 5);
        assert!(draws.iter().all(|d| d.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn sampling_is_deterministic() {
        let cov = SymMatrix::from_rows(&[vec![2.0, 0.5], vec![0.5, 3.0]]).unwrap();
        let a = sample_gaussian(&DVector::zeros(2), &cov, 50, 11).unwrap();
        let b = sample_gaussian(&DVector::zeros(2), &cov, 50, 11).unwrap();
        assert_eq!(a, b);
        let c = sample_gaussian(&DVector::zeros(2), &cov, 50, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn empirical_covariance_matches() {
        let n = 100_000;
        let draws = sample_gaussian(&DVector::zeros(2), &SymMatrix::identity(2), n, 7).unwrap();
        let mean = draws.iter().fold(DVector::zeros(2), |acc, d| acc + d) / n as f64;
        let cov = draws.iter().fold(DMatrix::zeros(2, 2), |acc, d| {
            acc + (d - &mean) * (d - &mean).transpose()
        }) / (n as f64 - 1.0);
        for i in 0..2 {
            for j in 0..2 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((cov[(i, j)] - target).abs() < 0.05, "cov[{i},{j}] = {}", cov[(i, j)]);
            }
        }
    }

    #[test]
    fn sampler_rejects_indefinite_covariance() {
        let cov = SymMatrix::from_diagonal(&[1.0, -1.0]);
        assert!(matches!(
            sample_gaussian(&DVector::zeros(2), &cov, 1, 0),
            Err(Error::NotPsd { .. })
        ));
    }
}

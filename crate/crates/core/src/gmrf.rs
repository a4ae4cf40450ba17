//! Gaussian targets and the covariance kernels used by the benchmark
//! problems.
//!
//! 2D fields are column-stacked: pixel `(i, j)` (with `i` the row along `s`)
//! sits at index `i + side * j`.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{check_symmetric, kron, spd_inverse, BandedCholesky, CsrMatrix};
use crate::partition::BlockPartition;
use crate::target::Target;

/// `C[i][j] = exp(-|i - j| / (2 ell))` on a unit-spaced 1D grid.
pub fn exp_cov_1d(n: usize, ell: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| (-(i.abs_diff(j) as f64) / (2.0 * ell)).exp())
}

/// Separable exponential covariance on a unit-spaced `side × side` grid:
/// `σ_s² σ_t² exp(-½|Δs|/ℓ_s − ½|Δt|/ℓ_t)`.
pub fn sep_exp_cov_2d(side: usize, sigma_s2: f64, sigma_t2: f64, ell_s: f64, ell_t: f64) -> DMatrix<f64> {
    // slow index is the column j (t), fast index the row i (s)
    kron(&exp_cov_1d(side, ell_t), &exp_cov_1d(side, ell_s)) * (sigma_s2 * sigma_t2)
}

/// Precision of [`sep_exp_cov_2d`], assembled from the two 1D inverses.
/// Entries below `drop_tol * max|P|` are dropped.
pub fn sep_exp_precision_2d(
    side: usize,
    sigma_s2: f64,
    sigma_t2: f64,
    ell_s: f64,
    ell_t: f64,
    drop_tol: f64,
) -> Result<CsrMatrix> {
    let ps = spd_inverse(&exp_cov_1d(side, ell_s))?;
    let pt = spd_inverse(&exp_cov_1d(side, ell_t))?;
    let ps = CsrMatrix::from_dense(&ps, drop_tol);
    let pt = CsrMatrix::from_dense(&pt, drop_tol);
    let scale = 1.0 / (sigma_s2 * sigma_t2);
    let mut trip = Vec::with_capacity(ps.nnz() * pt.nnz());
    for jt in 0..side {
        for (kt, vt) in pt.row(jt) {
            for is in 0..side {
                for (ks, vs) in ps.row(is) {
                    trip.push((is + side * jt, ks + side * kt, scale * vs * vt));
                }
            }
        }
    }
    Ok(CsrMatrix::from_triplets(side * side, side * side, trip))
}

/// Squared-exponential kernel `exp(-Δs²/(2ℓ_s²) − Δt²/(2ℓ_t²))` over arbitrary
/// points.
pub fn sq_exp_cov_2d(points: &[(f64, f64)], ell_s: f64, ell_t: f64) -> DMatrix<f64> {
    let n = points.len();
    DMatrix::from_fn(n, n, |a, b| {
        let (s1, t1) = points[a];
        let (s2, t2) = points[b];
        (-(s1 - s2).powi(2) / (2.0 * ell_s * ell_s) - (t1 - t2).powi(2) / (2.0 * ell_t * ell_t)).exp()
    })
}

/// `N(mean, P⁻¹)` with the precision stored sparse.
#[derive(Debug, Clone)]
pub struct GaussianTarget {
    mean: Vec<f64>,
    precision: CsrMatrix,
    chol: BandedCholesky,
}

impl GaussianTarget {
    /// Entries of `precision` below `drop_tol * max|P|` are treated as zero.
    pub fn new(mean: Vec<f64>, precision: &DMatrix<f64>, drop_tol: f64) -> Result<Self> {
        check_symmetric(precision, 1e-10)?;
        Self::from_sparse(mean, CsrMatrix::from_dense(precision, drop_tol))
    }

    pub fn from_covariance(mean: Vec<f64>, cov: &DMatrix<f64>, drop_tol: f64) -> Result<Self> {
        check_symmetric(cov, 1e-10)?;
        let p = spd_inverse(cov)?;
        Self::new(mean, &p, drop_tol)
    }

    pub fn from_sparse(mean: Vec<f64>, precision: CsrMatrix) -> Result<Self> {
        if precision.nrows() != mean.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                got: precision.nrows(),
            });
        }
        let chol = BandedCholesky::from_csr(&precision)?;
        Ok(Self { mean, precision, chol })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn precision(&self) -> &CsrMatrix {
        &self.precision
    }

    pub fn precision_dense(&self) -> DMatrix<f64> {
        self.precision.to_dense()
    }

    /// Dense `P⁻¹`.
    pub fn covariance(&self) -> Result<DMatrix<f64>> {
        spd_inverse(&self.precision_dense())
    }

    /// Exact draw `mean + L⁻ᵀ z` with `P = L Lᵀ`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z: Vec<f64> = (0..self.mean.len()).map(|_| rng.sample(StandardNormal)).collect();
        let w = self.chol.solve_upper(&z);
        w.iter().zip(&self.mean).map(|(a, m)| a + m).collect()
    }

    fn centered(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).map(|(a, m)| a - m).collect()
    }
}

impl Target for GaussianTarget {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let d = self.centered(x);
        let pd = self.precision.mul_vec(&d);
        -0.5 * crate::linalg::dot(&d, &pd)
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        let d = self.centered(x);
        self.precision.mul_vec(&d).into_iter().map(|v| -v).collect()
    }

    fn log_density_and_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let d = self.centered(x);
        let pd = self.precision.mul_vec(&d);
        let lp = -0.5 * crate::linalg::dot(&d, &pd);
        (lp, pd.into_iter().map(|v| -v).collect())
    }

    fn block_grad(&self, part: &BlockPartition, j: usize, x: &[f64]) -> Vec<f64> {
        let d = self.centered(x);
        part.block(j).iter().map(|&i| -self.precision.row_dot(i, &d)).collect()
    }
}

/// Relative drop tolerance used when sparsifying numerically inverted
/// exponential-kernel covariances.
pub const KERNEL_DROP_TOL: f64 = 1e-12;

/// Zero-mean Gaussian with the 1D exponential covariance [`exp_cov_1d`].
pub fn exp_kernel_target_1d(n: usize, ell: f64) -> Result<GaussianTarget> {
    GaussianTarget::from_covariance(vec![0.0; n], &exp_cov_1d(n, ell), KERNEL_DROP_TOL)
}

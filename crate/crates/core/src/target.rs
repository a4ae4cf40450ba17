//! The interface every sampler consumes, the fixed-metric preconditioner, and
//! the finite-difference gradient oracle.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{BandedCholesky, CsrMatrix};
use crate::partition::BlockPartition;

/// Unnormalized log-density with analytic gradient.
///
/// `log_density` may return a non-finite value outside the support (or on
/// numerical overflow); samplers treat that as an automatic rejection.
/// Implementations must be re-entrant.
pub trait Target: Sync {
    fn dim(&self) -> usize;

    fn log_density(&self, x: &[f64]) -> f64;

    /// `∇ log π(x)`.
    fn grad(&self, x: &[f64]) -> Vec<f64>;

    fn log_density_and_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        (self.log_density(x), self.grad(x))
    }

    /// Restriction of the gradient to block `j`.
    fn block_grad(&self, part: &BlockPartition, j: usize, x: &[f64]) -> Vec<f64> {
        part.gather(j, &self.grad(x))
    }
}

impl<T: Target + ?Sized> Target for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn log_density(&self, x: &[f64]) -> f64 {
        (**self).log_density(x)
    }
    fn grad(&self, x: &[f64]) -> Vec<f64> {
        (**self).grad(x)
    }
    fn log_density_and_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        (**self).log_density_and_grad(x)
    }
    fn block_grad(&self, part: &BlockPartition, j: usize, x: &[f64]) -> Vec<f64> {
        (**self).block_grad(part, j, x)
    }
}

/// Posterior written as a standard normal reference measure times a
/// likelihood, the form pCN needs.
pub trait LikelihoodSplit: Sync {
    fn dim(&self) -> usize;

    /// Log-likelihood up to an additive constant.
    fn log_likelihood(&self, x: &[f64]) -> f64;
}

/// A fixed metric `G` (symmetric positive definite). Langevin proposals use
/// drift `G⁻¹ v` and noise covariance `2τ G⁻¹`.
#[derive(Debug, Clone)]
pub struct Preconditioner {
    metric: CsrMatrix,
    chol: BandedCholesky,
}

impl Preconditioner {
    pub fn from_csr(metric: CsrMatrix) -> Result<Self> {
        let chol = BandedCholesky::from_csr(&metric)?;
        Ok(Self { metric, chol })
    }

    pub fn from_dense(metric: &DMatrix<f64>) -> Result<Self> {
        crate::linalg::check_symmetric(metric, 1e-12)?;
        Self::from_csr(CsrMatrix::from_dense(metric, 0.0))
    }

    /// Principal sub-block on `idx`, refactored.
    pub fn restrict(&self, idx: &[usize]) -> Result<Self> {
        Self::from_csr(self.metric.submatrix(idx))
    }

    pub fn dim(&self) -> usize {
        self.chol.dim()
    }

    pub fn metric(&self) -> &CsrMatrix {
        &self.metric
    }

    pub fn factor(&self) -> &BandedCholesky {
        &self.chol
    }

    /// `G⁻¹ v`.
    pub fn drift(&self, v: &[f64]) -> Vec<f64> {
        self.chol.solve(v)
    }

    /// `L⁻ᵀ ξ`, which has covariance `G⁻¹` for standard normal `ξ`.
    pub fn noise(&self, xi: &[f64]) -> Vec<f64> {
        self.chol.solve_upper(xi)
    }

    /// `rᵀ G r`.
    pub fn weighted_sq_norm(&self, r: &[f64]) -> f64 {
        self.chol.mul_upper(r).iter().map(|v| v * v).sum()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FdReport {
    pub pass: bool,
    pub max_rel_error: f64,
    pub worst_index: usize,
}

/// Components whose absolute discrepancy is below this count as agreeing.
pub const FD_ABS_TOL: f64 = 1e-10;

/// Compares `target.grad(x)` with fourth-order central differences of
/// `log_density` (stencil `x ± h`, `x ± 2h`).
pub fn fd_grad_check<T: Target + ?Sized>(target: &T, x: &[f64], h: f64, tol: f64) -> Result<FdReport> {
    if !(h > 0.0) {
        return Err(Error::Config(format!("finite-difference step must be positive, got {h}")));
    }
    if x.len() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: target.dim(),
            got: x.len(),
        });
    }
    let analytic = target.grad(x);
    let mut xp = x.to_vec();
    let mut max_rel_error = 0.0f64;
    let mut worst_index = 0;
    for i in 0..x.len() {
        let mut f = [0.0; 4];
        for (slot, step) in f.iter_mut().zip([2.0, 1.0, -1.0, -2.0]) {
            xp[i] = x[i] + step * h;
            *slot = target.log_density(&xp);
        }
        xp[i] = x[i];
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                index: i,
                what: "log-density at finite-difference probe".into(),
            });
        }
        let fd = (-f[0] + 8.0 * f[1] - 8.0 * f[2] + f[3]) / (12.0 * h);
        let diff = (fd - analytic[i]).abs();
        if diff <= FD_ABS_TOL {
            continue;
        }
        let rel = diff / fd.abs().max(analytic[i].abs());
        if rel > max_rel_error {
            max_rel_error = rel;
            worst_index = i;
        }
    }
    Ok(FdReport {
        pass: max_rel_error < tol,
        max_rel_error,
        worst_index,
    })
}

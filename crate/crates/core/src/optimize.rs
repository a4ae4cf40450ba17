//! MAP estimation for chain initialization, and the MAP Hessian used as a
//! fixed preconditioner.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::cox::CoxModel;
use crate::error::{Error, Result};
use crate::linalg::norm;
use crate::target::Target;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapResult {
    pub x_map: Vec<f64>,
    pub log_density: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub const COX_GRAD_TOL: f64 = 1e-6;
pub const COX_MAX_ITER: usize = 100;
pub const PDE_GRAD_TOL: f64 = 1e-5;
pub const PDE_MAX_ITER: usize = 500;
const MAX_HALVINGS: usize = 40;

/// Newton iteration on the Cox posterior from `μ1`; the Gauss–Newton matrix
/// `B⁻¹ + diag(e^x)` is the exact negative Hessian here.
pub fn map_cox(model: &CoxModel) -> Result<MapResult> {
    let n = model.dim();
    let mut x = vec![model.params().mu; n];
    let (mut lp, mut g) = model.log_density_and_grad(&x);
    let mut iterations = 0;
    while norm(&g) >= COX_GRAD_TOL && iterations < COX_MAX_ITER {
        let step = model.hessian_metric(&x)?.drift(&g);
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = x.iter().zip(&step).map(|(a, s)| a + t * s).collect();
            let (lt, gt) = model.log_density_and_grad(&trial);
            if lt.is_finite() && lt > lp {
                x = trial;
                lp = lt;
                g = gt;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        iterations += 1;
        if !moved {
            break;
        }
    }
    let grad_norm = norm(&g);
    Ok(MapResult {
        x_map: x,
        log_density: lp,
        grad_norm,
        iterations,
        converged: grad_norm < COX_GRAD_TOL,
    })
}

/// BFGS ascent with Armijo backtracking.
pub fn map_bfgs<T: Target + ?Sized>(target: &T, x0: &[f64], grad_tol: f64, max_iter: usize) -> Result<MapResult> {
    let n = target.dim();
    if x0.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x0.len() });
    }
    // minimize f = −log π
    let eval = |x: &[f64]| {
        let (lp, g) = target.log_density_and_grad(x);
        (-lp, DVector::from_iterator(n, g.into_iter().map(|v| -v)))
    };
    let mut x = DVector::from_column_slice(x0);
    let (mut f, mut g) = eval(x.as_slice());
    if !f.is_finite() {
        return Err(Error::NonFinite {
            index: 0,
            what: "log-density at the optimizer start".into(),
        });
    }
    let mut hinv = DMatrix::<f64>::identity(n, n);
    let mut iterations = 0;
    while g.norm() >= grad_tol && iterations < max_iter {
        let mut p = -(&hinv * &g);
        let mut slope = g.dot(&p);
        if slope >= 0.0 {
            hinv = DMatrix::identity(n, n);
            p = -g.clone();
            slope = g.dot(&p);
        }
        let mut t = 1.0;
        let mut next = None;
        for _ in 0..MAX_HALVINGS {
            let xt = &x + t * &p;
            let (ft, gt) = eval(xt.as_slice());
            if ft.is_finite() && ft <= f + 1e-4 * t * slope {
                next = Some((xt, ft, gt));
                break;
            }
            t *= 0.5;
        }
        iterations += 1;
        let Some((xn, fnew, gn)) = next else { break };
        let s = &xn - &x;
        let y = &gn - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if iterations == 1 {
                hinv *= sy / y.dot(&y);
            }
            let rho = 1.0 / sy;
            let hy = &hinv * &y;
            let yhy = y.dot(&hy);
            hinv += (rho * rho * yhy + rho) * &s * s.transpose() - rho * (&hy * s.transpose() + &s * hy.transpose());
        }
        x = xn;
        f = fnew;
        g = gn;
    }
    let grad_norm = g.norm();
    Ok(MapResult {
        x_map: x.as_slice().to_vec(),
        log_density: -f,
        grad_norm,
        iterations,
        converged: grad_norm < grad_tol,
    })
}

/// Quasi-Newton MAP of a PDE-type posterior, started at the origin.
pub fn map_pde<T: Target + ?Sized>(model: &T) -> Result<MapResult> {
    map_bfgs(model, &vec![0.0; model.dim()], PDE_GRAD_TOL, PDE_MAX_ITER)
}

/// Relative eigenvalue floor applied to the MAP Hessian.
pub const HESSIAN_FLOOR: f64 = 1e-6;

/// Negative Hessian of `log π` at `x` by central differences of the analytic
/// gradient, symmetrized and with eigenvalues floored at
/// `HESSIAN_FLOOR · λ_max`.
pub fn hessian_at_map<T: Target + ?Sized>(target: &T, x: &[f64], h: f64) -> Result<DMatrix<f64>> {
    let n = target.dim();
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x.len() });
    }
    if !(h > 0.0) {
        return Err(Error::Config(format!("finite-difference step must be positive, got {h}")));
    }
    let cols: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut xp = x.to_vec();
            xp[i] += h;
            let gp = target.grad(&xp);
            xp[i] = x[i] - h;
            let gm = target.grad(&xp);
            gp.iter().zip(&gm).map(|(a, b)| -(a - b) / (2.0 * h)).collect()
        })
        .collect();
    let mut j = DMatrix::from_fn(n, n, |r, c| cols[c][r]);
    if let Some(i) = j.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            index: i % n,
            what: "Hessian entry".into(),
        });
    }
    crate::linalg::symmetrize(&mut j);
    let eig = SymmetricEigen::new(j);
    let lmax = eig.eigenvalues.max();
    if !(lmax > 0.0) {
        return Err(Error::Degenerate("MAP Hessian has no positive curvature".into()));
    }
    let floor = HESSIAN_FLOOR * lmax;
    let vals = eig.eigenvalues.map(|v| v.max(floor));
    let mut out = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
    crate::linalg::symmetrize(&mut out);
    Ok(out)
}

//! Log-Gaussian Cox process posterior on an `L × L` pixel grid.
//!
//! Latent field `x ~ N(μ1, B)` with separable exponential covariance, counts
//! `y_k ~ Poisson(exp(x_k))`. Pixel `(i, j)` is stored at `i + L·j`.

use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmrf::{exp_cov_1d, sep_exp_precision_2d, GaussianTarget, KERNEL_DROP_TOL};
use crate::partition::BlockPartition;
use crate::samplers::draw_normals;
use crate::target::{LikelihoodSplit, Preconditioner, Target};

/// Largest latent value whose exponential is evaluated.
pub const EXP_GUARD: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoxParams {
    pub sigma_s2: f64,
    pub sigma_t2: f64,
    pub mu: f64,
    pub ell_s: f64,
    pub ell_t: f64,
}

impl Default for CoxParams {
    fn default() -> Self {
        Self {
            sigma_s2: 2.0,
            sigma_t2: 2.0,
            mu: 4.0,
            ell_s: 2.0,
            ell_t: 4.0,
        }
    }
}

impl CoxParams {
    /// Prior marginal variance `B_kk`.
    pub fn marginal_variance(&self) -> f64 {
        self.sigma_s2 * self.sigma_t2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoxDataset {
    pub side: usize,
    pub x_true: Vec<f64>,
    pub y: Vec<u64>,
    pub seed: u64,
}

fn lower_cholesky(c: nalgebra::DMatrix<f64>) -> Result<nalgebra::DMatrix<f64>> {
    let n = c.nrows();
    nalgebra::Cholesky::new(c)
        .map(|ch| ch.l())
        .ok_or(Error::NotPositiveDefinite(n))
}

/// Square-root factor of the prior covariance in Kronecker form:
/// `x = μ + σ_s σ_t vec(L_s W L_tᵀ)` maps white noise `W` to a prior draw.
#[derive(Debug, Clone)]
pub struct KroneckerFactor {
    side: usize,
    mu: f64,
    scale: f64,
    ls: nalgebra::DMatrix<f64>,
    lt: nalgebra::DMatrix<f64>,
}

impl KroneckerFactor {
    pub fn new(side: usize, params: &CoxParams) -> Result<Self> {
        if side == 0 {
            return Err(Error::Config("grid side must be at least 1".into()));
        }
        Ok(Self {
            side,
            mu: params.mu,
            scale: params.marginal_variance().sqrt(),
            ls: lower_cholesky(exp_cov_1d(side, params.ell_s))?,
            lt: lower_cholesky(exp_cov_1d(side, params.ell_t))?,
        })
    }

    pub fn to_field(&self, w: &[f64]) -> Vec<f64> {
        let z = nalgebra::DMatrix::from_column_slice(self.side, self.side, w);
        let f = &self.ls * z * self.lt.transpose();
        f.iter().map(|v| self.mu + self.scale * v).collect()
    }

    pub fn to_white(&self, x: &[f64]) -> Vec<f64> {
        let f = nalgebra::DMatrix::from_iterator(self.side, self.side, x.iter().map(|v| (v - self.mu) / self.scale));
        let a = self.ls.solve_lower_triangular(&f).expect("factor is nonsingular");
        let w = self
            .lt
            .solve_lower_triangular(&a.transpose())
            .expect("factor is nonsingular")
            .transpose();
        w.iter().copied().collect()
    }
}

/// Draws a latent field from the prior and Poisson counts given it.
pub fn simulate(side: usize, params: &CoxParams, seed: u64) -> Result<CoxDataset> {
    let factor = KroneckerFactor::new(side, params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x_true = factor.to_field(&draw_normals(&mut rng, side * side));
    if let Some(&bad) = x_true.iter().find(|v| **v > EXP_GUARD) {
        return Err(Error::Overflow(bad));
    }
    let y = x_true
        .iter()
        .map(|&x| {
            let rate = x.exp();
            Poisson::new(rate)
                .map(|d| d.sample(&mut rng) as u64)
                .map_err(|e| Error::Numerical(format!("Poisson rate {rate}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CoxDataset { side, x_true, y, seed })
}

impl CoxDataset {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "i,j,x_true,y")?;
        for (k, (x, y)) in self.x_true.iter().zip(&self.y).enumerate() {
            writeln!(w, "{},{},{:.16e},{}", k % self.side, k / self.side, x, y)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R, seed: u64) -> Result<Self> {
        let mut rows = Vec::new();
        for (ln, line) in r.lines().enumerate() {
            let line = line?;
            if ln == 0 || line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 4 {
                return Err(Error::Parse(format!("line {}: expected 4 fields", ln + 1)));
            }
            let bad = |what: &str| Error::Parse(format!("line {}: bad {what}", ln + 1));
            let i: usize = f[0].parse().map_err(|_| bad("i"))?;
            let j: usize = f[1].parse().map_err(|_| bad("j"))?;
            let x: f64 = f[2].parse().map_err(|_| bad("x_true"))?;
            let y: u64 = f[3].parse().map_err(|_| bad("y"))?;
            rows.push((i, j, x, y));
        }
        let n = rows.len();
        let side = (n as f64).sqrt().round() as usize;
        if side * side != n || n == 0 {
            return Err(Error::Parse(format!("{n} rows do not form a square grid")));
        }
        let mut x_true = vec![f64::NAN; n];
        let mut y = vec![0; n];
        let mut seen = vec![false; n];
        for (i, j, x, c) in rows {
            if i >= side || j >= side || seen[i + side * j] {
                return Err(Error::Parse(format!("pixel ({i}, {j}) out of range or repeated")));
            }
            seen[i + side * j] = true;
            x_true[i + side * j] = x;
            y[i + side * j] = c;
        }
        Ok(Self { side, x_true, y, seed })
    }
}

/// Posterior `log π(x) = −½(x−μ)ᵀB⁻¹(x−μ) + Σ (y_k x_k − e^{x_k})`.
#[derive(Debug, Clone)]
pub struct CoxModel {
    side: usize,
    params: CoxParams,
    prior: GaussianTarget,
    y: Vec<f64>,
}

impl CoxModel {
    pub fn new(side: usize, params: CoxParams, y: &[u64]) -> Result<Self> {
        if y.len() != side * side {
            return Err(Error::DimensionMismatch {
                expected: side * side,
                got: y.len(),
            });
        }
        let p = sep_exp_precision_2d(
            side,
            params.sigma_s2,
            params.sigma_t2,
            params.ell_s,
            params.ell_t,
            KERNEL_DROP_TOL,
        )?;
        let prior = GaussianTarget::from_sparse(vec![params.mu; side * side], p)?;
        Ok(Self {
            side,
            params,
            prior,
            y: y.iter().map(|&c| c as f64).collect(),
        })
    }

    pub fn from_dataset(data: &CoxDataset, params: CoxParams) -> Result<Self> {
        Self::new(data.side, params, &data.y)
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn params(&self) -> &CoxParams {
        &self.params
    }

    pub fn prior(&self) -> &GaussianTarget {
        &self.prior
    }

    pub fn counts(&self) -> &[f64] {
        &self.y
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.side * self.side {
            return Err(Error::DimensionMismatch {
                expected: self.side * self.side,
                got: x.len(),
            });
        }
        match x.iter().find(|v| **v > EXP_GUARD) {
            Some(&v) => Err(Error::Overflow(v)),
            None => Ok(()),
        }
    }

    fn centered(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|v| v - self.params.mu).collect()
    }

    pub fn log_posterior(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        let r = self.centered(x);
        let pr = self.prior.precision().mul_vec(&r);
        let quad: f64 = r.iter().zip(&pr).map(|(a, b)| a * b).sum();
        let lik: f64 = x.iter().zip(&self.y).map(|(xk, yk)| yk * xk - xk.exp()).sum();
        Ok(-0.5 * quad + lik)
    }

    pub fn grad_log_posterior(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        let r = self.centered(x);
        let pr = self.prior.precision().mul_vec(&r);
        Ok((0..x.len()).map(|k| -pr[k] + self.y[k] - x[k].exp()).collect())
    }

    /// Metric `Λ + B⁻¹` with `Λ_kk = exp(μ + B_kk)`.
    pub fn mmala_preconditioner(&self) -> Result<Preconditioner> {
        let lam = (self.params.mu + self.params.marginal_variance()).exp();
        let n = self.side * self.side;
        Preconditioner::from_csr(self.prior.precision().add_diagonal(&vec![lam; n]))
    }

    /// Metric `B⁻¹ + diag(exp(x))`, the negative Hessian at `x`.
    pub fn hessian_metric(&self, x: &[f64]) -> Result<Preconditioner> {
        self.check(x)?;
        let d: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        Preconditioner::from_csr(self.prior.precision().add_diagonal(&d))
    }
}

impl Target for CoxModel {
    fn dim(&self) -> usize {
        self.side * self.side
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        self.log_posterior(x).unwrap_or(f64::NAN)
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        self.grad_log_posterior(x).unwrap_or_else(|_| vec![f64::NAN; x.len()])
    }

    fn log_density_and_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        if self.check(x).is_err() {
            return (f64::NAN, vec![f64::NAN; x.len()]);
        }
        let r = self.centered(x);
        let pr = self.prior.precision().mul_vec(&r);
        let mut lp = 0.0;
        let mut g = Vec::with_capacity(x.len());
        for k in 0..x.len() {
            let e = x[k].exp();
            lp += -0.5 * r[k] * pr[k] + self.y[k] * x[k] - e;
            g.push(-pr[k] + self.y[k] - e);
        }
        (lp, g)
    }

    fn block_grad(&self, part: &BlockPartition, j: usize, x: &[f64]) -> Vec<f64> {
        let p = self.prior.precision();
        let mu = self.params.mu;
        part.block(j)
            .iter()
            .map(|&k| {
                let pr: f64 = p.row(k).map(|(c, v)| v * (x[c] - mu)).sum();
                -pr + self.y[k] - x[k].exp()
            })
            .collect()
    }
}

/// The posterior in whitened coordinates `w` (standard normal prior), the
/// form pCN runs on.
#[derive(Debug, Clone)]
pub struct CoxWhitened {
    factor: KroneckerFactor,
    y: Vec<f64>,
}

impl CoxWhitened {
    pub fn new(model: &CoxModel) -> Result<Self> {
        Ok(Self {
            factor: KroneckerFactor::new(model.side, &model.params)?,
            y: model.y.clone(),
        })
    }

    pub fn factor(&self) -> &KroneckerFactor {
        &self.factor
    }
}

impl LikelihoodSplit for CoxWhitened {
    fn dim(&self) -> usize {
        self.y.len()
    }

    fn log_likelihood(&self, w: &[f64]) -> f64 {
        let x = self.factor.to_field(w);
        if x.iter().any(|v| *v > EXP_GUARD) {
            return f64::NAN;
        }
        x.iter().zip(&self.y).map(|(xk, yk)| yk * xk - xk.exp()).sum()
    }
}

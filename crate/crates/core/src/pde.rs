//! Elliptic inverse problem: recover the log-permeability `k` of
//! `−∇·(e^k ∇u) = g` on the unit square from noisy point values of `u`.
//!
//! Discretization: bilinear (Q1) elements on a uniform `17 × 17` element mesh
//! with homogeneous Dirichlet data, leaving `16 × 16` interior nodes. Interior
//! node `(a, b)`, `a, b ∈ 1..=16`, sits at `(a/17, b/17)` and is unknown
//! `p = (a−1) + 16(b−1)`. The log-permeability lives on the interior nodes and
//! each element uses `exp` of the mean of `k` over its interior corners.
//!
//! The sampled coordinates are truncated Karhunen–Loève coefficients `θ`
//! with `k = U L^{1/2} θ`, so the prior on `θ` is standard normal.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmrf::sq_exp_cov_2d;
use crate::linalg::BandedCholesky;
use crate::samplers::draw_normals;
use crate::target::{LikelihoodSplit, Target};

/// Interior nodes per side.
pub const GRID: usize = 16;
/// Number of unknowns.
pub const N_U: usize = GRID * GRID;
const ELEMS: usize = GRID + 1;

/// Q1 stiffness of a square element with unit coefficient, corners ordered
/// counter-clockwise from the lower left. Independent of the mesh width in 2D.
const K_REF: [[f64; 4]; 4] = [
    [4.0 / 6.0, -1.0 / 6.0, -2.0 / 6.0, -1.0 / 6.0],
    [-1.0 / 6.0, 4.0 / 6.0, -1.0 / 6.0, -2.0 / 6.0],
    [-2.0 / 6.0, -1.0 / 6.0, 4.0 / 6.0, -1.0 / 6.0],
    [-1.0 / 6.0, -2.0 / 6.0, -1.0 / 6.0, 4.0 / 6.0],
];

/// Unknown index of node `(a, b)`, or `None` on the boundary.
fn dof(a: usize, b: usize) -> Option<usize> {
    ((1..=GRID).contains(&a) && (1..=GRID).contains(&b)).then(|| (a - 1) + GRID * (b - 1))
}

/// Corner unknowns of element `(ea, eb)`, counter-clockwise.
fn element_dofs(ea: usize, eb: usize) -> [Option<usize>; 4] {
    [dof(ea, eb), dof(ea + 1, eb), dof(ea + 1, eb + 1), dof(ea, eb + 1)]
}

/// Coordinates of the unknowns in index order.
pub fn interior_points() -> Vec<(f64, f64)> {
    let h = 1.0 / ELEMS as f64;
    (0..N_U)
        .map(|p| (((p % GRID) + 1) as f64 * h, ((p / GRID) + 1) as f64 * h))
        .collect()
}

/// Unknowns carrying a unit point load: the nodes nearest `(¼, ¼)`,
/// `(¼, ¾)`, `(¾, ¼)` and `(¾, ¾)`.
pub fn source_nodes() -> [usize; 4] {
    let near = |c: f64| (c * ELEMS as f64).round() as usize;
    let (lo, hi) = (near(0.25), near(0.75));
    [
        dof(lo, lo).unwrap(),
        dof(lo, hi).unwrap(),
        dof(hi, lo).unwrap(),
        dof(hi, hi).unwrap(),
    ]
}

pub fn load_vector() -> Vec<f64> {
    let mut g = vec![0.0; N_U];
    for p in source_nodes() {
        g[p] = 1.0;
    }
    g
}

/// Observed unknowns: every other component of `u`.
pub fn default_observations() -> Vec<usize> {
    (0..N_U).step_by(2).collect()
}

/// Element coefficients `κ_e` and the count of interior corners per element.
fn element_kappa(k: &[f64]) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(ELEMS * ELEMS);
    for eb in 0..ELEMS {
        for ea in 0..ELEMS {
            let (mut s, mut c) = (0.0, 0.0);
            for p in element_dofs(ea, eb).into_iter().flatten() {
                s += k[p];
                c += 1.0;
            }
            out.push(((s / c).exp(), c));
        }
    }
    out
}

/// Factored stiffness matrix for one permeability field.
#[derive(Debug, Clone)]
pub struct FemSystem {
    chol: BandedCholesky,
    kappa: Vec<(f64, f64)>,
}

impl FemSystem {
    pub fn assemble(k: &[f64]) -> Result<Self> {
        if k.len() != N_U {
            return Err(Error::DimensionMismatch {
                expected: N_U,
                got: k.len(),
            });
        }
        if let Some(i) = k.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                index: i,
                what: "log-permeability".into(),
            });
        }
        let kappa = element_kappa(k);
        let a = assemble_dense(&kappa);
        let chol = BandedCholesky::factor_with(N_U, GRID + 1, |i, j| a[i * N_U + j])?;
        Ok(Self { chol, kappa })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        self.chol.solve(rhs)
    }

    /// `∂/∂k_c (λᵀ A(k) u)` for every unknown `c`.
    pub fn sensitivity(&self, lambda: &[f64], u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; N_U];
        for eb in 0..ELEMS {
            for ea in 0..ELEMS {
                let (kap, cnt) = self.kappa[ea + ELEMS * eb];
                let d = element_dofs(ea, eb);
                let val = |p: Option<usize>, v: &[f64]| p.map_or(0.0, |p| v[p]);
                let mut form = 0.0;
                for (r, pr) in d.iter().enumerate() {
                    let lr = val(*pr, lambda);
                    if lr == 0.0 {
                        continue;
                    }
                    for (c, pc) in d.iter().enumerate() {
                        form += lr * K_REF[r][c] * val(*pc, u);
                    }
                }
                let share = form * kap / cnt;
                for p in d.into_iter().flatten() {
                    out[p] += share;
                }
            }
        }
        out
    }
}

/// Row-major `N_U × N_U` stiffness matrix.
fn assemble_dense(kappa: &[(f64, f64)]) -> Vec<f64> {
    let mut a = vec![0.0; N_U * N_U];
    for eb in 0..ELEMS {
        for ea in 0..ELEMS {
            let kap = kappa[ea + ELEMS * eb].0;
            let d = element_dofs(ea, eb);
            for r in 0..4 {
                let Some(pr) = d[r] else { continue };
                for c in 0..4 {
                    if let Some(pc) = d[c] {
                        a[pr * N_U + pc] += kap * K_REF[r][c];
                    }
                }
            }
        }
    }
    a
}

/// Stiffness matrix for the log-permeability `k`, as a dense matrix.
pub fn stiffness_matrix(k: &[f64]) -> Result<DMatrix<f64>> {
    if k.len() != N_U {
        return Err(Error::DimensionMismatch {
            expected: N_U,
            got: k.len(),
        });
    }
    Ok(DMatrix::from_row_slice(N_U, N_U, &assemble_dense(&element_kappa(k))))
}

/// Solves `A(exp(k)) u = g`.
pub fn assemble_and_solve(k: &[f64], g: &[f64]) -> Result<Vec<f64>> {
    Ok(FemSystem::assemble(k)?.solve(g))
}

/// Leading eigenpairs of a prior covariance.
#[derive(Debug, Clone)]
pub struct KlBasis {
    /// `N_U × N_θ`, orthonormal columns.
    pub modes: DMatrix<f64>,
    /// Non-increasing, positive.
    pub eigenvalues: Vec<f64>,
    /// Fraction of the trace carried by the retained modes.
    pub retained: f64,
}

fn sorted_eigen(b: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>)> {
    crate::linalg::check_symmetric(b, 1e-10)?;
    let eig = SymmetricEigen::new(b.clone());
    let mut order: Vec<usize> = (0..b.nrows()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let vecs = DMatrix::from_fn(b.nrows(), b.nrows(), |r, c| eig.eigenvectors[(r, order[c])]);
    let vals = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    Ok((vecs, vals))
}

impl KlBasis {
    fn from_sorted(vecs: &DMatrix<f64>, vals: &[f64], rank: usize) -> Result<Self> {
        if rank == 0 || rank > vals.len() || !(vals[rank - 1] > 0.0) {
            return Err(Error::Config(format!(
                "KL rank {rank} must lie in 1..={} and keep only positive eigenvalues",
                vals.len()
            )));
        }
        let total: f64 = vals.iter().sum();
        Ok(Self {
            modes: vecs.columns(0, rank).into_owned(),
            eigenvalues: vals[..rank].to_vec(),
            retained: vals[..rank].iter().sum::<f64>() / total,
        })
    }

    /// Smallest rank retaining `fraction` of the trace.
    pub fn truncate(b: &DMatrix<f64>, fraction: f64) -> Result<Self> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::Config(format!("retained fraction must lie in (0, 1], got {fraction}")));
        }
        let (vecs, vals) = sorted_eigen(b)?;
        let total: f64 = vals.iter().sum();
        let positive = vals.iter().filter(|v| **v > 0.0).count();
        let mut acc = 0.0;
        let mut rank = positive;
        for (i, v) in vals.iter().enumerate() {
            acc += v;
            if acc >= fraction * total * (1.0 - 1e-14) {
                rank = i + 1;
                break;
            }
        }
        Self::from_sorted(&vecs, &vals, rank.min(positive))
    }

    /// The `rank` leading modes.
    pub fn with_rank(b: &DMatrix<f64>, rank: usize) -> Result<Self> {
        let (vecs, vals) = sorted_eigen(b)?;
        Self::from_sorted(&vecs, &vals, rank)
    }

    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `k = U L^{1/2} θ`.
    pub fn k_of_theta(&self, theta: &[f64]) -> Vec<f64> {
        let scaled: Vec<f64> = theta.iter().zip(&self.eigenvalues).map(|(t, l)| t * l.sqrt()).collect();
        (&self.modes * nalgebra::DVector::from_vec(scaled)).data.into()
    }

    /// `θ = L^{-1/2} Uᵀ k`.
    pub fn theta_of_k(&self, k: &[f64]) -> Vec<f64> {
        let proj = self.modes.tr_mul(&nalgebra::DVector::from_column_slice(k));
        proj.iter().zip(&self.eigenvalues).map(|(p, l)| p / l.sqrt()).collect()
    }

    /// `L^{1/2} Uᵀ g`, pulling a `k`-gradient back to `θ`.
    pub fn pull_back(&self, gk: &[f64]) -> Vec<f64> {
        let proj = self.modes.tr_mul(&nalgebra::DVector::from_column_slice(gk));
        proj.iter().zip(&self.eigenvalues).map(|(p, l)| p * l.sqrt()).collect()
    }
}

/// Prior correlation lengths and KL rank of a benchmark configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdeSetup {
    pub ell_s: f64,
    pub ell_t: f64,
    /// Fixed KL rank; when absent the rank comes from `fraction`.
    pub n_theta: Option<usize>,
    pub fraction: f64,
    pub noise_sd: f64,
}

impl PdeSetup {
    /// Long correlation lengths, 30 KL modes.
    pub fn setup1() -> Self {
        Self {
            ell_s: 0.4,
            ell_t: 0.8,
            n_theta: Some(30),
            fraction: 0.95,
            noise_sd: 0.1,
        }
    }

    /// Short correlation lengths, 136 KL modes.
    pub fn setup2() -> Self {
        Self {
            ell_s: 0.2,
            ell_t: 0.1,
            n_theta: Some(136),
            fraction: 0.95,
            noise_sd: 0.1,
        }
    }

    pub fn by_index(i: u32) -> Result<Self> {
        match i {
            1 => Ok(Self::setup1()),
            2 => Ok(Self::setup2()),
            _ => Err(Error::Config(format!("unknown PDE setup {i}; expected 1 or 2"))),
        }
    }

    pub fn prior_covariance(&self) -> DMatrix<f64> {
        sq_exp_cov_2d(&interior_points(), self.ell_s, self.ell_t)
    }

    pub fn basis(&self) -> Result<KlBasis> {
        let b = self.prior_covariance();
        match self.n_theta {
            Some(r) => KlBasis::with_rank(&b, r),
            None => KlBasis::truncate(&b, self.fraction),
        }
    }
}

/// Posterior over KL coefficients:
/// `log π(θ) = −½‖θ‖² − ½‖(H u(k(θ)) − y)/σ‖²`.
#[derive(Debug, Clone)]
pub struct PdeModel {
    basis: KlBasis,
    load: Vec<f64>,
    obs: Vec<usize>,
    noise_sd: f64,
    y: Vec<f64>,
}

/// Synthetic data together with the field that generated it.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeData {
    pub k_true: Vec<f64>,
    /// Projection of `k_true` onto the retained modes.
    pub theta_true: Vec<f64>,
    pub y: Vec<f64>,
    pub seed: u64,
}

impl PdeModel {
    pub fn new(basis: KlBasis, obs: Vec<usize>, noise_sd: f64, y: Vec<f64>) -> Result<Self> {
        if obs.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: obs.len(),
                got: y.len(),
            });
        }
        if let Some(&bad) = obs.iter().find(|&&p| p >= N_U) {
            return Err(Error::Config(format!("observation index {bad} outside the grid")));
        }
        if !(noise_sd > 0.0) {
            return Err(Error::Config(format!("noise standard deviation must be positive, got {noise_sd}")));
        }
        if basis.modes.nrows() != N_U {
            return Err(Error::DimensionMismatch {
                expected: N_U,
                got: basis.modes.nrows(),
            });
        }
        Ok(Self {
            basis,
            load: load_vector(),
            obs,
            noise_sd,
            y,
        })
    }

    /// Model for `setup` with data `y` on the default observation nodes.
    pub fn from_setup(setup: &PdeSetup, y: Vec<f64>) -> Result<Self> {
        Self::new(setup.basis()?, default_observations(), setup.noise_sd, y)
    }

    pub fn basis(&self) -> &KlBasis {
        &self.basis
    }

    pub fn observations(&self) -> &[usize] {
        &self.obs
    }

    pub fn data(&self) -> &[f64] {
        &self.y
    }

    pub fn noise_sd(&self) -> f64 {
        self.noise_sd
    }

    pub fn n_theta(&self) -> usize {
        self.basis.rank()
    }

    fn check(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.n_theta() {
            return Err(Error::DimensionMismatch {
                expected: self.n_theta(),
                got: theta.len(),
            });
        }
        Ok(())
    }

    /// `u(exp(k(θ)))`.
    pub fn forward(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.check(theta)?;
        assemble_and_solve(&self.basis.k_of_theta(theta), &self.load)
    }

    /// `H u`.
    pub fn observe(&self, u: &[f64]) -> Vec<f64> {
        self.obs.iter().map(|&p| u[p]).collect()
    }

    fn misfit(&self, u: &[f64]) -> f64 {
        let s2 = self.noise_sd * self.noise_sd;
        self.obs
            .iter()
            .zip(&self.y)
            .map(|(&p, y)| (u[p] - y).powi(2))
            .sum::<f64>()
            / (2.0 * s2)
    }

    pub fn log_likelihood_theta(&self, theta: &[f64]) -> Result<f64> {
        Ok(-self.misfit(&self.forward(theta)?))
    }

    pub fn log_posterior_theta(&self, theta: &[f64]) -> Result<f64> {
        let prior = -0.5 * theta.iter().map(|t| t * t).sum::<f64>();
        Ok(prior + self.log_likelihood_theta(theta)?)
    }

    /// Value and adjoint gradient.
    pub fn log_posterior_and_grad(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check(theta)?;
        let k = self.basis.k_of_theta(theta);
        let sys = FemSystem::assemble(&k)?;
        let u = sys.solve(&self.load);
        let s2 = self.noise_sd * self.noise_sd;
        // A λ = Hᵀ R⁻¹ (Hu − y); then dℓ/dk_c = λᵀ (∂A/∂k_c) u
        let mut rhs = vec![0.0; N_U];
        for (&p, y) in self.obs.iter().zip(&self.y) {
            rhs[p] += (u[p] - y) / s2;
        }
        let lambda = sys.solve(&rhs);
        let gk = sys.sensitivity(&lambda, &u);
        let gl = self.basis.pull_back(&gk);
        let value = -0.5 * theta.iter().map(|t| t * t).sum::<f64>() - self.misfit(&u);
        let grad = theta.iter().zip(gl).map(|(t, g)| -t + g).collect();
        Ok((value, grad))
    }

    pub fn grad_log_posterior_theta(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.log_posterior_and_grad(theta).map(|(_, g)| g)
    }
}

impl Target for PdeModel {
    fn dim(&self) -> usize {
        self.n_theta()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        self.log_posterior_theta(x).unwrap_or(f64::NAN)
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        self.grad_log_posterior_theta(x)
            .unwrap_or_else(|_| vec![f64::NAN; x.len()])
    }

    fn log_density_and_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        self.log_posterior_and_grad(x)
            .unwrap_or_else(|_| (f64::NAN, vec![f64::NAN; x.len()]))
    }
}

impl LikelihoodSplit for PdeModel {
    fn dim(&self) -> usize {
        self.n_theta()
    }

    fn log_likelihood(&self, x: &[f64]) -> f64 {
        self.log_likelihood_theta(x).unwrap_or(f64::NAN)
    }
}

/// Draws `k_true ~ N(0, B)` from the full prior and observes
/// `y = H u(exp(k_true)) + σ ε`. Returns the data and the model built on it.
pub fn simulate_pde_data(setup: &PdeSetup, seed: u64) -> Result<(PdeData, PdeModel)> {
    let b = setup.prior_covariance();
    let (vecs, vals) = sorted_eigen(&b)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = draw_normals(&mut rng, N_U);
    let scaled: Vec<f64> = z.iter().zip(&vals).map(|(z, l)| z * l.sqrt()).collect();
    let k_true: Vec<f64> = (&vecs * nalgebra::DVector::from_vec(scaled)).data.into();
    let u = assemble_and_solve(&k_true, &load_vector())?;
    let obs = default_observations();
    let eps = draw_normals(&mut rng, obs.len());
    let y: Vec<f64> = obs.iter().zip(eps).map(|(&p, e)| u[p] + setup.noise_sd * e).collect();
    let basis = match setup.n_theta {
        Some(r) => KlBasis::from_sorted(&vecs, &vals, r)?,
        None => KlBasis::truncate(&b, setup.fraction)?,
    };
    let theta_true = basis.theta_of_k(&k_true);
    let model = PdeModel::new(basis, obs, setup.noise_sd, y.clone())?;
    Ok((
        PdeData {
            k_true,
            theta_true,
            y,
            seed,
        },
        model,
    ))
}

/// Writes a field over the interior nodes as a `16 × 16` CSV grid, one row
/// per `b` (vertical index).
pub fn write_grid_csv<W: std::io::Write>(mut w: W, field: &[f64]) -> Result<()> {
    if field.len() != N_U {
        return Err(Error::DimensionMismatch {
            expected: N_U,
            got: field.len(),
        });
    }
    for row in field.chunks(GRID) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

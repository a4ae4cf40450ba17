//! MCMC kernels: (preconditioned) MALA, MALA-within-Gibbs sweeps and pCN.
//!
//! Random numbers are drawn from one stream per chain in a fixed order: for
//! every block update the block's standard normals `ξ` first, then the
//! acceptance uniform `U`. A full MALA step is a single block holding every
//! coordinate, so a one-block sweep consumes exactly the same draws.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::partition::BlockPartition;
use crate::target::{LikelihoodSplit, Preconditioner, Target};

pub type ChainRng = ChaCha8Rng;

/// Seeded stream `stream` of the generator family `seed`.
pub fn chain_rng(seed: u64, stream: u64) -> ChainRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Current iterate with cached log-density and gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub x: Vec<f64>,
    pub log_density: f64,
    pub grad: Vec<f64>,
    pub sweep: usize,
}

impl ChainState {
    pub fn new<T: Target + ?Sized>(target: &T, x: Vec<f64>) -> Result<Self> {
        if x.len() != target.dim() {
            return Err(Error::DimensionMismatch {
                expected: target.dim(),
                got: x.len(),
            });
        }
        let (log_density, grad) = target.log_density_and_grad(&x);
        if !log_density.is_finite() {
            return Err(Error::NonFinite {
                index: 0,
                what: "log-density at the initial state".into(),
            });
        }
        Ok(Self {
            x,
            log_density,
            grad,
            sweep: 0,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockOutcome {
    pub proposed: bool,
    pub alpha: f64,
    pub accepted: bool,
    /// Proposal hit a non-finite log-density or gradient and was rejected.
    pub non_finite: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SweepRecord {
    pub blocks: Vec<BlockOutcome>,
    /// Target (log-density + gradient) evaluations spent in this sweep.
    pub evaluations: usize,
}

impl SweepRecord {
    pub fn mean_alpha(&self) -> f64 {
        self.blocks.iter().map(|b| b.alpha).sum::<f64>() / self.blocks.len().max(1) as f64
    }

    pub fn n_accepted(&self) -> usize {
        self.blocks.iter().filter(|b| b.accepted).count()
    }
}

pub fn draw_normals<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// One Metropolis-adjusted Langevin update of the coordinates in `block`,
/// driven by the supplied noise `xi` and uniform `u`.
///
/// With metric `G` (identity when `precond` is `None`) the proposal is
/// `x_b + τ G⁻¹ v_b(x) + √(2τ) G^{-1/2} ξ` and the Hastings correction uses the
/// `G`-weighted residual norms of the forward and reverse moves.
pub fn block_update<T: Target + ?Sized>(
    target: &T,
    block: &[usize],
    state: &mut ChainState,
    tau: f64,
    precond: Option<&Preconditioner>,
    xi: &[f64],
    u: f64,
) -> BlockOutcome {
    let q = block.len();
    let v: Vec<f64> = block.iter().map(|&i| state.grad[i]).collect();
    let (drift, noise) = match precond {
        Some(p) => (p.drift(&v), p.noise(xi)),
        None => (v, xi.to_vec()),
    };
    let s = (2.0 * tau).sqrt();
    let mut proposal = state.x.clone();
    for k in 0..q {
        let i = block[k];
        proposal[i] = state.x[i] + tau * drift[k] + s * noise[k];
    }
    let (lp_new, grad_new) = target.log_density_and_grad(&proposal);
    if !lp_new.is_finite() || grad_new.iter().any(|g| !g.is_finite()) {
        return BlockOutcome {
            proposed: true,
            alpha: 0.0,
            accepted: false,
            non_finite: true,
        };
    }

    let v_new: Vec<f64> = block.iter().map(|&i| grad_new[i]).collect();
    let drift_new = match precond {
        Some(p) => p.drift(&v_new),
        None => v_new,
    };
    let fwd: Vec<f64> = (0..q)
        .map(|k| proposal[block[k]] - state.x[block[k]] - tau * drift[k])
        .collect();
    let rev: Vec<f64> = (0..q)
        .map(|k| state.x[block[k]] - proposal[block[k]] - tau * drift_new[k])
        .collect();
    let (fwd2, rev2) = match precond {
        Some(p) => (p.weighted_sq_norm(&fwd), p.weighted_sq_norm(&rev)),
        None => (sq(&fwd), sq(&rev)),
    };
    let log_ratio = lp_new - state.log_density - rev2 / (4.0 * tau) + fwd2 / (4.0 * tau);
    let alpha = if log_ratio.is_nan() { 0.0 } else { log_ratio.min(0.0).exp() };
    let accepted = u < alpha;
    if accepted {
        state.x = proposal;
        state.log_density = lp_new;
        state.grad = grad_new;
    }
    BlockOutcome {
        proposed: true,
        alpha,
        accepted,
        non_finite: false,
    }
}

fn sq(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum()
}

/// Full-dimensional MALA step (simplified manifold MALA when `precond` is set).
pub fn mala_step<T: Target + ?Sized, R: Rng + ?Sized>(
    target: &T,
    state: &mut ChainState,
    tau: f64,
    precond: Option<&Preconditioner>,
    rng: &mut R,
) -> SweepRecord {
    let block: Vec<usize> = (0..state.x.len()).collect();
    let xi = draw_normals(rng, block.len());
    let u: f64 = rng.random();
    let out = block_update(target, &block, state, tau, precond, &xi, u);
    state.sweep += 1;
    SweepRecord {
        blocks: vec![out],
        evaluations: 1,
    }
}

/// Per-block metrics: the diagonal sub-blocks `G_jj` of a global metric.
#[derive(Debug, Clone)]
pub struct BlockMetrics(Vec<Preconditioner>);

impl BlockMetrics {
    pub fn restrict(global: &Preconditioner, part: &BlockPartition) -> Result<Self> {
        if global.dim() != part.dim() {
            return Err(Error::DimensionMismatch {
                expected: part.dim(),
                got: global.dim(),
            });
        }
        part.blocks()
            .iter()
            .map(|b| global.restrict(b))
            .collect::<Result<Vec<_>>>()
            .map(BlockMetrics)
    }

    pub fn get(&self, j: usize) -> &Preconditioner {
        &self.0[j]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// One systematic-scan MALA-within-Gibbs sweep over the blocks of `part`.
pub fn mwg_sweep<T: Target + ?Sized, R: Rng + ?Sized>(
    target: &T,
    part: &BlockPartition,
    state: &mut ChainState,
    tau: f64,
    rng: &mut R,
) -> SweepRecord {
    mwg_sweep_with(target, part, state, tau, None, rng)
}

/// MALA-within-Gibbs sweep; with `metrics`, block `j` is preconditioned by
/// its own diagonal metric block.
pub fn mwg_sweep_with<T: Target + ?Sized, R: Rng + ?Sized>(
    target: &T,
    part: &BlockPartition,
    state: &mut ChainState,
    tau: f64,
    metrics: Option<&BlockMetrics>,
    rng: &mut R,
) -> SweepRecord {
    let mut rec = SweepRecord {
        blocks: Vec::with_capacity(part.n_blocks()),
        evaluations: 0,
    };
    for (j, block) in part.blocks().iter().enumerate() {
        let xi = draw_normals(rng, block.len());
        let u: f64 = rng.random();
        let pre = metrics.map(|m| m.get(j));
        rec.blocks.push(block_update(target, block, state, tau, pre, &xi, u));
        rec.evaluations += 1;
    }
    state.sweep += 1;
    rec
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcnState {
    pub x: Vec<f64>,
    pub log_likelihood: f64,
    pub step: usize,
}

impl PcnState {
    pub fn new<L: LikelihoodSplit + ?Sized>(lik: &L, x: Vec<f64>) -> Result<Self> {
        if x.len() != lik.dim() {
            return Err(Error::DimensionMismatch {
                expected: lik.dim(),
                got: x.len(),
            });
        }
        let log_likelihood = lik.log_likelihood(&x);
        if !log_likelihood.is_finite() {
            return Err(Error::NonFinite {
                index: 0,
                what: "log-likelihood at the initial state".into(),
            });
        }
        Ok(Self {
            x,
            log_likelihood,
            step: 0,
        })
    }
}

/// Preconditioned Crank–Nicolson step against a standard normal reference:
/// `x̃ = √(1−β²) x + β ξ`, accepted with `1 ∧ exp(ℓ(x̃) − ℓ(x))`.
pub fn pcn_step<L: LikelihoodSplit + ?Sized, R: Rng + ?Sized>(
    lik: &L,
    state: &mut PcnState,
    beta: f64,
    rng: &mut R,
) -> SweepRecord {
    let xi = draw_normals(rng, state.x.len());
    let u: f64 = rng.random();
    let c = (1.0 - beta * beta).sqrt();
    let proposal: Vec<f64> = state.x.iter().zip(&xi).map(|(x, e)| c * x + beta * e).collect();
    let ll = lik.log_likelihood(&proposal);
    let out = if !ll.is_finite() {
        BlockOutcome {
            proposed: true,
            alpha: 0.0,
            accepted: false,
            non_finite: true,
        }
    } else {
        let alpha = (ll - state.log_likelihood).min(0.0).exp();
        let accepted = u < alpha;
        if accepted {
            state.x = proposal;
            state.log_likelihood = ll;
        }
        BlockOutcome {
            proposed: true,
            alpha,
            accepted,
            non_finite: false,
        }
    };
    state.step += 1;
    SweepRecord {
        blocks: vec![out],
        evaluations: 1,
    }
}

/// Gradient-based kernel configuration for [`run_chain`].
#[derive(Debug, Clone)]
pub enum GradientKernel {
    Mala {
        tau: f64,
        precond: Option<Preconditioner>,
    },
    Mwg {
        part: BlockPartition,
        tau: f64,
        metrics: Option<BlockMetrics>,
    },
}

impl GradientKernel {
    pub fn n_blocks(&self) -> usize {
        match self {
            GradientKernel::Mala { .. } => 1,
            GradientKernel::Mwg { part, .. } => part.n_blocks(),
        }
    }

    pub fn tau(&self) -> f64 {
        match self {
            GradientKernel::Mala { tau, .. } | GradientKernel::Mwg { tau, .. } => *tau,
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        let tau = self.tau();
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::Config(format!("step size must be positive, got {tau}")));
        }
        match self {
            GradientKernel::Mala { precond: Some(p), .. } if p.dim() != dim => Err(Error::DimensionMismatch {
                expected: dim,
                got: p.dim(),
            }),
            GradientKernel::Mwg { part, metrics, .. } => {
                if part.dim() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: part.dim(),
                    });
                }
                match metrics {
                    Some(m) if m.len() != part.n_blocks() => Err(Error::DimensionMismatch {
                        expected: part.n_blocks(),
                        got: m.len(),
                    }),
                    _ => Ok(()),
                }
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainOptions {
    pub steps: usize,
    pub seed: u64,
    pub stream: u64,
    pub thin: usize,
}

impl ChainOptions {
    pub fn new(steps: usize, seed: u64) -> Self {
        Self {
            steps,
            seed,
            stream: 0,
            thin: 1,
        }
    }
}

/// Retained states plus acceptance and cost aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput {
    /// States after steps `thin, 2·thin, …`.
    pub rows: Vec<Vec<f64>>,
    pub steps: usize,
    /// Mean acceptance probability over every block proposal.
    pub mean_alpha: f64,
    /// Fraction of block proposals accepted.
    pub acceptance_rate: f64,
    pub block_mean_alpha: Vec<f64>,
    /// Mean block acceptance probability of every step.
    pub alpha_trace: Vec<f64>,
    pub evaluations: usize,
    pub non_finite: usize,
}

impl ChainOutput {
    pub fn dim(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    /// Column `k` as a series.
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[k]).collect()
    }
}

struct Tally {
    alpha_sum: Vec<f64>,
    alpha_trace: Vec<f64>,
    accepted: usize,
    proposals: usize,
    evaluations: usize,
    non_finite: usize,
}

impl Tally {
    fn new(m: usize) -> Self {
        Self {
            alpha_sum: vec![0.0; m],
            alpha_trace: Vec::new(),
            accepted: 0,
            proposals: 0,
            evaluations: 0,
            non_finite: 0,
        }
    }

    fn add(&mut self, rec: &SweepRecord) {
        for (j, b) in rec.blocks.iter().enumerate() {
            self.alpha_sum[j] += b.alpha;
            self.accepted += b.accepted as usize;
            self.non_finite += b.non_finite as usize;
            self.proposals += 1;
        }
        self.alpha_trace.push(rec.mean_alpha());
        self.evaluations += rec.evaluations;
    }

    fn finish(self, rows: Vec<Vec<f64>>, steps: usize, initial_evals: usize) -> ChainOutput {
        let total: f64 = self.alpha_sum.iter().sum();
        let denom = self.proposals.max(1) as f64;
        ChainOutput {
            rows,
            steps,
            mean_alpha: total / denom,
            acceptance_rate: self.accepted as f64 / denom,
            block_mean_alpha: self.alpha_sum.iter().map(|a| a / steps.max(1) as f64).collect(),
            alpha_trace: self.alpha_trace,
            evaluations: self.evaluations + initial_evals,
            non_finite: self.non_finite,
        }
    }
}

fn check_opts(opts: &ChainOptions) -> Result<()> {
    if opts.steps == 0 {
        return Err(Error::Config("at least one step is required".into()));
    }
    if opts.thin == 0 {
        return Err(Error::Config("thinning interval must be at least 1".into()));
    }
    Ok(())
}

/// Runs a gradient-based chain; deterministic given `opts`.
pub fn run_chain<T: Target + ?Sized>(
    kernel: &GradientKernel,
    target: &T,
    init: &[f64],
    opts: &ChainOptions,
) -> Result<ChainOutput> {
    check_opts(opts)?;
    kernel.validate(target.dim())?;
    let mut rng = chain_rng(opts.seed, opts.stream);
    let mut state = ChainState::new(target, init.to_vec())?;
    let mut tally = Tally::new(kernel.n_blocks());
    let mut rows = Vec::with_capacity(opts.steps / opts.thin);
    for k in 1..=opts.steps {
        let rec = match kernel {
            GradientKernel::Mala { tau, precond } => mala_step(target, &mut state, *tau, precond.as_ref(), &mut rng),
            GradientKernel::Mwg { part, tau, metrics } => {
                mwg_sweep_with(target, part, &mut state, *tau, metrics.as_ref(), &mut rng)
            }
        };
        tally.add(&rec);
        if k % opts.thin == 0 {
            rows.push(state.x.clone());
        }
    }
    Ok(tally.finish(rows, opts.steps, 1))
}

/// Runs a pCN chain; deterministic given `opts`.
pub fn run_pcn<L: LikelihoodSplit + ?Sized>(
    lik: &L,
    beta: f64,
    init: &[f64],
    opts: &ChainOptions,
) -> Result<ChainOutput> {
    check_opts(opts)?;
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::Config(format!("pCN beta must lie in (0, 1], got {beta}")));
    }
    let mut rng = chain_rng(opts.seed, opts.stream);
    let mut state = PcnState::new(lik, init.to_vec())?;
    let mut tally = Tally::new(1);
    let mut rows = Vec::with_capacity(opts.steps / opts.thin);
    for k in 1..=opts.steps {
        let rec = pcn_step(lik, &mut state, beta, &mut rng);
        tally.add(&rec);
        if k % opts.thin == 0 {
            rows.push(state.x.clone());
        }
    }
    Ok(tally.finish(rows, opts.steps, 1))
}

//! Experiment configuration and the end-to-end commands behind the CLI.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::concavity::{build_h_from_precision, margin_table, TableConvention, TABLE_ELLS, TABLE_N, TABLE_QS};
use crate::coupling::{fit_contraction, mean_distance_norms, run_replicas, ContractionFit, ScenarioCounts, FIT_K0, FIT_K1_MAX};
use crate::cox::{simulate, CoxModel, CoxParams, CoxWhitened, KroneckerFactor};
use crate::diagnostics::{grid_iact, iact};
use crate::error::{Error, Result};
use crate::gmrf::{exp_kernel_target_1d, GaussianTarget};
use crate::io::{read_chain_csv, read_vector_csv, write_atomic, write_chain_csv, write_json_atomic, write_vector_csv};
use crate::optimize::{hessian_at_map, map_cox, map_pde, MapResult};
use crate::partition::BlockPartition;
use crate::pde::{simulate_pde_data, PdeModel, PdeSetup};
use crate::samplers::{chain_rng, draw_normals, run_chain, run_pcn, BlockMetrics, ChainOptions, ChainOutput, GradientKernel};
use crate::target::{Preconditioner, Target};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Problem {
    /// 1D exponential-kernel Gaussian.
    Gauss1d,
    /// Log-Gaussian Cox process on an L × L grid.
    Cox,
    /// Elliptic inverse problem in KL coordinates.
    Pde,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    /// Full-dimensional MALA (preconditioned by the MAP Hessian for `pde`).
    Mala,
    /// Unpreconditioned MALA-within-Gibbs.
    Mwg,
    /// MALA-within-Gibbs with each block preconditioned by its diagonal block
    /// of the problem metric; a single block gives simplified manifold MALA.
    Mmala,
    /// Preconditioned Crank–Nicolson in whitened coordinates.
    Pcn,
}

impl SamplerKind {
    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::Mala => "mala",
            SamplerKind::Mwg => "mwg",
            SamplerKind::Mmala => "mmala",
            SamplerKind::Pcn => "pcn",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    /// Maximum a posteriori point (the mean for Gaussian targets).
    Map,
    /// Exact draw from the target (gauss1d) or the prior (cox, pde).
    Draw,
    /// Prior mean.
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: Problem,
    pub sampler: SamplerKind,
    /// gauss1d: dimension.
    pub n: usize,
    /// gauss1d: length scale of `exp(-|i-j|/(2ℓ))`.
    pub ell: f64,
    /// cox: grid side L.
    pub side: usize,
    /// cox: tile side d.
    pub tile: usize,
    pub cox: CoxParams,
    /// pde: setup 1 or 2.
    pub setup: u32,
    /// pde: KL rank override.
    pub n_theta: Option<usize>,
    /// pde: choose the KL rank by retained variance instead.
    pub fraction: Option<f64>,
    /// gauss1d / pde: block size.
    pub q: usize,
    pub tau: f64,
    pub beta: f64,
    pub steps: usize,
    pub thin: usize,
    /// Retained rows dropped before computing IACT.
    pub burnin: usize,
    pub seed: u64,
    pub data_seed: u64,
    pub init: InitKind,
    /// couple: replica count and sweeps per replica.
    pub replicas: usize,
    pub sweeps: usize,
    /// sweep-tau grids; empty lists default to the single configured value.
    pub taus: Vec<f64>,
    pub block_sizes: Vec<usize>,
    pub samplers: Vec<SamplerKind>,
    /// Output directory.
    pub output: Option<PathBuf>,
    /// Directory for cached MAP points.
    pub cache_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problem: Problem::Cox,
            sampler: SamplerKind::Mmala,
            n: 64,
            ell: 0.25,
            side: 16,
            tile: 8,
            cox: CoxParams::default(),
            setup: 1,
            n_theta: None,
            fraction: None,
            q: 1,
            tau: 0.5,
            beta: 0.1,
            steps: 10_000,
            thin: 1,
            burnin: 0,
            seed: 1,
            data_seed: 1,
            init: InitKind::Map,
            replicas: 200,
            sweeps: 500,
            taus: Vec::new(),
            block_sizes: Vec::new(),
            samplers: Vec::new(),
            output: None,
            cache_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn pde_setup(&self) -> Result<PdeSetup> {
        let mut s = PdeSetup::by_index(self.setup)?;
        if let Some(f) = self.fraction {
            s.n_theta = None;
            s.fraction = f;
        }
        if let Some(r) = self.n_theta {
            s.n_theta = Some(r);
        }
        Ok(s)
    }

    /// Block size in the sampler's own units: tile side for cox, else `q`.
    pub fn block_size(&self) -> usize {
        match self.problem {
            Problem::Cox => self.tile,
            _ => self.q,
        }
    }

    /// Checks everything that can be checked without building the model.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad(format!("tau must be positive, got {}", self.tau));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return bad(format!("beta must lie in (0, 1], got {}", self.beta));
        }
        if self.steps == 0 || self.thin == 0 {
            return bad("steps and thin must be at least 1".into());
        }
        if self.burnin >= self.steps / self.thin {
            return bad(format!("burnin {} leaves no retained rows", self.burnin));
        }
        if self.taus.iter().any(|t| !(*t > 0.0)) {
            return bad("every tau in the sweep list must be positive".into());
        }
        let sizes: Vec<usize> = if self.block_sizes.is_empty() {
            vec![self.block_size()]
        } else {
            self.block_sizes.clone()
        };
        match self.problem {
            Problem::Gauss1d => {
                if !(self.ell > 0.0) {
                    return bad(format!("ell must be positive, got {}", self.ell));
                }
                if let Some(q) = sizes.iter().find(|q| **q == 0 || !self.n.is_multiple_of(**q)) {
                    return bad(format!("block size {q} does not divide n = {}", self.n));
                }
                if self.sampler == SamplerKind::Pcn || self.samplers.contains(&SamplerKind::Pcn) {
                    return bad("pcn needs a likelihood/prior split; use cox or pde".into());
                }
            }
            Problem::Cox => {
                if let Some(d) = sizes.iter().find(|d| **d == 0 || !self.side.is_multiple_of(**d)) {
                    return bad(format!("tile {d} does not divide L = {}", self.side));
                }
            }
            Problem::Pde => {
                let setup = self.pde_setup()?;
                if let Some(r) = setup.n_theta {
                    if let Some(q) = sizes.iter().find(|q| **q == 0 || r % **q != 0) {
                        return bad(format!("block size {q} does not divide N_theta = {r}"));
                    }
                }
                if let Some(f) = self.fraction {
                    if !(f > 0.0 && f <= 1.0) {
                        return bad(format!("fraction must lie in (0, 1], got {f}"));
                    }
                }
            }
        }
        if self.replicas < 2 && self.problem == Problem::Gauss1d && self.sweeps > 0 {
            // only consulted by `couple`, but reject nonsense early
            return bad("replicas must be at least 2".into());
        }
        Ok(())
    }
}

/// A posterior with its MAP, metric and initial state, independent of the
/// block partition.
pub enum Model {
    Gauss(GaussianTarget),
    Cox(CoxModel),
    Pde(PdeModel),
}

impl Model {
    pub fn target(&self) -> &dyn Target {
        match self {
            Model::Gauss(t) => t,
            Model::Cox(t) => t,
            Model::Pde(t) => t,
        }
    }

    pub fn dim(&self) -> usize {
        self.target().dim()
    }
}

pub struct Prepared {
    pub config: ExperimentConfig,
    pub model: Model,
    pub map: Option<MapResult>,
    /// Metric used by `mmala` (and by `mala` on the PDE problem).
    pub metric: Option<Preconditioner>,
    pub init: Vec<f64>,
}

fn map_cache_path(cfg: &ExperimentConfig) -> Option<PathBuf> {
    let key = match cfg.problem {
        Problem::Gauss1d => return None,
        Problem::Cox => format!("cox_L{}", cfg.side),
        Problem::Pde => {
            let s = cfg.pde_setup().ok()?;
            format!("pde_setup{}_r{}", cfg.setup, s.n_theta.map_or("auto".into(), |r| r.to_string()))
        }
    };
    cfg.cache_dir
        .as_ref()
        .map(|d| d.join(format!("map_{key}_seed{}.csv", cfg.data_seed)))
}

fn cached_map(cfg: &ExperimentConfig, target: &dyn Target, compute: impl FnOnce() -> Result<MapResult>) -> Result<MapResult> {
    let path = map_cache_path(cfg);
    if let Some(p) = path.as_ref().filter(|p| p.exists()) {
        let x = read_vector_csv(std::io::BufReader::new(std::fs::File::open(p)?))?;
        if x.len() == target.dim() {
            let (lp, g) = target.log_density_and_grad(&x);
            let grad_norm = crate::linalg::norm(&g);
            return Ok(MapResult {
                x_map: x,
                log_density: lp,
                grad_norm,
                iterations: 0,
                converged: true,
            });
        }
    }
    let r = compute()?;
    if let Some(p) = path {
        let mut buf = Vec::new();
        write_vector_csv(&mut buf, "x_map", &r.x_map)?;
        write_atomic(&p, &buf)?;
    }
    Ok(r)
}

/// Finite-difference step for the MAP Hessian.
pub const HESSIAN_STEP: f64 = 1e-4;

/// Builds the model, its MAP, the sampler metric and the initial state.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    cfg.validate()?;
    let needs_metric = |s: SamplerKind| s == SamplerKind::Mmala || (cfg.problem == Problem::Pde && s == SamplerKind::Mala);
    let wants_metric = needs_metric(cfg.sampler) || cfg.samplers.iter().any(|s| needs_metric(*s));
    let mut init_rng = chain_rng(cfg.seed, u64::MAX);
    let (model, map, metric, init) = match cfg.problem {
        Problem::Gauss1d => {
            let t = exp_kernel_target_1d(cfg.n, cfg.ell)?;
            let metric = if wants_metric {
                Some(Preconditioner::from_csr(t.precision().clone())?)
            } else {
                None
            };
            let init = match cfg.init {
                InitKind::Map | InitKind::Zero => t.mean().to_vec(),
                InitKind::Draw => t.sample(&mut init_rng),
            };
            (Model::Gauss(t), None, metric, init)
        }
        Problem::Cox => {
            let data = simulate(cfg.side, &cfg.cox, cfg.data_seed)?;
            let m = CoxModel::from_dataset(&data, cfg.cox)?;
            let metric = if wants_metric { Some(m.mmala_preconditioner()?) } else { None };
            let map = match cfg.init {
                InitKind::Map => Some(cached_map(cfg, &m, || map_cox(&m))?),
                _ => None,
            };
            let init = match cfg.init {
                InitKind::Map => map.as_ref().unwrap().x_map.clone(),
                InitKind::Zero => vec![cfg.cox.mu; m.dim()],
                InitKind::Draw => KroneckerFactor::new(cfg.side, &cfg.cox)?.to_field(&draw_normals(&mut init_rng, m.dim())),
            };
            (Model::Cox(m), map, metric, init)
        }
        Problem::Pde => {
            let (_, m) = simulate_pde_data(&cfg.pde_setup()?, cfg.data_seed)?;
            let map = if cfg.init == InitKind::Map || wants_metric {
                Some(cached_map(cfg, &m, || map_pde(&m))?)
            } else {
                None
            };
            let metric = if wants_metric {
                let j = hessian_at_map(&m, &map.as_ref().unwrap().x_map, HESSIAN_STEP)?;
                Some(Preconditioner::from_dense(&j)?)
            } else {
                None
            };
            let init = match cfg.init {
                InitKind::Map => map.as_ref().unwrap().x_map.clone(),
                InitKind::Zero => vec![0.0; m.n_theta()],
                InitKind::Draw => draw_normals(&mut init_rng, m.n_theta()),
            };
            (Model::Pde(m), map, metric, init)
        }
    };
    Ok(Prepared {
        config: cfg.clone(),
        model,
        map,
        metric,
        init,
    })
}

fn partition_for(cfg: &ExperimentConfig, dim: usize, block: usize) -> Result<BlockPartition> {
    match cfg.problem {
        Problem::Cox => BlockPartition::make_tiles_2d(cfg.side, block),
        _ => BlockPartition::make_uniform_1d(dim, block),
    }
}

/// How the sampler's proposal is scaled, recorded in summaries.
fn metric_label(problem: Problem, sampler: SamplerKind) -> &'static str {
    match (problem, sampler) {
        (_, SamplerKind::Mmala) => "block-restricted",
        (Problem::Pde, SamplerKind::Mala) => "full",
        (_, SamplerKind::Pcn) => "prior",
        _ => "identity",
    }
}

/// Runs one chain of `sampler` with the given block size and step.
pub fn run_sampler(p: &Prepared, sampler: SamplerKind, block: usize, tau: f64) -> Result<ChainOutput> {
    let cfg = &p.config;
    let dim = p.model.dim();
    let opts = ChainOptions {
        steps: cfg.steps,
        seed: cfg.seed,
        stream: 0,
        thin: cfg.thin,
    };
    let metric = || {
        p.metric
            .clone()
            .ok_or_else(|| Error::Config(format!("{} needs a metric that was not prepared", sampler.name())))
    };
    let kernel = match sampler {
        SamplerKind::Mala => GradientKernel::Mala {
            tau,
            precond: if cfg.problem == Problem::Pde { Some(metric()?) } else { None },
        },
        SamplerKind::Mwg => GradientKernel::Mwg {
            part: partition_for(cfg, dim, block)?,
            tau,
            metrics: None,
        },
        SamplerKind::Mmala => {
            let part = partition_for(cfg, dim, block)?;
            let metrics = BlockMetrics::restrict(&metric()?, &part)?;
            GradientKernel::Mwg {
                part,
                tau,
                metrics: Some(metrics),
            }
        }
        SamplerKind::Pcn => {
            return match &p.model {
                Model::Gauss(_) => Err(Error::Config("pcn needs a likelihood/prior split".into())),
                Model::Pde(m) => run_pcn(m, cfg.beta, &p.init, &opts),
                Model::Cox(m) => {
                    let wh = CoxWhitened::new(m)?;
                    let w0 = wh.factor().to_white(&p.init);
                    let mut out = run_pcn(&wh, cfg.beta, &w0, &opts)?;
                    for row in out.rows.iter_mut() {
                        *row = wh.factor().to_field(row);
                    }
                    Ok(out)
                }
            };
        }
    };
    run_chain(&kernel, p.model.target(), &p.init, &opts)
}

fn n_blocks_of(cfg: &ExperimentConfig, sampler: SamplerKind, dim: usize, block: usize) -> usize {
    match sampler {
        SamplerKind::Mala | SamplerKind::Pcn => 1,
        _ => match cfg.problem {
            Problem::Cox => (cfg.side / block).pow(2),
            _ => dim / block,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSummary {
    pub config: ExperimentConfig,
    pub sampler: SamplerKind,
    pub metric: &'static str,
    pub dim: usize,
    pub block_size: usize,
    pub n_blocks: usize,
    pub tau: f64,
    pub steps: usize,
    pub rows_used: usize,
    /// Mean block acceptance probability.
    pub acceptance: f64,
    pub acceptance_se: f64,
    pub acceptance_rate: f64,
    /// IACT averaged over coordinates.
    pub iact: f64,
    pub iact_max: f64,
    pub iact_se: f64,
    pub iact_truncated: usize,
    pub ess: f64,
    /// `IACT × blocks` target evaluations per effective sample.
    pub cost_per_ess: f64,
    pub evaluations: usize,
    pub non_finite: usize,
    pub map_grad_norm: Option<f64>,
}

fn mean_se(series: &[f64]) -> f64 {
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let var = series.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    match iact(series) {
        Ok(e) => (var * e.iact / n).sqrt(),
        Err(_) => (var / n).sqrt(),
    }
}

struct ChainIact {
    mean: f64,
    max: f64,
    mean_se: f64,
    truncated: usize,
}

/// Per-coordinate IACT; a coordinate that never moved counts as infinite.
fn chain_iact(rows: &[Vec<f64>]) -> Result<ChainIact> {
    let dim = rows.first().map_or(0, Vec::len);
    if dim == 0 {
        return Err(Error::Config("empty chain".into()));
    }
    let est: Vec<Option<crate::diagnostics::IactEstimate>> = (0..dim)
        .into_par_iter()
        .map(|k| {
            let col: Vec<f64> = rows.iter().map(|r| r[k]).collect();
            match iact(&col) {
                Ok(e) => Ok(Some(e)),
                Err(Error::Degenerate(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let tau = |e: &Option<crate::diagnostics::IactEstimate>| e.as_ref().map_or(f64::INFINITY, |e| e.iact);
    let se = |e: &Option<crate::diagnostics::IactEstimate>| e.as_ref().map_or(f64::INFINITY, |e| e.std_error);
    let n = dim as f64;
    Ok(ChainIact {
        mean: est.iter().map(tau).sum::<f64>() / n,
        max: est.iter().map(tau).fold(f64::NEG_INFINITY, f64::max),
        mean_se: est.iter().map(se).sum::<f64>() / n,
        truncated: est.iter().filter(|e| e.as_ref().is_none_or(|e| e.truncated)).count(),
    })
}

/// Summarizes a finished chain.
pub fn summarize(p: &Prepared, sampler: SamplerKind, block: usize, tau: f64, out: &ChainOutput) -> Result<SampleSummary> {
    let cfg = &p.config;
    let rows = &out.rows[cfg.burnin.min(out.rows.len())..];
    let g = chain_iact(rows)?;
    let n_blocks = n_blocks_of(cfg, sampler, p.model.dim(), block);
    Ok(SampleSummary {
        config: cfg.clone(),
        sampler,
        metric: metric_label(cfg.problem, sampler),
        dim: p.model.dim(),
        block_size: block,
        n_blocks,
        tau,
        steps: out.steps,
        rows_used: rows.len(),
        acceptance: out.mean_alpha,
        acceptance_se: mean_se(&out.alpha_trace),
        acceptance_rate: out.acceptance_rate,
        iact: g.mean,
        iact_max: g.max,
        iact_se: g.mean_se,
        iact_truncated: g.truncated,
        ess: crate::diagnostics::ess(rows.len(), g.mean),
        cost_per_ess: crate::diagnostics::cost_per_effective_sample(g.mean, n_blocks, 1.0),
        evaluations: out.evaluations,
        non_finite: out.non_finite,
        map_grad_norm: p.map.as_ref().map(|m| m.grad_norm),
    })
}

pub fn coordinate_names(problem: Problem, side: usize, dim: usize) -> Vec<String> {
    match problem {
        Problem::Gauss1d => (0..dim).map(|i| format!("x{i}")).collect(),
        Problem::Cox => (0..dim).map(|k| format!("x_{}_{}", k % side, k / side)).collect(),
        Problem::Pde => (0..dim).map(|i| format!("theta{i}")).collect(),
    }
}

/// Runs the configured sampler; writes `chain.csv` and `summary.json` when an
/// output directory is set.
pub fn cmd_sample(cfg: &ExperimentConfig) -> Result<SampleSummary> {
    let p = prepare(cfg)?;
    let block = cfg.block_size();
    let out = run_sampler(&p, cfg.sampler, block, cfg.tau)?;
    let summary = summarize(&p, cfg.sampler, block, cfg.tau, &out)?;
    if let Some(dir) = &cfg.output {
        let names = coordinate_names(cfg.problem, cfg.side, p.model.dim());
        let mut buf = Vec::new();
        write_chain_csv(
            &mut buf,
            &names,
            &out.rows,
            &[
                ("acc_rate", format!("{}", out.acceptance_rate)),
                ("mean_alpha", format!("{}", out.mean_alpha)),
                ("n_evals", out.evaluations.to_string()),
            ],
        )?;
        write_atomic(&dir.join("chain.csv"), &buf)?;
        write_json_atomic(&dir.join("summary.json"), &summary)?;
    }
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub sampler: SamplerKind,
    pub block_size: usize,
    pub tau: f64,
    pub acceptance: f64,
    pub acceptance_se: f64,
    pub iact: f64,
    pub iact_se: f64,
    pub cost_per_ess: f64,
}

/// Grid of samplers × block sizes × step sizes, one chain per cell, run in
/// parallel. Every cell uses the configured seed.
pub fn cmd_sweep_tau(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let taus = if cfg.taus.is_empty() { vec![cfg.tau] } else { cfg.taus.clone() };
    let sizes = if cfg.block_sizes.is_empty() {
        vec![cfg.block_size()]
    } else {
        cfg.block_sizes.clone()
    };
    let samplers = if cfg.samplers.is_empty() {
        vec![cfg.sampler]
    } else {
        cfg.samplers.clone()
    };
    let p = prepare(cfg)?;
    let mut cells = Vec::new();
    for &s in &samplers {
        let blocks: &[usize] = if matches!(s, SamplerKind::Mala | SamplerKind::Pcn) {
            &sizes[..1]
        } else {
            &sizes
        };
        for &b in blocks {
            for &t in &taus {
                cells.push((s, b, t));
            }
        }
    }
    let rows: Vec<SweepRow> = cells
        .par_iter()
        .map(|&(s, b, t)| {
            let out = run_sampler(&p, s, b, t)?;
            let sm = summarize(&p, s, b, t, &out)?;
            Ok(SweepRow {
                sampler: s,
                block_size: if matches!(s, SamplerKind::Mala | SamplerKind::Pcn) {
                    match cfg.problem {
                        Problem::Cox => cfg.side,
                        _ => p.model.dim(),
                    }
                } else {
                    b
                },
                tau: t,
                acceptance: sm.acceptance,
                acceptance_se: sm.acceptance_se,
                iact: sm.iact,
                iact_se: sm.iact_se,
                cost_per_ess: sm.cost_per_ess,
            })
        })
        .collect::<Result<_>>()?;
    if let Some(dir) = &cfg.output {
        write_atomic(&dir.join("sweep_tau.csv"), sweep_csv(&rows).as_bytes())?;
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("sampler,block_size,tau,acceptance,acceptance_se,iact,iact_se,cost_per_ess\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            r.sampler.name(),
            r.block_size,
            r.tau,
            r.acceptance,
            r.acceptance_se,
            r.iact,
            r.iact_se,
            r.cost_per_ess
        ));
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoupleSummary {
    pub config: ExperimentConfig,
    pub margin: f64,
    pub fit: ContractionFit,
    pub scenarios: ScenarioCounts,
}

/// Coupled MALA-within-Gibbs replicas on the 1D exponential-kernel Gaussian,
/// each started from two independent exact draws.
pub fn cmd_couple(cfg: &ExperimentConfig) -> Result<CoupleSummary> {
    cfg.validate()?;
    if cfg.problem != Problem::Gauss1d {
        return Err(Error::Config("coupling experiments run on the gauss1d problem".into()));
    }
    let t = exp_kernel_target_1d(cfg.n, cfg.ell)?;
    let part = BlockPartition::make_uniform_1d(cfg.n, cfg.q)?;
    let margin = build_h_from_precision(&t.precision_dense(), &part)?.margin;
    let (traces, scenarios) = run_replicas(&t, &part, cfg.tau, cfg.sweeps, cfg.replicas, cfg.seed, |rng| {
        (t.sample(rng), t.sample(rng))
    })?;
    let fit = fit_contraction(&traces, margin, cfg.tau, FIT_K0, FIT_K1_MAX)?;
    let summary = CoupleSummary {
        config: cfg.clone(),
        margin,
        fit,
        scenarios,
    };
    if let Some(dir) = &cfg.output {
        let m = part.n_blocks();
        let r = traces.len() as f64;
        let mean = crate::coupling::DistanceTrace {
            distances: (0..traces[0].len())
                .map(|k| (0..m).map(|j| traces.iter().map(|tr| tr.distances[k][j]).sum::<f64>() / r).collect())
                .collect(),
        };
        debug_assert_eq!(mean.norms(), mean_distance_norms(&traces)?);
        let mut buf = Vec::new();
        mean.write_csv(&mut buf)?;
        write_atomic(&dir.join("coupling_trace.csv"), &buf)?;
        write_json_atomic(&dir.join("coupling_fit.json"), &summary)?;
    }
    Ok(summary)
}

/// Table of `λ_min(−H)` over the standard `(ℓ, q)` grid as CSV.
pub fn cmd_concavity(n: usize, convention: TableConvention) -> Result<String> {
    let table = margin_table(n, &TABLE_ELLS, &TABLE_QS, convention)?;
    let mut s = format!("# convention={}\nell,q,kernel_ell,block_size,margin,concave\n", convention.name());
    for (ell, row) in TABLE_ELLS.iter().zip(&table) {
        for (q, m) in TABLE_QS.iter().zip(row) {
            let (k, b) = convention.resolve(*ell, *q);
            s.push_str(&format!("{ell},{q},{k},{b},{m:.6},{}\n", *m > 0.0));
        }
    }
    Ok(s)
}

/// Default size of the concavity table.
pub const CONCAVITY_N: usize = TABLE_N;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IactReport {
    pub column: Option<usize>,
    pub n: usize,
    pub iact: f64,
    pub iact_max: f64,
    pub window: Option<usize>,
    pub ess: f64,
}

/// IACT of one column of a chain CSV, or the mean over all columns.
pub fn cmd_iact(path: &Path, col: Option<usize>, burnin: usize) -> Result<IactReport> {
    let (names, rows) = read_chain_csv(std::io::BufReader::new(std::fs::File::open(path)?))?;
    let rows = &rows[burnin.min(rows.len())..];
    match col {
        Some(k) => {
            if k >= names.len() {
                return Err(Error::Config(format!("column {k} out of range (have {})", names.len())));
            }
            let series: Vec<f64> = rows.iter().map(|r| r[k]).collect();
            let e = iact(&series)?;
            Ok(IactReport {
                column: Some(k),
                n: series.len(),
                iact: e.iact,
                iact_max: e.iact,
                window: Some(e.window),
                ess: crate::diagnostics::ess(series.len(), e.iact),
            })
        }
        None => {
            let g = grid_iact(rows)?;
            Ok(IactReport {
                column: None,
                n: rows.len(),
                iact: g.mean,
                iact_max: g.max,
                window: None,
                ess: crate::diagnostics::ess(rows.len(), g.mean),
            })
        }
    }
}

/// MAP point of the configured posterior; written to `map.csv` when an
/// output directory is set.
pub fn cmd_map(cfg: &ExperimentConfig) -> Result<MapResult> {
    let mut c = cfg.clone();
    c.init = InitKind::Map;
    c.sampler = SamplerKind::Mwg;
    c.samplers.clear();
    let p = prepare(&c)?;
    let r = match p.map {
        Some(m) => m,
        None => {
            let x = p.init.clone();
            let (lp, g) = p.model.target().log_density_and_grad(&x);
            MapResult {
                grad_norm: crate::linalg::norm(&g),
                x_map: x,
                log_density: lp,
                iterations: 0,
                converged: true,
            }
        }
    };
    if let Some(dir) = &cfg.output {
        let mut buf = Vec::new();
        write_vector_csv(&mut buf, "x_map", &r.x_map)?;
        write_atomic(&dir.join("map.csv"), &buf)?;
    }
    Ok(r)
}

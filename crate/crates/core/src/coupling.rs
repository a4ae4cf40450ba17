//! Pairs of MALA-within-Gibbs chains driven by the same noise `ξ_j` and the
//! same acceptance uniform `U_j`, and geometric fits of their block distances.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::partition::BlockPartition;
use crate::samplers::{block_update, chain_rng, draw_normals, ChainRng, ChainState};
use crate::target::Target;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    BothAccept,
    BothReject,
    AcceptXOnly,
    AcceptZOnly,
}

impl Scenario {
    fn of(x: bool, z: bool) -> Self {
        match (x, z) {
            (true, true) => Scenario::BothAccept,
            (false, false) => Scenario::BothReject,
            (true, false) => Scenario::AcceptXOnly,
            (false, true) => Scenario::AcceptZOnly,
        }
    }

    #[cfg(test)]
    fn slot(self) -> usize {
        self as usize
    }
}

/// Tallies of coupled block outcomes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ScenarioCounts {
    pub both_accept: u64,
    pub both_reject: u64,
    pub accept_x_only: u64,
    pub accept_z_only: u64,
}

impl ScenarioCounts {
    pub fn add(&mut self, s: Scenario) {
        match s {
            Scenario::BothAccept => self.both_accept += 1,
            Scenario::BothReject => self.both_reject += 1,
            Scenario::AcceptXOnly => self.accept_x_only += 1,
            Scenario::AcceptZOnly => self.accept_z_only += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.both_accept + self.both_reject + self.accept_x_only + self.accept_z_only
    }

    fn merge(mut self, o: Self) -> Self {
        self.both_accept += o.both_accept;
        self.both_reject += o.both_reject;
        self.accept_x_only += o.accept_x_only;
        self.accept_z_only += o.accept_z_only;
        self
    }
}

/// Two chains on the same target, partition and step size.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledPair {
    pub x: ChainState,
    pub z: ChainState,
}

impl CoupledPair {
    pub fn new<T: Target + ?Sized>(target: &T, x0: Vec<f64>, z0: Vec<f64>) -> Result<Self> {
        Ok(Self {
            x: ChainState::new(target, x0)?,
            z: ChainState::new(target, z0)?,
        })
    }

    /// `(‖x_j − z_j‖)_j`.
    pub fn block_distances(&self, part: &BlockPartition) -> Vec<f64> {
        part.blocks()
            .iter()
            .map(|b| b.iter().map(|&i| (self.x.x[i] - self.z.x[i]).powi(2)).sum::<f64>().sqrt())
            .collect()
    }
}

/// One coupled sweep: per block, one `ξ_j` and one `U_j` serve both chains,
/// so each chain accepts iff `U_j < α`.
pub fn coupled_sweep<T: Target + ?Sized, R: Rng + ?Sized>(
    target: &T,
    part: &BlockPartition,
    pair: &mut CoupledPair,
    tau: f64,
    rng: &mut R,
) -> Vec<Scenario> {
    let mut tags = Vec::with_capacity(part.n_blocks());
    for block in part.blocks() {
        let xi = draw_normals(rng, block.len());
        let u: f64 = rng.random();
        let ox = block_update(target, block, &mut pair.x, tau, None, &xi, u);
        let oz = block_update(target, block, &mut pair.z, tau, None, &xi, u);
        tags.push(Scenario::of(ox.accepted, oz.accepted));
    }
    pair.x.sweep += 1;
    pair.z.sweep += 1;
    tags
}

/// Block distances `D_0, …, D_K` of one coupled run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceTrace {
    pub distances: Vec<Vec<f64>>,
}

impl DistanceTrace {
    pub fn len(&self) -> usize {
        self.distances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distances.is_empty()
    }

    pub fn n_blocks(&self) -> usize {
        self.distances.first().map_or(0, Vec::len)
    }

    pub fn norms(&self) -> Vec<f64> {
        self.distances.iter().map(|d| l2(d)).collect()
    }

    /// Columns `sweep, block_1, …, block_m, l2_norm`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let m = self.n_blocks();
        let mut head = vec!["sweep".to_string()];
        head.extend((1..=m).map(|j| format!("block_{j}")));
        head.push("l2_norm".into());
        writeln!(w, "{}", head.join(","))?;
        for (k, d) in self.distances.iter().enumerate() {
            let mut row = vec![k.to_string()];
            row.extend(d.iter().map(|v| format!("{v:.16e}")));
            row.push(format!("{:.16e}", l2(d)));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Runs `sweeps` coupled sweeps from `pair`, recording distances.
pub fn run_coupled<T: Target + ?Sized>(
    target: &T,
    part: &BlockPartition,
    pair: &mut CoupledPair,
    tau: f64,
    sweeps: usize,
    rng: &mut ChainRng,
) -> (DistanceTrace, ScenarioCounts) {
    let mut distances = Vec::with_capacity(sweeps + 1);
    let mut counts = ScenarioCounts::default();
    distances.push(pair.block_distances(part));
    for _ in 0..sweeps {
        for s in coupled_sweep(target, part, pair, tau, rng) {
            counts.add(s);
        }
        distances.push(pair.block_distances(part));
    }
    (DistanceTrace { distances }, counts)
}

/// Independent coupled replicas; replica `r` uses stream `r` of `seed` both
/// for its initial pair (through `init`) and for its sweeps.
pub fn run_replicas<T, F>(
    target: &T,
    part: &BlockPartition,
    tau: f64,
    sweeps: usize,
    replicas: usize,
    seed: u64,
    init: F,
) -> Result<(Vec<DistanceTrace>, ScenarioCounts)>
where
    T: Target + ?Sized,
    F: Fn(&mut ChainRng) -> (Vec<f64>, Vec<f64>) + Sync,
{
    if !(tau > 0.0) {
        return Err(Error::Config(format!("step size must be positive, got {tau}")));
    }
    let runs: Vec<(DistanceTrace, ScenarioCounts)> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = chain_rng(seed, r as u64);
            let (x0, z0) = init(&mut rng);
            let mut pair = CoupledPair::new(target, x0, z0)?;
            Ok(run_coupled(target, part, &mut pair, tau, sweeps, &mut rng))
        })
        .collect::<Result<_>>()?;
    let counts = runs.iter().fold(ScenarioCounts::default(), |a, r| a.merge(r.1));
    Ok((runs.into_iter().map(|r| r.0).collect(), counts))
}

/// Start of the default fit window.
pub const FIT_K0: usize = 5;
/// Largest end of the default fit window.
pub const FIT_K1_MAX: usize = 500;
/// Distances below this are treated as the floating-point floor.
pub const FIT_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionFit {
    /// `exp(slope)` of `log ‖E D_k‖` against `k`.
    pub rate_hat: f64,
    pub r_squared: f64,
    /// `1 − λ_H τ`, the bound with zero slack.
    pub predicted_rate: f64,
    /// Slack implied by the fit, `1 − (1 − rate_hat)/(λ_H τ)`.
    pub delta_hat: f64,
    pub k0: usize,
    pub k1: usize,
    /// The window ended early because the mean distance hit the floor.
    pub truncated: bool,
    /// `‖E D_k‖` for every recorded sweep.
    pub mean_norms: Vec<f64>,
}

/// `‖E D_k‖` with the expectation taken per block across replicas.
pub fn mean_distance_norms(traces: &[DistanceTrace]) -> Result<Vec<f64>> {
    let first = traces.first().ok_or_else(|| Error::Config("no traces".into()))?;
    let (len, m) = (first.len(), first.n_blocks());
    if traces.iter().any(|t| t.len() != len || t.n_blocks() != m) {
        return Err(Error::Config("traces differ in length or block count".into()));
    }
    let r = traces.len() as f64;
    Ok((0..len)
        .map(|k| {
            let mean: Vec<f64> = (0..m)
                .map(|j| traces.iter().map(|t| t.distances[k][j]).sum::<f64>() / r)
                .collect();
            l2(&mean)
        })
        .collect())
}

/// Least-squares geometric fit of the replica-averaged distances.
pub fn fit_contraction(traces: &[DistanceTrace], margin: f64, tau: f64, k0: usize, k1_max: usize) -> Result<ContractionFit> {
    if traces.len() < 2 {
        return Err(Error::Config("a contraction fit needs at least 2 replicas".into()));
    }
    let norms = mean_distance_norms(traces)?;
    let last = norms.len() - 1;
    let mut k1 = last.min(k1_max);
    let mut truncated = false;
    if let Some(k) = norms.iter().position(|v| *v < FIT_FLOOR) {
        if k <= k1 {
            k1 = k.saturating_sub(1);
            truncated = true;
        }
    }
    if k1 < k0 + 2 {
        return Err(Error::Degenerate(format!(
            "fit window [{k0}, {k1}] holds fewer than 3 positive points"
        )));
    }
    let pts: Vec<(f64, f64)> = (k0..=k1).map(|k| (k as f64, norms[k].ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    let rate_hat = slope.exp();
    Ok(ContractionFit {
        rate_hat,
        r_squared,
        predicted_rate: 1.0 - margin * tau,
        delta_hat: 1.0 - (1.0 - rate_hat) / (margin * tau),
        k0,
        k1,
        truncated,
        mean_norms: norms,
    })
}

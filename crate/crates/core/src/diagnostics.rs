//! Integrated autocorrelation time, effective sample size and cost accounting.

use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::Serialize;

use crate::error::{Error, Result};

/// Shortest series accepted by [`iact`].
pub const MIN_SERIES_LEN: usize = 100;
/// Window constant of the self-consistent truncation rule `W ≥ c·τ(W)`.
pub const WINDOW_C: f64 = 5.0;

/// Biased (`1/N`) autocovariances at lags `0..=max_lag`, via FFT.
pub fn autocovariance(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = series.len();
    if n < 2 || 2 * max_lag > n {
        return Err(Error::Config(format!(
            "need at least {} samples for lag {max_lag}, got {n}",
            (2 * max_lag).max(2)
        )));
    }
    if let Some(i) = series.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            index: i,
            what: "series value".into(),
        });
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let len = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = series
        .iter()
        .map(|v| Complex::new(v - mean, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(len)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(len).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    let scale = 1.0 / (len as f64 * n as f64);
    Ok(buf[..=max_lag].iter().map(|c| c.re * scale).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IactEstimate {
    /// `max(1, raw)`.
    pub iact: f64,
    /// `1 + 2 Σ_{t=1..W} ρ(t)` before clamping.
    pub raw: f64,
    pub window: usize,
    /// No lag below `N/2` satisfied the window rule.
    pub truncated: bool,
    /// Large-sample standard error `τ √(2(2W+1)/N)`.
    pub std_error: f64,
    /// `γ(0..=W)`.
    pub autocovariances: Vec<f64>,
}

/// Integrated autocorrelation time with self-consistent windowing.
pub fn iact(series: &[f64]) -> Result<IactEstimate> {
    let n = series.len();
    if n < MIN_SERIES_LEN {
        return Err(Error::Config(format!(
            "IACT needs at least {MIN_SERIES_LEN} samples, got {n}"
        )));
    }
    let max_lag = n / 2;
    let gamma = autocovariance(series, max_lag)?;
    let scale = series.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(gamma[0] > 1e-28 * scale * scale) {
        return Err(Error::Degenerate("constant series: autocorrelation undefined".into()));
    }
    let mut tau = 1.0;
    let mut window = max_lag;
    let mut truncated = true;
    for t in 1..=max_lag {
        tau += 2.0 * gamma[t] / gamma[0];
        if t as f64 >= WINDOW_C * tau {
            window = t;
            truncated = false;
            break;
        }
    }
    let std_error = tau.abs() * (2.0 * (2 * window + 1) as f64 / n as f64).sqrt();
    Ok(IactEstimate {
        iact: tau.max(1.0),
        raw: tau,
        window,
        truncated,
        std_error,
        autocovariances: gamma[..=window].to_vec(),
    })
}

pub fn ess(n_samples: usize, iact: f64) -> f64 {
    n_samples as f64 / iact
}

/// `IACT × blocks × cost per evaluation`.
pub fn cost_per_effective_sample(iact: f64, n_blocks: usize, cost_per_eval: f64) -> f64 {
    iact * n_blocks as f64 * cost_per_eval
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridIact {
    pub per_coordinate: Vec<f64>,
    pub mean: f64,
    pub max: f64,
    pub argmax: usize,
    pub truncated: usize,
}

/// IACT of every column of a chain stored row-wise.
pub fn grid_iact(rows: &[Vec<f64>]) -> Result<GridIact> {
    let dim = rows.first().map_or(0, Vec::len);
    if dim == 0 {
        return Err(Error::Config("empty chain".into()));
    }
    if rows.iter().any(|r| r.len() != dim) {
        return Err(Error::Parse("ragged chain rows".into()));
    }
    let est: Vec<IactEstimate> = (0..dim)
        .into_par_iter()
        .map(|k| {
            let col: Vec<f64> = rows.iter().map(|r| r[k]).collect();
            iact(&col)
        })
        .collect::<Result<_>>()?;
    let per_coordinate: Vec<f64> = est.iter().map(|e| e.iact).collect();
    let (argmax, max) = per_coordinate
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |b, (i, v)| if v > b.1 { (i, v) } else { b });
    Ok(GridIact {
        mean: per_coordinate.iter().sum::<f64>() / dim as f64,
        max,
        argmax,
        truncated: est.iter().filter(|e| e.truncated).count(),
        per_coordinate,
    })
}

//! Block-wise log-concavity check: build the `m × m` bound matrix `H` from a
//! precision matrix and a partition, and report `λ_min(−H)`.
//!
//! `H_ii = −λ_min(P_ii)` and `H_ij = ‖P_ij‖₂` for `i ≠ j`. The matrix `P` is
//! used verbatim; callers pick the scaling convention.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gmrf::exp_cov_1d;
use crate::linalg::{check_symmetric, spd_inverse};
use crate::partition::BlockPartition;

#[derive(Debug, Clone, Serialize)]
pub struct HMatrix {
    #[serde(serialize_with = "serialize_rows")]
    pub h: DMatrix<f64>,
    /// `λ_min(−H)`; positive iff block-wise log-concave with this `H`.
    pub margin: f64,
    /// `max |H_ij|`.
    pub h_bound: f64,
}

fn serialize_rows<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
    serde::Serialize::serialize(&rows, s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Concavity {
    pub concave: bool,
    pub margin: f64,
}

fn sub_block(p: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |a, b| p[(rows[a], cols[b])])
}

pub fn build_h_from_precision(p: &DMatrix<f64>, part: &BlockPartition) -> Result<HMatrix> {
    if p.nrows() != part.dim() || p.ncols() != part.dim() {
        return Err(Error::DimensionMismatch {
            expected: part.dim(),
            got: p.nrows(),
        });
    }
    check_symmetric(p, 1e-10)?;
    let m = part.n_blocks();
    let mut h = DMatrix::zeros(m, m);
    for i in 0..m {
        let pii = sub_block(p, part.block(i), part.block(i));
        let lam = SymmetricEigen::new(pii).eigenvalues.min();
        h[(i, i)] = -lam;
        for j in (i + 1)..m {
            let pij = sub_block(p, part.block(i), part.block(j));
            let s = pij.singular_values().max();
            h[(i, j)] = s;
            h[(j, i)] = s;
        }
    }
    let margin = SymmetricEigen::new(-&h).eigenvalues.min();
    let h_bound = h.amax();
    Ok(HMatrix { h, margin, h_bound })
}

pub fn check_blockwise_logconcavity(h: &HMatrix) -> Concavity {
    Concavity {
        concave: h.margin > 0.0,
        margin: h.margin,
    }
}

/// Length scales (rows) of the published block-wise log-concavity table.
pub const TABLE_ELLS: [f64; 3] = [2.0, 1.0, 0.5];
/// Block sizes (columns) of the published table.
pub const TABLE_QS: [usize; 6] = [1, 2, 4, 8, 16, 32];
/// State dimension of the published table.
pub const TABLE_N: usize = 64;

/// How a `(ℓ, q)` table cell maps to a computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TableConvention {
    /// Kernel `exp(-|i-j|/(2ℓ))`, block size `q`, exactly as the formulas read.
    Literal,
    /// The convention under which the published numbers are reproduced:
    /// kernel `exp(-|i-j|/ℓ)` (i.e. `exp_cov_1d` with `ℓ/2`) and the block-size
    /// columns in reverse order (column `q` is computed with block size
    /// `q_min * q_max / q`).
    #[default]
    Published,
}

impl TableConvention {
    /// `(exp_cov_1d length scale, block size)` for a table cell.
    pub fn resolve(self, ell: f64, q: usize) -> (f64, usize) {
        match self {
            TableConvention::Literal => (ell, q),
            TableConvention::Published => {
                let qmin = *TABLE_QS.first().unwrap();
                let qmax = *TABLE_QS.last().unwrap();
                (ell / 2.0, qmin * qmax / q)
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TableConvention::Literal => "literal",
            TableConvention::Published => "published",
        }
    }
}

/// `λ_min(−H)` for the 1D exponential-kernel Gaussian of dimension `n`.
pub fn exp_kernel_margin(n: usize, kernel_ell: f64, q: usize) -> Result<HMatrix> {
    let part = BlockPartition::make_uniform_1d(n, q)?;
    let p = spd_inverse(&exp_cov_1d(n, kernel_ell))?;
    build_h_from_precision(&p, &part)
}

/// Margins for every `(ℓ, q)` pair; rows follow `ells`, columns `qs`.
pub fn margin_table(n: usize, ells: &[f64], qs: &[usize], convention: TableConvention) -> Result<Vec<Vec<f64>>> {
    ells.iter()
        .map(|&ell| {
            qs.iter()
                .map(|&q| {
                    let (kell, bq) = convention.resolve(ell, q);
                    exp_kernel_margin(n, kell, bq).map(|h| h.margin)
                })
                .collect()
        })
        .collect()
}

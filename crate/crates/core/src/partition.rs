//! Block partitions of the state vector and the conditional-neighbourhood
//! index sets that describe which blocks interact.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{norm, CsrMatrix};
use crate::target::Target;

/// Ordered, disjoint blocks covering `0..n`. Block order is the update order
/// of a Gibbs sweep.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockPartition {
    n: usize,
    blocks: Vec<Vec<usize>>,
    #[serde(skip)]
    q_max: usize,
}

#[derive(Deserialize)]
struct RawPartition {
    n: usize,
    blocks: Vec<Vec<usize>>,
}

impl<'de> Deserialize<'de> for BlockPartition {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawPartition::deserialize(d)?;
        BlockPartition::from_blocks(raw.n, raw.blocks).map_err(serde::de::Error::custom)
    }
}

impl BlockPartition {
    /// Validates and wraps an explicit list of blocks.
    pub fn from_blocks(n: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::Partition("at least one block is required".into()));
        }
        let mut seen = vec![false; n];
        for (b, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::Partition(format!("block {b} is empty")));
            }
            for &i in block {
                if i >= n {
                    return Err(Error::Partition(format!("index {i} out of range for n={n}")));
                }
                if seen[i] {
                    return Err(Error::Partition(format!("index {i} appears twice")));
                }
                seen[i] = true;
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::Partition(format!("index {i} is not covered")));
        }
        let q_max = blocks.iter().map(Vec::len).max().unwrap_or(0);
        Ok(Self { n, blocks, q_max })
    }

    /// `n / q` consecutive blocks `[kq, (k+1)q)`.
    pub fn make_uniform_1d(n: usize, q: usize) -> Result<Self> {
        if q == 0 || n == 0 || !n.is_multiple_of(q) {
            return Err(Error::Partition(format!(
                "block size {q} does not divide dimension {n}"
            )));
        }
        let blocks = (0..n / q).map(|k| (k * q..(k + 1) * q).collect()).collect();
        Self::from_blocks(n, blocks)
    }

    /// One block holding every coordinate.
    pub fn single(n: usize) -> Result<Self> {
        Self::make_uniform_1d(n, n)
    }

    /// `tile × tile` tiles of a column-stacked `side × side` grid
    /// (pixel `(i, j)` lives at `i + side * j`). Tiles are numbered in reading
    /// order: tile row first, then tile column.
    pub fn make_tiles_2d(side: usize, tile: usize) -> Result<Self> {
        if tile == 0 || side == 0 || !side.is_multiple_of(tile) {
            return Err(Error::Partition(format!(
                "tile size {tile} does not divide grid side {side}"
            )));
        }
        let nt = side / tile;
        let mut blocks = Vec::with_capacity(nt * nt);
        for tr in 0..nt {
            for tc in 0..nt {
                let mut idx = Vec::with_capacity(tile * tile);
                for j in tc * tile..(tc + 1) * tile {
                    for i in tr * tile..(tr + 1) * tile {
                        idx.push(i + side * j);
                    }
                }
                idx.sort_unstable();
                blocks.push(idx);
            }
        }
        Self::from_blocks(side * side, blocks)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn q_max(&self) -> usize {
        self.q_max
    }

    pub fn block(&self, j: usize) -> &[usize] {
        &self.blocks[j]
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    /// Block index of every coordinate.
    pub fn owner(&self) -> Vec<usize> {
        let mut own = vec![0; self.n];
        for (b, block) in self.blocks.iter().enumerate() {
            for &i in block {
                own[i] = b;
            }
        }
        own
    }

    pub fn gather(&self, j: usize, x: &[f64]) -> Vec<f64> {
        self.blocks[j].iter().map(|&i| x[i]).collect()
    }

    /// Returns the same partition with blocks visited in `order`.
    pub fn reordered(&self, order: &[usize]) -> Result<Self> {
        let blocks = order.iter().map(|&b| self.blocks[b].clone()).collect();
        Self::from_blocks(self.n, blocks)
    }
}

/// Index sets `I_j` over block indices; `j ∈ I_j` and the relation is
/// symmetric.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NeighborhoodStructure {
    sets: Vec<Vec<usize>>,
    #[serde(skip)]
    s_max: usize,
}

#[derive(Deserialize)]
struct RawNeighborhoods {
    sets: Vec<Vec<usize>>,
}

impl<'de> Deserialize<'de> for NeighborhoodStructure {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawNeighborhoods::deserialize(d)?;
        NeighborhoodStructure::new(raw.sets).map_err(serde::de::Error::custom)
    }
}

impl NeighborhoodStructure {
    /// Validates user-supplied sets (self-membership and symmetry).
    pub fn new(sets: Vec<Vec<usize>>) -> Result<Self> {
        let m = sets.len();
        let lookup: Vec<BTreeSet<usize>> = sets.iter().map(|s| s.iter().copied().collect()).collect();
        for (j, s) in lookup.iter().enumerate() {
            if !s.contains(&j) {
                return Err(Error::Partition(format!("block {j} is missing from its own set")));
            }
            for &i in s {
                if i >= m {
                    return Err(Error::Partition(format!("block index {i} out of range")));
                }
                if !lookup[i].contains(&j) {
                    return Err(Error::Partition(format!(
                        "neighbourhoods not symmetric: {i} in I_{j} but {j} not in I_{i}"
                    )));
                }
            }
        }
        let sets: Vec<Vec<usize>> = lookup.into_iter().map(|s| s.into_iter().collect()).collect();
        let s_max = sets.iter().map(Vec::len).max().unwrap_or(0);
        Ok(Self { sets, s_max })
    }

    /// `I_j = {j}` for every block.
    pub fn independent(m: usize) -> Self {
        Self {
            sets: (0..m).map(|j| vec![j]).collect(),
            s_max: 1,
        }
    }

    /// Every block neighbours every other block.
    pub fn dense(m: usize) -> Self {
        Self {
            sets: (0..m).map(|_| (0..m).collect()).collect(),
            s_max: m,
        }
    }

    pub fn set(&self, j: usize) -> &[usize] {
        &self.sets[j]
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.sets
    }

    pub fn s_max(&self) -> usize {
        self.s_max
    }

    pub fn contains(&self, j: usize, i: usize) -> bool {
        self.sets[j].binary_search(&i).is_ok()
    }
}

pub const DEFAULT_NEIGHBOR_TOL: f64 = 1e-12;

/// Block pattern of a symmetric precision: `i ∈ I_j` iff block `(i, j)` has an
/// entry larger than `tol * max|P|`.
pub fn neighbors_from_precision(
    p: &DMatrix<f64>,
    part: &BlockPartition,
    tol: f64,
) -> Result<NeighborhoodStructure> {
    if p.nrows() != part.dim() {
        return Err(Error::DimensionMismatch {
            expected: part.dim(),
            got: p.nrows(),
        });
    }
    crate::linalg::check_symmetric(p, 1e-10)?;
    neighbors_from_sparse(&CsrMatrix::from_dense(p, 0.0), part, tol)
}

/// Sparse variant of [`neighbors_from_precision`]; symmetry is assumed.
pub fn neighbors_from_sparse(
    p: &CsrMatrix,
    part: &BlockPartition,
    tol: f64,
) -> Result<NeighborhoodStructure> {
    if p.nrows() != part.dim() {
        return Err(Error::DimensionMismatch {
            expected: part.dim(),
            got: p.nrows(),
        });
    }
    let cutoff = tol * p.max_abs();
    let owner = part.owner();
    let m = part.n_blocks();
    let mut sets: Vec<BTreeSet<usize>> = (0..m).map(|j| BTreeSet::from([j])).collect();
    for r in 0..p.nrows() {
        for (c, v) in p.row(r) {
            if v.abs() > cutoff {
                sets[owner[r]].insert(owner[c]);
                sets[owner[c]].insert(owner[r]);
            }
        }
    }
    NeighborhoodStructure::new(sets.into_iter().map(|s| s.into_iter().collect()).collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct SparsityReport {
    /// max ‖v_j(x+δ) − v_j(x)‖ / ‖δ‖ over probed `(j, k ∉ I_j)` pairs.
    pub max_violation: f64,
    /// `(j, k)` pair attaining the maximum.
    pub worst_pair: Option<(usize, usize)>,
    pub pairs_probed: usize,
    pub pass: bool,
}

/// Probes the claim that `v_j` does not depend on blocks outside `I_j` by
/// perturbing one foreign block at a time around random states
/// `center + scale * N(0, I)`.
#[allow(clippy::too_many_arguments)]
pub fn probe_sparsity<T: Target + ?Sized, R: Rng>(
    target: &T,
    structure: &NeighborhoodStructure,
    part: &BlockPartition,
    center: &[f64],
    scale: f64,
    trials: usize,
    tol: f64,
    rng: &mut R,
) -> SparsityReport {
    let m = part.n_blocks();
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for j in 0..m {
        for k in 0..m {
            if !structure.contains(j, k) {
                pairs.push((j, k));
            }
        }
    }
    const MAX_PAIRS: usize = 10_000;
    let mut max_violation = 0.0f64;
    let mut worst_pair = None;
    let mut probed = 0;
    for _ in 0..trials {
        let x: Vec<f64> = center
            .iter()
            .map(|c| c + scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let chosen: Vec<(usize, usize)> = if pairs.len() <= MAX_PAIRS {
            pairs.clone()
        } else {
            pairs.choose_multiple(rng, MAX_PAIRS).copied().collect()
        };
        for (j, k) in chosen {
            let base = target.block_grad(part, j, &x);
            let mut xp = x.clone();
            let mut dn = Vec::with_capacity(part.block(k).len());
            for &i in part.block(k) {
                let d: f64 = scale * rng.sample::<f64, _>(StandardNormal);
                xp[i] += d;
                dn.push(d);
            }
            let moved = target.block_grad(part, j, &xp);
            let diff: Vec<f64> = moved.iter().zip(&base).map(|(a, b)| a - b).collect();
            let v = norm(&diff) / norm(&dn);
            probed += 1;
            if worst_pair.is_none() || v > max_violation {
                max_violation = v;
                worst_pair = Some((j, k));
            }
        }
    }
    SparsityReport {
        max_violation,
        worst_pair,
        pairs_probed: probed,
        pass: max_violation <= tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_blocks() {
        let p = BlockPartition::make_uniform_1d(64, 4).unwrap();
        assert_eq!(p.n_blocks(), 16);
        assert_eq!(p.block(0), &[0, 1, 2, 3]);
        assert_eq!(p.block(15), &[60, 61, 62, 63]);
        assert_eq!(p.q_max(), 4);

        let one = BlockPartition::make_uniform_1d(5, 5).unwrap();
        assert_eq!(one.n_blocks(), 1);
        assert_eq!(one.block(0), &[0, 1, 2, 3, 4]);

        assert!(matches!(
            BlockPartition::make_uniform_1d(6, 4),
            Err(Error::Partition(_))
        ));
        assert!(BlockPartition::make_uniform_1d(6, 0).is_err());
    }

    #[test]
    fn tiles() {
        let p = BlockPartition::make_tiles_2d(16, 8).unwrap();
        assert_eq!(p.n_blocks(), 4);
        assert!(p.blocks().iter().all(|b| b.len() == 64));
        // tile 1 is the top-right tile: rows 0..8, columns 8..16
        assert_eq!(p.block(1)[0], 16 * 8);
        assert!(p.block(1).contains(&(7 + 16 * 15)));

        let p = BlockPartition::make_tiles_2d(64, 16).unwrap();
        assert_eq!(p.n_blocks(), 16);
        assert!(p.blocks().iter().all(|b| b.len() == 256));

        let p = BlockPartition::make_tiles_2d(16, 16).unwrap();
        assert_eq!(p.n_blocks(), 1);
        assert_eq!(p.block(0).len(), 256);

        assert!(BlockPartition::make_tiles_2d(16, 5).is_err());
    }

    #[test]
    fn from_blocks_validation() {
        assert!(BlockPartition::from_blocks(3, vec![vec![0, 2], vec![1]]).is_ok());
        assert!(BlockPartition::from_blocks(3, vec![vec![0, 2]]).is_err());
        assert!(BlockPartition::from_blocks(3, vec![vec![0, 1], vec![1, 2]]).is_err());
        assert!(BlockPartition::from_blocks(3, vec![vec![0, 1, 2], vec![]]).is_err());
        assert!(BlockPartition::from_blocks(2, vec![vec![0, 1, 2]]).is_err());
    }

    #[test]
    fn json_round_trip_validates() {
        let p = BlockPartition::make_uniform_1d(6, 2).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"n":6,"blocks":[[0,1],[2,3],[4,5]]}"#);
        let back: BlockPartition = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        assert!(serde_json::from_str::<BlockPartition>(r#"{"n":3,"blocks":[[0,1]]}"#).is_err());

        let nb = NeighborhoodStructure::new(vec![vec![0, 1], vec![0, 1]]).unwrap();
        assert_eq!(serde_json::to_string(&nb).unwrap(), r#"{"sets":[[0,1],[0,1]]}"#);
        assert!(serde_json::from_str::<NeighborhoodStructure>(r#"{"sets":[[0,1],[1]]}"#).is_err());
    }

    #[test]
    fn neighborhoods_tridiagonal_and_diagonal() {
        let n = 6;
        let tri = DMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
            0 => 2.0,
            1 => -1.0,
            _ => 0.0,
        });
        let part = BlockPartition::make_uniform_1d(n, 1).unwrap();
        let nb = neighbors_from_precision(&tri, &part, DEFAULT_NEIGHBOR_TOL).unwrap();
        assert_eq!(nb.set(0), &[0, 1]);
        assert_eq!(nb.set(3), &[2, 3, 4]);
        assert_eq!(nb.s_max(), 3);

        let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_element(n, 3.0));
        let nb = neighbors_from_precision(&diag, &part, DEFAULT_NEIGHBOR_TOL).unwrap();
        assert!((0..n).all(|j| nb.set(j) == [j]));

        let mut asym = tri.clone();
        asym[(0, 1)] = -0.5;
        assert!(matches!(
            neighbors_from_precision(&asym, &part, DEFAULT_NEIGHBOR_TOL),
            Err(Error::NotSymmetric(_))
        ));
    }

    #[test]
    fn neighborhood_validation() {
        assert!(NeighborhoodStructure::new(vec![vec![1], vec![0, 1]]).is_err());
        assert!(NeighborhoodStructure::new(vec![vec![0, 1], vec![1]]).is_err());
        assert_eq!(NeighborhoodStructure::dense(3).s_max(), 3);
    }
}

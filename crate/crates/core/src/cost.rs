//! Fused feature/spatial costs between embeddings and prototypes.
//!
//! The single-pair cost is
//! `(1 - alpha) * (1 - cos(z, p)) + alpha * |c - rho|^2`
//! with `c`, `rho` normalized lattice coordinates. Inside the transport
//! problem each component is first divided by its maximum over the batch
//! matrix, so every entry of a [`CostMatrix`] lies in `[0, 1]`.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{lattice_coord, squared_distance, FeatureGrid, PrototypeSet};

/// Norm under which a feature vector is treated as zero.
pub const NORM_FLOOR: f64 = 1e-12;

/// Normalizers below this are treated as zero and the component is dropped.
pub const NORMALIZER_FLOOR: f64 = 1e-12;

/// What to do when a feature vector has (near) zero norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZeroVectorPolicy {
    /// Fail with [`Error::ZeroVector`].
    #[default]
    Error,
    /// Treat the cosine similarity as 0, i.e. a feature cost of 1.
    Clamp,
}

impl fmt::Display for ZeroVectorPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ZeroVectorPolicy::Error => "error",
            ZeroVectorPolicy::Clamp => "clamp",
        })
    }
}

impl FromStr for ZeroVectorPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "error" => Ok(ZeroVectorPolicy::Error),
            "clamp" => Ok(ZeroVectorPolicy::Clamp),
            other => Err(Error::InvalidConfig(format!("zero_vector must be error|clamp, got {other:?}"))),
        }
    }
}

/// f64 dot product of two f32 slices, eight fixed lanes so it vectorizes.
#[inline]
pub(crate) fn dot(a: &[f32], b: &[f32]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for k in 0..8 {
            acc[k] += x[k] as f64 * y[k] as f64;
        }
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(&x, &y)| x as f64 * y as f64).sum();
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// `1 - cos` from a dot product and the two squared norms, clamped to `[0, 2]`.
///
/// Every cosine in the crate goes through here so that scores can be
/// recomputed bit-for-bit from a stored argmin.
#[inline]
pub(crate) fn cosine_cost(dot: f64, sq_a: f64, sq_b: f64, policy: ZeroVectorPolicy) -> Result<f64> {
    let floor = NORM_FLOOR * NORM_FLOOR;
    if sq_a < floor || sq_b < floor {
        return match policy {
            ZeroVectorPolicy::Error => Err(Error::ZeroVector {
                norm: sq_a.min(sq_b).sqrt(),
            }),
            ZeroVectorPolicy::Clamp => Ok(1.0),
        };
    }
    Ok((1.0 - dot / (sq_a * sq_b).sqrt()).clamp(0.0, 2.0))
}

/// Unnormalized fused cost between embedding `(z, c)` and prototype `(p, rho)`.
pub fn fused_cost(
    z: &[f32],
    c: [f64; 2],
    p: &[f32],
    rho: [f64; 2],
    alpha: f64,
    policy: ZeroVectorPolicy,
) -> Result<f64> {
    if z.len() != p.len() {
        return Err(Error::dims("fused_cost feature length", z.len(), p.len()));
    }
    let feat = cosine_cost(dot(z, p), dot(z, z), dot(p, p), policy)?;
    Ok((1.0 - alpha) * feat + alpha * squared_distance(c, rho))
}

/// Squared distances between every pair of cells of an `H x W` lattice,
/// `(H*W) x (H*W)` row-major.
pub fn struct_cost_table(height: usize, width: usize) -> Vec<f64> {
    let cells = height * width;
    let coords: Vec<[f64; 2]> = (0..cells)
        .map(|k| lattice_coord(k / width, k % width, height, width))
        .collect();
    let mut table = vec![0.0; cells * cells];
    for (a, row) in table.chunks_exact_mut(cells).enumerate() {
        for (b, out) in row.iter_mut().enumerate() {
            *out = squared_distance(coords[a], coords[b]);
        }
    }
    table
}

/// Batch-normalized cost matrix between all embeddings of a batch and all
/// prototypes of a bank.
///
/// Row `k` is embedding `k % (H*W)` (row-major cell) of grid `k / (H*W)`;
/// column `j` is prototype `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    alpha: f64,
    max_feat: f64,
    max_struct: f64,
}

impl CostMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Maximum of the raw feature cost over the batch (the divisor applied).
    pub fn max_feat(&self) -> f64 {
        self.max_feat
    }

    /// Maximum of the raw spatial cost over the batch (the divisor applied).
    pub fn max_struct(&self) -> f64 {
        self.max_struct
    }
}

/// Builds the normalized cost matrix for one batch against `protos`.
pub fn cost_matrix(
    batch: &[&FeatureGrid],
    protos: &PrototypeSet,
    alpha: f64,
    policy: ZeroVectorPolicy,
) -> Result<CostMatrix> {
    if batch.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidConfig(format!("alpha {alpha} outside [0, 1]")));
    }
    for grid in batch {
        protos.check_grid(grid)?;
    }
    let dim = protos.dim();
    let cells = protos.height() * protos.width();
    let per_cell = protos.per_cell();
    let cols = protos.len();
    let rows = batch.len() * cells;

    let proto_sq: Vec<f64> = (0..cols).map(|j| {
        let p = protos.weight(j);
        dot(p, p)
    }).collect();

    let mut data = vec![0.0; rows * cols];
    data.par_chunks_mut(cols)
        .enumerate()
        .try_for_each(|(k, row)| -> Result<()> {
            let z = batch[k / cells].cell_feature(k % cells);
            let z_sq = dot(z, z);
            for (j, out) in row.iter_mut().enumerate() {
                let p = &protos.weights()[j * dim..(j + 1) * dim];
                *out = cosine_cost(dot(z, p), z_sq, proto_sq[j], policy)?;
            }
            Ok(())
        })?;

    let max_feat = data.iter().copied().fold(0.0, f64::max);
    let table = struct_cost_table(protos.height(), protos.width());
    let max_struct = table.iter().copied().fold(0.0, f64::max);

    let feat_scale = if max_feat < NORMALIZER_FLOOR { 0.0 } else { 1.0 / max_feat };
    let struct_scale = if max_struct < NORMALIZER_FLOOR { 0.0 } else { 1.0 / max_struct };
    data.par_chunks_mut(cols).enumerate().for_each(|(k, row)| {
        let cell = k % cells;
        let spatial = &table[cell * cells..(cell + 1) * cells];
        for (j, out) in row.iter_mut().enumerate() {
            let feat = if feat_scale == 0.0 { 0.0 } else { *out / max_feat };
            let st = if struct_scale == 0.0 { 0.0 } else { spatial[j / per_cell] / max_struct };
            *out = (1.0 - alpha) * feat + alpha * st;
        }
    });

    Ok(CostMatrix {
        rows,
        cols,
        data,
        alpha,
        max_feat,
        max_struct,
    })
}

/// Concatenates the features of a batch in cost-matrix row order,
/// `(B*H*W) x D` row-major.
pub fn batch_features(batch: &[&FeatureGrid]) -> Vec<f32> {
    batch.iter().flat_map(|g| g.features().iter().copied()).collect()
}

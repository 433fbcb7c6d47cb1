//! Inference: per-cell anomaly scores, map aggregation and prototype
//! provenance.
//!
//! A cell's score is its minimum *unnormalized* fused cost to any prototype
//! of a bank. Per scale, the global and local fields are averaged and
//! bilinearly upsampled to image resolution; the final map is the sum over
//! scales and the image score is its maximum.

use rayon::prelude::*;

use crate::cost::{cosine_cost, dot, ZeroVectorPolicy};
use crate::error::{Error, Result};
use crate::grid::{squared_distance, FeatureGrid, PrototypeSet};

/// A grid-resolution score field, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreField {
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

impl ScoreField {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.width + j]
    }
}

/// Closest prototype of one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Assignment {
    /// Index of the argmin prototype.
    pub proto: usize,
    /// Fused cost to that prototype; equals the cell's score.
    pub cost: f64,
    /// Lattice cell `(i, j)` the prototype is anchored at.
    pub proto_cell: (usize, usize),
}

/// Argmin prototypes of every cell of one grid under one bank.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentMap {
    pub height: usize,
    pub width: usize,
    pub scale_id: u16,
    pub alpha: f32,
    /// Row-major, one entry per cell.
    pub cells: Vec<Assignment>,
}

impl AssignmentMap {
    pub fn get(&self, i: usize, j: usize) -> &Assignment {
        &self.cells[i * self.width + j]
    }
}

/// Scores every cell of `grid` against `protos` with the bank's own alpha.
///
/// Ties go to the lowest prototype index.
pub fn score_grid(
    grid: &FeatureGrid,
    protos: &PrototypeSet,
    policy: ZeroVectorPolicy,
) -> Result<(ScoreField, AssignmentMap)> {
    protos.check_grid(grid)?;
    let alpha = protos.alpha() as f64;
    let proto_sq: Vec<f64> = (0..protos.len())
        .map(|j| {
            let p = protos.weight(j);
            dot(p, p)
        })
        .collect();
    let proto_coords: Vec<[f64; 2]> = (0..protos.len()).map(|j| protos.coord(j)).collect();

    let cells: Vec<Assignment> = (0..grid.cells())
        .into_par_iter()
        .map(|cell| {
            let z = grid.cell_feature(cell);
            let c = grid.coord(cell / grid.width(), cell % grid.width());
            let z_sq = dot(z, z);
            let mut best = Assignment {
                proto: 0,
                cost: f64::INFINITY,
                proto_cell: (0, 0),
            };
            for (j, (&p_sq, &rho)) in proto_sq.iter().zip(&proto_coords).enumerate() {
                let feat = cosine_cost(dot(z, protos.weight(j)), z_sq, p_sq, policy)?;
                let cost = (1.0 - alpha) * feat + alpha * squared_distance(c, rho);
                if cost < best.cost {
                    best.proto = j;
                    best.cost = cost;
                }
            }
            let (pi, pj, _) = protos.cell_of(best.proto);
            best.proto_cell = (pi, pj);
            Ok(best)
        })
        .collect::<Result<_>>()?;

    let field = ScoreField {
        height: grid.height(),
        width: grid.width(),
        values: cells.iter().map(|a| a.cost).collect(),
    };
    let map = AssignmentMap {
        height: grid.height(),
        width: grid.width(),
        scale_id: protos.scale_id(),
        alpha: protos.alpha(),
        cells,
    };
    Ok((field, map))
}

/// Pixel-level anomaly map with its image-level score.
#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyMap {
    height: usize,
    width: usize,
    scores: Vec<f32>,
    image_score: f32,
}

impl AnomalyMap {
    /// Wraps a score buffer; the image score is recomputed as its maximum.
    pub fn new(height: usize, width: usize, scores: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::ZeroDim("anomaly map"));
        }
        if scores.len() != height * width {
            return Err(Error::dims("anomaly map pixels", height * width, scores.len()));
        }
        if let Some(index) = scores.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::NonFinite { index });
        }
        let image_score = scores.iter().copied().fold(0.0f32, f32::max);
        Ok(Self {
            height,
            width,
            scores,
            image_score,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn scores(&self) -> &[f32] {
        &self.scores
    }

    pub fn get(&self, y: usize, x: usize) -> f32 {
        self.scores[y * self.width + x]
    }

    pub fn image_score(&self) -> f32 {
        self.image_score
    }
}

/// Bilinear resize with half-pixel centers (align-corners false); samples
/// outside the source are clamped to the border.
pub fn bilinear_upsample(src: &[f64], height: usize, width: usize, out_h: usize, out_w: usize) -> Vec<f64> {
    fn taps(dst: usize, src_len: usize, dst_len: usize) -> (usize, usize, f64) {
        let pos = ((dst as f64 + 0.5) * src_len as f64 / dst_len as f64 - 0.5).max(0.0);
        let lo = (pos.floor() as usize).min(src_len - 1);
        let hi = (lo + 1).min(src_len - 1);
        (lo, hi, pos - lo as f64)
    }
    let xs: Vec<_> = (0..out_w).map(|x| taps(x, width, out_w)).collect();
    let mut out = Vec::with_capacity(out_h * out_w);
    for y in 0..out_h {
        let (y0, y1, ly) = taps(y, height, out_h);
        for &(x0, x1, lx) in &xs {
            let top = src[y0 * width + x0] * (1.0 - lx) + src[y0 * width + x1] * lx;
            let bottom = src[y1 * width + x0] * (1.0 - lx) + src[y1 * width + x1] * lx;
            out.push(top * (1.0 - ly) + bottom * ly);
        }
    }
    out
}

/// Global and local score fields of one scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleFields {
    pub global: ScoreField,
    pub local: ScoreField,
}

/// Averages global and local fields per scale, upsamples each to
/// `out_h x out_w` and sums over scales.
pub fn aggregate(per_scale: &[ScaleFields], out_h: usize, out_w: usize) -> Result<AnomalyMap> {
    if per_scale.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut total = vec![0.0f64; out_h * out_w];
    for s in per_scale {
        let (g, l) = (&s.global, &s.local);
        if (g.height, g.width) != (l.height, l.width) {
            return Err(Error::dims(
                "global vs local field",
                format!("{}x{}", g.height, g.width),
                format!("{}x{}", l.height, l.width),
            ));
        }
        let mean: Vec<f64> = g.values.iter().zip(&l.values).map(|(a, b)| (a + b) / 2.0).collect();
        let up = bilinear_upsample(&mean, g.height, g.width, out_h, out_w);
        for (t, u) in total.iter_mut().zip(up) {
            *t += u;
        }
    }
    AnomalyMap::new(out_h, out_w, total.into_iter().map(|v| v as f32).collect())
}

/// Separable Gaussian blur with edge clamping. Not applied by default.
pub fn gaussian_smooth(map: &AnomalyMap, sigma: f64) -> Result<AnomalyMap> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidConfig(format!("smoothing sigma {sigma} must be > 0")));
    }
    let radius = (4.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let norm: f64 = kernel.iter().sum();
    let (h, w) = (map.height as isize, map.width as isize);
    let src: Vec<f64> = map.scores.iter().map(|&v| v as f64).collect();
    let pass = |input: &[f64], horizontal: bool| -> Vec<f64> {
        let mut out = vec![0.0; input.len()];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (t, kv) in kernel.iter().enumerate() {
                    let off = t as isize - radius;
                    let (yy, xx) = if horizontal {
                        (y, (x + off).clamp(0, w - 1))
                    } else {
                        ((y + off).clamp(0, h - 1), x)
                    };
                    acc += kv * input[(yy * w + xx) as usize];
                }
                out[(y * w + x) as usize] = acc / norm;
            }
        }
        out
    };
    let blurred = pass(&pass(&src, true), false);
    AnomalyMap::new(map.height, map.width, blurred.into_iter().map(|v| v.max(0.0) as f32).collect())
}

/// Training feature that best represents a prototype.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub sample_id: String,
    pub i: usize,
    pub j: usize,
    pub similarity: f64,
}

/// For every prototype, the dataset feature of maximal cosine similarity.
///
/// Ties are resolved by the smallest `(sample_id, i, j)`.
pub fn reconstruct_prototypes(
    protos: &PrototypeSet,
    dataset: &[(&str, &FeatureGrid)],
    policy: ZeroVectorPolicy,
) -> Result<Vec<Provenance>> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for (_, grid) in dataset {
        protos.check_grid(grid)?;
    }
    let feature_sq: Vec<Vec<f64>> = dataset
        .iter()
        .map(|(_, g)| (0..g.cells()).map(|c| {
            let z = g.cell_feature(c);
            dot(z, z)
        }).collect())
        .collect();

    (0..protos.len())
        .into_par_iter()
        .map(|index| {
            let p = protos.weight(index);
            let p_sq = dot(p, p);
            let mut best: Option<(f64, &str, usize)> = None;
            for ((id, grid), sq) in dataset.iter().zip(&feature_sq) {
                for cell in 0..grid.cells() {
                    let z = grid.cell_feature(cell);
                    let sim = 1.0 - cosine_cost(dot(z, p), sq[cell], p_sq, policy)?;
                    let better = match best {
                        None => true,
                        Some((s, bid, bcell)) => sim > s || (sim == s && (*id, cell) < (bid, bcell)),
                    };
                    if better {
                        best = Some((sim, id, cell));
                    }
                }
            }
            let (similarity, id, cell) = best.expect("dataset is nonempty");
            let width = protos.width();
            Ok(Provenance {
                sample_id: id.to_string(),
                i: cell / width,
                j: cell % width,
                similarity,
            })
        })
        .collect()
}

/// Montage recipe: for each test cell, the training patch of its argmin
/// prototype.
#[derive(Debug, Clone, PartialEq)]
pub struct RestoreRecipe {
    pub height: usize,
    pub width: usize,
    pub cells: Vec<Provenance>,
}

/// Looks up the provenance of every cell's assigned prototype.
pub fn restore_image_patches(assignment: &AssignmentMap, provenance: &[Provenance]) -> Result<RestoreRecipe> {
    let cells = assignment
        .cells
        .iter()
        .map(|a| provenance.get(a.proto).cloned().ok_or(Error::MissingProvenance(a.proto)))
        .collect::<Result<_>>()?;
    Ok(RestoreRecipe {
        height: assignment.height,
        width: assignment.width,
        cells,
    })
}

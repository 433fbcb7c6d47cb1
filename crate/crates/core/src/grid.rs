//! Feature grids, prototype banks and the coordinate lattice they share.
//!
//! Cell `(i, j)` of an `H x W` grid (0-based storage indices) sits at the
//! normalized coordinate `((i + 1) / H, (j + 1) / W)`, i.e. the 1-indexed
//! lattice divided by the grid size. Every coordinate is in `(0, 1]`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Normalized lattice coordinate of 0-based cell `(i, j)`.
#[inline]
pub fn lattice_coord(i: usize, j: usize, height: usize, width: usize) -> [f64; 2] {
    [(i + 1) as f64 / height as f64, (j + 1) as f64 / width as f64]
}

/// Squared euclidean distance between two normalized coordinates.
#[inline]
pub fn squared_distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dy = a[0] - b[0];
    let dx = a[1] - b[1];
    dy * dy + dx * dx
}

/// One `H x W` grid of `D`-dimensional feature vectors.
///
/// Features are stored row-major: cell `(i, j)` owns
/// `features[(i * W + j) * D..][..D]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    height: usize,
    width: usize,
    dim: usize,
    scale_id: u16,
    features: Vec<f32>,
}

impl FeatureGrid {
    /// Builds a grid from a flat `H * W * D` buffer, rejecting non-finite
    /// entries and zero dimensions.
    pub fn new(height: usize, width: usize, dim: usize, scale_id: u16, features: Vec<f32>) -> Result<Self> {
        if height == 0 {
            return Err(Error::ZeroDim("height"));
        }
        if width == 0 {
            return Err(Error::ZeroDim("width"));
        }
        if dim == 0 {
            return Err(Error::ZeroDim("dim"));
        }
        let expected = height * width * dim;
        if features.len() != expected {
            return Err(Error::dims("feature grid payload", expected, features.len()));
        }
        if let Some(index) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            height,
            width,
            dim,
            scale_id,
            features,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn scale_id(&self) -> u16 {
        self.scale_id
    }

    pub fn cells(&self) -> usize {
        self.height * self.width
    }

    pub fn features(&self) -> &[f32] {
        &self.features
    }

    /// Feature vector of cell `(i, j)`.
    pub fn feature(&self, i: usize, j: usize) -> &[f32] {
        self.cell_feature(i * self.width + j)
    }

    /// Feature vector of the cell with row-major index `cell`.
    pub fn cell_feature(&self, cell: usize) -> &[f32] {
        &self.features[cell * self.dim..(cell + 1) * self.dim]
    }

    pub fn coord(&self, i: usize, j: usize) -> [f64; 2] {
        lattice_coord(i, j, self.height, self.width)
    }

    /// All coordinates in row-major cell order.
    pub fn coords(&self) -> Vec<[f64; 2]> {
        (0..self.height)
            .flat_map(|i| (0..self.width).map(move |j| (i, j)))
            .map(|(i, j)| self.coord(i, j))
            .collect()
    }

    /// Mutable access for augmentation hooks. Callers must keep entries finite.
    pub fn features_mut(&mut self) -> &mut [f32] {
        &mut self.features
    }

    pub(crate) fn same_shape(&self, other: &FeatureGrid) -> bool {
        self.height == other.height && self.width == other.width && self.dim == other.dim
    }
}

/// Builds a [`FeatureGrid`] from a raw `H x W x D` array (row-major, feature innermost).
pub fn make_feature_grid(raw: &[f32], height: usize, width: usize, dim: usize, scale_id: u16) -> Result<FeatureGrid> {
    FeatureGrid::new(height, width, dim, scale_id, raw.to_vec())
}

/// A bank of `n * H * W` prototypes anchored on the feature lattice.
///
/// Lattice cell `(i, j)` owns the `n` consecutive prototypes starting at
/// `(i * W + j) * n`. Coordinates are implied by the index and never change;
/// only the weights are updated during training.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeSet {
    per_cell: usize,
    height: usize,
    width: usize,
    dim: usize,
    alpha: f32,
    scale_id: u16,
    weights: Vec<f32>,
}

impl PrototypeSet {
    pub fn new(
        per_cell: usize,
        height: usize,
        width: usize,
        dim: usize,
        alpha: f32,
        scale_id: u16,
        weights: Vec<f32>,
    ) -> Result<Self> {
        for (name, v) in [("n", per_cell), ("height", height), ("width", width), ("dim", dim)] {
            if v == 0 {
                return Err(Error::ZeroDim(name));
            }
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidConfig(format!("alpha {alpha} outside [0, 1]")));
        }
        let expected = per_cell * height * width * dim;
        if weights.len() != expected {
            return Err(Error::dims("prototype weights", expected, weights.len()));
        }
        if let Some(index) = weights.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            per_cell,
            height,
            width,
            dim,
            alpha,
            scale_id,
            weights,
        })
    }

    /// Prototypes per lattice cell (`n`).
    pub fn per_cell(&self) -> usize {
        self.per_cell
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn alpha(&self) -> f32 {
        self.alpha
    }

    pub fn scale_id(&self) -> u16 {
        self.scale_id
    }

    /// Total number of prototypes, `n * H * W`.
    pub fn len(&self) -> usize {
        self.per_cell * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn weights(&self) -> &[f32] {
        &self.weights
    }

    pub fn weight(&self, index: usize) -> &[f32] {
        &self.weights[index * self.dim..(index + 1) * self.dim]
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [f32] {
        &mut self.weights
    }

    /// `(i, j, slot)` of prototype `index`.
    pub fn cell_of(&self, index: usize) -> (usize, usize, usize) {
        let cell = index / self.per_cell;
        (cell / self.width, cell % self.width, index % self.per_cell)
    }

    pub fn index_of(&self, i: usize, j: usize, slot: usize) -> usize {
        (i * self.width + j) * self.per_cell + slot
    }

    pub fn coord(&self, index: usize) -> [f64; 2] {
        let (i, j, _) = self.cell_of(index);
        lattice_coord(i, j, self.height, self.width)
    }

    /// Checks that `grid` can be compared against this bank.
    pub fn check_grid(&self, grid: &FeatureGrid) -> Result<()> {
        let want = (self.height, self.width, self.dim);
        let got = (grid.height(), grid.width(), grid.dim());
        if want != got {
            return Err(Error::dims("grid vs prototypes (H, W, D)", format!("{want:?}"), format!("{got:?}")));
        }
        Ok(())
    }
}

/// Draws `n * H * W` prototypes with i.i.d. `N(mean, std)` weights from a
/// ChaCha8 stream seeded with `seed`.
pub fn init_prototypes(
    per_cell: usize,
    height: usize,
    width: usize,
    dim: usize,
    alpha: f32,
    scale_id: u16,
    seed: u64,
    mean: f64,
    std: f64,
) -> Result<PrototypeSet> {
    let normal = Normal::new(mean, std)
        .map_err(|e| Error::InvalidConfig(format!("init distribution N({mean}, {std}): {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = per_cell
        .checked_mul(height)
        .and_then(|v| v.checked_mul(width))
        .and_then(|v| v.checked_mul(dim))
        .ok_or_else(|| Error::InvalidConfig("prototype bank size overflows".into()))?;
    let weights = (0..count).map(|_| normal.sample(&mut rng) as f32).collect();
    PrototypeSet::new(per_cell, height, width, dim, alpha, scale_id, weights)
}

//! Seeded synthetic datasets with planted anomalies.
//!
//! The unit square is tiled into `ceil(sqrt(K))^2` regions, each owning one
//! of `K` cluster means (per scale). A normal grid places at every cell the
//! mean of the region containing the cell center, plus Gaussian noise.
//! Test grids are perturbed on square blocks aligned to the coarsest scale:
//!
//! * logical: two disjoint blocks whose cells belong to different clusters
//!   swap their features, so every feature is normal but misplaced;
//! * structural: one block is replaced by fresh random vectors.
//!
//! Masks mark the pixels whose centers fall in a perturbed block.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::manifest::{AnomalyTag, DatasetManifest, GridRef, Sample, Split};
use super::mask::Mask;
use crate::error::{Error, Result};
use crate::grid::FeatureGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthScale {
    pub scale_id: u16,
    pub height: usize,
    pub width: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub category: String,
    pub clusters: usize,
    pub scales: Vec<SynthScale>,
    pub dim: usize,
    /// Standard deviation of the per-entry Gaussian noise.
    pub noise: f64,
    /// Anomaly kinds to plant; each gets `test_per_kind` test samples.
    pub kinds: Vec<AnomalyTag>,
    pub train: usize,
    pub test_good: usize,
    pub test_per_kind: usize,
    /// Block side in cells of the coarsest scale.
    pub block: usize,
    pub image_height: usize,
    pub image_width: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            category: "synth".into(),
            clusters: 4,
            scales: vec![SynthScale {
                scale_id: 2,
                height: 8,
                width: 8,
            }],
            dim: 16,
            noise: 0.05,
            kinds: vec![AnomalyTag::Logical],
            train: 20,
            test_good: 5,
            test_per_kind: 5,
            block: 2,
            image_height: 64,
            image_width: 64,
            seed: 0,
        }
    }
}

/// One generated sample, in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSample {
    pub id: String,
    pub split: Split,
    pub tag: AnomalyTag,
    /// One grid per scale, in spec order.
    pub grids: Vec<FeatureGrid>,
    pub mask: Option<Mask>,
    /// Perturbed blocks as `(row, col)` in coarsest-scale cells.
    pub blocks: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub spec: SynthSpec,
    /// Cluster means per scale, `K x D` row-major.
    pub means: Vec<Vec<f32>>,
    pub samples: Vec<SynthSample>,
}

impl SynthData {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &SynthSample> {
        self.samples.iter().filter(move |s| s.split == split)
    }
}

impl SynthSpec {
    fn coarsest(&self) -> SynthScale {
        *self.scales.iter().min_by_key(|s| (s.height, s.width)).expect("validated nonempty")
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.clusters < 2 {
            return bad(format!("need at least 2 clusters, got {}", self.clusters));
        }
        if self.scales.is_empty() {
            return bad("need at least one scale".into());
        }
        if self.dim == 0 {
            return bad("dim must be positive".into());
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad(format!("noise {} must be >= 0", self.noise));
        }
        if self.train == 0 {
            return bad("need at least one training sample".into());
        }
        if self.image_height == 0 || self.image_width == 0 {
            return bad("image size must be positive".into());
        }
        let c = self.coarsest();
        let mut ids: Vec<u16> = self.scales.iter().map(|s| s.scale_id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.scales.len() {
            return bad("scale ids must be distinct".into());
        }
        for s in &self.scales {
            if s.height < 2 || s.width < 2 {
                return bad(format!("scale {} is {}x{}; grids must be at least 2x2", s.scale_id, s.height, s.width));
            }
            if s.height % c.height != 0 || s.width % c.width != 0 {
                return bad(format!(
                    "scale {} ({}x{}) is not a multiple of the coarsest grid {}x{}",
                    s.scale_id, s.height, s.width, c.height, c.width
                ));
            }
        }
        if self.block == 0 || self.block > c.height || self.block > c.width {
            return bad(format!("block {} does not fit the coarsest grid {}x{}", self.block, c.height, c.width));
        }
        Ok(())
    }

    /// Cluster owning normalized position `(y, x)`.
    fn cluster_at(&self, y: f64, x: f64) -> usize {
        let side = (self.clusters as f64).sqrt().ceil() as usize;
        let r = ((y * side as f64) as usize).min(side - 1);
        let c = ((x * side as f64) as usize).min(side - 1);
        (r * side + c) % self.clusters
    }

    fn cell_cluster(&self, scale: &SynthScale, i: usize, j: usize) -> usize {
        self.cluster_at((i as f64 + 0.5) / scale.height as f64, (j as f64 + 0.5) / scale.width as f64)
    }
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f32> {
    (0..n).map(|_| StandardNormal.sample(rng)).map(|v: f64| v as f32).collect()
}

/// Cells of scale `s` covered by coarse block `(r, c)`, row-major.
fn block_cells(spec: &SynthSpec, s: &SynthScale, (r, c): (usize, usize)) -> Vec<usize> {
    let coarse = spec.coarsest();
    let fy = s.height / coarse.height;
    let fx = s.width / coarse.width;
    let mut cells = Vec::new();
    for i in r * fy..(r + spec.block) * fy {
        for j in c * fx..(c + spec.block) * fx {
            cells.push(i * s.width + j);
        }
    }
    cells
}

/// Generates a dataset in memory.
pub fn generate(spec: &SynthSpec) -> Result<SynthData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let means: Vec<Vec<f32>> = spec.scales.iter().map(|_| gaussian(&mut rng, spec.clusters * spec.dim)).collect();

    let clean = |si: usize| -> Vec<f32> {
        let s = &spec.scales[si];
        let mut out = Vec::with_capacity(s.height * s.width * spec.dim);
        for i in 0..s.height {
            for j in 0..s.width {
                let k = spec.cell_cluster(s, i, j);
                out.extend_from_slice(&means[si][k * spec.dim..(k + 1) * spec.dim]);
            }
        }
        out
    };
    let noisy = |si: usize, rng: &mut ChaCha8Rng| -> Vec<f32> {
        let mut f = clean(si);
        for v in &mut f {
            let e: f64 = StandardNormal.sample(rng);
            *v += (spec.noise * e) as f32;
        }
        f
    };

    let mut samples = Vec::new();
    let push = |samples: &mut Vec<SynthSample>, id: String, split, tag, feats: Vec<Vec<f32>>, blocks: Vec<(usize, usize)>| -> Result<()> {
        let grids = spec
            .scales
            .iter()
            .zip(feats)
            .map(|(s, f)| FeatureGrid::new(s.height, s.width, spec.dim, s.scale_id, f))
            .collect::<Result<_>>()?;
        let mask = (split == Split::Test).then(|| render_mask(spec, &blocks)).transpose()?;
        samples.push(SynthSample {
            id,
            split,
            tag,
            grids,
            mask,
            blocks,
        });
        Ok(())
    };

    for k in 0..spec.train {
        let feats = (0..spec.scales.len()).map(|si| noisy(si, &mut rng)).collect();
        push(&mut samples, format!("train_{k:03}"), Split::Train, AnomalyTag::Good, feats, vec![])?;
    }
    for k in 0..spec.test_good {
        let feats = (0..spec.scales.len()).map(|si| noisy(si, &mut rng)).collect();
        push(&mut samples, format!("test_good_{k:03}"), Split::Test, AnomalyTag::Good, feats, vec![])?;
    }
    let coarse = spec.coarsest();
    for &kind in &spec.kinds {
        for k in 0..spec.test_per_kind {
            let mut feats: Vec<Vec<f32>> = (0..spec.scales.len()).map(|si| noisy(si, &mut rng)).collect();
            let blocks = match kind {
                AnomalyTag::Logical => {
                    let (a, b) = place_swap(spec, &coarse, &mut rng)?;
                    for (si, s) in spec.scales.iter().enumerate() {
                        for (ca, cb) in block_cells(spec, s, a).into_iter().zip(block_cells(spec, s, b)) {
                            for d in 0..spec.dim {
                                feats[si].swap(ca * spec.dim + d, cb * spec.dim + d);
                            }
                        }
                    }
                    vec![a, b]
                }
                AnomalyTag::Structural => {
                    let a = random_block(spec, &coarse, &mut rng);
                    for (si, s) in spec.scales.iter().enumerate() {
                        for cell in block_cells(spec, s, a) {
                            let v = gaussian(&mut rng, spec.dim);
                            feats[si][cell * spec.dim..(cell + 1) * spec.dim].copy_from_slice(&v);
                        }
                    }
                    vec![a]
                }
                AnomalyTag::Good => return Err(Error::InvalidConfig("\"good\" is not an anomaly kind".into())),
            };
            push(&mut samples, format!("test_{kind}_{k:03}"), Split::Test, kind, feats, blocks)?;
        }
    }
    Ok(SynthData {
        spec: spec.clone(),
        means,
        samples,
    })
}

fn random_block(spec: &SynthSpec, coarse: &SynthScale, rng: &mut ChaCha8Rng) -> (usize, usize) {
    (
        rng.random_range(0..=coarse.height - spec.block),
        rng.random_range(0..=coarse.width - spec.block),
    )
}

/// Two disjoint blocks whose paired cells differ in cluster at every scale.
fn place_swap(spec: &SynthSpec, coarse: &SynthScale, rng: &mut ChaCha8Rng) -> Result<((usize, usize), (usize, usize))> {
    for _ in 0..10_000 {
        let a = random_block(spec, coarse, rng);
        let b = random_block(spec, coarse, rng);
        let disjoint = a.0.abs_diff(b.0) >= spec.block || a.1.abs_diff(b.1) >= spec.block;
        if !disjoint {
            continue;
        }
        let differ = spec.scales.iter().all(|s| {
            block_cells(spec, s, a).into_iter().zip(block_cells(spec, s, b)).all(|(ca, cb)| {
                spec.cell_cluster(s, ca / s.width, ca % s.width) != spec.cell_cluster(s, cb / s.width, cb % s.width)
            })
        });
        if differ {
            return Ok((a, b));
        }
    }
    Err(Error::InvalidConfig(
        "cannot place two swappable blocks with different clusters; use a smaller block or more clusters".into(),
    ))
}

fn render_mask(spec: &SynthSpec, blocks: &[(usize, usize)]) -> Result<Mask> {
    let coarse = spec.coarsest();
    let (h, w) = (spec.image_height, spec.image_width);
    let mut pixels = vec![0u8; h * w];
    for y in 0..h {
        // Coarse cell containing the pixel center.
        let cy = ((y as f64 + 0.5) / h as f64 * coarse.height as f64) as usize;
        for x in 0..w {
            let cx = ((x as f64 + 0.5) / w as f64 * coarse.width as f64) as usize;
            let hit = blocks
                .iter()
                .any(|&(r, c)| (r..r + spec.block).contains(&cy) && (c..c + spec.block).contains(&cx));
            if hit {
                pixels[y * w + x] = 255;
            }
        }
    }
    Mask::new(h, w, pixels)
}

/// Generates a dataset and writes grids, masks and `manifest.toml` under
/// `out_dir`. Returns the manifest.
pub fn synth_dataset(spec: &SynthSpec, out_dir: &Path) -> Result<DatasetManifest> {
    let data = generate(spec)?;
    let mut manifest = DatasetManifest::new(spec.category.clone(), out_dir);
    for s in &data.samples {
        let mut grids = Vec::new();
        for g in &s.grids {
            let rel = PathBuf::from(format!("grids/{}_s{}.fgrd", s.id, g.scale_id()));
            super::write_grid(&out_dir.join(&rel), g)?;
            grids.push(GridRef {
                scale: g.scale_id(),
                path: rel,
            });
        }
        let mask = match &s.mask {
            Some(m) => {
                let rel = PathBuf::from(format!("masks/{}.amsk", s.id));
                super::write_mask(&out_dir.join(&rel), m)?;
                Some(rel)
            }
            None => None,
        };
        manifest.samples.push(Sample {
            id: s.id.clone(),
            split: s.split,
            tag: Some(s.tag),
            mask,
            grids,
            saturation: Vec::new(),
        });
    }
    manifest.save(&out_dir.join("manifest.toml"))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feature(g: &FeatureGrid, cell: usize) -> &[f32] {
        g.cell_feature(cell)
    }

    #[test]
    fn structural_cells_leave_the_clusters() {
        let spec = SynthSpec {
            noise: 0.0,
            kinds: vec![AnomalyTag::Structural],
            ..SynthSpec::default()
        };
        let data = generate(&spec).unwrap();
        let s = data.split(Split::Test).find(|s| s.tag == AnomalyTag::Structural).unwrap();
        let g = &s.grids[0];
        for cell in block_cells(&spec, &spec.scales[0], s.blocks[0]) {
            for k in 0..spec.clusters {
                let mean = &data.means[0][k * spec.dim..(k + 1) * spec.dim];
                assert_ne!(feature(g, cell), mean);
            }
        }
        let m = s.mask.as_ref().unwrap();
        // 2x2 of 8x8 cells on a 64x64 image is 16x16 pixels.
        assert_eq!(m.anomalous_count(), 256);
    }

    #[test]
    fn logical_cells_are_misplaced_normal_features() {
        let spec = SynthSpec {
            noise: 0.0,
            ..SynthSpec::default()
        };
        let data = generate(&spec).unwrap();
        let train = &data.split(Split::Train).next().unwrap().grids[0];
        let scale = spec.scales[0];
        for s in data.split(Split::Test).filter(|s| s.tag == AnomalyTag::Logical) {
            let g = &s.grids[0];
            let perturbed: Vec<usize> = s.blocks.iter().flat_map(|&b| block_cells(&spec, &scale, b)).collect();
            for &cell in &perturbed {
                let f = feature(g, cell);
                let found = (0..g.cells()).filter(|&c| feature(train, c) == f).collect::<Vec<_>>();
                assert!(!found.is_empty());
                assert!(!found.contains(&cell), "feature at {cell} is not misplaced");
            }
            for cell in (0..g.cells()).filter(|c| !perturbed.contains(c)) {
                assert_eq!(feature(g, cell), feature(train, cell));
            }
            assert_eq!(s.mask.as_ref().unwrap().anomalous_count(), 512);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = SynthSpec {
            kinds: vec![AnomalyTag::Logical, AnomalyTag::Structural],
            scales: vec![
                SynthScale { scale_id: 2, height: 8, width: 8 },
                SynthScale { scale_id: 3, height: 4, width: 4 },
            ],
            block: 1,
            ..SynthSpec::default()
        };
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        let other = SynthSpec { seed: 1, ..spec.clone() };
        assert_ne!(generate(&spec).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn rejects_bad_specs() {
        for spec in [
            SynthSpec { clusters: 1, ..SynthSpec::default() },
            SynthSpec { block: 9, ..SynthSpec::default() },
            SynthSpec {
                scales: vec![SynthScale { scale_id: 2, height: 1, width: 8 }],
                ..SynthSpec::default()
            },
            SynthSpec {
                scales: vec![
                    SynthScale { scale_id: 2, height: 8, width: 8 },
                    SynthScale { scale_id: 3, height: 3, width: 3 },
                ],
                ..SynthSpec::default()
            },
        ] {
            assert!(matches!(generate(&spec), Err(Error::InvalidConfig(_))), "{spec:?}");
        }
    }
}

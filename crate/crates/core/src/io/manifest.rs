//! Dataset manifests (TOML).
//!
//! ```toml
//! category = "breakfast_box"
//!
//! [[samples]]
//! id = "train_000"
//! split = "train"
//! grids = [{ scale = 2, path = "grids/train_000_s2.fgrd" }]
//!
//! [[samples]]
//! id = "test_logical_000"
//! split = "test"
//! tag = "logical"
//! mask = "masks/test_logical_000.amsk"
//! grids = [{ scale = 2, path = "grids/test_logical_000_s2.fgrd" }]
//! saturation = [{ region = 1, area = 120.0 }]
//! ```
//!
//! Paths are relative to the manifest's directory.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::mask::{read_mask, Mask};
use crate::error::{Error, Result};
use crate::grid::FeatureGrid;
use crate::learn::ScaleData;
use crate::metrics::{mask_regions, DefectRegion};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnomalyTag {
    Good,
    Structural,
    Logical,
}

impl fmt::Display for AnomalyTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AnomalyTag::Good => "good",
            AnomalyTag::Structural => "structural",
            AnomalyTag::Logical => "logical",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridRef {
    pub scale: u16,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaturationOverride {
    /// Explicit region id (1..=254) in the mask.
    pub region: u8,
    pub area: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sample {
    pub id: String,
    pub split: Split,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<AnomalyTag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<PathBuf>,
    pub grids: Vec<GridRef>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub saturation: Vec<SaturationOverride>,
}

impl Sample {
    /// Tag with the implied default: untagged samples are good.
    pub fn tag(&self) -> AnomalyTag {
        self.tag.unwrap_or(AnomalyTag::Good)
    }

    pub fn grid_path(&self, scale: u16) -> Option<&Path> {
        self.grids.iter().find(|g| g.scale == scale).map(|g| g.path.as_path())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub category: String,
    #[serde(default)]
    pub samples: Vec<Sample>,
    #[serde(skip)]
    root: PathBuf,
}

impl DatasetManifest {
    pub fn new(category: impl Into<String>, root: impl Into<PathBuf>) -> Self {
        Self {
            category: category.into(),
            samples: Vec::new(),
            root: root.into(),
        }
    }

    /// Parses manifest text; relative paths resolve against `root`.
    pub fn parse(text: &str, root: impl Into<PathBuf>) -> Result<Self> {
        let mut m: DatasetManifest = toml::from_str(text).map_err(|e| Error::Manifest(e.to_string()))?;
        m.root = root.into();
        m.validate_structure()?;
        Ok(m)
    }

    /// Loads and fully validates a manifest, including that every referenced
    /// file exists.
    pub fn load(path: &Path) -> Result<Self> {
        if !path.is_file() {
            return Err(Error::Manifest(format!("manifest not found: {}", path.display())));
        }
        let bytes = super::read_file(path)?;
        let text = String::from_utf8(bytes).map_err(|_| Error::Manifest("manifest is not UTF-8".into()))?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let m = Self::parse(&text, root)?;
        m.validate_files()?;
        Ok(m)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Manifest(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        super::write_file(path, self.to_toml()?.as_bytes())
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn resolve(&self, rel: &Path) -> PathBuf {
        self.root.join(rel)
    }

    /// Scale ids shared by every sample, ascending.
    pub fn scales(&self) -> Vec<u16> {
        self.samples
            .first()
            .map(|s| s.grids.iter().map(|g| g.scale).collect::<BTreeSet<_>>().into_iter().collect())
            .unwrap_or_default()
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &Sample> {
        self.samples.iter().filter(move |s| s.split == split)
    }

    pub fn sample(&self, id: &str) -> Option<&Sample> {
        self.samples.iter().find(|s| s.id == id)
    }

    fn validate_structure(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Manifest(msg));
        let scales = self.scales();
        let mut ids = BTreeSet::new();
        for s in &self.samples {
            if !ids.insert(s.id.as_str()) {
                return bad(format!("duplicate sample id {:?}", s.id));
            }
            let mine: Vec<u16> = s.grids.iter().map(|g| g.scale).collect::<BTreeSet<_>>().into_iter().collect();
            if mine.len() != s.grids.len() {
                return bad(format!("sample {:?} lists a scale twice", s.id));
            }
            if mine != scales {
                return bad(format!("sample {:?} has scales {mine:?}, expected {scales:?}", s.id));
            }
            if s.split == Split::Train {
                if s.mask.is_some() {
                    return bad(format!("train sample {:?} carries a mask; training data must be normal", s.id));
                }
                if s.tag() != AnomalyTag::Good {
                    return bad(format!("train sample {:?} is tagged {}", s.id, s.tag()));
                }
            }
            for o in &s.saturation {
                if !(1..=254).contains(&o.region) || !(o.area > 0.0 && o.area.is_finite()) {
                    return bad(format!("sample {:?}: invalid saturation override {o:?}", s.id));
                }
            }
        }
        Ok(())
    }

    /// Checks that every referenced grid and mask file exists.
    pub fn validate_files(&self) -> Result<()> {
        for s in &self.samples {
            let paths = s.grids.iter().map(|g| &g.path).chain(s.mask.as_ref());
            for p in paths {
                let full = self.resolve(p);
                if !full.is_file() {
                    return Err(Error::Manifest(format!("sample {:?}: missing file {}", s.id, full.display())));
                }
            }
        }
        Ok(())
    }

    /// Loads the grid of `sample` at `scale`, checking its scale id.
    pub fn load_grid(&self, sample: &Sample, scale: u16) -> Result<FeatureGrid> {
        let rel = sample
            .grid_path(scale)
            .ok_or_else(|| Error::Manifest(format!("sample {:?} has no grid for scale {scale}", sample.id)))?;
        let grid = super::read_grid(&self.resolve(rel))?;
        if grid.scale_id() != scale {
            return Err(Error::Manifest(format!(
                "sample {:?}: grid file for scale {scale} declares scale {}",
                sample.id,
                grid.scale_id()
            )));
        }
        Ok(grid)
    }

    /// All training grids, grouped by scale.
    pub fn load_training_set(&self) -> Result<Vec<ScaleData>> {
        let train: Vec<&Sample> = self.split(Split::Train).collect();
        if train.is_empty() {
            return Err(Error::EmptyDataset);
        }
        self.scales()
            .into_iter()
            .map(|scale| {
                let grids = train.iter().map(|s| self.load_grid(s, scale)).collect::<Result<_>>()?;
                Ok(ScaleData { scale_id: scale, grids })
            })
            .collect()
    }

    pub fn load_mask(&self, sample: &Sample) -> Result<Option<Mask>> {
        sample.mask.as_ref().map(|p| read_mask(&self.resolve(p))).transpose()
    }

    /// Defect regions of a sample's mask with its saturation overrides.
    pub fn regions(&self, sample: &Sample, mask: &Mask) -> Result<Vec<DefectRegion>> {
        let sat: BTreeMap<u8, f64> = sample.saturation.iter().map(|o| (o.region, o.area)).collect();
        mask_regions(&mask.pixels, mask.height, mask.width, &sat)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = r#"
category = "demo"

[[samples]]
id = "a"
split = "train"
grids = [{ scale = 2, path = "a2.fgrd" }, { scale = 3, path = "a3.fgrd" }]

[[samples]]
id = "b"
split = "test"
tag = "logical"
mask = "b.amsk"
grids = [{ scale = 3, path = "b3.fgrd" }, { scale = 2, path = "b2.fgrd" }]
saturation = [{ region = 4, area = 10.0 }]
"#;

    #[test]
    fn parse_and_round_trip() {
        let m = DatasetManifest::parse(TEXT, "/data").unwrap();
        assert_eq!(m.scales(), vec![2, 3]);
        assert_eq!(m.split(Split::Test).count(), 1);
        assert_eq!(m.sample("b").unwrap().tag(), AnomalyTag::Logical);
        assert_eq!(m.sample("a").unwrap().tag(), AnomalyTag::Good);
        assert_eq!(m.resolve(Path::new("x")), PathBuf::from("/data/x"));
        let again = DatasetManifest::parse(&m.to_toml().unwrap(), "/data").unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn rejects_inconsistent_manifests() {
        let masked_train = TEXT.replacen("split = \"train\"", "split = \"train\"\nmask = \"m.amsk\"", 1);
        assert!(DatasetManifest::parse(&masked_train, "").is_err());
        let dup = TEXT.replace("id = \"b\"", "id = \"a\"");
        assert!(DatasetManifest::parse(&dup, "").is_err());
        let missing_scale = TEXT.replace(", { scale = 2, path = \"b2.fgrd\" }", "");
        assert!(DatasetManifest::parse(&missing_scale, "").is_err());
        let unknown = TEXT.replace("category", "categroy");
        assert!(DatasetManifest::parse(&unknown, "").is_err());
    }

    #[test]
    fn missing_files_and_manifest() {
        let m = DatasetManifest::parse(TEXT, "/nonexistent").unwrap();
        assert!(matches!(m.validate_files(), Err(Error::Manifest(_))));
        let err = DatasetManifest::load(Path::new("/nonexistent/manifest.toml")).unwrap_err();
        assert!(err.to_string().contains("manifest not found"));
    }
}

//! Evaluation report: image AU-ROC, pixel AU-ROC and AU-sPRO per category,
//! overall and per anomaly type.
//!
//! A per-type group holds the anomaly-free test images plus the images of
//! that type, so each type is scored against the same normal set.

use std::collections::BTreeSet;
use std::fmt::Write;

use crate::error::{Error, Result};
use crate::io::mask::Mask;
use crate::io::AnomalyTag;
use crate::metrics::{auroc, spro_curve, DefectRegion};
use crate::score::AnomalyMap;

/// Default FPR integration limit of the sPRO curve.
pub const DEFAULT_FPR_CAP: f64 = 0.05;

/// One scored test image with its ground truth.
#[derive(Debug, Clone)]
pub struct EvalItem {
    pub id: String,
    pub tag: AnomalyTag,
    pub map: AnomalyMap,
    pub mask: Mask,
    pub regions: Vec<DefectRegion>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub category: String,
    /// `all` or an anomaly tag.
    pub group: String,
    pub images: usize,
    pub image_auroc: Option<f64>,
    pub pixel_auroc: Option<f64>,
    pub au_spro: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub fpr_cap: f64,
    pub rows: Vec<ReportRow>,
}

fn defined(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::SingleClass { .. } | Error::NoRegions | Error::NoNegativePixels) => Ok(None),
        Err(e) => Err(e),
    }
}

fn score_group(category: &str, group: &str, items: &[&EvalItem], fpr_cap: f64) -> Result<ReportRow> {
    let image_scores: Vec<f64> = items.iter().map(|it| it.map.image_score() as f64).collect();
    let image_labels: Vec<bool> = items.iter().map(|it| it.tag != AnomalyTag::Good).collect();
    let mut pixel_scores = Vec::new();
    let mut pixel_labels = Vec::new();
    for it in items {
        pixel_scores.extend(it.map.scores().iter().map(|&v| v as f64));
        pixel_labels.extend(it.mask.pixels.iter().map(|&p| p != 0));
    }
    let maps: Vec<AnomalyMap> = items.iter().map(|it| it.map.clone()).collect();
    let regions: Vec<Vec<DefectRegion>> = items.iter().map(|it| it.regions.clone()).collect();
    Ok(ReportRow {
        category: category.to_string(),
        group: group.to_string(),
        images: items.len(),
        image_auroc: defined(auroc(&image_scores, &image_labels))?,
        pixel_auroc: defined(auroc(&pixel_scores, &pixel_labels))?,
        au_spro: defined(spro_curve(&maps, &regions, fpr_cap).map(|c| c.area))?,
    })
}

/// Scores one category: an `all` row, then one row per anomaly type present.
pub fn evaluate(category: &str, items: &[EvalItem], fpr_cap: f64) -> Result<Report> {
    if items.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for it in items {
        if (it.map.height(), it.map.width()) != (it.mask.height, it.mask.width) {
            return Err(Error::dims(
                "anomaly map vs mask",
                format!("{}x{}", it.mask.height, it.mask.width),
                format!("{}x{} ({})", it.map.height(), it.map.width(), it.id),
            ));
        }
    }
    let all: Vec<&EvalItem> = items.iter().collect();
    let mut rows = vec![score_group(category, "all", &all, fpr_cap)?];
    let tags: BTreeSet<AnomalyTag> = items.iter().map(|it| it.tag).filter(|t| *t != AnomalyTag::Good).collect();
    for tag in tags {
        let group: Vec<&EvalItem> = items
            .iter()
            .filter(|it| it.tag == AnomalyTag::Good || it.tag == tag)
            .collect();
        rows.push(score_group(category, &tag.to_string(), &group, fpr_cap)?);
    }
    Ok(Report { fpr_cap, rows })
}

impl Report {
    /// Concatenates per-category reports (which must share the FPR cap).
    pub fn merge(reports: impl IntoIterator<Item = Report>) -> Result<Report> {
        let mut out: Option<Report> = None;
        for r in reports {
            match &mut out {
                None => out = Some(r),
                Some(acc) => {
                    if acc.fpr_cap != r.fpr_cap {
                        return Err(Error::InvalidConfig("cannot merge reports with different FPR caps".into()));
                    }
                    acc.rows.extend(r.rows);
                }
            }
        }
        out.ok_or(Error::EmptyDataset)
    }

    /// Mean over categories of each group, skipping undefined values.
    /// Empty for a single-category report.
    pub fn means(&self) -> Vec<ReportRow> {
        let categories: BTreeSet<&str> = self.rows.iter().map(|r| r.category.as_str()).collect();
        if categories.len() < 2 {
            return Vec::new();
        }
        let groups: Vec<&str> = {
            let mut seen = Vec::new();
            for r in &self.rows {
                if !seen.contains(&r.group.as_str()) {
                    seen.push(r.group.as_str());
                }
            }
            seen
        };
        groups
            .into_iter()
            .map(|g| {
                let rows: Vec<&ReportRow> = self.rows.iter().filter(|r| r.group == g).collect();
                let mean = |f: fn(&ReportRow) -> Option<f64>| {
                    let vals: Vec<f64> = rows.iter().filter_map(|r| f(r)).collect();
                    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
                };
                ReportRow {
                    category: "mean".into(),
                    group: g.to_string(),
                    images: rows.iter().map(|r| r.images).sum(),
                    image_auroc: mean(|r| r.image_auroc),
                    pixel_auroc: mean(|r| r.pixel_auroc),
                    au_spro: mean(|r| r.au_spro),
                }
            })
            .collect()
    }

    /// Human-readable table: classification AU-ROC, then localization.
    pub fn to_text(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{:.4}", v));
        let spro_col = format!("au_spro@{}", self.fpr_cap);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<16} {:<12} {:>6}  {:>12}  {:>12}  {:>14}",
            "category", "group", "images", "image_auroc", "pixel_auroc", spro_col
        );
        for r in self.rows.iter().chain(self.means().iter()) {
            let _ = writeln!(
                out,
                "{:<16} {:<12} {:>6}  {:>12}  {:>12}  {:>14}",
                r.category,
                r.group,
                r.images,
                fmt(r.image_auroc),
                fmt(r.pixel_auroc),
                fmt(r.au_spro)
            );
        }
        out
    }

    /// `category.group.metric = value` lines.
    pub fn to_kv(&self) -> String {
        let mut out = format!("fpr_cap = {}\n", self.fpr_cap);
        for r in self.rows.iter().chain(self.means().iter()) {
            let prefix = format!("{}.{}", r.category, r.group);
            let _ = writeln!(out, "{prefix}.images = {}", r.images);
            for (name, v) in [("image_auroc", r.image_auroc), ("pixel_auroc", r.pixel_auroc), ("au_spro", r.au_spro)] {
                let v = v.map_or_else(|| "nan".to_string(), |v| format!("{v}"));
                let _ = writeln!(out, "{prefix}.{name} = {v}");
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    use crate::metrics::mask_regions;

    fn item(id: &str, tag: AnomalyTag, mask: Vec<u8>, scores: Vec<f32>) -> EvalItem {
        let regions = mask_regions(&mask, 2, 2, &BTreeMap::new()).unwrap();
        EvalItem {
            id: id.into(),
            tag,
            map: AnomalyMap::new(2, 2, scores).unwrap(),
            mask: Mask::new(2, 2, mask).unwrap(),
            regions,
        }
    }

    #[test]
    fn perfect_and_constant_predictors() {
        let good = item("g", AnomalyTag::Good, vec![0; 4], vec![0.0; 4]);
        let bad = item("b", AnomalyTag::Logical, vec![255, 0, 0, 0], vec![1.0, 0.0, 0.0, 0.0]);
        let r = evaluate("c", &[good.clone(), bad.clone()], 0.05).unwrap();
        assert_eq!(r.rows.len(), 2);
        for row in &r.rows {
            assert_eq!(row.image_auroc, Some(1.0));
            assert_eq!(row.pixel_auroc, Some(1.0));
            assert_eq!(row.au_spro, Some(1.0));
        }
        let flat = |mut it: EvalItem| {
            it.map = AnomalyMap::new(2, 2, vec![0.5; 4]).unwrap();
            it
        };
        let r = evaluate("c", &[flat(good), flat(bad)], 0.05).unwrap();
        assert_eq!(r.rows[0].image_auroc, Some(0.5));
        assert!(r.to_text().contains("logical"));
        assert!(r.to_kv().contains("c.all.image_auroc = 0.5"));
        assert!(r.means().is_empty());
        let mut other = r.clone();
        for row in &mut other.rows {
            row.category = "d".into();
            row.image_auroc = Some(1.0);
        }
        let merged = Report::merge([r, other]).unwrap();
        assert_eq!(merged.means()[0].image_auroc, Some(0.75));
        assert!(merged.to_text().contains("mean"));
    }

    #[test]
    fn undefined_metrics_are_reported_as_missing() {
        let good = item("g", AnomalyTag::Good, vec![0; 4], vec![0.0; 4]);
        let r = evaluate("c", &[good], 0.05).unwrap();
        assert_eq!(r.rows[0].image_auroc, None);
        assert!(r.to_text().contains("n/a"));
    }

    #[test]
    fn map_mask_mismatch() {
        let mut it = item("g", AnomalyTag::Good, vec![0; 4], vec![0.0; 4]);
        it.mask = Mask::new(1, 4, vec![0; 4]).unwrap();
        assert!(matches!(evaluate("c", &[it], 0.05), Err(Error::DimMismatch { .. })));
    }
}

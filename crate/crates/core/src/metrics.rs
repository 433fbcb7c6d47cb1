//! Image/pixel AU-ROC and the saturated per-region overlap curve.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::score::AnomalyMap;

/// AU-ROC as the normalized Mann-Whitney U statistic; tied pairs count 1/2.
///
/// The pair count is accumulated exactly in integers (doubled), so the
/// result is a single rounding of `U / (pos * neg)`.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::dims("scores vs labels", scores.len(), labels.len()));
    }
    if let Some(index) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::NonFinite { index });
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass { positives, negatives });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Twice the number of (pos, neg) pairs ranked correctly, ties as one.
    let mut doubled: u128 = 0;
    let mut neg_below: u128 = 0;
    let mut start = 0;
    while start < order.len() {
        let value = scores[order[start]];
        let mut end = start;
        let (mut pos, mut neg) = (0u128, 0u128);
        while end < order.len() && scores[order[end]] == value {
            if labels[order[end]] {
                pos += 1;
            } else {
                neg += 1;
            }
            end += 1;
        }
        doubled += 2 * pos * neg_below + pos * neg;
        neg_below += neg;
        start = end;
    }
    Ok(doubled as f64 / (2.0 * positives as f64 * negatives as f64))
}

/// One ground-truth defect region.
#[derive(Debug, Clone, PartialEq)]
pub struct DefectRegion {
    /// Flat pixel indices into the image's map.
    pub pixels: Vec<usize>,
    /// Overlap area at which the region counts as fully detected.
    pub saturation_area: f64,
}

impl DefectRegion {
    /// A region saturating at its own area (plain PRO).
    pub fn new(pixels: Vec<usize>) -> Result<Self> {
        let area = pixels.len() as f64;
        Self::with_saturation(pixels, area)
    }

    pub fn with_saturation(pixels: Vec<usize>, saturation_area: f64) -> Result<Self> {
        if pixels.is_empty() {
            return Err(Error::NoRegions);
        }
        if !(saturation_area > 0.0 && saturation_area.is_finite()) {
            return Err(Error::InvalidConfig(format!("saturation area {saturation_area} must be > 0")));
        }
        Ok(Self {
            pixels,
            saturation_area,
        })
    }
}

/// Splits a mask into regions.
///
/// Values 1..=254 are explicit region ids; pixels equal to 255 are grouped
/// into 8-connected components. `saturation` overrides the area of explicit
/// region ids.
pub fn mask_regions(mask: &[u8], height: usize, width: usize, saturation: &BTreeMap<u8, f64>) -> Result<Vec<DefectRegion>> {
    if mask.len() != height * width {
        return Err(Error::dims("mask pixels", height * width, mask.len()));
    }
    let mut by_id: BTreeMap<u8, Vec<usize>> = BTreeMap::new();
    for (p, &v) in mask.iter().enumerate() {
        if (1..=254).contains(&v) {
            by_id.entry(v).or_default().push(p);
        }
    }
    let mut regions = Vec::new();
    for (id, pixels) in by_id {
        let area = saturation.get(&id).copied().unwrap_or(pixels.len() as f64);
        regions.push(DefectRegion::with_saturation(pixels, area)?);
    }

    let mut seen = vec![false; mask.len()];
    for start in 0..mask.len() {
        if mask[start] != 255 || seen[start] {
            continue;
        }
        let mut pixels = Vec::new();
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(p) = stack.pop() {
            pixels.push(p);
            let (y, x) = ((p / width) as isize, (p % width) as isize);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (ny, nx) = (y + dy, x + dx);
                    if ny < 0 || nx < 0 || ny >= height as isize || nx >= width as isize {
                        continue;
                    }
                    let q = ny as usize * width + nx as usize;
                    if mask[q] == 255 && !seen[q] {
                        seen[q] = true;
                        stack.push(q);
                    }
                }
            }
        }
        pixels.sort_unstable();
        regions.push(DefectRegion::new(pixels)?);
    }
    Ok(regions)
}

/// sPRO as a function of the false positive rate, and its normalized area.
#[derive(Debug, Clone, PartialEq)]
pub struct SproCurve {
    /// `(fpr, spro)` points at every distinct threshold, starting at `(0, 0)`.
    pub points: Vec<(f64, f64)>,
    /// Area under the curve on `[0, fpr_cap]` divided by `fpr_cap`.
    pub area: f64,
    pub fpr_cap: f64,
}

/// Exact sPRO sweep over all distinct scores.
///
/// A pixel is predicted anomalous when its score is `>=` the threshold.
/// The FPR is taken over the anomaly-free pixels of all images jointly,
/// i.e. the pixels that belong to no region. The area is the trapezoidal
/// integral up to `fpr_cap` (interpolating at the cap), normalized by the cap.
pub fn spro_curve(maps: &[AnomalyMap], regions: &[Vec<DefectRegion>], fpr_cap: f64) -> Result<SproCurve> {
    if !(fpr_cap > 0.0 && fpr_cap <= 1.0) {
        return Err(Error::InvalidConfig(format!("fpr_cap {fpr_cap} outside (0, 1]")));
    }
    if maps.len() != regions.len() {
        return Err(Error::dims("maps vs region lists", maps.len(), regions.len()));
    }
    let region_count: usize = regions.iter().map(Vec::len).sum();
    if region_count == 0 {
        return Err(Error::NoRegions);
    }

    // Per pixel: score and owning region (global index) or None.
    let mut pixels: Vec<(f32, Option<usize>)> = Vec::new();
    let mut saturation = Vec::with_capacity(region_count);
    for (map, rs) in maps.iter().zip(regions) {
        let mut owner: Vec<Option<usize>> = vec![None; map.scores().len()];
        for r in rs {
            let id = saturation.len();
            saturation.push(r.saturation_area);
            for &p in &r.pixels {
                let slot = owner
                    .get_mut(p)
                    .ok_or_else(|| Error::dims("region pixel index", map.scores().len(), p))?;
                *slot = Some(id);
            }
        }
        pixels.extend(map.scores().iter().copied().zip(owner));
    }
    let negatives = pixels.iter().filter(|(_, o)| o.is_none()).count();
    if negatives == 0 {
        return Err(Error::NoNegativePixels);
    }
    pixels.sort_unstable_by(|a, b| b.0.total_cmp(&a.0));

    let mut detected = vec![0usize; region_count];
    let mut overlap_sum = 0.0f64;
    let mut false_pos = 0usize;
    let mut points = vec![(0.0, 0.0)];
    let mut start = 0;
    while start < pixels.len() {
        let value = pixels[start].0;
        while start < pixels.len() && pixels[start].0 == value {
            match pixels[start].1 {
                None => false_pos += 1,
                Some(r) => {
                    let before = (detected[r] as f64 / saturation[r]).min(1.0);
                    detected[r] += 1;
                    overlap_sum += (detected[r] as f64 / saturation[r]).min(1.0) - before;
                }
            }
            start += 1;
        }
        points.push((false_pos as f64 / negatives as f64, overlap_sum / region_count as f64));
    }
    let area = trapezoid_up_to(&points, fpr_cap) / fpr_cap;
    Ok(SproCurve { points, area, fpr_cap })
}

/// Trapezoidal area under a curve with nondecreasing x, cut at `cap`.
fn trapezoid_up_to(points: &[(f64, f64)], cap: f64) -> f64 {
    let mut area = 0.0;
    for w in points.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if x0 >= cap {
            break;
        }
        if x1 <= cap {
            area += (x1 - x0) * (y0 + y1) / 2.0;
        } else {
            let y_cap = y0 + (y1 - y0) * (cap - x0) / (x1 - x0);
            area += (cap - x0) * (y0 + y_cap) / 2.0;
            break;
        }
    }
    area
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auroc_examples() {
        let l = [false, false, true, true];
        assert_eq!(auroc(&[1.0, 2.0, 3.0, 4.0], &l).unwrap(), 1.0);
        assert_eq!(auroc(&[5.0; 4], &l).unwrap(), 0.5);
        let l = [false, true, false, true];
        assert_eq!(auroc(&[3.0, 1.0, 2.0, 4.0], &l).unwrap(), 0.5);
        assert!(matches!(auroc(&[1.0, 2.0], &[true, true]), Err(Error::SingleClass { .. })));
    }

    #[test]
    fn auroc_mixed_ties() {
        // neg: 1, 2; pos: 2, 3 -> pairs: (2>1) 1, (2=2) 0.5, (3>1) 1, (3>2) 1 -> 3.5 / 4.
        let s = [1.0, 2.0, 2.0, 3.0];
        let l = [false, false, true, true];
        assert_eq!(auroc(&s, &l).unwrap(), 0.875);
    }

    fn map(h: usize, w: usize, v: &[f32]) -> AnomalyMap {
        AnomalyMap::new(h, w, v.to_vec()).unwrap()
    }

    #[test]
    fn perfect_map_has_unit_area() {
        let mut scores = vec![0.0f32; 16];
        let mut mask = vec![0u8; 16];
        for p in [5, 6, 9, 10] {
            scores[p] = 1.0;
            mask[p] = 255;
        }
        let regions = mask_regions(&mask, 4, 4, &BTreeMap::new()).unwrap();
        assert_eq!(regions.len(), 1);
        for cap in [0.05, 0.3, 1.0] {
            let c = spro_curve(&[map(4, 4, &scores)], &[regions.clone()], cap).unwrap();
            assert!((c.area - 1.0).abs() < 1e-12, "cap {cap}: {}", c.area);
        }
    }

    #[test]
    fn constant_map_is_a_single_jump() {
        let mut mask = vec![0u8; 16];
        mask[0] = 255;
        mask[15] = 255;
        let regions = mask_regions(&mask, 4, 4, &BTreeMap::new()).unwrap();
        assert_eq!(regions.len(), 2);
        let c = spro_curve(&[map(4, 4, &[0.3; 16])], &[regions], 1.0).unwrap();
        assert_eq!(c.points, vec![(0.0, 0.0), (1.0, 1.0)]);
        assert!((c.area - 0.5).abs() < 1e-15);
        // Capped at 0.05 the straight segment averages 0.025.
        let mut mask = vec![0u8; 16];
        mask[3] = 255;
        let regions = mask_regions(&mask, 4, 4, &BTreeMap::new()).unwrap();
        let c = spro_curve(&[map(4, 4, &[0.3; 16])], &[regions], 0.05).unwrap();
        assert!((c.area - 0.025).abs() < 1e-15);
    }

    #[test]
    fn saturation_caps_overlap() {
        let mut mask = vec![0u8; 16];
        for p in 0..4 {
            mask[p] = 7;
        }
        let sat = BTreeMap::from([(7u8, 2.0)]);
        let regions = mask_regions(&mask, 4, 4, &sat).unwrap();
        assert_eq!(regions[0].saturation_area, 2.0);
        let scores: Vec<f32> = (0..16).map(|p| if p < 2 { 1.0 } else { 0.0 }).collect();
        let c = spro_curve(&[map(4, 4, &scores)], &[regions], 1.0).unwrap();
        // Two of four pixels already saturate the region.
        assert_eq!(c.points[1], (0.0, 1.0));
    }

    #[test]
    fn components_are_eight_connected() {
        #[rustfmt::skip]
        let mask = [
            255, 0, 0,
            0, 255, 0,
            0, 0, 0,
            255, 255, 0,
        ];
        let regions = mask_regions(&mask, 4, 3, &BTreeMap::new()).unwrap();
        assert_eq!(regions.len(), 2);
        assert_eq!(regions[0].pixels, vec![0, 4]);
        assert_eq!(regions[1].pixels, vec![9, 10]);
    }

    #[test]
    fn spro_errors() {
        let m = map(2, 2, &[0.0; 4]);
        assert!(matches!(spro_curve(&[m.clone()], &[vec![]], 0.05), Err(Error::NoRegions)));
        let all = DefectRegion::new(vec![0, 1, 2, 3]).unwrap();
        assert!(matches!(spro_curve(&[m.clone()], &[vec![all]], 0.05), Err(Error::NoNegativePixels)));
        let r = DefectRegion::new(vec![0]).unwrap();
        assert!(spro_curve(&[m], &[vec![r]], 0.0).is_err());
        assert!(DefectRegion::new(vec![]).is_err());
    }
}

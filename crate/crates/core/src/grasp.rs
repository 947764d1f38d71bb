//! Depth-optimal grasp point search over semantic masks.
//!
//! The largest class region is located, its `k` closest-to-camera pixels are
//! collected, and the one nearest the region's bounding-box center is chosen.
//! Ties always resolve to the smallest row-major position.

use serde::Serialize;

use crate::error::{invalid, mismatch, Error, Result};
use crate::imageproc::{DepthMap, SemanticMask};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Region {
    pub class_id: u8,
    /// Row-major ordered pixel coordinates.
    pub pixels: Vec<(usize, usize)>,
}

impl Region {
    pub fn area(&self) -> usize {
        self.pixels.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GraspPoint {
    #[serde(rename = "class")]
    pub class_id: u8,
    pub row: usize,
    pub col: usize,
    pub depth_m: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
#[serde(transparent)]
pub struct GraspPlan {
    pub points: Vec<GraspPoint>,
}

impl GraspPlan {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serialises")
    }
}

/// One region per non-background class present, ordered by class id.
pub fn extract_regions(mask: &SemanticMask) -> Vec<Region> {
    let mut by_class: Vec<Vec<(usize, usize)>> = vec![Vec::new(); 256];
    for r in 0..mask.height {
        for c in 0..mask.width {
            let k = mask.get(r, c);
            if k != 0 {
                by_class[k as usize].push((r, c));
            }
        }
    }
    by_class
        .into_iter()
        .enumerate()
        .filter(|(_, p)| !p.is_empty())
        .map(|(k, pixels)| Region { class_id: k as u8, pixels })
        .collect()
}

/// Largest area, smallest class id on ties.
pub fn largest_region(regions: &[Region]) -> Result<&Region> {
    regions
        .iter()
        .min_by_key(|r| (std::cmp::Reverse(r.area()), r.class_id))
        .ok_or_else(|| Error::Empty("no garment regions".into()))
}

/// Default `k`: one percent of the region area, at least one pixel.
pub fn default_k(area: usize) -> usize {
    area.div_ceil(100).max(1)
}

/// The `min(k, valid)` region pixels with the smallest valid depth.
pub fn depth_top_k(region: &Region, d: &DepthMap, k: usize) -> Result<Vec<(usize, usize)>> {
    if k == 0 {
        return Err(invalid("k must be >= 1"));
    }
    let mut cands: Vec<(f64, usize, usize)> = Vec::with_capacity(region.area());
    for &(r, c) in &region.pixels {
        if r >= d.height || c >= d.width {
            return Err(mismatch("region pixel outside the depth map"));
        }
        let i = r * d.width + c;
        if !d.is_hole(i) {
            cands.push((d.depth[i], r, c));
        }
    }
    if cands.is_empty() {
        return Err(Error::Empty(format!(
            "region of class {} has no valid depth; fill holes first",
            region.class_id
        )));
    }
    cands.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    cands.truncate(k);
    Ok(cands.into_iter().map(|(_, r, c)| (r, c)).collect())
}

/// Center of the axis-aligned bounding rectangle, halves rounded down.
pub fn region_center(region: &Region) -> Result<(usize, usize)> {
    let first = region.pixels.first().ok_or_else(|| Error::Empty("empty region".into()))?;
    let (mut r0, mut r1, mut c0, mut c1) = (first.0, first.0, first.1, first.1);
    for &(r, c) in &region.pixels {
        r0 = r0.min(r);
        r1 = r1.max(r);
        c0 = c0.min(c);
        c1 = c1.max(c);
    }
    Ok(((r0 + r1) / 2, (c0 + c1) / 2))
}

fn dist2(a: (usize, usize), b: (usize, usize)) -> usize {
    let dr = a.0.abs_diff(b.0);
    let dc = a.1.abs_diff(b.1);
    dr * dr + dc * dc
}

/// Grasp point within one region.
pub fn grasp_in_region(region: &Region, d: &DepthMap, k: Option<usize>) -> Result<GraspPoint> {
    let k = k.unwrap_or_else(|| default_k(region.area()));
    let top = depth_top_k(region, d, k)?;
    let center = region_center(region)?;
    let (row, col) = top
        .into_iter()
        .min_by_key(|&p| (dist2(p, center), p))
        .expect("top-k is non-empty");
    Ok(GraspPoint { class_id: region.class_id, row, col, depth_m: d.depth[row * d.width + col] })
}

fn check_dims(mask: &SemanticMask, d: &DepthMap) -> Result<()> {
    if (mask.width, mask.height) != (d.width, d.height) {
        return Err(mismatch(format!(
            "mask is {}x{}, depth is {}x{}",
            mask.width, mask.height, d.width, d.height
        )));
    }
    Ok(())
}

/// Grasp point on the largest garment region. `k = None` uses [`default_k`].
pub fn select_grasp_point(mask: &SemanticMask, d: &DepthMap, k: Option<usize>) -> Result<GraspPoint> {
    check_dims(mask, d)?;
    let regions = extract_regions(mask);
    grasp_in_region(largest_region(&regions)?, d, k)
}

/// Grasp the largest remaining garment, remove its class, repeat.
pub fn plan_grasp_sequence(mask: &SemanticMask, d: &DepthMap, k: Option<usize>) -> Result<GraspPlan> {
    check_dims(mask, d)?;
    let mut regions = extract_regions(mask);
    let mut points = Vec::with_capacity(regions.len());
    while !regions.is_empty() {
        let best = largest_region(&regions)?.class_id;
        let idx = regions.iter().position(|r| r.class_id == best).expect("present");
        let region = regions.remove(idx);
        points.push(grasp_in_region(&region, d, k)?);
    }
    Ok(GraspPlan { points })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask_from(rows: &[&[u8]]) -> SemanticMask {
        let h = rows.len();
        let w = rows[0].len();
        SemanticMask::new(w, h, rows.concat()).unwrap()
    }

    #[test]
    fn background_only_has_no_regions() {
        assert!(extract_regions(&SemanticMask::background(4, 3)).is_empty());
        assert!(plan_grasp_sequence(&SemanticMask::background(4, 3), &DepthMap::new(4, 3, vec![1.0; 12]).unwrap(), None)
            .unwrap()
            .points
            .is_empty());
    }

    #[test]
    fn region_areas_and_tie_rule() {
        let m = mask_from(&[&[2, 2, 0, 5], &[0, 0, 5, 0]]);
        let regions = extract_regions(&m);
        assert_eq!(regions.iter().map(|r| (r.class_id, r.area())).collect::<Vec<_>>(), vec![(2, 2), (5, 2)]);
        assert_eq!(largest_region(&regions).unwrap().class_id, 2);
        assert!(largest_region(&[]).is_err());
    }

    #[test]
    fn center_rounds_down() {
        let r = Region { class_id: 1, pixels: vec![(0, 0), (10, 4)] };
        assert_eq!(region_center(&r).unwrap(), (5, 2));
        let r = Region { class_id: 1, pixels: vec![(5, 7)] };
        assert_eq!(region_center(&r).unwrap(), (5, 7));
        let r = Region { class_id: 1, pixels: vec![(0, 0), (1, 3)] };
        assert_eq!(region_center(&r).unwrap(), (0, 1));
    }

    #[test]
    fn uniform_depth_top_k_is_row_major() {
        let m = SemanticMask::new(3, 3, vec![1; 9]).unwrap();
        let d = DepthMap::new(3, 3, vec![0.8; 9]).unwrap();
        let r = &extract_regions(&m)[0];
        assert_eq!(depth_top_k(r, &d, 3).unwrap(), vec![(0, 0), (0, 1), (0, 2)]);
    }

    #[test]
    fn dimple_is_grasped() {
        let m = SemanticMask::new(5, 5, vec![3; 25]).unwrap();
        let mut depth = vec![1.0; 25];
        depth[5 + 3] = 0.9;
        let d = DepthMap::new(5, 5, depth).unwrap();
        let g = select_grasp_point(&m, &d, Some(1)).unwrap();
        assert_eq!((g.row, g.col, g.class_id), (1, 3, 3));
        assert!((g.depth_m - 0.9).abs() < 1e-12);
    }

    #[test]
    fn region_without_valid_depth_errors() {
        let m = SemanticMask::new(2, 1, vec![1, 1]).unwrap();
        let d = DepthMap::new(2, 1, vec![0.0, 0.0]).unwrap();
        assert!(matches!(select_grasp_point(&m, &d, None), Err(Error::Empty(_))));
    }

    #[test]
    fn plan_orders_by_area_and_serialises() {
        let m = mask_from(&[&[1, 2, 2, 3], &[3, 3, 2, 3]]);
        let d = DepthMap::new(4, 2, vec![0.5; 8]).unwrap();
        let plan = plan_grasp_sequence(&m, &d, None).unwrap();
        assert_eq!(plan.points.iter().map(|p| p.class_id).collect::<Vec<_>>(), vec![3, 2, 1]);
        let v: serde_json::Value = serde_json::from_str(&plan.to_json()).unwrap();
        assert_eq!(v[0]["class"], 3);
        let text = plan.to_json();
        let (ci, ri, coi, di) = (text.find("\"class\"").unwrap(), text.find("\"row\"").unwrap(), text.find("\"col\"").unwrap(), text.find("\"depth_m\"").unwrap());
        assert!(ci < ri && ri < coi && coi < di);
    }
}

use super::types::DepthMap;
use crate::error::{invalid, Error, Result};

/// Parameters shared by both enhancement stages.
///
/// `sigma_i` is measured on depth normalised to `[0, 1]` per image.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BilateralParams {
    pub sigma_s: f64,
    pub sigma_i: f64,
    pub window: usize,
}

impl Default for BilateralParams {
    fn default() -> Self {
        Self { sigma_s: 2.0, sigma_i: 0.1, window: 5 }
    }
}

impl BilateralParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_s > 0.0 && self.sigma_i > 0.0) {
            return Err(invalid("bilateral sigmas must be > 0"));
        }
        if self.window < 3 || self.window.is_multiple_of(2) {
            return Err(invalid(format!("bilateral window must be odd and >= 3, got {}", self.window)));
        }
        Ok(())
    }
}

fn span_of(d: &DepthMap) -> f64 {
    match d.valid_range() {
        Some((lo, hi)) if hi > lo => hi - lo,
        _ => 1.0,
    }
}

/// Edge-preserving smoothing over valid pixels. Holes are left untouched and
/// never contribute to a neighbourhood.
pub fn bilateral_filter(d: &DepthMap, params: BilateralParams) -> Result<DepthMap> {
    params.validate()?;
    let (w, h) = (d.width, d.height);
    let span = span_of(d);
    let rad = (params.window / 2) as isize;
    let two_ss = 2.0 * params.sigma_s * params.sigma_s;
    let two_si = 2.0 * params.sigma_i * params.sigma_i;
    let mut out = d.depth.clone();
    for r in 0..h as isize {
        for c in 0..w as isize {
            let p = r as usize * w + c as usize;
            if !d.valid[p] {
                continue;
            }
            let dp = d.depth[p];
            let (mut num, mut den) = (0.0, 0.0);
            for dr in -rad..=rad {
                for dc in -rad..=rad {
                    let (qr, qc) = (r + dr, c + dc);
                    if qr < 0 || qc < 0 || qr >= h as isize || qc >= w as isize {
                        continue;
                    }
                    let q = qr as usize * w + qc as usize;
                    if !d.valid[q] {
                        continue;
                    }
                    let diff = (d.depth[q] - dp) / span;
                    let wgt = (-((dr * dr + dc * dc) as f64) / two_ss - diff * diff / two_si).exp();
                    num += wgt * d.depth[q];
                    den += wgt;
                }
            }
            // den >= 1 from the centre pixel
            out[p] = num / den;
        }
    }
    Ok(DepthMap { width: w, height: h, depth: out, valid: d.valid.clone() })
}

pub fn fill_holes(d: &DepthMap) -> Result<DepthMap> {
    fill_holes_with(d, BilateralParams::default())
}

/// Gradient- and distance-weighted hole interpolation, growing inward from
/// the hole boundary one ring per pass until every pixel is valid. Holes with
/// no valid pixel within the current radius wait for a later pass; the radius
/// grows only when a pass fills nothing.
///
/// A pixel `q` contributes to hole `p` with weight
/// `exp(-|grad D(q)|^2 / 2 sigma_s^2) * exp(-|p - q|^2 / 2 sigma_s^2)`,
/// gradients taken on normalised depth. `sigma_i` is not used here.
pub fn fill_holes_with(d: &DepthMap, params: BilateralParams) -> Result<DepthMap> {
    params.validate()?;
    if !d.valid.iter().any(|v| *v) {
        return Err(Error::Empty("depth map has no valid pixel to fill from".into()));
    }
    let (w, h) = (d.width, d.height);
    let span = span_of(d);
    let two_ss = 2.0 * params.sigma_s * params.sigma_s;
    let mut depth: Vec<f64> = d.depth.iter().zip(&d.valid).map(|(v, ok)| if *ok { *v } else { 0.0 }).collect();
    let mut valid = d.valid.clone();
    let mut radius: isize = 1;

    while valid.iter().any(|v| !*v) {
        let grad2 = gradient_sq(&depth, &valid, w, h, span);
        let mut updates = Vec::new();
        for r in 0..h as isize {
            for c in 0..w as isize {
                let p = r as usize * w + c as usize;
                if valid[p] {
                    continue;
                }
                let (mut num, mut den) = (0.0, 0.0);
                let (mut snum, mut sden) = (0.0, 0.0);
                for dr in -radius..=radius {
                    for dc in -radius..=radius {
                        let (qr, qc) = (r + dr, c + dc);
                        if qr < 0 || qc < 0 || qr >= h as isize || qc >= w as isize {
                            continue;
                        }
                        let q = qr as usize * w + qc as usize;
                        if !valid[q] {
                            continue;
                        }
                        let ws = (-((dr * dr + dc * dc) as f64) / two_ss).exp();
                        let wgt = ws * (-grad2[q] / two_ss).exp();
                        num += wgt * depth[q];
                        den += wgt;
                        snum += ws * depth[q];
                        sden += ws;
                    }
                }
                if den > 1e-300 {
                    updates.push((p, num / den));
                } else if sden > 0.0 {
                    // every neighbour sits on a steep edge
                    updates.push((p, snum / sden));
                }
            }
        }
        if updates.is_empty() {
            radius += 1;
            continue;
        }
        for (p, v) in updates {
            depth[p] = v;
            valid[p] = true;
        }
    }
    Ok(DepthMap { width: w, height: h, depth, valid })
}

/// Squared gradient magnitude of normalised depth from valid neighbours.
fn gradient_sq(depth: &[f64], valid: &[bool], w: usize, h: usize, span: f64) -> Vec<f64> {
    let at = |r: isize, c: isize| -> Option<f64> {
        if r < 0 || c < 0 || r >= h as isize || c >= w as isize {
            return None;
        }
        let i = r as usize * w + c as usize;
        valid[i].then(|| depth[i] / span)
    };
    let diff = |a: Option<f64>, m: f64, b: Option<f64>| match (a, b) {
        (Some(a), Some(b)) => (b - a) / 2.0,
        (Some(a), None) => m - a,
        (None, Some(b)) => b - m,
        (None, None) => 0.0,
    };
    let mut g = vec![0.0; w * h];
    for r in 0..h as isize {
        for c in 0..w as isize {
            let i = r as usize * w + c as usize;
            if !valid[i] {
                continue;
            }
            let m = depth[i] / span;
            let gx = diff(at(r, c - 1), m, at(r, c + 1));
            let gy = diff(at(r - 1, c), m, at(r + 1, c));
            g[i] = gx * gx + gy * gy;
        }
    }
    g
}

/// Bilateral smoothing followed by hole filling.
pub fn enhance_depth(d: &DepthMap, params: BilateralParams) -> Result<DepthMap> {
    let smooth = bilateral_filter(d, params)?;
    fill_holes_with(&smooth, params)
}

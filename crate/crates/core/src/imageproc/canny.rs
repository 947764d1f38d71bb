use std::collections::VecDeque;

use super::filter::gaussian_blur;
use super::types::{BinaryMask, GrayImage};
use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CannyParams {
    pub sigma: f64,
    /// Hysteresis thresholds as fractions of the maximum gradient magnitude.
    pub low: f64,
    pub high: f64,
}

impl Default for CannyParams {
    fn default() -> Self {
        Self { sigma: 1.4, low: 0.1, high: 0.3 }
    }
}

impl CannyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(invalid(format!("canny sigma must be > 0, got {}", self.sigma)));
        }
        if !(0.0 <= self.low && self.low < self.high && self.high <= 1.0) {
            return Err(invalid(format!(
                "canny thresholds need 0 <= low < high <= 1, got {} / {}",
                self.low, self.high
            )));
        }
        Ok(())
    }
}

/// Sobel gradients with replicated borders.
fn sobel(p: &[f64], w: usize, h: usize) -> (Vec<f64>, Vec<f64>) {
    let at = |r: isize, c: isize| {
        let r = r.clamp(0, h as isize - 1) as usize;
        let c = c.clamp(0, w as isize - 1) as usize;
        p[r * w + c]
    };
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    for r in 0..h as isize {
        for c in 0..w as isize {
            let i = r as usize * w + c as usize;
            gx[i] = (at(r - 1, c + 1) + 2.0 * at(r, c + 1) + at(r + 1, c + 1))
                - (at(r - 1, c - 1) + 2.0 * at(r, c - 1) + at(r + 1, c - 1));
            gy[i] = (at(r + 1, c - 1) + 2.0 * at(r + 1, c) + at(r + 1, c + 1))
                - (at(r - 1, c - 1) + 2.0 * at(r - 1, c) + at(r - 1, c + 1));
        }
    }
    (gx, gy)
}

/// Smoothed Sobel gradients and their magnitude.
fn gradients(img: &GrayImage, sigma: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let smooth = gaussian_blur(&img.data, img.width, img.height, sigma);
    let (gx, gy) = sobel(&smooth, img.width, img.height);
    let mag = gx.iter().zip(&gy).map(|(x, y)| x.hypot(*y)).collect();
    (gx, gy, mag)
}

/// Classic Canny: Gaussian smoothing, Sobel, non-maximum suppression along the
/// quantised gradient direction, double threshold and 8-connected hysteresis.
pub fn canny(img: &GrayImage, params: CannyParams) -> Result<BinaryMask> {
    params.validate()?;
    let (w, h) = (img.width, img.height);
    let mut bits = vec![false; w * h];
    if img.is_empty() {
        return Ok(BinaryMask { width: w, height: h, bits });
    }
    let (gx, gy, mag) = gradients(img, params.sigma);
    let max = mag.iter().cloned().fold(0.0, f64::max);
    if max <= 1e-12 {
        return Ok(BinaryMask { width: w, height: h, bits });
    }

    let m = |r: isize, c: isize| {
        if r < 0 || c < 0 || r >= h as isize || c >= w as isize {
            0.0
        } else {
            mag[r as usize * w + c as usize]
        }
    };
    // Suppressed magnitudes; a pixel survives when it is >= its predecessor and
    // strictly > its successor along the gradient, which keeps exactly one of
    // two equal neighbours.
    let mut thin = vec![0.0; w * h];
    for r in 0..h as isize {
        for c in 0..w as isize {
            let i = r as usize * w + c as usize;
            let v = mag[i];
            if v == 0.0 {
                continue;
            }
            let mut angle = gy[i].atan2(gx[i]).to_degrees();
            if angle < 0.0 {
                angle += 180.0;
            }
            let (dr, dc) = if !(22.5..157.5).contains(&angle) {
                (0, 1)
            } else if angle < 67.5 {
                (1, 1)
            } else if angle < 112.5 {
                (1, 0)
            } else {
                (1, -1)
            };
            if v >= m(r - dr, c - dc) && v > m(r + dr, c + dc) {
                thin[i] = v;
            }
        }
    }

    let lo = params.low * max;
    let hi = params.high * max;
    let mut queue = VecDeque::new();
    for (i, &v) in thin.iter().enumerate() {
        if v >= hi && v > 0.0 {
            bits[i] = true;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        let (r, c) = ((i / w) as isize, (i % w) as isize);
        for dr in -1..=1isize {
            for dc in -1..=1isize {
                let (nr, nc) = (r + dr, c + dc);
                if nr < 0 || nc < 0 || nr >= h as isize || nc >= w as isize {
                    continue;
                }
                let j = nr as usize * w + nc as usize;
                if !bits[j] && thin[j] >= lo && thin[j] > 0.0 {
                    bits[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    Ok(BinaryMask { width: w, height: h, bits })
}

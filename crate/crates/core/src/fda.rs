//! Low-frequency amplitude swapping in the 2-D Fourier domain.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{invalid, mismatch, Result};
use crate::imageproc::RgbImage;

pub const DEFAULT_BETA: f64 = 0.01;

/// DC-centered amplitude and phase planes, one pair per channel.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub width: usize,
    pub height: usize,
    pub amplitude: Vec<Vec<f64>>,
    pub phase: Vec<Vec<f64>>,
}

fn fft2(plane: &mut [Complex64], w: usize, h: usize, inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let (row_fft, col_fft) = if inverse {
        (planner.plan_fft_inverse(w), planner.plan_fft_inverse(h))
    } else {
        (planner.plan_fft_forward(w), planner.plan_fft_forward(h))
    };
    for row in plane.chunks_mut(w) {
        row_fft.process(row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); h];
    for c in 0..w {
        for r in 0..h {
            col[r] = plane[r * w + c];
        }
        col_fft.process(&mut col);
        for r in 0..h {
            plane[r * w + c] = col[r];
        }
    }
    if inverse {
        let s = 1.0 / (w * h) as f64;
        for v in plane.iter_mut() {
            *v *= s;
        }
    }
}

/// Position of unshifted bin `k` in the DC-centered layout.
fn shift(k: usize, n: usize) -> usize {
    (k + n / 2) % n
}

/// Signed frequency of centered position `i`.
fn centered_freq(i: usize, n: usize) -> isize {
    i as isize - (n / 2) as isize
}

impl Spectrum {
    pub fn of_planes(planes: &[Vec<f64>], width: usize, height: usize) -> Self {
        let mut amplitude = Vec::with_capacity(planes.len());
        let mut phase = Vec::with_capacity(planes.len());
        for p in planes {
            let mut buf: Vec<Complex64> = p.iter().map(|v| Complex64::new(*v, 0.0)).collect();
            fft2(&mut buf, width, height, false);
            let mut a = vec![0.0; width * height];
            let mut ph = vec![0.0; width * height];
            for r in 0..height {
                for c in 0..width {
                    let z = buf[r * width + c];
                    let j = shift(r, height) * width + shift(c, width);
                    a[j] = z.norm();
                    ph[j] = z.arg();
                }
            }
            amplitude.push(a);
            phase.push(ph);
        }
        Self { width, height, amplitude, phase }
    }

    pub fn of_image(img: &RgbImage) -> Self {
        let planes: Vec<Vec<f64>> = (0..3).map(|c| img.channel(c)).collect();
        Self::of_planes(&planes, img.width, img.height)
    }

    /// Real part of the inverse transform, one plane per channel (unclipped).
    pub fn inverse(&self) -> Vec<Vec<f64>> {
        let (w, h) = (self.width, self.height);
        self.amplitude
            .iter()
            .zip(&self.phase)
            .map(|(a, ph)| {
                let mut buf = vec![Complex64::new(0.0, 0.0); w * h];
                for r in 0..h {
                    for c in 0..w {
                        let j = shift(r, h) * w + shift(c, w);
                        buf[r * w + c] = Complex64::from_polar(a[j], ph[j]);
                    }
                }
                fft2(&mut buf, w, h, true);
                buf.into_iter().map(|z| z.re).collect()
            })
            .collect()
    }
}

/// Half-side of the swapped square in bins.
pub fn swap_half_side(beta: f64, width: usize, height: usize) -> usize {
    (beta * width.min(height) as f64).floor() as usize
}

fn check_beta(beta: f64) -> Result<()> {
    if !(0.0..=0.5).contains(&beta) {
        return Err(invalid(format!("beta must lie in [0, 0.5], got {beta}")));
    }
    Ok(())
}

/// Source phase everywhere; target amplitude inside the centered
/// `(2b + 1)^2` square, `b = floor(beta * min(H, W))`. `beta = 0` swaps nothing.
pub fn swap_low_frequency(source: &Spectrum, target: &Spectrum, beta: f64) -> Result<Spectrum> {
    check_beta(beta)?;
    if (source.width, source.height) != (target.width, target.height) || source.amplitude.len() != target.amplitude.len() {
        return Err(mismatch("source and target spectra differ in shape"));
    }
    let mut out = source.clone();
    if beta == 0.0 {
        return Ok(out);
    }
    let (w, h) = (source.width, source.height);
    let b = swap_half_side(beta, w, h) as isize;
    for (a_out, a_t) in out.amplitude.iter_mut().zip(&target.amplitude) {
        for r in 0..h {
            if centered_freq(r, h).abs() > b {
                continue;
            }
            for c in 0..w {
                if centered_freq(c, w).abs() <= b {
                    a_out[r * w + c] = a_t[r * w + c];
                }
            }
        }
    }
    Ok(out)
}

/// Transfer result before clipping, one plane per channel.
pub fn fda_transfer_raw(source: &RgbImage, target: &RgbImage, beta: f64) -> Result<Vec<Vec<f64>>> {
    check_beta(beta)?;
    if (source.width, source.height) != (target.width, target.height) {
        return Err(mismatch(format!(
            "source is {}x{}, target is {}x{}",
            source.width, source.height, target.width, target.height
        )));
    }
    if beta == 0.0 {
        return Ok((0..3).map(|c| source.channel(c)).collect());
    }
    let s = Spectrum::of_image(source);
    let t = Spectrum::of_image(target);
    Ok(swap_low_frequency(&s, &t, beta)?.inverse())
}

/// Style transfer from `target` onto `source`, clipped to `[0, 1]`.
pub fn fda_transfer(source: &RgbImage, target: &RgbImage, beta: f64) -> Result<RgbImage> {
    let planes = fda_transfer_raw(source, target, beta)?;
    if beta == 0.0 {
        return Ok(source.clone());
    }
    let clipped: Vec<Vec<f64>> = planes.into_iter().map(|p| p.into_iter().map(|v| v.clamp(0.0, 1.0)).collect()).collect();
    Ok(RgbImage::from_channels(source.width, source.height, [&clipped[0], &clipped[1], &clipped[2]]))
}

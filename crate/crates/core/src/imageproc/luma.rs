use super::types::{GrayImage, HistogramDescriptor, RgbImage};
use crate::error::{invalid, Error, Result};

const WR: f64 = 0.299;
const WG: f64 = 0.587;
const WB: f64 = 0.114;

pub(crate) fn luma_of(px: [f64; 3]) -> f64 {
    (WR * px[0] + WG * px[1] + WB * px[2]).clamp(0.0, 1.0)
}

/// Rec. 601 luma.
pub fn rgb_to_luma(img: &RgbImage) -> GrayImage {
    let data = img
        .data
        .chunks_exact(3)
        .map(|p| luma_of([p[0], p[1], p[2]]))
        .collect();
    GrayImage { width: img.width, height: img.height, data }
}

/// Mean luma of an RGB image on the 0–255 scale.
pub fn mean_luma(img: &RgbImage) -> f64 {
    if img.is_empty() {
        return 0.0;
    }
    let sum: f64 = img.data.chunks_exact(3).map(|p| luma_of([p[0], p[1], p[2]])).sum();
    255.0 * sum / img.len() as f64
}

/// `values[i]` is the fraction of pixels with luma `<= i / (R - 1)`.
pub fn histogram_descriptor(img: &GrayImage, points: usize) -> Result<HistogramDescriptor> {
    if points < 2 {
        return Err(invalid(format!("histogram needs at least 2 points, got {points}")));
    }
    if img.is_empty() {
        return Err(Error::Empty("histogram of an empty image".into()));
    }
    let last = (points - 1) as f64;
    let mut counts = vec![0usize; points];
    for &l in &img.data {
        // smallest i with l <= i/last
        let mut i = (l * last).ceil().clamp(0.0, last) as usize;
        while i > 0 && l <= (i - 1) as f64 / last {
            i -= 1;
        }
        while i < points - 1 && l > i as f64 / last {
            i += 1;
        }
        counts[i] += 1;
    }
    let n = img.len() as f64;
    let mut acc = 0usize;
    let mut values = Vec::with_capacity(points);
    for c in counts {
        acc += c;
        values.push(acc as f64 / n);
    }
    // every pixel is <= 1.0 so the last bin closes the distribution
    *values.last_mut().unwrap() = 1.0;
    let mean = img.data.iter().sum::<f64>() / n;
    Ok(HistogramDescriptor { values, mean_luma: 255.0 * mean })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn white_and_red() {
        let white = RgbImage::filled(3, 2, [1.0; 3]);
        assert!(rgb_to_luma(&white).data.iter().all(|&v| (v - 1.0).abs() < 1e-12));
        let red = RgbImage::filled(3, 2, [1.0, 0.0, 0.0]);
        assert!(rgb_to_luma(&red).data.iter().all(|&v| (v - 0.299).abs() < 1e-12));
    }

    #[test]
    fn luma_matches_scalar_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let img = RgbImage::from_fn(4, 4, |_, _| [rng.random(), rng.random(), rng.random()]);
        let g = rgb_to_luma(&img);
        for r in 0..4 {
            for c in 0..4 {
                let [x, y, z] = img.pixel(r, c);
                assert!((g.get(r, c) - (0.299 * x + 0.587 * y + 0.114 * z)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn black_image_histogram() {
        let h = histogram_descriptor(&GrayImage::filled(5, 5, 0.0), 256).unwrap();
        assert!(h.values.iter().all(|&v| v == 1.0));
        assert_eq!(h.mean_luma, 0.0);
    }

    #[test]
    fn half_black_half_white() {
        let img = GrayImage::from_fn(4, 4, |_, c| if c < 2 { 0.0 } else { 1.0 });
        let h = histogram_descriptor(&img, 256).unwrap();
        assert!(h.values[..255].iter().all(|&v| v == 0.5));
        assert_eq!(h.values[255], 1.0);
        assert_eq!(h.mean_luma, 127.5);
    }

    #[test]
    fn histogram_matches_sort_and_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let img = GrayImage::from_fn(8, 8, |_, _| rng.random());
        let r = 16;
        let h = histogram_descriptor(&img, r).unwrap();
        let mut sorted = img.data.clone();
        sorted.sort_by(f64::total_cmp);
        for i in 0..r {
            let t = i as f64 / (r - 1) as f64;
            let count = sorted.iter().take_while(|&&v| v <= t).count();
            assert_eq!(h.values[i], count as f64 / 64.0, "bin {i}");
        }
    }

    #[test]
    fn empty_or_degenerate_inputs_error() {
        assert!(histogram_descriptor(&GrayImage::filled(0, 0, 0.0), 8).is_err());
        assert!(histogram_descriptor(&GrayImage::filled(2, 2, 0.0), 1).is_err());
    }
}

mod common;

use common::{rng, scene};
use lumigrasp::imageproc::{
    bilateral_filter, canny, enhance_depth, fill_holes, histogram_descriptor, retinex_decompose, rgb_to_luma,
    BilateralParams, CannyParams,
};
use lumigrasp::synth::degrade;
use lumigrasp::{DepthMap, GrayImage, RgbImage};
use rand::Rng;
use rand_distr::{Distribution, Normal};

fn mae(a: &DepthMap, b: &DepthMap) -> f64 {
    a.depth.iter().zip(&b.depth).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

fn noisy(clean: &DepthMap, sigma: f64, seed: u64) -> DepthMap {
    let mut r = rng(seed);
    let n = Normal::new(0.0, sigma).unwrap();
    DepthMap::new(clean.width, clean.height, clean.depth.iter().map(|d| d + n.sample(&mut r)).collect()).unwrap()
}

/// Direct evaluation of the bilateral sum for one pixel.
fn bilateral_at(d: &DepthMap, p: (usize, usize), params: BilateralParams) -> f64 {
    let (lo, hi) = d.valid_range().unwrap();
    let span = if hi > lo { hi - lo } else { 1.0 };
    let rad = (params.window / 2) as i64;
    let dp = d.depth[p.0 * d.width + p.1];
    let (mut num, mut den) = (0.0, 0.0);
    for r in 0..d.height as i64 {
        for c in 0..d.width as i64 {
            let (dr, dc) = (r - p.0 as i64, c - p.1 as i64);
            let q = r as usize * d.width + c as usize;
            if dr.abs() > rad || dc.abs() > rad || !d.valid[q] {
                continue;
            }
            let gs = (-((dr * dr + dc * dc) as f64) / (2.0 * params.sigma_s.powi(2))).exp();
            let gi = (-((d.depth[q] - dp) / span).powi(2) / (2.0 * params.sigma_i.powi(2))).exp();
            num += gs * gi * d.depth[q];
            den += gs * gi;
        }
    }
    num / den
}

#[test]
fn bilateral_matches_direct_sum() {
    let mut r = rng(3);
    let d = DepthMap::new(9, 7, (0..63).map(|_| 0.8 + 0.2 * r.random::<f64>()).collect()).unwrap();
    let params = BilateralParams::default();
    let out = bilateral_filter(&d, params).unwrap();
    for row in 0..7 {
        for col in 0..9 {
            assert!((out.depth[row * 9 + col] - bilateral_at(&d, (row, col), params)).abs() < 1e-12);
        }
    }
}

#[test]
fn bilateral_reduces_gaussian_noise() {
    let clean = scene(11, 48).depth;
    let mut wins = 0;
    for t in 0..100 {
        let input = noisy(&clean, 0.02, t);
        let out = bilateral_filter(&input, BilateralParams::default()).unwrap();
        if mae(&out, &clean) < mae(&input, &clean) {
            wins += 1;
        }
    }
    assert_eq!(wins, 100);
}

#[test]
fn bilateral_and_fill_are_convex() {
    let mut r = rng(5);
    for t in 0..20 {
        let depth: Vec<f64> = (0..144).map(|_| if r.random::<f64>() < 0.1 { 0.0 } else { 0.5 + r.random::<f64>() }).collect();
        let d = DepthMap::new(12, 12, depth).unwrap();
        let (lo, hi) = d.valid_range().unwrap();
        for out in [bilateral_filter(&d, BilateralParams::default()).unwrap(), fill_holes(&d).unwrap()] {
            for (i, v) in out.depth.iter().enumerate() {
                if out.valid[i] {
                    assert!(*v >= lo - 1e-12 && *v <= hi + 1e-12, "trial {t}");
                }
            }
        }
    }
}

fn with_holes(clean: &DepthMap, frac: f64, seed: u64) -> DepthMap {
    let mut r = rng(seed);
    let valid: Vec<bool> = (0..clean.len()).map(|_| r.random::<f64>() >= frac).collect();
    let depth = clean.depth.iter().zip(&valid).map(|(d, v)| if *v { *d } else { 0.0 }).collect();
    DepthMap::with_validity(clean.width, clean.height, depth, valid).unwrap()
}

/// Each hole takes the mean of the valid pixels at the smallest Chebyshev distance.
fn nearest_fill(d: &DepthMap) -> DepthMap {
    let (w, h) = (d.width as i64, d.height as i64);
    let mut out = d.depth.clone();
    for p in 0..d.len() {
        if d.valid[p] {
            continue;
        }
        let (pr, pc) = ((p / d.width) as i64, (p % d.width) as i64);
        for rad in 1..w.max(h) {
            let mut vals = Vec::new();
            for r in pr - rad..=pr + rad {
                for c in pc - rad..=pc + rad {
                    if r < 0 || c < 0 || r >= h || c >= w || (r - pr).abs().max((c - pc).abs()) != rad {
                        continue;
                    }
                    let q = (r * w + c) as usize;
                    if d.valid[q] {
                        vals.push(d.depth[q]);
                    }
                }
            }
            if !vals.is_empty() {
                out[p] = vals.iter().sum::<f64>() / vals.len() as f64;
                break;
            }
        }
    }
    DepthMap::new(d.width, d.height, out).unwrap()
}

#[test]
fn hole_filling_beats_nearest_fill() {
    let mut wins = 0;
    for t in 0..100 {
        let clean = scene(100 + t, 40).depth;
        let d = with_holes(&clean, 0.05, t);
        let holes: Vec<usize> = (0..d.len()).filter(|&i| !d.valid[i]).collect();
        let err = |m: &DepthMap| holes.iter().map(|&i| (m.depth[i] - clean.depth[i]).abs()).sum::<f64>();
        let ours = fill_holes(&d).unwrap();
        assert!(ours.valid.iter().all(|v| *v));
        if err(&ours) < err(&nearest_fill(&d)) {
            wins += 1;
        }
    }
    assert!(wins >= 80, "{wins}/100");
}

#[test]
fn enhancement_leaves_no_holes() {
    let clean = scene(3, 32).depth;
    let out = enhance_depth(&with_holes(&noisy(&clean, 0.02, 1), 0.05, 2), BilateralParams::default()).unwrap();
    assert_eq!(out.hole_count(), 0);
}

#[test]
fn histogram_is_monotone_and_ends_at_one() {
    let mut r = rng(9);
    for _ in 0..20 {
        let img = GrayImage::from_fn(7, 5, |_, _| r.random());
        let h = histogram_descriptor(&img, 32).unwrap();
        assert!(h.values.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(*h.values.last().unwrap(), 1.0);
    }
}

#[test]
fn canny_edge_counts_differ_across_exposures() {
    let s = scene(21, 96);
    let dark = degrade(&s, 0.5).unwrap();
    let p = CannyParams::default();
    let bright_edges = canny(&rgb_to_luma(&s.rgb), p).unwrap().count();
    let dark_edges = canny(&rgb_to_luma(&dark.rgb), p).unwrap().count();
    assert!(bright_edges > 0);
    assert_ne!(bright_edges, dark_edges);
}

#[test]
fn retinex_structure_ignores_global_scale() {
    let s = scene(8, 64);
    let scaled = RgbImage::new(s.rgb.width, s.rgb.height, s.rgb.data.iter().map(|v| v * 0.25).collect()).unwrap();
    let a = retinex_decompose(&s.rgb);
    let b = retinex_decompose(&scaled);
    let worst = a.structure.data.iter().zip(&b.structure.data).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-3, "{worst}");
    let luma = rgb_to_luma(&s.rgb);
    let back = a.reconstruct();
    let err = luma.data.iter().zip(&back.data).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(err < 1e-6, "{err}");
}

mod common;

use common::{rng, scene};
use lumigrasp::fda::{fda_transfer, fda_transfer_raw, swap_half_side, Spectrum};
use lumigrasp::imageproc::mean_luma;
use lumigrasp::synth::degrade;
use lumigrasp::RgbImage;
use rand::Rng;
use std::f64::consts::{PI, TAU};

fn random_image(w: usize, h: usize, seed: u64) -> RgbImage {
    let mut r = rng(seed);
    RgbImage::new(w, h, (0..w * h * 3).map(|_| r.random()).collect()).unwrap()
}

fn phase_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

#[test]
fn amplitude_matches_naive_dft() {
    let img = random_image(6, 5, 1);
    let spec = Spectrum::of_image(&img);
    let (w, h) = (6, 5);
    for ch in 0..3 {
        let plane = img.channel(ch);
        for u in 0..h {
            for v in 0..w {
                let (mut re, mut im) = (0.0, 0.0);
                for r in 0..h {
                    for c in 0..w {
                        let ang = -2.0 * PI * ((u * r) as f64 / h as f64 + (v * c) as f64 / w as f64);
                        re += plane[r * w + c] * ang.cos();
                        im += plane[r * w + c] * ang.sin();
                    }
                }
                let j = ((u + h / 2) % h) * w + (v + w / 2) % w;
                assert!((spec.amplitude[ch][j] - re.hypot(im)).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn transfer_keeps_source_phase() {
    for (t, beta) in [0.01, 0.05, 0.09].into_iter().enumerate() {
        let src = random_image(64, 48, 10 + t as u64);
        let tgt = random_image(64, 48, 20 + t as u64);
        let out = fda_transfer_raw(&src, &tgt, beta).unwrap();
        let s = Spectrum::of_image(&src);
        let o = Spectrum::of_planes(&out, 64, 48);
        for ch in 0..3 {
            for j in 0..64 * 48 {
                if s.amplitude[ch][j] > 1e-6 && o.amplitude[ch][j] > 1e-6 {
                    let gap = phase_gap(s.phase[ch][j], o.phase[ch][j]);
                    assert!(gap < 1e-6, "beta {beta} bin {j}: {gap}");
                }
            }
        }
    }
}

#[test]
fn amplitude_inside_square_comes_from_target() {
    let (w, h) = (40, 32);
    let src = random_image(w, h, 3);
    let tgt = random_image(w, h, 4);
    let beta = 0.05;
    let b = swap_half_side(beta, w, h) as isize;
    let out = Spectrum::of_planes(&fda_transfer_raw(&src, &tgt, beta).unwrap(), w, h);
    let (s, t) = (Spectrum::of_image(&src), Spectrum::of_image(&tgt));
    for ch in 0..3 {
        for r in 0..h {
            for c in 0..w {
                let j = r * w + c;
                let inside = (r as isize - (h / 2) as isize).abs() <= b && (c as isize - (w / 2) as isize).abs() <= b;
                let want = if inside { t.amplitude[ch][j] } else { s.amplitude[ch][j] };
                assert!((out.amplitude[ch][j] - want).abs() < 1e-8 * (1.0 + want));
            }
        }
    }
}

#[test]
fn dark_target_pulls_mean_luma_down() {
    for t in 0..4u64 {
        let bright = scene(5 + 2 * t, 64);
        let dark = degrade(&scene(6 + 2 * t, 64), 0.7).unwrap();
        let out = fda_transfer(&bright.rgb, &dark.rgb, 0.05).unwrap();
        let (got, want) = (mean_luma(&out), mean_luma(&dark.rgb));
        assert!((got - want).abs() <= 0.1 * want, "pair {t}: {got} vs {want}");
        assert!(got < mean_luma(&bright.rgb));
        // before clipping the DC bin carries the target mean exactly
        let raw = fda_transfer_raw(&bright.rgb, &dark.rgb, 0.05).unwrap();
        for (c, plane) in raw.iter().enumerate() {
            let m = |p: &[f64]| p.iter().sum::<f64>() / p.len() as f64;
            assert!((m(plane) - m(&dark.rgb.channel(c))).abs() < 1e-9);
        }
    }
}

#[test]
fn self_transfer_and_zero_beta_are_identities() {
    let src = random_image(33, 21, 8);
    let out = fda_transfer(&src, &src, 0.09).unwrap();
    let err = out.data.iter().zip(&src.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err < 1e-5, "{err}");
    let other = random_image(33, 21, 9);
    assert_eq!(fda_transfer(&src, &other, 0.0).unwrap(), src);
}

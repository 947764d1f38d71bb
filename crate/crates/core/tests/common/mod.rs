#![allow(dead_code)]

use lumigrasp::fusion::{AttentionProjections, Capture, SceneGroup};
use lumigrasp::grasp::{GraspPlan, GraspPoint};
use lumigrasp::synth::{degrade, generate_scene, Scene, SceneSpec};
use lumigrasp::plc::curve_from_params;
use lumigrasp::{DepthMap, FeatureVector, HistogramDescriptor, ResponseLibrary, SemanticMask};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gradient-check error `|a - n| / max(|a|, |n|, 1e-6)`. The floor keeps
/// components that are zero up to roundoff from dividing noise by noise.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

pub fn scene(seed: u64, size: usize) -> Scene {
    generate_scene(&SceneSpec::random(seed, size, size)).unwrap()
}

/// One training group per seed, captured at each level and 8-bit quantized.
pub fn groups(seeds: impl IntoIterator<Item = u64>, levels: &[f64], size: usize) -> Vec<SceneGroup> {
    seeds
        .into_iter()
        .map(|s| {
            let clean = scene(s, size);
            let captures = levels
                .iter()
                .map(|&l| {
                    let d = degrade(&clean, l).unwrap().quantized();
                    Capture { image: d.rgb, depth: d.depth, mask: d.mask }
                })
                .collect();
            SceneGroup { captures }
        })
        .collect()
}

/// Synthetic mask and depth with a sprinkling of holes and quantized depth
/// (so that depth ties actually occur).
pub fn grasp_case(seed: u64) -> (SemanticMask, DepthMap) {
    let mut r = rng(seed);
    let size = r.random_range(16..40);
    let s = scene(seed, size);
    let mut depth = s.depth.quantized();
    for i in 0..depth.len() {
        if r.random::<f64>() < 0.05 {
            depth.valid[i] = false;
            depth.depth[i] = 0.0;
        }
    }
    (s.mask, depth)
}

/// Exhaustive grasp point for one class, written directly from the rules:
/// the k closest valid pixels (row-major on ties), then the one nearest to
/// the bounding-box center (row-major on ties).
pub fn brute_grasp(mask: &SemanticMask, d: &DepthMap, class: u8, k: Option<usize>) -> Option<GraspPoint> {
    let w = mask.width;
    let pix: Vec<usize> = (0..mask.len()).filter(|&i| mask.labels[i] == class).collect();
    if pix.is_empty() {
        return None;
    }
    let k = k.unwrap_or(pix.len().div_ceil(100).max(1));
    let rows: Vec<usize> = pix.iter().map(|i| i / w).collect();
    let cols: Vec<usize> = pix.iter().map(|i| i % w).collect();
    let center = (
        (rows.iter().min().unwrap() + rows.iter().max().unwrap()) / 2,
        (cols.iter().min().unwrap() + cols.iter().max().unwrap()) / 2,
    );
    let valid: Vec<usize> = pix.iter().copied().filter(|&i| !d.is_hole(i)).collect();
    let mut chosen: Vec<usize> = Vec::new();
    // repeated selection of the minimum instead of a sort
    let mut left = valid.clone();
    while chosen.len() < k && !left.is_empty() {
        let mut best = 0;
        for j in 1..left.len() {
            let (a, b) = (left[j], left[best]);
            if d.depth[a] < d.depth[b] || (d.depth[a] == d.depth[b] && a < b) {
                best = j;
            }
        }
        chosen.push(left.remove(best));
    }
    let dist = |i: usize| {
        let (r, c) = ((i / w) as i64, (i % w) as i64);
        (r - center.0 as i64).pow(2) + (c - center.1 as i64).pow(2)
    };
    let p = chosen.into_iter().min_by_key(|&i| (dist(i), i))?;
    Some(GraspPoint { class_id: class, row: p / w, col: p % w, depth_m: d.depth[p] })
}

/// Largest class by pixel count, smallest id on ties.
pub fn brute_largest(mask: &SemanticMask) -> Option<u8> {
    let mut counts = [0usize; 256];
    for l in &mask.labels {
        counts[*l as usize] += 1;
    }
    let mut best: Option<u8> = None;
    for c in 1..256 {
        if counts[c] > 0 && best.is_none_or(|b| counts[c] > counts[b as usize]) {
            best = Some(c as u8);
        }
    }
    best
}

/// Replays the plan rule on a shrinking mask copy.
pub fn brute_plan(mask: &SemanticMask, d: &DepthMap, k: Option<usize>) -> GraspPlan {
    let mut m = mask.clone();
    let mut points = Vec::new();
    while let Some(c) = brute_largest(&m) {
        points.push(brute_grasp(&m, d, c, k).expect("class has valid depth"));
        for l in m.labels.iter_mut() {
            if *l == c {
                *l = 0;
            }
        }
    }
    GraspPlan { points }
}

/// Loss written out from its definition on unrounded parameters.
pub fn sc_loss(params: &[f64], n: usize, points: usize, tau: f64, h: &HistogramDescriptor, f: &FeatureVector, lib: &ResponseLibrary) -> f64 {
    let d: Vec<f64> = (0..n)
        .map(|k| curve_from_params(&params[k * points..(k + 1) * points]).iter().zip(&h.values).map(|(c, v)| (c - v).abs()).sum())
        .collect();
    let z: Vec<f64> = d.iter().map(|x| (-x / tau).exp()).collect();
    let s: f64 = z.iter().sum();
    (0..f.dim())
        .map(|j| {
            let mix: f64 = (0..n).map(|k| z[k] / s * lib.read_slot(k).unwrap().as_slice()[j]).sum();
            (f.as_slice()[j] - mix).abs()
        })
        .sum()
}

/// Attention scores and outputs by explicit loops.
pub fn dense_attention(xq: &Array2<f64>, xkv: &Array2<f64>, p: &AttentionProjections) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let c = p.wq.nrows();
    let mm = |x: &Array2<f64>, w: &Array2<f64>, i: usize, j: usize| (0..c).map(|t| x[[i, t]] * w[[t, j]]).sum::<f64>();
    let (nq, nk) = (xq.nrows(), xkv.nrows());
    let mut scores = vec![vec![0.0; nk]; nq];
    let mut out = vec![vec![0.0; c]; nq];
    for i in 0..nq {
        let raw: Vec<f64> = (0..nk)
            .map(|k| (0..c).map(|j| mm(xq, &p.wq, i, j) * mm(xkv, &p.wk, k, j)).sum::<f64>() / (c as f64).sqrt())
            .collect();
        let z: f64 = raw.iter().map(|v| v.exp()).sum();
        for k in 0..nk {
            scores[i][k] = raw[k].exp() / z;
            for j in 0..c {
                out[i][j] += scores[i][k] * mm(xkv, &p.wv, k, j);
            }
        }
    }
    (scores, out)
}


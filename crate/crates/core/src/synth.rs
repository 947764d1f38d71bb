//! Procedural garment scenes under controllable illumination.
//!
//! A scene is a textured backdrop plane with up to four garment blobs. Each
//! blob is a sum of seeded Gaussians with a class colour and a sinusoidal
//! wrinkle pattern; wrinkle crests sit closer to the camera.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::imageproc::{gaussian_blur, mean_luma, DepthMap, RgbImage, SemanticMask};
use crate::io;

/// Garment class ids (0 is background).
pub const GARMENT_CLASSES: [u8; 8] = [1, 2, 3, 4, 5, 6, 7, 8];
pub const BACKDROP_DEPTH_M: f64 = 1.0;

const CLASS_COLORS: [[f64; 3]; 8] = [
    [0.78, 0.22, 0.20],
    [0.20, 0.45, 0.80],
    [0.25, 0.68, 0.30],
    [0.86, 0.74, 0.22],
    [0.60, 0.30, 0.70],
    [0.92, 0.55, 0.70],
    [0.20, 0.72, 0.74],
    [0.52, 0.36, 0.20],
];
const CLASS_WRINKLE_FREQ: [f64; 8] = [0.35, 0.55, 0.45, 0.25, 0.65, 0.30, 0.50, 0.40];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub garment_count: usize,
    pub classes: Vec<u8>,
    /// 1 is the brightest exposure.
    pub illumination: f64,
}

impl SceneSpec {
    /// Garment count and classes drawn from `seed`.
    pub fn random(seed: u64, width: usize, height: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        let count = rng.random_range(1..=4);
        let mut pool = GARMENT_CLASSES.to_vec();
        let mut classes = Vec::with_capacity(count);
        for _ in 0..count {
            classes.push(pool.remove(rng.random_range(0..pool.len())));
        }
        Self { seed, width, height, garment_count: count, classes, illumination: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(invalid("scene size must be positive"));
        }
        if self.garment_count > 4 || self.classes.len() != self.garment_count {
            return Err(invalid(format!(
                "garment_count must be 0..=4 and match {} classes",
                self.classes.len()
            )));
        }
        if self.classes.iter().any(|c| !GARMENT_CLASSES.contains(c)) {
            return Err(invalid("garment classes must lie in 1..=8"));
        }
        if !(0.0..=1.0).contains(&self.illumination) {
            return Err(invalid(format!("illumination must lie in [0,1], got {}", self.illumination)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegradeParams {
    pub gamma: f64,
    pub gain: f64,
    pub black_crush: f64,
    pub color_temp_shift: f64,
    pub noise_sigma: f64,
    pub blur_sigma: f64,
}

impl DegradeParams {
    /// Fixed monotone schedules; `level = 1` is the identity.
    pub fn for_level(level: f64) -> Self {
        let d = 1.0 - level;
        Self {
            gamma: 1.0 + 2.0 * d,
            gain: level,
            black_crush: 0.05 * d,
            color_temp_shift: 0.1 * d,
            noise_sigma: 0.03 * d,
            blur_sigma: 1.5 * d,
        }
    }

    pub fn identity() -> Self {
        Self::for_level(1.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub rgb: RgbImage,
    pub depth: DepthMap,
    pub mask: SemanticMask,
    pub spec: SceneSpec,
    pub params: DegradeParams,
    pub mean_luma: f64,
}

impl Scene {
    /// 8-bit RGB and millimetre depth, as stored on disk.
    pub fn quantized(&self) -> Self {
        let rgb = self.rgb.quantized();
        let mean_luma = mean_luma(&rgb);
        Self { rgb, depth: self.depth.quantized(), mean_luma, ..self.clone() }
    }
}

struct Blob {
    centers: Vec<(f64, f64, f64, f64)>,
    wrinkle_dir: (f64, f64),
    wrinkle_freq: f64,
    wrinkle_phase: f64,
}

impl Blob {
    fn field(&self, r: f64, c: f64) -> f64 {
        self.centers
            .iter()
            .map(|&(cr, cc, s, a)| a * (-((r - cr).powi(2) + (c - cc).powi(2)) / (2.0 * s * s)).exp())
            .sum()
    }

    fn wrinkle(&self, r: f64, c: f64) -> f64 {
        (self.wrinkle_freq * (r * self.wrinkle_dir.0 + c * self.wrinkle_dir.1) + self.wrinkle_phase).sin()
    }
}

fn random_blob(rng: &mut ChaCha8Rng, class: u8, w: usize, h: usize) -> Blob {
    let scale = w.min(h) as f64;
    let (cr, cc) = (rng.random_range(0.2..0.8) * h as f64, rng.random_range(0.2..0.8) * w as f64);
    let n = rng.random_range(3..=6);
    let centers = (0..n)
        .map(|_| {
            let off = scale * 0.12;
            (
                cr + rng.random_range(-off..off),
                cc + rng.random_range(-off..off),
                scale * rng.random_range(0.06..0.12),
                rng.random_range(0.6..1.0),
            )
        })
        .collect();
    let theta: f64 = rng.random_range(0.0..std::f64::consts::PI);
    Blob {
        centers,
        wrinkle_dir: (theta.sin(), theta.cos()),
        wrinkle_freq: CLASS_WRINKLE_FREQ[class as usize - 1] * 64.0 / scale.max(1.0),
        wrinkle_phase: rng.random_range(0.0..std::f64::consts::TAU),
    }
}

const SUPPORT: f64 = 0.5;
const BACKDROP: [f64; 3] = [0.62, 0.60, 0.56];
const LIGHT_MIN: f64 = 0.15;
const LIGHT_MAX: f64 = 1.25;
const BULGE_M: f64 = 0.04;
const WRINKLE_M: f64 = 0.006;
const LAYER_M: f64 = 0.01;

/// Render the clean scene, then degrade it to `spec.illumination`.
pub fn generate_scene(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let tex_phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let light_dir: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let blobs: Vec<(u8, Blob)> = spec.classes.iter().map(|&k| (k, random_blob(&mut rng, k, w, h))).collect();

    // uneven lighting: a linear ramp across the table in a seeded direction
    let (ly, lx) = (light_dir.sin(), light_dir.cos());
    let span = ((w * w + h * h) as f64).sqrt().max(1.0);
    let (cy, cx) = (h as f64 / 2.0, w as f64 / 2.0);
    let mut rgb = vec![0.0; w * h * 3];
    let mut depth = vec![BACKDROP_DEPTH_M; w * h];
    let mut labels = vec![0u8; w * h];
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            let (rf, cf) = (r as f64, c as f64);
            let ramp = (0.5 + ((rf - cy) * ly + (cf - cx) * lx) / span).clamp(0.0, 1.0);
            let light = LIGHT_MIN + (LIGHT_MAX - LIGHT_MIN) * ramp;
            let t = 0.04 * ((0.21 * rf + tex_phase).sin() * (0.17 * cf).cos());
            let mut albedo = [BACKDROP[0] + t, BACKDROP[1] + t, BACKDROP[2] + t];
            for (layer, (k, b)) in blobs.iter().enumerate() {
                let f = b.field(rf, cf);
                if f <= SUPPORT {
                    continue;
                }
                let crest = b.wrinkle(rf, cf);
                let bulge = ((f - SUPPORT) / (1.0 - SUPPORT)).min(1.0);
                depth[i] = BACKDROP_DEPTH_M - LAYER_M * (layer as f64 + 1.0) - BULGE_M * bulge - WRINKLE_M * (1.0 + crest) * 0.5 * bulge;
                labels[i] = *k;
                let base = CLASS_COLORS[*k as usize - 1];
                let shade = 0.8 + 0.2 * crest;
                albedo = [base[0] * shade, base[1] * shade, base[2] * shade];
            }
            for ch in 0..3 {
                rgb[i * 3 + ch] = (albedo[ch] * light).clamp(0.0, 1.0);
            }
        }
    }
    let rgb = RgbImage::new(w, h, rgb)?;
    let clean = Scene {
        mean_luma: mean_luma(&rgb),
        rgb,
        depth: DepthMap::new(w, h, depth)?,
        mask: SemanticMask::new(w, h, labels)?,
        spec: SceneSpec { illumination: 1.0, ..spec.clone() },
        params: DegradeParams::identity(),
    };
    if spec.illumination < 1.0 {
        degrade(&clean, spec.illumination)
    } else {
        Ok(clean)
    }
}

/// Gain, gamma, black crush, colour-temperature tilt, signal-dependent noise
/// and blur, in that order. Only RGB changes.
pub fn degrade(scene: &Scene, level: f64) -> Result<Scene> {
    if !(0.0..=1.0).contains(&level) {
        return Err(invalid(format!("degradation level must lie in [0,1], got {level}")));
    }
    let p = DegradeParams::for_level(level);
    let mut out = scene.clone();
    out.spec.illumination = level;
    out.params = p;
    if level == 1.0 {
        return Ok(out);
    }
    let (w, h) = (scene.rgb.width, scene.rgb.height);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(scene.spec.seed ^ level.to_bits().rotate_left(17));
    let mut data: Vec<f64> = scene
        .rgb
        .data
        .iter()
        .map(|v| {
            let v = (v * p.gain).powf(p.gamma);
            if v < p.black_crush {
                0.0
            } else {
                v
            }
        })
        .collect();
    for px in data.chunks_mut(3) {
        px[0] = (px[0] * (1.0 - p.color_temp_shift)).clamp(0.0, 1.0);
        px[2] = (px[2] * (1.0 + p.color_temp_shift)).clamp(0.0, 1.0);
    }
    if p.noise_sigma > 0.0 {
        for v in data.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut noise_rng);
            *v = (*v + p.noise_sigma * v.sqrt() * z).clamp(0.0, 1.0);
        }
    }
    let planes: Vec<Vec<f64>> = (0..3)
        .map(|c| {
            let plane: Vec<f64> = data.iter().skip(c).step_by(3).copied().collect();
            gaussian_blur(&plane, w, h, p.blur_sigma)
        })
        .collect();
    out.rgb = RgbImage::from_channels(w, h, [&planes[0], &planes[1], &planes[2]]);
    out.mean_luma = mean_luma(&out.rgb);
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct Meta {
    spec: SceneSpec,
    params: DegradeParams,
    mean_luma: f64,
}

/// Directory name of an illumination level.
pub fn level_dir(level: f64) -> String {
    format!("{level:.3}")
}

/// Write one quantized scene into `dir`.
pub fn write_scene(scene: &Scene, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let q = scene.quantized();
    io::write_rgb_png(&q.rgb, &dir.join("rgb.png"))?;
    io::write_depth_pgm(&q.depth, &dir.join("depth.pgm"))?;
    io::write_mask_png(&q.mask, &dir.join("mask.png"))?;
    let meta = Meta { spec: q.spec.clone(), params: q.params, mean_luma: q.mean_luma };
    fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(())
}

pub fn read_scene(dir: &Path) -> Result<Scene> {
    let meta: Meta = serde_json::from_str(&fs::read_to_string(dir.join("meta.json"))?)?;
    let rgb = io::read_rgb_png(&dir.join("rgb.png"))?;
    let depth = io::read_depth_pgm(&dir.join("depth.pgm"))?;
    let mask = io::read_mask_png(&dir.join("mask.png"))?;
    if (rgb.width, rgb.height) != (depth.width, depth.height) || (rgb.width, rgb.height) != (mask.width, mask.height) {
        return Err(Error::Format(format!("{}: rgb, depth and mask sizes differ", dir.display())));
    }
    Ok(Scene { rgb, depth, mask, spec: meta.spec, params: meta.params, mean_luma: meta.mean_luma })
}

/// `root/<seed>/<level>/{rgb.png, depth.pgm, mask.png, meta.json}`.
pub fn make_corpus(root: &Path, seeds: &[u64], levels: &[f64], width: usize, height: usize) -> Result<Vec<PathBuf>> {
    if seeds.is_empty() || levels.is_empty() {
        return Err(invalid("corpus needs at least one seed and one level"));
    }
    let mut written = Vec::with_capacity(seeds.len() * levels.len());
    for &seed in seeds {
        let clean = generate_scene(&SceneSpec::random(seed, width, height))?;
        for &level in levels {
            let scene = degrade(&clean, level)?;
            let dir = root.join(seed.to_string()).join(level_dir(level));
            write_scene(&scene, &dir)?;
            written.push(dir);
        }
    }
    Ok(written)
}

/// All scenes of a corpus, grouped by seed; groups and levels sorted ascending.
pub fn read_corpus(root: &Path) -> Result<Vec<(u64, Vec<Scene>)>> {
    let mut seeds: Vec<(u64, PathBuf)> = Vec::new();
    for entry in fs::read_dir(root)? {
        let entry = entry?;
        if !entry.file_type()?.is_dir() {
            continue;
        }
        let name = entry.file_name().to_string_lossy().into_owned();
        match name.parse::<u64>() {
            Ok(s) => seeds.push((s, entry.path())),
            Err(_) => log::warn!("ignoring non-seed directory {name}"),
        }
    }
    seeds.sort_by_key(|(s, _)| *s);
    let mut out = Vec::with_capacity(seeds.len());
    for (seed, dir) in seeds {
        let mut levels: Vec<PathBuf> = fs::read_dir(&dir)?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().join("meta.json").is_file())
            .map(|e| e.path())
            .collect();
        levels.sort();
        let scenes = levels.iter().map(|p| read_scene(p)).collect::<Result<Vec<_>>>()?;
        out.push((seed, scenes));
    }
    if out.is_empty() {
        return Err(Error::Empty(format!("no scenes under {}", root.display())));
    }
    Ok(out)
}

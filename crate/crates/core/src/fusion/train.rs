use log::{debug, warn};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::{im2col, PatchGrid};
use super::model::{alignment_loss, label_counts, mask_loss, structure_loss, Model, Variant};
use crate::error::{invalid, Error, Result};
use crate::imageproc::{
    canny, histogram_descriptor, mean_luma, retinex_decompose, rgb_to_luma, CannyParams, DepthMap, GrayImage,
    HistogramDescriptor, RgbImage, SemanticMask,
};
use crate::memory::FeatureVector;
use crate::plc::{plc_sgd_step, spectral_consistency_grad};

/// One exposure of a scene.
#[derive(Clone, Debug, PartialEq)]
pub struct Capture {
    pub image: RgbImage,
    pub depth: DepthMap,
    pub mask: SemanticMask,
}

/// Captures of one scene under different illumination.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneGroup {
    pub captures: Vec<Capture>,
}

impl SceneGroup {
    /// Index of the brightest capture (first on ties).
    pub fn brightest(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, c) in self.captures.iter().enumerate() {
            let m = mean_luma(&c.image);
            if best.is_none_or(|(_, b)| m > b) {
                best = Some((i, m));
            }
        }
        best.map(|(i, _)| i)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainOptions {
    pub alignment_epochs: usize,
    pub structure_epochs: usize,
    pub mask_epochs: usize,
    pub lr: f64,
    pub plc_lr: f64,
    pub w_l1: f64,
    pub w_sc: f64,
    pub w_bce: f64,
    pub w_ce: f64,
    pub canny: CannyParams,
    /// Seeds the per-epoch sample shuffle.
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            alignment_epochs: 30,
            structure_epochs: 30,
            mask_epochs: 30,
            lr: 0.1,
            plc_lr: 1e-2,
            w_l1: 1.0,
            w_sc: 1.0,
            w_bce: 1.0,
            w_ce: 1.0,
            canny: CannyParams::default(),
            seed: 0,
        }
    }
}

impl TrainOptions {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lr", self.lr),
            ("plc_lr", self.plc_lr),
            ("w_l1", self.w_l1),
            ("w_sc", self.w_sc),
            ("w_bce", self.w_bce),
            ("w_ce", self.w_ce),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be a finite value >= 0, got {v}")));
            }
        }
        self.canny.validate()
    }
}

/// Mean loss per epoch for each stage.
#[derive(Clone, Debug, Default, PartialEq, serde::Serialize)]
pub struct TrainLog {
    pub alignment: Vec<f64>,
    pub spectral: Vec<f64>,
    pub structure: Vec<f64>,
    pub mask: Vec<f64>,
}

fn check_finite(model: &Model, stage: &str) -> Result<()> {
    if model.is_finite() {
        Ok(())
    } else {
        Err(Error::Numeric(format!("non-finite weights after {stage} step")))
    }
}

fn shuffled(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx
}

fn mean_row(m: &Array2<f64>) -> FeatureVector {
    let v = m.mean_axis(ndarray::Axis(0)).expect("non-empty feature rows").to_vec();
    FeatureVector::new(v).expect("finite features")
}

struct AlignSample {
    cols: Array2<f64>,
    target: usize,
    hist: HistogramDescriptor,
}

/// Restores every non-brightest capture toward its group's brightest one and
/// records the encoder features in the luminance library.
pub fn train_luminance_alignment(model: &mut Model, groups: &[SceneGroup], epochs: usize, opts: &TrainOptions) -> Result<(Vec<f64>, Vec<f64>)> {
    opts.validate()?;
    let p = model.config.patch;
    let mut targets = Vec::new();
    let mut samples = Vec::new();
    for (g, group) in groups.iter().enumerate() {
        if group.captures.len() < 2 {
            warn!("scene group {g} has a single capture; skipped for alignment");
            continue;
        }
        let best = group.brightest().expect("non-empty group");
        let t = targets.len();
        targets.push(im2col(&group.captures[best].image, p).1);
        for (i, c) in group.captures.iter().enumerate() {
            if i == best {
                continue;
            }
            samples.push(AlignSample {
                cols: im2col(&c.image, p).1,
                target: t,
                hist: histogram_descriptor(&rgb_to_luma(&c.image), model.bank.points())?,
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let (mut curve, mut sc_curve) = (Vec::new(), Vec::new());
    for epoch in 0..epochs {
        let (mut total, mut sc_total) = (0.0, 0.0);
        for &s in &shuffled(samples.len(), &mut rng) {
            let smp = &samples[s];
            let step = alignment_loss(&model.enc_rgb, &model.dec_rgb, &smp.cols, &targets[smp.target]);
            total += step.loss;
            let f = mean_row(&step.features);
            let id = match model.variant {
                Variant::FixedSlot => 0,
                _ => model.bank.match_hard(&smp.hist)?.hard_id,
            };
            model.lib_l.ema_update(id, &f)?;
            if model.variant != Variant::FixedSlot {
                let (sc, grad) = spectral_consistency_grad(&model.bank, &smp.hist, &f, &model.lib_l)?;
                sc_total += sc;
                model.bank = plc_sgd_step(&model.bank, &grad, opts.plc_lr * opts.w_sc)?;
            }
            let lr = opts.lr * opts.w_l1;
            model.enc_rgb.linear.sgd(&step.enc, lr);
            model.dec_rgb.linear.sgd(&step.dec, lr);
            check_finite(model, "alignment")?;
        }
        let n = samples.len().max(1) as f64;
        debug!("alignment epoch {epoch}: L1 {:.5}", total / n);
        curve.push(total / n);
        sc_curve.push(sc_total / n);
    }
    Ok((curve, sc_curve))
}

struct StructSample {
    depth: Array2<f64>,
    target: usize,
    id: usize,
}

/// Canny structure reference of a group's brightest capture, one row per cell.
pub fn structure_target(group: &SceneGroup, patch: usize, params: CannyParams) -> Result<Array2<f64>> {
    let best = group.brightest().ok_or_else(|| Error::Empty("scene group has no captures".into()))?;
    let edges = canny(&rgb_to_luma(&group.captures[best].image), params)?;
    let g = GrayImage {
        width: edges.width,
        height: edges.height,
        data: edges.bits.iter().map(|b| if *b { 1.0 } else { 0.0 }).collect(),
    };
    Ok(im2col(&g, patch).1)
}

/// Learns depth features queried by the luminance slot and records the
/// result in the structure library.
pub fn train_structure(model: &mut Model, groups: &[SceneGroup], epochs: usize, opts: &TrainOptions) -> Result<Vec<f64>> {
    opts.validate()?;
    if epochs == 0 {
        return Ok(Vec::new());
    }
    if model.lib_l.is_empty() {
        return Err(Error::Empty("luminance library must be populated before structure training".into()));
    }
    let p = model.config.patch;
    let mut targets = Vec::new();
    let mut samples = Vec::new();
    for group in groups {
        if group.captures.is_empty() {
            continue;
        }
        let t = targets.len();
        targets.push(structure_target(group, p, opts.canny)?);
        for c in &group.captures {
            samples.push(StructSample { depth: im2col(&c.depth, p).1, target: t, id: model.curve_id(&c.image)? });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(1));
    let mut curve = Vec::new();
    for epoch in 0..epochs {
        let mut total = 0.0;
        for &s in &shuffled(samples.len(), &mut rng) {
            let smp = &samples[s];
            let query = model.lib_l.read_slot_or_nearest(smp.id)?;
            let step = structure_loss(&model.enc_depth, &model.attn_depth, &model.dec_structure, &smp.depth, &query, &targets[smp.target])?;
            total += step.loss;
            model.lib_s.ema_update(smp.id, &mean_row(&step.features))?;
            let lr = opts.lr * opts.w_bce;
            model.enc_depth.linear.sgd(&step.enc, lr);
            model.attn_depth.sgd(&step.attn, lr);
            model.dec_structure.linear.sgd(&step.dec, lr);
            check_finite(model, "structure")?;
        }
        let n = samples.len().max(1) as f64;
        debug!("structure epoch {epoch}: BCE {:.5}", total / n);
        curve.push(total / n);
    }
    Ok(curve)
}

/// Network inputs of one capture for the mask stage.
pub(crate) struct MaskSample {
    pub lum: Array2<f64>,
    pub structure: Array2<f64>,
    pub counts: Array2<f64>,
    pub id: usize,
}

pub(crate) fn mask_sample(model: &Model, c: &Capture) -> Result<MaskSample> {
    let p = model.config.patch;
    let dec = retinex_decompose(&c.image);
    let grid = PatchGrid::new(c.image.width, c.image.height, p);
    if (c.mask.width, c.mask.height) != (c.image.width, c.image.height) {
        return Err(crate::error::mismatch("mask and image sizes differ"));
    }
    Ok(MaskSample {
        lum: im2col(&dec.luminance, p).1,
        structure: im2col(&dec.structure, p).1,
        counts: label_counts(&c.mask, &grid, model.config.classes)?,
        id: model.curve_id(&c.image)?,
    })
}

/// Trains the mask head, both branch encoders and the library attention.
pub fn train_mask(model: &mut Model, groups: &[SceneGroup], epochs: usize, opts: &TrainOptions) -> Result<Vec<f64>> {
    opts.validate()?;
    if epochs == 0 {
        return Ok(Vec::new());
    }
    let use_lib = model.variant != Variant::NoLibrary;
    if use_lib && (model.lib_l.is_empty() || model.lib_s.is_empty()) {
        return Err(Error::Empty("both libraries must be populated before mask training".into()));
    }
    let samples: Vec<MaskSample> = groups
        .iter()
        .flat_map(|g| g.captures.iter())
        .map(|c| mask_sample(model, c))
        .collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(2));
    let mut curve = Vec::new();
    for epoch in 0..epochs {
        let mut total = 0.0;
        for &s in &shuffled(samples.len(), &mut rng) {
            let smp = &samples[s];
            let reads = if use_lib {
                Some((model.lib_l.read_slot_or_nearest(smp.id)?, model.lib_s.read_slot_or_nearest(smp.id)?))
            } else {
                None
            };
            let (loss, g) = mask_loss(&model.mask_parts(), &smp.lum, &smp.structure, reads.as_ref().map(|(a, b)| (a, b)), &smp.counts)?;
            total += loss;
            let lr = opts.lr * opts.w_ce;
            model.enc_rgb.linear.sgd(&g.enc_rgb, lr);
            model.enc_structure.linear.sgd(&g.enc_structure, lr);
            if use_lib {
                model.attn_lum.sgd(&g.attn_lum, lr);
                model.attn_str.sgd(&g.attn_str, lr);
            }
            model.head.sgd(&g.head, lr);
            check_finite(model, "mask")?;
        }
        let n = samples.len().max(1) as f64;
        debug!("mask epoch {epoch}: CE {:.5}", total / n);
        curve.push(total / n);
    }
    Ok(curve)
}

/// Runs alignment, structure and mask training in order.
pub fn train_all(model: &mut Model, groups: &[SceneGroup], opts: &TrainOptions) -> Result<TrainLog> {
    if groups.iter().all(|g| g.captures.is_empty()) {
        return Err(Error::Empty("no training captures".into()));
    }
    let (alignment, spectral) = train_luminance_alignment(model, groups, opts.alignment_epochs, opts)?;
    let structure = train_structure(model, groups, opts.structure_epochs, opts)?;
    let mask = train_mask(model, groups, opts.mask_epochs, opts)?;
    Ok(TrainLog { alignment, spectral, structure, mask })
}

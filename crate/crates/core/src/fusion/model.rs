use ndarray::{concatenate, s, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::attention::{attention_backward, attention_rows, AttentionCache, AttentionGrad, AttentionProjections};
use super::head::{HeadCache, MaskHead, MaskHeadGrad};
use super::layers::{im2col, FeatureMap, LinearGrad, PatchDecoder, PatchEncoder, PatchGrid};
use crate::error::{invalid, Error, Result};
use crate::imageproc::{histogram_descriptor, retinex_decompose, rgb_to_luma, RgbImage, SemanticMask};
use crate::memory::{FeatureVector, ResponseLibrary};
use crate::plc::{init_curve_bank, CurveBank};

/// How the response libraries are indexed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Curve-bank index selects the library slot.
    Full,
    /// Every input uses slot 0 (no curve indexing).
    FixedSlot,
    /// The mask head sees encoder features without library enhancement.
    NoLibrary,
}

impl Variant {
    pub fn code(self) -> u32 {
        match self {
            Variant::Full => 0,
            Variant::FixedSlot => 1,
            Variant::NoLibrary => 2,
        }
    }

    pub fn from_code(c: u32) -> Result<Self> {
        match c {
            0 => Ok(Variant::Full),
            1 => Ok(Variant::FixedSlot),
            2 => Ok(Variant::NoLibrary),
            _ => Err(Error::Format(format!("unknown model variant {c}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::FixedSlot => "fixed-slot",
            Variant::NoLibrary => "no-library",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelConfig {
    pub patch: usize,
    pub channels: usize,
    pub classes: usize,
    pub num_curves: usize,
    pub points: usize,
    pub tau: f64,
    pub alpha: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            patch: 8,
            channels: 16,
            classes: 9,
            num_curves: crate::plc::DEFAULT_CURVES,
            points: crate::plc::DEFAULT_POINTS,
            tau: crate::plc::DEFAULT_TAU,
            alpha: crate::memory::DEFAULT_ALPHA,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patch == 0 || self.channels == 0 {
            return Err(invalid("patch and channels must be >= 1"));
        }
        if self.classes < 2 || self.classes > 256 {
            return Err(invalid(format!("classes must lie in 2..=256, got {}", self.classes)));
        }
        if self.num_curves == 0 || self.points < 2 {
            return Err(invalid("curve bank needs N >= 1 and R >= 2"));
        }
        if !(self.tau > 0.0) {
            return Err(invalid("tau must be > 0"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid("alpha must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Every learnable component plus both response libraries.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub variant: Variant,
    pub bank: CurveBank,
    /// Shared RGB encoder (alignment and luminance branch of the mask path).
    pub enc_rgb: PatchEncoder,
    pub dec_rgb: PatchDecoder,
    pub enc_depth: PatchEncoder,
    pub dec_structure: PatchDecoder,
    /// Encoder of the Retinex structure map.
    pub enc_structure: PatchEncoder,
    pub attn_depth: AttentionProjections,
    pub attn_lum: AttentionProjections,
    pub attn_str: AttentionProjections,
    pub head: MaskHead,
    pub lib_l: ResponseLibrary,
    pub lib_s: ResponseLibrary,
}

impl Model {
    pub fn new(config: ModelConfig, variant: Variant, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (p, c) = (config.patch, config.channels);
        let mut bank = init_curve_bank(config.num_curves, config.points, seed ^ 0x5eed_c0de)?;
        bank.tau = config.tau;
        // library value projections start at zero so the enhancement term
        // begins as a no-op and is learned from the mask loss
        let mut attn_lum = AttentionProjections::random(c, &mut rng);
        let mut attn_str = AttentionProjections::random(c, &mut rng);
        attn_lum.wv.fill(0.0);
        attn_str.wv.fill(0.0);
        Ok(Self {
            config,
            variant,
            bank,
            enc_rgb: PatchEncoder::random(p, 3, c, &mut rng),
            dec_rgb: PatchDecoder::random(p, c, 3, &mut rng),
            enc_depth: PatchEncoder::random(p, 1, c, &mut rng),
            dec_structure: PatchDecoder::random(p, c, 1, &mut rng),
            enc_structure: PatchEncoder::random(p, 1, c, &mut rng),
            attn_depth: AttentionProjections::random(c, &mut rng),
            attn_lum,
            attn_str,
            head: MaskHead::random(c, config.classes, &mut rng),
            lib_l: ResponseLibrary::new(config.num_curves, c, config.alpha)?,
            lib_s: ResponseLibrary::new(config.num_curves, c, config.alpha)?,
        })
    }

    /// Library slot used for an image under this model's variant.
    pub fn curve_id(&self, img: &RgbImage) -> Result<usize> {
        match self.variant {
            Variant::FixedSlot => Ok(0),
            _ => {
                let h = histogram_descriptor(&rgb_to_luma(img), self.bank.points())?;
                Ok(self.bank.match_hard(&h)?.hard_id)
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.enc_rgb.linear.is_finite()
            && self.dec_rgb.linear.is_finite()
            && self.enc_depth.linear.is_finite()
            && self.dec_structure.linear.is_finite()
            && self.enc_structure.linear.is_finite()
            && self.attn_depth.is_finite()
            && self.attn_lum.is_finite()
            && self.attn_str.is_finite()
            && self.head.hidden.is_finite()
            && self.head.out.is_finite()
    }

    fn library_reads(&self, id: usize) -> Result<Option<(FeatureVector, FeatureVector)>> {
        if self.variant == Variant::NoLibrary {
            return Ok(None);
        }
        Ok(Some((self.lib_l.read_slot_or_nearest(id)?, self.lib_s.read_slot_or_nearest(id)?)))
    }

    /// Per-cell class logits for an image.
    pub fn mask_logits(&self, img: &RgbImage) -> Result<(PatchGrid, Array2<f64>)> {
        let id = self.curve_id(img)?;
        let reads = self.library_reads(id)?;
        let dec = retinex_decompose(img);
        let (grid, lum_cols) = im2col(&dec.luminance, self.config.patch);
        let (_, str_cols) = im2col(&dec.structure, self.config.patch);
        let lib = reads.as_ref().map(|(l, s)| (l, s));
        let (logits, _) = mask_forward(&self.mask_parts(), &lum_cols, &str_cols, lib)?;
        Ok((grid, logits))
    }

    /// Deterministic per-pixel argmax mask (lowest class id on ties).
    pub fn predict_mask(&self, img: &RgbImage) -> Result<SemanticMask> {
        let (grid, logits) = self.mask_logits(img)?;
        let cell_class: Vec<u8> = logits.rows().into_iter().map(|r| argmax(r.as_slice().unwrap()) as u8).collect();
        let mut labels = Vec::with_capacity(img.width * img.height);
        for r in 0..img.height {
            for c in 0..img.width {
                labels.push(cell_class[grid.cell_of(r, c)]);
            }
        }
        SemanticMask::new(img.width, img.height, labels)
    }

    pub(crate) fn mask_parts(&self) -> MaskParts<'_> {
        MaskParts {
            enc_rgb: &self.enc_rgb,
            enc_structure: &self.enc_structure,
            attn_lum: &self.attn_lum,
            attn_str: &self.attn_str,
            head: &self.head,
        }
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

fn vector_row(v: &FeatureVector) -> Array2<f64> {
    Array2::from_shape_vec((1, v.dim()), v.as_slice().to_vec()).expect("row")
}

/// Library read scaled to unit L2 norm; a zero vector stays zero.
fn unit_row(v: &FeatureVector) -> Array2<f64> {
    let mut row = vector_row(v);
    let n = row.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        row /= n;
    }
    row
}

// ---------------------------------------------------------------------------
// Luminance alignment: D(E(I_n)) against I_max under an L1 loss.

pub struct AlignmentStep {
    pub loss: f64,
    pub enc: LinearGrad,
    pub dec: LinearGrad,
    /// Encoder features of the input, one row per cell.
    pub features: Array2<f64>,
}

/// Mean absolute error between `sigmoid(D(E(x)))` and the target patches.
pub fn alignment_loss(enc: &PatchEncoder, dec: &PatchDecoder, input: &Array2<f64>, target: &Array2<f64>) -> AlignmentStep {
    let f = enc.forward_cols(input);
    let y = dec.linear.forward(&f).mapv(sigmoid);
    let n = y.len() as f64;
    let mut loss = 0.0;
    let mut dz = Array2::zeros(y.raw_dim());
    for ((d, yv), t) in dz.iter_mut().zip(y.iter()).zip(target.iter()) {
        let diff = yv - t;
        loss += diff.abs();
        let sign = if diff > 0.0 { 1.0 } else if diff < 0.0 { -1.0 } else { 0.0 };
        *d = sign / n * yv * (1.0 - yv);
    }
    let (g_dec, d_f) = dec.linear.backward(&f, &dz);
    let g_enc = enc.linear.param_grad(input, &d_f);
    AlignmentStep { loss: loss / n, enc: g_enc, dec: g_dec, features: f }
}

// ---------------------------------------------------------------------------
// Structure modelling: luminance slot queries depth features; the result is
// decoded to a structure map under BCE against a Canny reference.

pub struct StructureStep {
    pub loss: f64,
    pub enc: LinearGrad,
    pub attn: AttentionGrad,
    pub dec: LinearGrad,
    /// `F_de + attention(query, F_de)`, one row per cell.
    pub features: Array2<f64>,
}

pub fn structure_loss(
    enc: &PatchEncoder,
    attn: &AttentionProjections,
    dec: &PatchDecoder,
    depth_cols: &Array2<f64>,
    query: &FeatureVector,
    target: &Array2<f64>,
) -> Result<StructureStep> {
    let f_de = enc.forward_cols(depth_cols);
    let (row, cache) = attention_rows(&vector_row(query), &f_de, attn)?;
    let cells = f_de.nrows();
    let f_s = &f_de + &row.broadcast((cells, row.ncols())).unwrap();
    let z = dec.linear.forward(&f_s);
    let n = z.len() as f64;
    let mut loss = 0.0;
    let mut dz = Array2::zeros(z.raw_dim());
    for ((d, zv), t) in dz.iter_mut().zip(z.iter()).zip(target.iter()) {
        loss += softplus(*zv) - t * zv;
        *d = (sigmoid(*zv) - t) / n;
    }
    let (g_dec, d_fs) = dec.linear.backward(&f_s, &dz);
    // broadcast query: the single attention row feeds every cell
    let d_row = d_fs.sum_axis(Axis(0)).insert_axis(Axis(0));
    let back = attention_backward(&cache, attn, &d_row);
    let d_fde = &d_fs + &back.d_kv;
    let g_enc = enc.linear.param_grad(depth_cols, &d_fde);
    Ok(StructureStep { loss: loss / n, enc: g_enc, attn: back.grad, dec: g_dec, features: f_s })
}

// ---------------------------------------------------------------------------
// Mask prediction: Retinex luminance/structure features, each enhanced by the
// matching library slot, concatenated and classified per cell.

pub(crate) struct MaskParts<'a> {
    pub enc_rgb: &'a PatchEncoder,
    pub enc_structure: &'a PatchEncoder,
    pub attn_lum: &'a AttentionProjections,
    pub attn_str: &'a AttentionProjections,
    pub head: &'a MaskHead,
}

pub(crate) struct MaskCache {
    attn: Option<(AttentionCache, AttentionCache)>,
    head: HeadCache,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaskGrads {
    pub enc_rgb: LinearGrad,
    pub enc_structure: LinearGrad,
    pub attn_lum: AttentionGrad,
    pub attn_str: AttentionGrad,
    pub head: MaskHeadGrad,
}

/// With a library read, each branch is `F + attention(F, slot)`; the slot is
/// the only key, so the attention term is the slot's value projection.
pub(crate) fn mask_forward(
    parts: &MaskParts<'_>,
    lum_cols: &Array2<f64>,
    str_cols: &Array2<f64>,
    lib: Option<(&FeatureVector, &FeatureVector)>,
) -> Result<(Array2<f64>, MaskCache)> {
    let f_l = parts.enc_rgb.forward_cols(lum_cols);
    let f_s = parts.enc_structure.forward_cols(str_cols);
    let (l_en, s_en, attn) = match lib {
        Some((m_l, m_s)) => {
            let (a_l, c_l) = attention_rows(&f_l, &unit_row(m_l), parts.attn_lum)?;
            let (a_s, c_s) = attention_rows(&f_s, &unit_row(m_s), parts.attn_str)?;
            (&f_l + &a_l, &f_s + &a_s, Some((c_l, c_s)))
        }
        None => (f_l, f_s, None),
    };
    let x = concatenate(Axis(1), &[s_en.view(), l_en.view()]).expect("concat");
    let (logits, head) = parts.head.forward(&x);
    Ok((logits, MaskCache { attn, head }))
}

/// Per-cell label histograms over real (unpadded) pixels.
pub fn label_counts(mask: &SemanticMask, grid: &PatchGrid, classes: usize) -> Result<Array2<f64>> {
    let mut counts = Array2::zeros((grid.cells(), classes));
    for r in 0..mask.height {
        for c in 0..mask.width {
            let k = mask.get(r, c) as usize;
            if k >= classes {
                return Err(invalid(format!("class id {k} >= classes ({classes})")));
            }
            counts[[grid.cell_of(r, c), k]] += 1.0;
        }
    }
    Ok(counts)
}

/// Pixel-averaged cross-entropy of nearest-upsampled cell logits.
pub(crate) fn mask_loss(
    parts: &MaskParts<'_>,
    lum_cols: &Array2<f64>,
    str_cols: &Array2<f64>,
    lib: Option<(&FeatureVector, &FeatureVector)>,
    counts: &Array2<f64>,
) -> Result<(f64, MaskGrads)> {
    let (logits, cache) = mask_forward(parts, lum_cols, str_cols, lib)?;
    let pixels: f64 = counts.sum();
    let mut loss = 0.0;
    let mut dz = Array2::zeros(logits.raw_dim());
    for ((z, cnt), mut d) in logits.rows().into_iter().zip(counts.rows()).zip(dz.rows_mut()) {
        let mx = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = mx + z.iter().map(|v| (v - mx).exp()).sum::<f64>().ln();
        let n_cell: f64 = cnt.sum();
        for k in 0..z.len() {
            loss += cnt[k] * (lse - z[k]);
            d[k] = (n_cell * (z[k] - lse).exp() - cnt[k]) / pixels;
        }
    }
    let (g_head, d_x) = parts.head.backward(&cache.head, &dz);
    let c = parts.enc_rgb.channels();
    let d_s_en = d_x.slice(s![.., ..c]).to_owned();
    let d_l_en = d_x.slice(s![.., c..]).to_owned();
    let (d_fl, d_fs, g_al, g_as) = match &cache.attn {
        Some((c_l, c_s)) => {
            let b_l = attention_backward(c_l, parts.attn_lum, &d_l_en);
            let b_s = attention_backward(c_s, parts.attn_str, &d_s_en);
            (&d_l_en + &b_l.d_query, &d_s_en + &b_s.d_query, b_l.grad, b_s.grad)
        }
        None => (d_l_en, d_s_en, AttentionGrad::zeros(c), AttentionGrad::zeros(c)),
    };
    let grads = MaskGrads {
        enc_rgb: parts.enc_rgb.linear.param_grad(lum_cols, &d_fl),
        enc_structure: parts.enc_structure.linear.param_grad(str_cols, &d_fs),
        attn_lum: g_al,
        attn_str: g_as,
        head: g_head,
    };
    Ok((loss / pixels, grads))
}

/// Feature map view of cell rows.
pub fn as_feature_map(grid: &PatchGrid, rows: Array2<f64>) -> FeatureMap {
    FeatureMap::new(grid.gh, grid.gw, rows)
}

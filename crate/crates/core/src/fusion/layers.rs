use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use crate::bytes::quantize;
use crate::imageproc::{DepthMap, GrayImage, RgbImage};
use crate::memory::FeatureVector;

/// Dense feature grid, flattened to `(gh * gw) x channels` in row-major cell order.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    pub gh: usize,
    pub gw: usize,
    pub data: Array2<f64>,
}

impl FeatureMap {
    pub fn new(gh: usize, gw: usize, data: Array2<f64>) -> Self {
        assert_eq!(data.nrows(), gh * gw, "feature rows must equal gh * gw");
        Self { gh, gw, data }
    }

    pub fn channels(&self) -> usize {
        self.data.ncols()
    }

    pub fn cells(&self) -> usize {
        self.gh * self.gw
    }

    /// Mean over cells.
    pub fn mean_pool(&self) -> FeatureVector {
        let m = self.data.mean_axis(Axis(0)).expect("feature map has at least one cell");
        FeatureVector::new(m.to_vec()).expect("finite features")
    }

    pub fn cell(&self, r: usize, c: usize) -> Vec<f64> {
        self.data.row(r * self.gw + c).to_vec()
    }
}

/// Anything that can be cut into patches: interleaved `height x width x channels`.
pub trait PatchSource {
    fn dims(&self) -> (usize, usize, usize);
    fn values(&self) -> std::borrow::Cow<'_, [f64]>;
}

impl PatchSource for RgbImage {
    fn dims(&self) -> (usize, usize, usize) {
        (self.width, self.height, 3)
    }
    fn values(&self) -> std::borrow::Cow<'_, [f64]> {
        std::borrow::Cow::Borrowed(&self.data)
    }
}

impl PatchSource for GrayImage {
    fn dims(&self) -> (usize, usize, usize) {
        (self.width, self.height, 1)
    }
    fn values(&self) -> std::borrow::Cow<'_, [f64]> {
        std::borrow::Cow::Borrowed(&self.data)
    }
}

/// Depth enters the network normalised to `[0, 1]` per image, holes as 0.
impl PatchSource for DepthMap {
    fn dims(&self) -> (usize, usize, usize) {
        (self.width, self.height, 1)
    }
    fn values(&self) -> std::borrow::Cow<'_, [f64]> {
        std::borrow::Cow::Owned(self.normalized().data)
    }
}

/// Cell value layout: patch structure of one image.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PatchGrid {
    pub width: usize,
    pub height: usize,
    pub patch: usize,
    pub gh: usize,
    pub gw: usize,
}

impl PatchGrid {
    pub fn new(width: usize, height: usize, patch: usize) -> Self {
        Self { width, height, patch, gh: height.div_ceil(patch), gw: width.div_ceil(patch) }
    }

    pub fn cells(&self) -> usize {
        self.gh * self.gw
    }

    /// Cell that owns pixel `(r, c)`.
    pub fn cell_of(&self, r: usize, c: usize) -> usize {
        (r / self.patch) * self.gw + c / self.patch
    }
}

fn reflect(i: usize, n: usize) -> usize {
    if i < n {
        return i;
    }
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let m = i % period;
    if m < n {
        m
    } else {
        period - m
    }
}

/// Cut an image into non-overlapping patches, reflect-padding ragged edges.
/// Row `cell` holds values in `(dy, dx, channel)` order.
pub fn im2col(src: &dyn PatchSource, patch: usize) -> (PatchGrid, Array2<f64>) {
    let (w, h, ch) = src.dims();
    let grid = PatchGrid::new(w, h, patch);
    let vals = src.values();
    let mut out = Array2::zeros((grid.cells(), patch * patch * ch));
    for gr in 0..grid.gh {
        for gc in 0..grid.gw {
            let mut row = out.row_mut(gr * grid.gw + gc);
            for dy in 0..patch {
                let y = reflect(gr * patch + dy, h);
                for dx in 0..patch {
                    let x = reflect(gc * patch + dx, w);
                    for c in 0..ch {
                        row[(dy * patch + dx) * ch + c] = vals[(y * w + x) * ch + c];
                    }
                }
            }
        }
    }
    (grid, out)
}

/// Inverse of [`im2col`] restricted to the unpadded image.
pub fn col2im(grid: &PatchGrid, cols: &Array2<f64>, channels: usize) -> Vec<f64> {
    let p = grid.patch;
    let mut out = vec![0.0; grid.width * grid.height * channels];
    for y in 0..grid.height {
        for x in 0..grid.width {
            let row = cols.row(grid.cell_of(y, x));
            let (dy, dx) = (y % p, x % p);
            for c in 0..channels {
                out[(y * grid.width + x) * channels + c] = row[(dy * p + dx) * channels + c];
            }
        }
    }
    out
}

/// Affine map `y = x W + b` applied row-wise.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearGrad {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl LinearGrad {
    pub fn zeros_like(l: &Linear) -> Self {
        Self { weight: Array2::zeros(l.weight.raw_dim()), bias: Array1::zeros(l.bias.raw_dim()) }
    }

    pub fn add_assign(&mut self, other: &LinearGrad) {
        self.weight += &other.weight;
        self.bias += &other.bias;
    }
}

impl Linear {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { weight: Array2::zeros((inputs, outputs)), bias: Array1::zeros(outputs) }
    }

    /// Uniform `[-gain/sqrt(in), gain/sqrt(in)]` weights, zero bias.
    pub fn random(inputs: usize, outputs: usize, gain: f64, rng: &mut impl Rng) -> Self {
        let bound = gain / (inputs as f64).sqrt();
        let weight = Array2::from_shape_fn((inputs, outputs), |_| quantize(bound * (2.0 * rng.random::<f64>() - 1.0)));
        Self { weight, bias: Array1::zeros(outputs) }
    }

    pub fn inputs(&self) -> usize {
        self.weight.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weight.ncols()
    }

    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.weight) + &self.bias
    }

    /// Parameter gradient and input gradient for upstream `dy`.
    pub fn backward(&self, x: &Array2<f64>, dy: &Array2<f64>) -> (LinearGrad, Array2<f64>) {
        let g = LinearGrad { weight: x.t().dot(dy), bias: dy.sum_axis(Axis(0)) };
        (g, dy.dot(&self.weight.t()))
    }

    pub fn param_grad(&self, x: &Array2<f64>, dy: &Array2<f64>) -> LinearGrad {
        LinearGrad { weight: x.t().dot(dy), bias: dy.sum_axis(Axis(0)) }
    }

    pub fn sgd(&mut self, g: &LinearGrad, lr: f64) {
        self.weight.zip_mut_with(&g.weight, |w, d| *w = quantize(*w - lr * d));
        self.bias.zip_mut_with(&g.bias, |b, d| *b = quantize(*b - lr * d));
    }

    pub fn is_finite(&self) -> bool {
        self.weight.iter().all(|v| v.is_finite()) && self.bias.iter().all(|v| v.is_finite())
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }
}

/// Patch-linear encoder: each `patch x patch` block maps to one feature cell.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchEncoder {
    pub patch: usize,
    pub channels_in: usize,
    pub linear: Linear,
}

impl PatchEncoder {
    pub fn random(patch: usize, channels_in: usize, channels: usize, rng: &mut impl Rng) -> Self {
        Self { patch, channels_in, linear: Linear::random(patch * patch * channels_in, channels, 1.0, rng) }
    }

    pub fn channels(&self) -> usize {
        self.linear.outputs()
    }

    pub fn forward_cols(&self, cols: &Array2<f64>) -> Array2<f64> {
        self.linear.forward(cols)
    }

    pub fn encode(&self, img: &dyn PatchSource) -> FeatureMap {
        let (_, _, ch) = img.dims();
        assert_eq!(ch, self.channels_in, "encoder expects {} input channels", self.channels_in);
        let (grid, cols) = im2col(img, self.patch);
        FeatureMap::new(grid.gh, grid.gw, self.forward_cols(&cols))
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Per-cell linear projection back to patch pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchDecoder {
    pub patch: usize,
    pub channels_out: usize,
    pub linear: Linear,
}

impl PatchDecoder {
    pub fn random(patch: usize, channels: usize, channels_out: usize, rng: &mut impl Rng) -> Self {
        Self { patch, channels_out, linear: Linear::random(channels, patch * patch * channels_out, 1.0, rng) }
    }

    /// Pre-sigmoid patch values, one row per cell.
    pub fn logits(&self, f: &FeatureMap) -> Array2<f64> {
        self.linear.forward(&f.data)
    }

    /// Pre-sigmoid values laid out as an interleaved image of `width x height`.
    pub fn decode_raw(&self, f: &FeatureMap, width: usize, height: usize) -> Vec<f64> {
        let grid = PatchGrid { width, height, patch: self.patch, gh: f.gh, gw: f.gw };
        col2im(&grid, &self.logits(f), self.channels_out)
    }

    /// Sigmoid output as an image-like plane stack.
    pub fn decode(&self, f: &FeatureMap, width: usize, height: usize) -> Vec<f64> {
        self.decode_raw(f, width, height).into_iter().map(sigmoid).collect()
    }

    pub fn decode_rgb(&self, f: &FeatureMap, width: usize, height: usize) -> RgbImage {
        assert_eq!(self.channels_out, 3);
        RgbImage { width, height, data: self.decode(f, width, height) }
    }

    pub fn decode_gray(&self, f: &FeatureMap, width: usize, height: usize) -> GrayImage {
        assert_eq!(self.channels_out, 1);
        GrayImage { width, height, data: self.decode(f, width, height) }
    }
}

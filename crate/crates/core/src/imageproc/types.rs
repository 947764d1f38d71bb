use crate::error::{invalid, mismatch, Result};

/// Interleaved RGB image with channel values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(mismatch(format!(
                "rgb data has {} values, expected {}x{}x3",
                data.len(),
                width,
                height
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(invalid(format!("rgb value {v} outside [0,1]")));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&rgb);
        }
        Self { width, height, data }
    }

    /// Build from a per-pixel closure `(row, col) -> [r, g, b]`; values are clamped.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f64; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for r in 0..height {
            for c in 0..width {
                for v in f(r, c) {
                    data.push(v.clamp(0.0, 1.0));
                }
            }
        }
        Self { width, height, data }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pixel(&self, row: usize, col: usize) -> [f64; 3] {
        let i = (row * self.width + col) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Single channel as a flat row-major plane.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.data.iter().skip(c).step_by(3).copied().collect()
    }

    pub fn from_channels(width: usize, height: usize, planes: [&[f64]; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for i in 0..width * height {
            for p in planes {
                data.push(p[i].clamp(0.0, 1.0));
            }
        }
        Self { width, height, data }
    }

    /// Snap every value to the nearest 8-bit level.
    pub fn quantized(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| (v * 255.0).round() / 255.0).collect(),
        }
    }
}

/// Single-channel image with values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(mismatch(format!(
                "gray data has {} values, expected {}x{}",
                data.len(),
                width,
                height
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(invalid(format!("gray value {v} outside [0,1]")));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, v: f64) -> Self {
        Self { width, height, data: vec![v; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c).clamp(0.0, 1.0));
            }
        }
        Self { width, height, data }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }
}

/// Metric depth with a per-pixel validity flag.
///
/// A pixel is a hole when it is flagged invalid, or its depth is non-positive
/// or non-finite.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthMap {
    pub width: usize,
    pub height: usize,
    pub depth: Vec<f64>,
    pub valid: Vec<bool>,
}

impl DepthMap {
    /// Validity is derived from the hole rule.
    pub fn new(width: usize, height: usize, depth: Vec<f64>) -> Result<Self> {
        if depth.len() != width * height {
            return Err(mismatch(format!(
                "depth has {} values, expected {}x{}",
                depth.len(),
                width,
                height
            )));
        }
        let valid = depth.iter().map(|d| d.is_finite() && *d > 0.0).collect();
        Ok(Self { width, height, depth, valid })
    }

    pub fn with_validity(width: usize, height: usize, depth: Vec<f64>, valid: Vec<bool>) -> Result<Self> {
        if depth.len() != width * height || valid.len() != width * height {
            return Err(mismatch("depth and validity arrays must both be width*height"));
        }
        let valid = valid
            .iter()
            .zip(&depth)
            .map(|(&v, d)| v && d.is_finite() && *d > 0.0)
            .collect();
        Ok(Self { width, height, depth, valid })
    }

    pub fn len(&self) -> usize {
        self.depth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depth.is_empty()
    }

    pub fn is_hole(&self, i: usize) -> bool {
        !self.valid[i]
    }

    pub fn hole_count(&self) -> usize {
        self.valid.iter().filter(|v| !**v).count()
    }

    /// Min and max over valid pixels.
    pub fn valid_range(&self) -> Option<(f64, f64)> {
        let mut it = self.depth.iter().zip(&self.valid).filter(|(_, v)| **v).map(|(d, _)| *d);
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), d| (lo.min(d), hi.max(d))))
    }

    /// Round to whole millimetres, the resolution of the on-disk format.
    pub fn quantized(&self) -> Self {
        let depth = self
            .depth
            .iter()
            .zip(&self.valid)
            .map(|(d, v)| if *v { (d * 1000.0).round().clamp(0.0, 65535.0) / 1000.0 } else { 0.0 })
            .collect::<Vec<_>>();
        let valid = depth.iter().map(|d| *d > 0.0).collect();
        Self { width: self.width, height: self.height, depth, valid }
    }

    /// Valid depths rescaled to `[0, 1]` per image; holes map to 0.
    pub fn normalized(&self) -> GrayImage {
        let (lo, hi) = self.valid_range().unwrap_or((0.0, 1.0));
        let span = if hi > lo { hi - lo } else { 1.0 };
        let data = self
            .depth
            .iter()
            .zip(&self.valid)
            .map(|(d, v)| if *v { ((d - lo) / span).clamp(0.0, 1.0) } else { 0.0 })
            .collect();
        GrayImage { width: self.width, height: self.height, data }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl BinaryMask {
    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }
}

/// Per-pixel class ids; 0 is background.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SemanticMask {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u8>,
}

impl SemanticMask {
    pub fn new(width: usize, height: usize, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(mismatch(format!(
                "mask has {} labels, expected {}x{}",
                labels.len(),
                width,
                height
            )));
        }
        Ok(Self { width, height, labels })
    }

    pub fn background(width: usize, height: usize) -> Self {
        Self { width, height, labels: vec![0; width * height] }
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.labels[row * self.width + col]
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Normalised cumulative luma distribution sampled at `R` uniform intensities.
#[derive(Clone, Debug, PartialEq)]
pub struct HistogramDescriptor {
    pub values: Vec<f64>,
    /// Mean luma on the 0–255 scale.
    pub mean_luma: f64,
}

impl HistogramDescriptor {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

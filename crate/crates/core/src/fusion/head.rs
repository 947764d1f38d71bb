use ndarray::Array2;
use rand::Rng;

use super::layers::{Linear, LinearGrad};

/// Two-layer head over concatenated `[structure | luminance]` features:
/// `logits = tanh(x W1 + b1) W2 + b2`.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskHead {
    pub hidden: Linear,
    pub out: Linear,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaskHeadGrad {
    pub hidden: LinearGrad,
    pub out: LinearGrad,
}

pub struct HeadCache {
    x: Array2<f64>,
    h: Array2<f64>,
}

impl MaskHead {
    pub fn random(channels: usize, classes: usize, rng: &mut impl Rng) -> Self {
        Self {
            hidden: Linear::random(2 * channels, channels, 1.0, rng),
            out: Linear::random(channels, classes, 1.0, rng),
        }
    }

    pub fn classes(&self) -> usize {
        self.out.outputs()
    }

    pub fn forward(&self, x: &Array2<f64>) -> (Array2<f64>, HeadCache) {
        let h = self.hidden.forward(x).mapv(f64::tanh);
        let z = self.out.forward(&h);
        (z, HeadCache { x: x.clone(), h })
    }

    pub fn backward(&self, cache: &HeadCache, d_logits: &Array2<f64>) -> (MaskHeadGrad, Array2<f64>) {
        let (g_out, d_h) = self.out.backward(&cache.h, d_logits);
        let d_pre = d_h * cache.h.mapv(|t| 1.0 - t * t);
        let (g_hidden, d_x) = self.hidden.backward(&cache.x, &d_pre);
        (MaskHeadGrad { hidden: g_hidden, out: g_out }, d_x)
    }

    pub fn zero_grad(&self) -> MaskHeadGrad {
        MaskHeadGrad { hidden: LinearGrad::zeros_like(&self.hidden), out: LinearGrad::zeros_like(&self.out) }
    }

    pub fn sgd(&mut self, g: &MaskHeadGrad, lr: f64) {
        self.hidden.sgd(&g.hidden, lr);
        self.out.sgd(&g.out, lr);
    }
}

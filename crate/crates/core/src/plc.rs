//! Parametric luminance curves.
//!
//! Each of the `N` curves is a strictly increasing sequence of `R` points in
//! `(0, 1]`, parameterised by raw values `P` through
//! `curve = cumsum(softplus(P)) / sum(softplus(P))`, so every parameter
//! setting is a valid curve. An input is indexed by the L1 distance between
//! its luma CDF and each curve; the soft index is a temperature softmax over
//! negative distances.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bytes::{quantize, Reader, Writer};
use crate::error::{invalid, mismatch, Error, Result};
use crate::imageproc::HistogramDescriptor;
use crate::memory::{FeatureVector, ResponseLibrary};

pub const DEFAULT_CURVES: usize = 12;
pub const DEFAULT_POINTS: usize = 256;
pub const DEFAULT_TAU: f64 = 0.1;

const GAMMA_MIN: f64 = 0.3;
const GAMMA_MAX: f64 = 3.0;
const INIT_NOISE: f64 = 1e-3;
const MAGIC: &[u8; 4] = b"PLC1";

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

fn softplus_inv(y: f64) -> f64 {
    if y > 30.0 {
        y
    } else {
        y.exp_m1().ln()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurveBank {
    num_curves: usize,
    points: usize,
    /// Row-major `num_curves x points`; always f32-representable.
    params: Vec<f64>,
    pub tau: f64,
}

/// Result of indexing one histogram against the bank.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveMatch {
    pub hard_id: usize,
    pub weights: Vec<f64>,
    pub distances: Vec<f64>,
}

/// Gamma exponents log-spaced over `[0.3, 3.0]`; a single curve gets 1.
pub fn init_gammas(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let (a, b) = (GAMMA_MIN.ln(), GAMMA_MAX.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// Initialise curves near `x^gamma` on `x = (i + 1) / R` with seeded noise.
pub fn init_curve_bank(num_curves: usize, points: usize, seed: u64) -> Result<CurveBank> {
    if num_curves == 0 || points < 2 {
        return Err(invalid(format!("curve bank needs N >= 1 and R >= 2, got {num_curves}x{points}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = Vec::with_capacity(num_curves * points);
    for gamma in init_gammas(num_curves) {
        let mut prev = 0.0;
        for i in 0..points {
            let t = ((i + 1) as f64 / points as f64).powf(gamma);
            // unit mean increment keeps the raw values in a tame range
            let inc = ((t - prev) * points as f64).max(1e-12);
            prev = t;
            let noise = INIT_NOISE * (2.0 * rng.random::<f64>() - 1.0);
            params.push(quantize(softplus_inv(inc) + noise));
        }
    }
    Ok(CurveBank { num_curves, points, params, tau: DEFAULT_TAU })
}

impl CurveBank {
    pub fn from_params(num_curves: usize, points: usize, params: Vec<f64>, tau: f64) -> Result<Self> {
        if num_curves == 0 || points < 2 {
            return Err(invalid("curve bank needs N >= 1 and R >= 2"));
        }
        if params.len() != num_curves * points {
            return Err(mismatch(format!("expected {} params, got {}", num_curves * points, params.len())));
        }
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(invalid(format!("tau must be > 0, got {tau}")));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Numeric("non-finite curve parameter".into()));
        }
        Ok(Self { num_curves, points, params: params.into_iter().map(quantize).collect(), tau })
    }

    pub fn num_curves(&self) -> usize {
        self.num_curves
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    fn row(&self, n: usize) -> &[f64] {
        &self.params[n * self.points..(n + 1) * self.points]
    }

    pub fn curve_values(&self, n: usize) -> Result<Vec<f64>> {
        if n >= self.num_curves {
            return Err(invalid(format!("curve {n} out of range (N = {})", self.num_curves)));
        }
        Ok(curve_from_params(self.row(n)))
    }

    pub fn curves(&self) -> Vec<Vec<f64>> {
        (0..self.num_curves).map(|n| curve_from_params(self.row(n))).collect()
    }

    /// L1 distances to every curve plus hard and soft indices.
    pub fn match_soft(&self, h: &HistogramDescriptor) -> Result<CurveMatch> {
        if h.len() != self.points {
            return Err(mismatch(format!("histogram has {} points, bank has {}", h.len(), self.points)));
        }
        let distances: Vec<f64> = (0..self.num_curves)
            .map(|n| {
                curve_from_params(self.row(n))
                    .iter()
                    .zip(&h.values)
                    .map(|(c, v)| (v - c).abs())
                    .sum()
            })
            .collect();
        let hard_id = argmin(&distances);
        let weights = softmax_neg(&distances, self.tau);
        Ok(CurveMatch { hard_id, weights, distances })
    }

    /// Same result as [`CurveBank::match_soft`]; the name marks call sites
    /// that only consume `hard_id`.
    pub fn match_hard(&self, h: &HistogramDescriptor) -> Result<CurveMatch> {
        self.match_soft(h)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.magic(MAGIC);
        w.u32(self.num_curves as u32);
        w.u32(self.points as u32);
        w.f64(self.tau);
        w.f32s(self.params.iter().copied());
        w.buf
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        let mut r = Reader::new(data);
        r.expect_magic(MAGIC)?;
        let n = r.u32()? as usize;
        let pts = r.u32()? as usize;
        let tau = r.f64()?;
        let params = r.f32s(n * pts)?;
        r.finish()?;
        Self::from_params(n, pts, params, tau)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

pub fn curve_from_params(raw: &[f64]) -> Vec<f64> {
    let inc: Vec<f64> = raw.iter().map(|&p| softplus(p)).collect();
    let total: f64 = inc.iter().sum();
    let mut acc = 0.0;
    let mut out: Vec<f64> = inc
        .iter()
        .map(|s| {
            acc += s;
            acc / total
        })
        .collect();
    *out.last_mut().unwrap() = 1.0;
    out
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x < v[best] {
            best = i;
        }
    }
    best
}

fn softmax_neg(d: &[f64], tau: f64) -> Vec<f64> {
    let z: Vec<f64> = d.iter().map(|x| -x / tau).collect();
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|x| x / s).collect()
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Spectral consistency loss `|| f - sum_n w_n M_L[n] ||_1` and its gradient
/// with respect to the raw curve parameters.
///
/// Library entries are constants. Slots never written are read through the
/// library's nearest-slot fallback.
pub fn spectral_consistency_grad(
    bank: &CurveBank,
    h: &HistogramDescriptor,
    f: &FeatureVector,
    lib: &ResponseLibrary,
) -> Result<(f64, Vec<f64>)> {
    if lib.num_slots() != bank.num_curves {
        return Err(mismatch(format!(
            "library has {} slots, bank has {} curves",
            lib.num_slots(),
            bank.num_curves
        )));
    }
    if lib.dim() != f.dim() {
        return Err(mismatch(format!("feature dim {} vs library dim {}", f.dim(), lib.dim())));
    }
    let slots: Vec<FeatureVector> = (0..bank.num_curves)
        .map(|n| lib.read_slot_or_nearest(n))
        .collect::<Result<_>>()?;
    let (n_c, r) = (bank.num_curves, bank.points);
    let curves = bank.curves();
    let m = bank.match_soft(h)?;

    let mut mix = vec![0.0; f.dim()];
    for (w, s) in m.weights.iter().zip(&slots) {
        for (acc, v) in mix.iter_mut().zip(s.as_slice()) {
            *acc += w * v;
        }
    }
    let loss: f64 = f.as_slice().iter().zip(&mix).map(|(a, b)| (a - b).abs()).sum();

    // dL/dmix_j = -sign(f_j - mix_j)
    let g_mix: Vec<f64> = f.as_slice().iter().zip(&mix).map(|(a, b)| -sign(a - b)).collect();
    let g_w: Vec<f64> = slots
        .iter()
        .map(|s| s.as_slice().iter().zip(&g_mix).map(|(v, g)| v * g).sum())
        .collect();
    let mean_g: f64 = m.weights.iter().zip(&g_w).map(|(w, g)| w * g).sum();

    let mut grad = vec![0.0; n_c * r];
    for n in 0..n_c {
        // z = -d / tau
        let g_z = m.weights[n] * (g_w[n] - mean_g);
        let g_d = -g_z / bank.tau;
        if g_d == 0.0 {
            continue;
        }
        let raw = bank.row(n);
        let inc: Vec<f64> = raw.iter().map(|&p| softplus(p)).collect();
        let total: f64 = inc.iter().sum();
        let curve = &curves[n];
        // dL/dc_i
        let g_c: Vec<f64> = curve.iter().zip(&h.values).map(|(c, v)| g_d * sign(c - v)).collect();
        // c_i = A_i / S:  dL/ds_k = (sum_{i >= k} g_i) / S - (sum_i g_i A_i) / S^2
        let weighted: f64 = g_c.iter().zip(curve).map(|(g, c)| g * c * total).sum();
        let mut suffix = 0.0;
        for k in (0..r).rev() {
            suffix += g_c[k];
            let g_s = suffix / total - weighted / (total * total);
            grad[n * r + k] = g_s * sigmoid(raw[k]);
        }
    }
    Ok((loss, grad))
}

/// Plain gradient descent step. Parameters stay f32-representable.
pub fn plc_sgd_step(bank: &CurveBank, grads: &[f64], lr: f64) -> Result<CurveBank> {
    if grads.len() != bank.params.len() {
        return Err(mismatch("gradient length does not match the bank"));
    }
    if !(lr >= 0.0) || !lr.is_finite() {
        return Err(invalid(format!("learning rate must be >= 0, got {lr}")));
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::Numeric("non-finite curve gradient".into()));
    }
    let mut next = bank.clone();
    for (p, g) in next.params.iter_mut().zip(grads) {
        *p = quantize(*p - lr * g);
    }
    Ok(next)
}

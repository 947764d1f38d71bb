//! Response libraries: one feature slot per curve id, written by exponential
//! moving average.

use std::path::Path;

use crate::bytes::{Reader, Writer};
use crate::error::{invalid, mismatch, Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.05;
const MAGIC: &[u8; 4] = b"RLB1";

/// Flat feature vector (a pooled feature map or a library slot).
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("feature vector contains non-finite values".into()));
        }
        Ok(Self(data))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResponseLibrary {
    num_slots: usize,
    dim: usize,
    slots: Vec<f64>,
    initialized: Vec<bool>,
    alpha: f64,
}

impl ResponseLibrary {
    pub fn new(num_slots: usize, dim: usize, alpha: f64) -> Result<Self> {
        if num_slots == 0 || dim == 0 {
            return Err(invalid("library needs at least one slot and one dimension"));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(invalid(format!("EMA momentum must lie in (0, 1), got {alpha}")));
        }
        Ok(Self {
            num_slots,
            dim,
            slots: vec![0.0; num_slots * dim],
            initialized: vec![false; num_slots],
            alpha,
        })
    }

    pub fn num_slots(&self) -> usize {
        self.num_slots
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn is_initialized(&self, slot: usize) -> bool {
        self.initialized.get(slot).copied().unwrap_or(false)
    }

    pub fn initialized_count(&self) -> usize {
        self.initialized.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.initialized_count() == 0
    }

    fn check_slot(&self, slot: usize) -> Result<()> {
        if slot >= self.num_slots {
            return Err(invalid(format!("slot {slot} out of range (N = {})", self.num_slots)));
        }
        Ok(())
    }

    fn raw(&self, slot: usize) -> &[f64] {
        &self.slots[slot * self.dim..(slot + 1) * self.dim]
    }

    /// First write copies; later writes blend `(1 - alpha) * slot + alpha * f`.
    pub fn ema_update(&mut self, slot: usize, f: &FeatureVector) -> Result<()> {
        self.check_slot(slot)?;
        if f.dim() != self.dim {
            return Err(mismatch(format!("feature dim {} vs library dim {}", f.dim(), self.dim)));
        }
        let a = self.alpha;
        let first = !self.initialized[slot];
        for (s, v) in self.slots[slot * self.dim..(slot + 1) * self.dim].iter_mut().zip(f.as_slice()) {
            *s = if first { *v } else { (1.0 - a) * *s + a * v };
        }
        self.initialized[slot] = true;
        Ok(())
    }

    pub fn read_slot(&self, slot: usize) -> Result<FeatureVector> {
        self.check_slot(slot)?;
        if !self.initialized[slot] {
            return Err(Error::UninitializedSlot(slot));
        }
        Ok(FeatureVector(self.raw(slot).to_vec()))
    }

    /// The slot actually served for `slot`: itself when written, otherwise the
    /// nearest written slot by index distance (lower index on ties).
    pub fn resolve_slot(&self, slot: usize) -> Option<usize> {
        if slot >= self.num_slots {
            return None;
        }
        (0..self.num_slots)
            .filter(|&s| self.initialized[s])
            .min_by_key(|&s| (s.abs_diff(slot), s))
    }

    /// Inference-time read with nearest-slot fallback.
    pub fn read_slot_or_nearest(&self, slot: usize) -> Result<FeatureVector> {
        self.check_slot(slot)?;
        match self.resolve_slot(slot) {
            Some(s) => Ok(FeatureVector(self.raw(s).to_vec())),
            None => Err(Error::Empty("response library has no written slot".into())),
        }
    }

    /// `sum_n weights[n] * slot[n]`.
    pub fn read_soft(&self, weights: &[f64]) -> Result<FeatureVector> {
        if weights.len() != self.num_slots {
            return Err(mismatch(format!("{} weights for {} slots", weights.len(), self.num_slots)));
        }
        let mut out = vec![0.0; self.dim];
        for (n, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            if !self.initialized[n] {
                return Err(Error::UninitializedSlot(n));
            }
            for (o, v) in out.iter_mut().zip(self.raw(n)) {
                *o += w * v;
            }
        }
        Ok(FeatureVector(out))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.magic(MAGIC);
        w.u32(self.num_slots as u32);
        w.u32(self.dim as u32);
        w.f64(self.alpha);
        w.bytes(&self.initialized.iter().map(|b| *b as u8).collect::<Vec<_>>());
        w.f32s(self.slots.iter().copied());
        w.buf
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        let mut r = Reader::new(data);
        r.expect_magic(MAGIC)?;
        let n = r.u32()? as usize;
        let dim = r.u32()? as usize;
        let alpha = r.f64()?;
        let flags = r.take(n)?;
        let mut initialized = Vec::with_capacity(n);
        for &f in flags {
            match f {
                0 => initialized.push(false),
                1 => initialized.push(true),
                other => return Err(Error::Format(format!("bad init flag {other}"))),
            }
        }
        let slots = r.f32s(n * dim)?;
        r.finish()?;
        let mut lib = Self::new(n, dim, alpha)?;
        if slots.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("library file holds non-finite values".into()));
        }
        lib.slots = slots;
        lib.initialized = initialized;
        Ok(lib)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// Norm of every written slot, `None` for unwritten ones.
    pub fn slot_norms(&self) -> Vec<Option<f64>> {
        (0..self.num_slots)
            .map(|s| self.initialized[s].then(|| self.raw(s).iter().map(|v| v * v).sum::<f64>().sqrt()))
            .collect()
    }
}

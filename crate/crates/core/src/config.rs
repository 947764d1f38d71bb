//! Flat TOML configuration shared by every subcommand.
//!
//! ```toml
//! # curve bank
//! num_curves = 12
//! points = 256
//! lr = 0.1
//! variant = "full"
//! ```
//!
//! Unknown keys are rejected; every value is checked against the owning
//! module's preconditions.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fda::DEFAULT_BETA;
use crate::fusion::{ModelConfig, TrainOptions, Variant};
use crate::imageproc::{BilateralParams, CannyParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub num_curves: usize,
    pub points: usize,
    pub tau: f64,
    pub alpha: f64,
    pub channels: usize,
    pub patch: usize,
    pub classes: usize,
    pub variant: String,
    /// Grasp top-k size; 0 selects one percent of the region area.
    pub grasp_k: usize,
    pub canny_sigma: f64,
    pub canny_low: f64,
    pub canny_high: f64,
    pub bilateral_sigma_s: f64,
    pub bilateral_sigma_i: f64,
    pub bilateral_window: usize,
    pub beta: f64,
    pub lr: f64,
    pub plc_lr: f64,
    pub alignment_epochs: usize,
    pub structure_epochs: usize,
    pub mask_epochs: usize,
    pub w_l1: f64,
    pub w_sc: f64,
    pub w_bce: f64,
    pub w_ce: f64,
    pub synth_scenes: usize,
    pub synth_width: usize,
    pub synth_height: usize,
    pub synth_levels: Vec<f64>,
}

impl Default for Config {
    fn default() -> Self {
        let m = ModelConfig::default();
        let t = TrainOptions::default();
        let b = BilateralParams::default();
        Self {
            num_curves: m.num_curves,
            points: m.points,
            tau: m.tau,
            alpha: m.alpha,
            channels: m.channels,
            patch: m.patch,
            classes: m.classes,
            variant: Variant::Full.name().to_string(),
            grasp_k: 0,
            canny_sigma: t.canny.sigma,
            canny_low: t.canny.low,
            canny_high: t.canny.high,
            bilateral_sigma_s: b.sigma_s,
            bilateral_sigma_i: b.sigma_i,
            bilateral_window: b.window,
            beta: DEFAULT_BETA,
            lr: t.lr,
            plc_lr: t.plc_lr,
            alignment_epochs: t.alignment_epochs,
            structure_epochs: t.structure_epochs,
            mask_epochs: t.mask_epochs,
            w_l1: t.w_l1,
            w_sc: t.w_sc,
            w_bce: t.w_bce,
            w_ce: t.w_ce,
            synth_scenes: 10,
            synth_width: 96,
            synth_height: 96,
            synth_levels: vec![0.55, 0.7, 0.85, 1.0],
        }
    }
}

fn bad(key: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{key}: {msg}"))
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config serialises")
    }

    pub fn variant(&self) -> Result<Variant> {
        match self.variant.as_str() {
            "full" => Ok(Variant::Full),
            "fixed-slot" => Ok(Variant::FixedSlot),
            "no-library" => Ok(Variant::NoLibrary),
            other => Err(bad("variant", format!("expected full, fixed-slot or no-library, got {other:?}"))),
        }
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            patch: self.patch,
            channels: self.channels,
            classes: self.classes,
            num_curves: self.num_curves,
            points: self.points,
            tau: self.tau,
            alpha: self.alpha,
        }
    }

    pub fn canny(&self) -> CannyParams {
        CannyParams { sigma: self.canny_sigma, low: self.canny_low, high: self.canny_high }
    }

    pub fn bilateral(&self) -> BilateralParams {
        BilateralParams { sigma_s: self.bilateral_sigma_s, sigma_i: self.bilateral_sigma_i, window: self.bilateral_window }
    }

    pub fn train_options(&self, seed: u64) -> TrainOptions {
        TrainOptions {
            alignment_epochs: self.alignment_epochs,
            structure_epochs: self.structure_epochs,
            mask_epochs: self.mask_epochs,
            lr: self.lr,
            plc_lr: self.plc_lr,
            w_l1: self.w_l1,
            w_sc: self.w_sc,
            w_bce: self.w_bce,
            w_ce: self.w_ce,
            canny: self.canny(),
            seed,
        }
    }

    pub fn grasp_k(&self) -> Option<usize> {
        (self.grasp_k > 0).then_some(self.grasp_k)
    }

    pub fn validate(&self) -> Result<()> {
        self.variant()?;
        if self.num_curves == 0 {
            return Err(bad("num_curves", "must be >= 1"));
        }
        if self.points < 2 {
            return Err(bad("points", "must be >= 2"));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(bad("tau", "must be > 0"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(bad("alpha", "must lie in (0, 1)"));
        }
        if self.channels == 0 {
            return Err(bad("channels", "must be >= 1"));
        }
        if self.patch == 0 {
            return Err(bad("patch", "must be >= 1"));
        }
        if !(2..=256).contains(&self.classes) {
            return Err(bad("classes", "must lie in 2..=256"));
        }
        if !(self.canny_sigma > 0.0) {
            return Err(bad("canny_sigma", "must be > 0"));
        }
        if !(0.0 <= self.canny_low && self.canny_low < self.canny_high) {
            return Err(bad("canny_low", "must satisfy 0 <= canny_low < canny_high"));
        }
        if self.canny_high > 1.0 {
            return Err(bad("canny_high", "must be <= 1"));
        }
        if !(self.bilateral_sigma_s > 0.0) {
            return Err(bad("bilateral_sigma_s", "must be > 0"));
        }
        if !(self.bilateral_sigma_i > 0.0) {
            return Err(bad("bilateral_sigma_i", "must be > 0"));
        }
        if self.bilateral_window.is_multiple_of(2) {
            return Err(bad("bilateral_window", "must be odd"));
        }
        if !(0.0..=0.5).contains(&self.beta) {
            return Err(bad("beta", "must lie in [0, 0.5]"));
        }
        for (k, v) in [
            ("lr", self.lr),
            ("plc_lr", self.plc_lr),
            ("w_l1", self.w_l1),
            ("w_sc", self.w_sc),
            ("w_bce", self.w_bce),
            ("w_ce", self.w_ce),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(bad(k, "must be a finite value >= 0"));
            }
        }
        if self.synth_scenes == 0 {
            return Err(bad("synth_scenes", "must be >= 1"));
        }
        if self.synth_width == 0 {
            return Err(bad("synth_width", "must be >= 1"));
        }
        if self.synth_height == 0 {
            return Err(bad("synth_height", "must be >= 1"));
        }
        if self.synth_levels.is_empty() || self.synth_levels.iter().any(|l| !(0.0..=1.0).contains(l)) {
            return Err(bad("synth_levels", "must be a non-empty list of values in [0, 1]"));
        }
        Ok(())
    }
}

//! Segmentation and grasp metrics, stratified by luminance band.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{mismatch, Result};
use crate::grasp::GraspPlan;
use crate::imageproc::{DepthMap, SemanticMask};

/// Band labels by mean luma (0-255 scale).
pub const BANDS: [&str; 4] = ["0-30", "30-60", "60-90", "90-120"];

/// Evaluation band of a mean luma value; anything at or above 90 falls in the top band.
pub fn band_of(mean_luma: f64) -> &'static str {
    match mean_luma {
        l if l < 30.0 => BANDS[0],
        l if l < 60.0 => BANDS[1],
        l if l < 90.0 => BANDS[2],
        _ => BANDS[3],
    }
}

/// Grasp succeeds when the true class at the grasp pixel matches and the
/// planned depth is within this distance of the true depth.
pub const GRASP_DEPTH_TOL_M: f64 = 0.01;

/// Pixel-level intersection / union counts per class.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IouAccumulator {
    pub intersection: Vec<u64>,
    pub union: Vec<u64>,
}

impl IouAccumulator {
    pub fn new(classes: usize) -> Self {
        Self { intersection: vec![0; classes], union: vec![0; classes] }
    }

    pub fn add(&mut self, pred: &SemanticMask, truth: &SemanticMask) -> Result<()> {
        if (pred.width, pred.height) != (truth.width, truth.height) {
            return Err(mismatch("prediction and ground truth sizes differ"));
        }
        let k = self.intersection.len();
        for (p, t) in pred.labels.iter().zip(&truth.labels) {
            let (p, t) = (*p as usize, *t as usize);
            if p >= k || t >= k {
                return Err(mismatch(format!("label {} outside {k} classes", p.max(t))));
            }
            if p == t {
                self.intersection[p] += 1;
                self.union[p] += 1;
            } else {
                self.union[p] += 1;
                self.union[t] += 1;
            }
        }
        Ok(())
    }

    /// Per-class IoU; `None` for classes absent from both prediction and truth.
    pub fn per_class(&self) -> Vec<Option<f64>> {
        self.intersection
            .iter()
            .zip(&self.union)
            .map(|(i, u)| if *u > 0 { Some(*i as f64 / *u as f64) } else { None })
            .collect()
    }

    /// Mean over classes with a non-empty union (background included).
    pub fn miou(&self) -> Option<f64> {
        let v: Vec<f64> = self.per_class().into_iter().flatten().collect();
        if v.is_empty() {
            None
        } else {
            Some(v.iter().sum::<f64>() / v.len() as f64)
        }
    }
}

pub fn miou(pred: &SemanticMask, truth: &SemanticMask, classes: usize) -> Result<Option<f64>> {
    let mut acc = IouAccumulator::new(classes);
    acc.add(pred, truth)?;
    Ok(acc.miou())
}

/// Per-class grasp attempts and successes. Every garment present in the
/// ground truth is one attempt.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GraspAccumulator {
    pub attempts: BTreeMap<u8, u64>,
    pub successes: BTreeMap<u8, u64>,
}

impl GraspAccumulator {
    pub fn add(&mut self, plan: &GraspPlan, truth: &SemanticMask, true_depth: &DepthMap) -> Result<()> {
        if (truth.width, truth.height) != (true_depth.width, true_depth.height) {
            return Err(mismatch("truth mask and depth sizes differ"));
        }
        let mut present = [false; 256];
        for l in &truth.labels {
            present[*l as usize] = true;
        }
        for k in 1..256 {
            if !present[k] {
                continue;
            }
            let k = k as u8;
            *self.attempts.entry(k).or_insert(0) += 1;
            let ok = plan.points.iter().any(|p| {
                let i = p.row * truth.width + p.col;
                p.class_id == k
                    && truth.labels[i] == k
                    && !true_depth.is_hole(i)
                    && (p.depth_m - true_depth.depth[i]).abs() < GRASP_DEPTH_TOL_M
            });
            if ok {
                *self.successes.entry(k).or_insert(0) += 1;
            }
        }
        Ok(())
    }

    pub fn per_class(&self) -> BTreeMap<u8, f64> {
        self.attempts
            .iter()
            .map(|(k, a)| (*k, *self.successes.get(k).unwrap_or(&0) as f64 / *a as f64))
            .collect()
    }

    pub fn mgsr(&self) -> Option<f64> {
        let v = self.per_class();
        if v.is_empty() {
            None
        } else {
            Some(v.values().sum::<f64>() / v.len() as f64)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BandMetrics {
    pub images: usize,
    pub miou: Option<f64>,
    pub mgsr: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metrics {
    pub images: usize,
    pub miou: Option<f64>,
    pub mgsr: Option<f64>,
    pub per_class_iou: Vec<Option<f64>>,
    pub bands: BTreeMap<String, BandMetrics>,
}

/// Accumulates overall and per-band metrics.
#[derive(Clone, Debug)]
pub struct Evaluator {
    classes: usize,
    all: (IouAccumulator, GraspAccumulator, usize),
    bands: Vec<(IouAccumulator, GraspAccumulator, usize)>,
}

impl Evaluator {
    pub fn new(classes: usize) -> Self {
        let fresh = || (IouAccumulator::new(classes), GraspAccumulator::default(), 0);
        Self { classes, all: fresh(), bands: (0..BANDS.len()).map(|_| fresh()).collect() }
    }

    pub fn add(&mut self, mean_luma: f64, pred: &SemanticMask, truth: &SemanticMask, plan: &GraspPlan, true_depth: &DepthMap) -> Result<()> {
        let b = BANDS.iter().position(|n| *n == band_of(mean_luma)).expect("known band");
        for slot in [&mut self.all, &mut self.bands[b]] {
            slot.0.add(pred, truth)?;
            slot.1.add(plan, truth, true_depth)?;
            slot.2 += 1;
        }
        Ok(())
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn finish(&self) -> Metrics {
        let bands = BANDS
            .iter()
            .zip(&self.bands)
            .map(|(n, (iou, g, count))| (n.to_string(), BandMetrics { images: *count, miou: iou.miou(), mgsr: g.mgsr() }))
            .collect();
        Metrics {
            images: self.all.2,
            miou: self.all.0.miou(),
            mgsr: self.all.1.mgsr(),
            per_class_iou: self.all.0.per_class(),
            bands,
        }
    }
}

//! Pixel-level scoring of change maps against ground truth.
//!
//! Classes whose union is empty in both prediction and ground truth have no
//! defined IoU and are left out of the mean rather than counted as 0 or 1.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{ChangeClass, ChangeRaster};

/// `counts[gt * classes + pred]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt * self.classes + pred]
    }

    pub fn add(&mut self, gt: usize, pred: usize, n: u64) {
        self.counts[gt * self.classes + pred] += n;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.classes != self.classes {
            return Err(Error::Config(format!(
                "cannot merge {}-class and {}-class confusion matrices",
                self.classes, other.classes
            )));
        }
        self.counts.iter_mut().zip(&other.counts).for_each(|(a, b)| *a += b);
        Ok(())
    }

    /// Static vs. any change.
    pub fn collapse_binary(&self) -> ConfusionMatrix {
        let mut out = ConfusionMatrix::new(2);
        for g in 0..self.classes {
            for p in 0..self.classes {
                out.add(usize::from(g != 0), usize::from(p != 0), self.get(g, p));
            }
        }
        out
    }

    pub fn true_positives(&self, k: usize) -> u64 {
        self.get(k, k)
    }

    pub fn false_positives(&self, k: usize) -> u64 {
        (0..self.classes).filter(|&g| g != k).map(|g| self.get(g, k)).sum()
    }

    pub fn false_negatives(&self, k: usize) -> u64 {
        (0..self.classes).filter(|&p| p != k).map(|p| self.get(k, p)).sum()
    }

    /// `None` when class `k` appears in neither prediction nor ground truth.
    pub fn class_iou(&self, k: usize) -> Option<f64> {
        let tp = self.true_positives(k);
        let union = tp + self.false_positives(k) + self.false_negatives(k);
        (union > 0).then(|| tp as f64 / union as f64)
    }

    pub fn per_class_iou(&self) -> Vec<Option<f64>> {
        (0..self.classes).map(|k| self.class_iou(k)).collect()
    }

    /// Mean over classes with a defined IoU; `None` for an empty matrix.
    pub fn miou(&self) -> Option<f64> {
        mean_defined(&self.per_class_iou())
    }

    /// F1 of the change (non-static) class. A frame with no change pixels in
    /// either raster scores 1.
    pub fn f1_binary(&self) -> f64 {
        let b = if self.classes == 2 { self.clone() } else { self.collapse_binary() };
        let (tp, fp, fn_) = (b.true_positives(1), b.false_positives(1), b.false_negatives(1));
        let denom = 2 * tp + fp + fn_;
        if denom == 0 {
            1.0
        } else {
            (2 * tp) as f64 / denom as f64
        }
    }
}

fn mean_defined(values: &[Option<f64>]) -> Option<f64> {
    let defined: Vec<f64> = values.iter().flatten().copied().collect();
    (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
}

pub fn confusion(pred: &ChangeRaster, gt: &ChangeRaster, classes: usize) -> Result<ConfusionMatrix> {
    if pred.dims() != gt.dims() {
        return Err(Error::dims(gt.dims(), pred.dims()));
    }
    let mut m = ConfusionMatrix::new(classes);
    for (&p, &g) in pred.codes.iter().zip(&gt.codes) {
        for c in [p, g] {
            if c as usize >= classes {
                return Err(Error::CodeOutOfRange { code: c, classes });
            }
        }
        m.counts[g as usize * classes + p as usize] += 1;
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    /// Pool pixel counts over every frame, then score once.
    #[default]
    Dataset,
    /// Score each frame and average the scores.
    PerFrame,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EvalOptions {
    pub binary: bool,
    pub aggregation: Aggregation,
    /// Score classes with an empty union as 0 instead of leaving them out.
    pub undefined_as_zero: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelCounts {
    pub gt: u64,
    pub pred: u64,
    pub true_positive: u64,
}

/// Class-keyed maps serialize in name order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub aggregation: Aggregation,
    pub binary: bool,
    pub undefined_as_zero: bool,
    pub frames: usize,
    /// `null` for classes absent from both prediction and ground truth.
    pub per_class_iou: BTreeMap<String, Option<f64>>,
    pub miou: Option<f64>,
    pub f1: f64,
    pub pixel_counts: BTreeMap<String, PixelCounts>,
}

fn class_names(binary: bool) -> Vec<String> {
    if binary {
        vec!["static".into(), "changed".into()]
    } else {
        ChangeClass::ALL.iter().map(|c| c.name().to_string()).collect()
    }
}

fn scored(m: &ConfusionMatrix, zero: bool) -> Vec<Option<f64>> {
    m.per_class_iou()
        .into_iter()
        .map(|v| if zero { Some(v.unwrap_or(0.0)) } else { v })
        .collect()
}

pub fn evaluate(pred: &[ChangeRaster], gt: &[ChangeRaster], opts: EvalOptions) -> Result<EvalReport> {
    if pred.len() != gt.len() {
        return Err(Error::Config(format!(
            "{} predicted frames for {} ground-truth frames",
            pred.len(),
            gt.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::ZeroLength);
    }
    let classes = ChangeClass::ALL.len();
    let mut frames = Vec::with_capacity(pred.len());
    for (i, (p, g)) in pred.iter().zip(gt).enumerate() {
        let m = confusion(p, g, classes).map_err(|e| e.at_frame("eval", i + 1))?;
        frames.push(if opts.binary { m.collapse_binary() } else { m });
    }
    let k = frames[0].classes();
    let mut pooled = ConfusionMatrix::new(k);
    for m in &frames {
        pooled.merge(m)?;
    }

    let zero = opts.undefined_as_zero;
    let (ious, miou, f1) = match opts.aggregation {
        Aggregation::Dataset => {
            let ious = scored(&pooled, zero);
            let miou = mean_defined(&ious);
            (ious, miou, pooled.f1_binary())
        }
        Aggregation::PerFrame => {
            let per_frame: Vec<Vec<Option<f64>>> = frames.iter().map(|m| scored(m, zero)).collect();
            let ious = (0..k)
                .map(|c| mean_defined(&per_frame.iter().map(|v| v[c]).collect::<Vec<_>>()))
                .collect();
            let mious: Vec<Option<f64>> = per_frame.iter().map(|v| mean_defined(v)).collect();
            let f1 = frames.iter().map(ConfusionMatrix::f1_binary).sum::<f64>() / frames.len() as f64;
            (ious, mean_defined(&mious), f1)
        }
    };

    let names = class_names(opts.binary);
    let pixel_counts = names
        .iter()
        .enumerate()
        .map(|(c, name)| {
            let counts = PixelCounts {
                gt: (0..k).map(|p| pooled.get(c, p)).sum(),
                pred: (0..k).map(|g| pooled.get(g, c)).sum(),
                true_positive: pooled.true_positives(c),
            };
            (name.clone(), counts)
        })
        .collect();
    Ok(EvalReport {
        aggregation: opts.aggregation,
        binary: opts.binary,
        undefined_as_zero: zero,
        frames: pred.len(),
        per_class_iou: names.into_iter().zip(ious).collect(),
        miou,
        f1,
        pixel_counts,
    })
}

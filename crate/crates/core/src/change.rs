//! Pair-level change classification from tracked mask sets.
//!
//! An object is considered gone from the other image when its tracked area
//! shrinks below a fraction `tau` of its original area. Running the test in
//! both directions gives the missing and new sets; their pixel unions are
//! combined into a [`ChangeRaster`].

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::bitmap::Bitmap;
use crate::error::{Error, Result};
use crate::mask::{AreaTable, MaskId, MaskSet};
use crate::raster::{ChangeClass, ChangeRaster};

/// Length-dependent content threshold: `0.5 - 0.9 / (sqrt(length) + 1)`.
///
/// Equals 0.05 for a single frame and rises towards (never reaching) 0.5.
pub fn adaptive_tau(length: usize) -> Result<f64> {
    if length == 0 {
        return Err(Error::ZeroLength);
    }
    // Rearranged as (5s - 4) / (10 (s + 1)) so a single frame gives exactly 0.05.
    let s = (length as f64).sqrt();
    Ok((5.0 * s - 4.0) / (10.0 * (s + 1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ContentThreshold {
    Fixed(f64),
    #[default]
    Adaptive,
}

impl ContentThreshold {
    pub fn fixed(value: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::Config(format!("content threshold {value} outside [0, 1]")));
        }
        Ok(ContentThreshold::Fixed(value))
    }

    /// Threshold to use for a clip of `length` frames.
    pub fn resolve(self, length: usize) -> Result<f64> {
        match self {
            ContentThreshold::Fixed(v) => Ok(v),
            ContentThreshold::Adaptive => adaptive_tau(length),
        }
    }
}

impl std::str::FromStr for ContentThreshold {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("adaptive") {
            return Ok(ContentThreshold::Adaptive);
        }
        let v: f64 = s
            .parse()
            .map_err(|_| Error::Config(format!("content threshold {s:?} is neither a number nor \"adaptive\"")))?;
        ContentThreshold::fixed(v)
    }
}

/// Ids `i` of `a` whose survival ratio `b[i] / a[i]` is strictly below `tau`.
/// Absent ids count as area 0; ids only in `b` are ignored.
pub fn tau_difference_areas(a: &AreaTable, b: &AreaTable, tau: f64) -> BTreeSet<MaskId> {
    a.0.iter()
        .filter(|&(&id, &area)| (b.get(id) as f64 / area as f64) < tau)
        .map(|(&id, _)| id)
        .collect()
}

pub fn tau_difference(a: &MaskSet, b: &MaskSet, tau: f64) -> BTreeSet<MaskId> {
    tau_difference_areas(&a.areas(), &b.areas(), tau)
}

/// Per-pixel classification together with the ids behind it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChangeMap {
    pub raster: ChangeRaster,
    pub missing: BTreeSet<MaskId>,
    pub new: BTreeSet<MaskId>,
}

pub fn classify_pixels(missing: &Bitmap, new: &Bitmap) -> Result<ChangeRaster> {
    if missing.dims() != new.dims() {
        return Err(Error::dims(missing.dims(), new.dims()));
    }
    let (w, h) = missing.dims();
    let mut codes = vec![ChangeClass::Static.code(); missing.len()];
    for i in missing.iter_ones() {
        codes[i] = ChangeClass::Missing.code();
    }
    for i in new.iter_ones() {
        codes[i] = if codes[i] == ChangeClass::Missing.code() {
            ChangeClass::Replaced.code()
        } else {
            ChangeClass::New.code()
        };
    }
    ChangeRaster::new(w, h, codes)
}

fn check_tracked(source: &MaskSet, tracked: &MaskSet) -> Result<()> {
    if source.dims() != tracked.dims() {
        return Err(Error::dims(source.dims(), tracked.dims()));
    }
    match tracked.ids().find(|&id| !source.contains(id)) {
        Some(id) => Err(Error::IdSubset { id: id.get() }),
        None => Ok(()),
    }
}

/// Classifies one reference/query pair.
///
/// `mr_to_q` is `mr` tracked into the query image and `mq_to_r` is `mq`
/// tracked into the reference image.
pub fn detect_pair(
    mr: &MaskSet,
    mr_to_q: &MaskSet,
    mq: &MaskSet,
    mq_to_r: &MaskSet,
    tau: f64,
) -> Result<ChangeMap> {
    if mr.dims() != mq.dims() {
        return Err(Error::dims(mr.dims(), mq.dims()));
    }
    check_tracked(mr, mr_to_q)?;
    check_tracked(mq, mq_to_r)?;
    let missing = tau_difference(mr, mr_to_q, tau);
    let new = tau_difference(mq, mq_to_r, tau);
    change_map(mr, &missing, mq, &new)
}

/// Rasterizes the selected ids of `missing_src` and `new_src`.
pub fn change_map(
    missing_src: &MaskSet,
    missing: &BTreeSet<MaskId>,
    new_src: &MaskSet,
    new: &BTreeSet<MaskId>,
) -> Result<ChangeMap> {
    let p_missing = missing_src.select(missing.iter().copied()).union();
    let p_new = new_src.select(new.iter().copied()).union();
    Ok(ChangeMap {
        raster: classify_pixels(&p_missing, &p_new)?,
        missing: missing.clone(),
        new: new.clone(),
    })
}

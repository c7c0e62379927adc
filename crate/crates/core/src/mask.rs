//! Id-labeled pixel masks and disjoint mask sets.
//!
//! A [`MaskSet`] is the unit every other stage exchanges: the output of a
//! segmenter after post-processing, the state a tracker propagates, and the
//! input to change classification. Correspondence across frames is by
//! [`MaskId`] equality; ids are chosen by whoever produces the set and are
//! never rewritten here.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bitmap::Bitmap;
use crate::error::{Error, Result};

/// Track identifier. Zero is reserved for background in label rasters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MaskId(u32);

impl MaskId {
    pub fn new(id: u32) -> Result<Self> {
        if id == 0 {
            return Err(Error::ZeroId);
        }
        Ok(Self(id))
    }

    pub fn get(self) -> u32 {
        self.0
    }

    pub fn next(self) -> Self {
        Self(self.0 + 1)
    }
}

impl fmt::Display for MaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// A non-empty set of pixels with an id.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mask {
    id: MaskId,
    pixels: Bitmap,
    area: u64,
}

impl Mask {
    pub fn new(id: MaskId, pixels: Bitmap) -> Result<Self> {
        let area = pixels.count_ones();
        if area == 0 {
            return Err(Error::EmptyMask { id: id.get() });
        }
        Ok(Self { id, pixels, area })
    }

    pub fn id(&self) -> MaskId {
        self.id
    }

    pub fn pixels(&self) -> &Bitmap {
        &self.pixels
    }

    pub fn into_pixels(self) -> Bitmap {
        self.pixels
    }

    pub fn area(&self) -> u64 {
        self.area
    }

    pub fn dims(&self) -> (u32, u32) {
        self.pixels.dims()
    }

    pub fn with_id(self, id: MaskId) -> Self {
        Self { id, ..self }
    }
}

pub fn area(m: &Mask) -> u64 {
    m.area()
}

pub fn intersect_area(a: &Mask, b: &Mask) -> Result<u64> {
    a.pixels.intersection_count(&b.pixels)
}

/// Pixel union of `masks` over a `width`×`height` frame.
pub fn union_pixels<'a>(
    width: u32,
    height: u32,
    masks: impl IntoIterator<Item = &'a Mask>,
) -> Result<Bitmap> {
    let mut out = Bitmap::new(width, height);
    for m in masks {
        out.union_with(&m.pixels)?;
    }
    Ok(out)
}

pub fn iou(a: &Mask, b: &Mask) -> Result<f64> {
    let inter = intersect_area(a, b)?;
    let union = a.area() + b.area() - inter;
    Ok(inter as f64 / union as f64)
}

/// Pairwise-disjoint masks sharing one frame size, keyed by id.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MaskSet {
    width: u32,
    height: u32,
    masks: BTreeMap<MaskId, Mask>,
}

impl MaskSet {
    pub fn empty(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            masks: BTreeMap::new(),
        }
    }

    /// Validates uniform dimensions, unique ids and disjointness.
    pub fn new(width: u32, height: u32, masks: impl IntoIterator<Item = Mask>) -> Result<Self> {
        let mut set = Self::empty(width, height);
        let mut covered = Bitmap::new(width, height);
        for m in masks {
            if m.dims() != (width, height) {
                return Err(Error::dims((width, height), m.dims()));
            }
            if set.masks.contains_key(&m.id) {
                return Err(Error::DuplicateId(m.id.get()));
            }
            if covered.intersection_count(&m.pixels)? > 0 {
                let (a, pixels) = set
                    .masks
                    .values()
                    .map(|o| (o.id, o.pixels.intersection_count(&m.pixels).unwrap_or(0)))
                    .find(|&(_, n)| n > 0)
                    .expect("covered pixel has an owner");
                return Err(Error::Overlap {
                    a: a.get(),
                    b: m.id.get(),
                    pixels,
                });
            }
            covered.union_with(&m.pixels)?;
            set.masks.insert(m.id, m);
        }
        Ok(set)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn get(&self, id: MaskId) -> Option<&Mask> {
        self.masks.get(&id)
    }

    pub fn contains(&self, id: MaskId) -> bool {
        self.masks.contains_key(&id)
    }

    /// Area of mask `id`, or 0 when the id is absent.
    pub fn area_of(&self, id: MaskId) -> u64 {
        self.masks.get(&id).map_or(0, Mask::area)
    }

    /// Masks in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = &Mask> {
        self.masks.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = MaskId> + '_ {
        self.masks.keys().copied()
    }

    pub fn max_id(&self) -> Option<MaskId> {
        self.masks.keys().next_back().copied()
    }

    pub fn total_area(&self) -> u64 {
        self.masks.values().map(Mask::area).sum()
    }

    pub fn union(&self) -> Bitmap {
        union_pixels(self.width, self.height, self.masks.values())
            .expect("members share the set dimensions")
    }

    /// Per-id areas; enough to evaluate area-ratio tests without the rasters.
    pub fn areas(&self) -> AreaTable {
        AreaTable(self.masks.iter().map(|(&id, m)| (id, m.area())).collect())
    }

    /// Adds a mask, enforcing the same invariants as [`MaskSet::new`].
    pub fn insert(&mut self, mask: Mask) -> Result<()> {
        if mask.dims() != self.dims() {
            return Err(Error::dims(self.dims(), mask.dims()));
        }
        if self.masks.contains_key(&mask.id) {
            return Err(Error::DuplicateId(mask.id.get()));
        }
        for other in self.masks.values() {
            let n = other.pixels.intersection_count(&mask.pixels)?;
            if n > 0 {
                return Err(Error::Overlap {
                    a: other.id.get(),
                    b: mask.id.get(),
                    pixels: n,
                });
            }
        }
        self.masks.insert(mask.id, mask);
        Ok(())
    }

    /// Restricts the set to the given ids.
    pub fn select(&self, ids: impl IntoIterator<Item = MaskId>) -> MaskSet {
        let masks = ids
            .into_iter()
            .filter_map(|id| self.masks.get(&id).map(|m| (id, m.clone())))
            .collect();
        MaskSet {
            width: self.width,
            height: self.height,
            masks,
        }
    }
}

/// Mask areas keyed by id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AreaTable(pub BTreeMap<MaskId, u64>);

impl AreaTable {
    pub fn get(&self, id: MaskId) -> u64 {
        self.0.get(&id).copied().unwrap_or(0)
    }
}

/// Per-pixel mask ids; 0 is background.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelRaster {
    pub width: u32,
    pub height: u32,
    pub labels: Vec<u32>,
}

impl LabelRaster {
    pub fn new(width: u32, height: u32, labels: Vec<u32>) -> Result<Self> {
        let n = width as usize * height as usize;
        if labels.len() != n {
            return Err(Error::Config(format!(
                "label raster {width}x{height} needs {n} samples, got {}",
                labels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn zeros(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            labels: vec![0; width as usize * height as usize],
        }
    }
}

pub fn from_label_raster(r: &LabelRaster) -> MaskSet {
    let mut bitmaps: BTreeMap<u32, Bitmap> = BTreeMap::new();
    for (i, &l) in r.labels.iter().enumerate() {
        if l != 0 {
            bitmaps
                .entry(l)
                .or_insert_with(|| Bitmap::new(r.width, r.height))
                .insert_index(i);
        }
    }
    let masks = bitmaps
        .into_iter()
        .map(|(l, b)| (MaskId(l), Mask { id: MaskId(l), area: b.count_ones(), pixels: b }))
        .collect();
    MaskSet {
        width: r.width,
        height: r.height,
        masks,
    }
}

/// Encodes a set as a label raster. Fails if two masks claim one pixel.
pub fn to_label_raster(s: &MaskSet) -> Result<LabelRaster> {
    let mut labels = vec![0u32; s.width as usize * s.height as usize];
    for m in s.iter() {
        for i in m.pixels.iter_ones() {
            if labels[i] != 0 {
                return Err(Error::Overlap {
                    a: labels[i],
                    b: m.id.get(),
                    pixels: 1,
                });
            }
            labels[i] = m.id.get();
        }
    }
    Ok(LabelRaster {
        width: s.width,
        height: s.height,
        labels,
    })
}

#[cfg(test)]
pub(crate) fn mask(id: u32, pixels: Bitmap) -> Mask {
    Mask::new(MaskId::new(id).unwrap(), pixels).unwrap()
}

//! Turns overlapping mask proposals into a disjoint, object-level [`MaskSet`].
//!
//! Proposals are painted smallest-first so the largest proposal wins every
//! contested pixel. A proposal that lost more than `merge_thresh` of its area
//! hands its surviving pixels to the largest proposal painted over it. Masks
//! lying wholly inside the invalid region and masks smaller than `min_area`
//! are then dropped.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::bitmap::Bitmap;
use crate::error::{Error, Result};
use crate::mask::{Mask, MaskSet};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProposalSet {
    width: u32,
    height: u32,
    proposals: Vec<Mask>,
    invalid_region: Option<Bitmap>,
}

impl ProposalSet {
    pub fn new(
        width: u32,
        height: u32,
        proposals: Vec<Mask>,
        invalid_region: Option<Bitmap>,
    ) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for p in &proposals {
            if p.dims() != (width, height) {
                return Err(Error::dims((width, height), p.dims()));
            }
            if !seen.insert(p.id()) {
                return Err(Error::DuplicateId(p.id().get()));
            }
        }
        if let Some(inv) = &invalid_region {
            if inv.dims() != (width, height) {
                return Err(Error::dims((width, height), inv.dims()));
            }
        }
        Ok(Self {
            width,
            height,
            proposals,
            invalid_region,
        })
    }

    pub fn empty(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            proposals: Vec::new(),
            invalid_region: None,
        }
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn proposals(&self) -> &[Mask] {
        &self.proposals
    }

    pub fn len(&self) -> usize {
        self.proposals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.proposals.is_empty()
    }

    pub fn invalid_region(&self) -> Option<&Bitmap> {
        self.invalid_region.as_ref()
    }

    pub fn with_invalid_region(mut self, region: Bitmap) -> Result<Self> {
        if region.dims() != self.dims() {
            return Err(Error::dims(self.dims(), region.dims()));
        }
        self.invalid_region = Some(region);
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PostprocConfig {
    pub merge_thresh: f64,
    pub min_area: u64,
}

impl Default for PostprocConfig {
    fn default() -> Self {
        Self {
            merge_thresh: 0.5,
            min_area: 100,
        }
    }
}

impl PostprocConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.merge_thresh) {
            return Err(Error::Config(format!(
                "merge_thresh {} outside [0, 1]",
                self.merge_thresh
            )));
        }
        Ok(())
    }
}

pub fn postprocess(p: &ProposalSet, cfg: &PostprocConfig) -> Result<MaskSet> {
    cfg.validate()?;
    let (width, height) = p.dims();
    let n_pixels = width as usize * height as usize;

    // Ascending area, ties by ascending id.
    let mut order: Vec<&Mask> = p.proposals.iter().collect();
    order.sort_by_key(|m| (m.area(), m.id()));

    // owner[i] = 1 + rank of the proposal currently holding pixel i.
    const NONE: usize = 0;
    let mut owner = vec![NONE; n_pixels];
    for (rank, m) in order.iter().enumerate() {
        for i in m.pixels().iter_ones() {
            owner[i] = rank + 1;
        }
    }

    // Decide merges from the painted canvas only, so a merge never changes
    // another proposal's covered ratio.
    let mut target: Vec<Option<usize>> = vec![None; order.len()];
    for (rank, m) in order.iter().enumerate() {
        let mut survived = 0u64;
        let mut largest_over: Option<usize> = None;
        for i in m.pixels().iter_ones() {
            let o = owner[i] - 1;
            if o == rank {
                survived += 1;
            } else {
                largest_over = Some(largest_over.map_or(o, |l| l.max(o)));
            }
        }
        let covered = (m.area() - survived) as f64 / m.area() as f64;
        if covered > cfg.merge_thresh {
            target[rank] = largest_over;
        }
    }

    // Targets always rank higher, so resolving from the top settles chains.
    let mut resolved: Vec<usize> = (0..order.len()).collect();
    for rank in (0..order.len()).rev() {
        if let Some(t) = target[rank] {
            resolved[rank] = resolved[t];
        }
    }

    let mut bitmaps: Vec<Option<Bitmap>> = vec![None; order.len()];
    for (i, &o) in owner.iter().enumerate() {
        if o != NONE {
            let r = resolved[o - 1];
            bitmaps[r]
                .get_or_insert_with(|| Bitmap::new(width, height))
                .insert_index(i);
        }
    }

    let mut out = Vec::new();
    for (rank, bitmap) in bitmaps.into_iter().enumerate() {
        let Some(bitmap) = bitmap else { continue };
        if let Some(inv) = &p.invalid_region {
            if bitmap.is_subset_of(inv)? {
                continue;
            }
        }
        if bitmap.count_ones() < cfg.min_area {
            continue;
        }
        out.push(Mask::new(order[rank].id(), bitmap)?);
    }
    MaskSet::new(width, height, out)
}

//! Tracker with ground-truth access to a [`SyntheticWorld`].
//!
//! Object identity is read straight off pixel intensities (every object has a
//! unique color, before and after the query style), so the tracker works on
//! either sequence and on images loaded back from disk.
//!
//! A tracked object that is no longer visible leaves a residual fragment of
//! `ceil(residual * area)` pixels at its old location, mimicking a real tracker
//! that does not let go of an object which vanished between two captures.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, HashMap};
use std::hash::{Hash, Hasher};

use crate::bitmap::Bitmap;
use crate::error::{Error, Result};
use crate::mask::{Mask, MaskId, MaskSet};
use crate::model::{Frame, Gating, Tracker};
use crate::raster::Image;
use crate::sim::world::SyntheticWorld;

#[derive(Debug, Clone)]
pub struct OracleTracker {
    colors: HashMap<u16, u32>,
    residual: f64,
    /// Track id -> world object id.
    memory: BTreeMap<MaskId, u32>,
    next_id: u32,
}

/// Number of residual pixels kept for a vanished mask of `area` pixels.
pub fn residual_pixels(residual: f64, area: u64) -> u64 {
    if residual <= 0.0 {
        return 0;
    }
    // The epsilon absorbs representation error in products like 0.1 * 100.
    (residual * area as f64 - 1e-9).ceil().max(0.0) as u64
}

impl OracleTracker {
    pub fn new(world: &SyntheticWorld, residual: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&residual) {
            return Err(Error::Config(format!("residual fraction {residual} outside [0, 1)")));
        }
        Ok(Self {
            colors: world.color_table()?,
            residual,
            memory: BTreeMap::new(),
            next_id: 1,
        })
    }

    /// World object id per pixel; 0 for background or unknown intensities.
    fn decode(&self, img: &Image) -> Vec<u32> {
        img.pixels
            .iter()
            .map(|v| self.colors.get(v).copied().unwrap_or(0))
            .collect()
    }

    fn resolve(&self, m: &Mask, prev_objects: &[u32]) -> Result<(u32, u64)> {
        let mut votes: BTreeMap<u32, u64> = BTreeMap::new();
        for i in m.pixels().iter_ones() {
            let o = prev_objects[i];
            if o != 0 {
                *votes.entry(o).or_default() += 1;
            }
        }
        if let Some(&o) = self.memory.get(&m.id()) {
            return Ok((o, votes.get(&o).copied().unwrap_or(0)));
        }
        votes
            .into_iter()
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
            .ok_or(Error::UnknownId(m.id().get()))
    }
}

impl Tracker for OracleTracker {
    fn step(
        &mut self,
        prev: Frame<'_>,
        cur: Frame<'_>,
        prev_masks: &MaskSet,
        gating: Gating,
    ) -> Result<MaskSet> {
        let (w, h) = prev_masks.dims();
        if cur.image.dims() != (w, h) || prev.image.dims() != (w, h) {
            return Err(Error::dims((w, h), cur.image.dims()));
        }
        let prev_objects = self.decode(prev.image);
        let cur_objects = self.decode(cur.image);

        let mut footprints: BTreeMap<u32, Bitmap> = BTreeMap::new();
        for (i, &o) in cur_objects.iter().enumerate() {
            if o != 0 {
                footprints.entry(o).or_insert_with(|| Bitmap::new(w, h)).insert_index(i);
            }
        }

        // One track per object: the mask with the largest overlap wins,
        // ties to the lower id.
        let mut claims: BTreeMap<u32, (MaskId, u64)> = BTreeMap::new();
        let mut resolved: Vec<(MaskId, u32)> = Vec::with_capacity(prev_masks.len());
        for m in prev_masks.iter() {
            let (o, overlap) = self.resolve(m, &prev_objects)?;
            resolved.push((m.id(), o));
            let better = claims.get(&o).is_none_or(|&(_, best)| overlap > best);
            if better {
                claims.insert(o, (m.id(), overlap));
            }
        }

        let mut out = MaskSet::empty(w, h);
        let mut assigned: BTreeMap<MaskId, u32> = BTreeMap::new();
        for (&o, &(id, _)) in &claims {
            if let Some(fp) = footprints.get(&o) {
                out.insert(Mask::new(id, fp.clone())?)?;
                assigned.insert(id, o);
            }
        }

        let mut next_id = self
            .next_id
            .max(prev_masks.max_id().map_or(1, |m| m.get() + 1));
        if gating.detect_new {
            for (&o, fp) in &footprints {
                if !claims.contains_key(&o) {
                    let id = MaskId::new(next_id)?;
                    next_id += 1;
                    out.insert(Mask::new(id, fp.clone())?)?;
                    assigned.insert(id, o);
                }
            }
        }

        let keep = residual_pixels(self.residual, 1);
        if keep > 0 {
            let mut occupied = out.union();
            for &(id, o) in &resolved {
                let vanished = claims.get(&o).is_some_and(|&(winner, _)| winner == id)
                    && !footprints.contains_key(&o);
                if !vanished {
                    continue;
                }
                let m = prev_masks.get(id).expect("resolved from prev_masks");
                let n = residual_pixels(self.residual, m.area()) as usize;
                let mut frag = Bitmap::new(w, h);
                for i in m.pixels().iter_ones().filter(|&i| !occupied.contains_index(i)).take(n) {
                    frag.insert_index(i);
                }
                if !frag.is_empty() {
                    occupied.union_with(&frag)?;
                    out.insert(Mask::new(id, frag)?)?;
                    assigned.insert(id, o);
                }
            }
        }

        if gating.update_memory {
            self.memory = assigned;
            self.next_id = next_id;
        }
        Ok(out)
    }

    fn reset(&mut self) {
        self.memory.clear();
        self.next_id = 1;
    }

    fn state_hash(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.memory.hash(&mut h);
        self.next_id.hash(&mut h);
        h.finish()
    }
}

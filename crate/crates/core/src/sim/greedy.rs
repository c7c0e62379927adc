//! Non-oracle baseline tracker: re-segment and match by IoU.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use crate::error::{Error, Result};
use crate::mask::{iou, MaskId, MaskSet};
use crate::model::{Frame, Gating, Tracker};
use crate::sim::segmenter::CcSegmenter;

/// Matches a previous mask to a current region only when IoU exceeds this.
pub const MATCH_IOU: f64 = 0.5;

#[derive(Debug, Clone, Default)]
pub struct GreedyTracker {
    segmenter: CcSegmenter,
    next_id: u32,
}

impl GreedyTracker {
    pub fn new() -> Self {
        Self {
            segmenter: CcSegmenter::new(),
            next_id: 1,
        }
    }
}

impl Tracker for GreedyTracker {
    fn step(
        &mut self,
        _prev: Frame<'_>,
        cur: Frame<'_>,
        prev_masks: &MaskSet,
        gating: Gating,
    ) -> Result<MaskSet> {
        let (w, h) = prev_masks.dims();
        if cur.image.dims() != (w, h) {
            return Err(Error::dims((w, h), cur.image.dims()));
        }
        let proposals = self.segmenter.segment_image(cur.image)?;
        let regions = proposals.proposals();

        let mut pairs = Vec::new();
        for m in prev_masks.iter() {
            for r in regions {
                let v = iou(m, r)?;
                if v > MATCH_IOU {
                    pairs.push((v, r.id(), m.id()));
                }
            }
        }
        // Highest IoU first; ties to the lower proposal id, then lower track id.
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

        let mut out = MaskSet::empty(w, h);
        let mut used = std::collections::BTreeSet::new();
        for (_, region_id, track_id) in pairs {
            if used.contains(&region_id) || out.contains(track_id) {
                continue;
            }
            used.insert(region_id);
            let r = regions.iter().find(|r| r.id() == region_id).expect("proposal exists");
            out.insert(r.clone().with_id(track_id))?;
        }

        let mut next_id = self.next_id.max(prev_masks.max_id().map_or(1, |m| m.get() + 1));
        if gating.detect_new {
            for r in regions.iter().filter(|r| !used.contains(&r.id())) {
                out.insert(r.clone().with_id(MaskId::new(next_id)?))?;
                next_id += 1;
            }
        }
        if gating.update_memory {
            self.next_id = next_id;
        }
        Ok(out)
    }

    fn reset(&mut self) {
        self.next_id = 1;
    }

    fn state_hash(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.next_id.hash(&mut h);
        h.finish()
    }
}

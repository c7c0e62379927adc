//! Interfaces for the segmentation model and the mask tracker.

use crate::error::Result;
use crate::mask::MaskSet;
use crate::postproc::ProposalSet;
use crate::raster::Image;

/// An image together with its 1-based position in the sequence it came from.
#[derive(Debug, Clone, Copy)]
pub struct Frame<'a> {
    pub index: usize,
    pub image: &'a Image,
}

impl<'a> Frame<'a> {
    pub fn new(index: usize, image: &'a Image) -> Self {
        Self { index, image }
    }
}

/// Which tracker functions are enabled for one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Gating {
    pub update_memory: bool,
    pub detect_new: bool,
}

impl Gating {
    /// Within-sequence propagation.
    pub const PROPAGATE: Gating = Gating {
        update_memory: true,
        detect_new: true,
    };
    /// Hop into the other sequence; the tracker must not change its state.
    pub const FROZEN: Gating = Gating {
        update_memory: false,
        detect_new: false,
    };
}

/// Which change class a processing stream is looking for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    /// Reference is the primary sequence, query the branch.
    Missing,
    /// Query is the primary sequence, reference the branch.
    New,
}

impl Stream {
    pub fn name(self) -> &'static str {
        match self {
            Stream::Missing => "missing",
            Stream::New => "new",
        }
    }
}

pub trait Segmenter {
    fn segment(&mut self, frame: Frame<'_>) -> Result<ProposalSet>;
}

pub trait Tracker {
    /// Tracks `prev_masks` from `prev` into `cur`.
    ///
    /// Output ids are a subset of the input ids, plus fresh ids only when
    /// `gating.detect_new` is set. With `gating.update_memory` unset the
    /// tracker's internal state must be left untouched.
    fn step(
        &mut self,
        prev: Frame<'_>,
        cur: Frame<'_>,
        prev_masks: &MaskSet,
        gating: Gating,
    ) -> Result<MaskSet>;

    /// Forgets everything; called at the start of every chunk.
    fn reset(&mut self) {}

    /// Digest of the internal state, for checking the gating contract.
    fn state_hash(&self) -> u64 {
        0
    }
}

impl<S: Segmenter + ?Sized> Segmenter for Box<S> {
    fn segment(&mut self, frame: Frame<'_>) -> Result<ProposalSet> {
        (**self).segment(frame)
    }
}

impl<T: Tracker + ?Sized> Tracker for Box<T> {
    fn step(
        &mut self,
        prev: Frame<'_>,
        cur: Frame<'_>,
        prev_masks: &MaskSet,
        gating: Gating,
    ) -> Result<MaskSet> {
        (**self).step(prev, cur, prev_masks, gating)
    }

    fn reset(&mut self) {
        (**self).reset()
    }

    fn state_hash(&self) -> u64 {
        (**self).state_hash()
    }
}

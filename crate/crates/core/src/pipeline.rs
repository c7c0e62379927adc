//! Sequence-level change detection.
//!
//! Each chunk of at most `t_max` frames is processed by two independent
//! streams. The missing stream segments the first reference frame and tracks
//! those masks along the reference sequence (the spine, with memory updates
//! and new-object detection enabled). At every frame the current spine set is
//! also tracked across into the query frame with both functions disabled (the
//! branch). An object visible at reference frame `t` is missing when its
//! branch area falls below `tau` of its spine area in *every* query frame of
//! the chunk. The new stream is the same with the sequences exchanged.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::change::{change_map, detect_pair, tau_difference_areas, ChangeMap, ContentThreshold};
use crate::error::{Error, Result};
use crate::io::SequencePair;
use crate::mask::{iou, AreaTable, Mask, MaskId, MaskSet};
use crate::model::{Frame, Gating, Segmenter, Stream, Tracker};
use crate::postproc::{postprocess, PostprocConfig};
use crate::raster::Image;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SequenceConfig {
    pub t_max: usize,
    pub detect_every: usize,
    pub tau: ContentThreshold,
    /// Accepted for parity with the tracker configuration; fresh detections
    /// are admitted immediately instead of after a vote.
    pub voting_frames: usize,
    /// Accepted for parity with the tracker configuration; unused.
    pub max_missed_detection_count: usize,
    pub postproc: PostprocConfig,
    /// A fresh detection overlapping a spine mask above this IoU is treated
    /// as already tracked.
    pub spawn_iou: f64,
}

impl Default for SequenceConfig {
    fn default() -> Self {
        Self {
            t_max: 60,
            detect_every: 5,
            tau: ContentThreshold::Adaptive,
            voting_frames: 3,
            max_missed_detection_count: 5,
            postproc: PostprocConfig::default(),
            spawn_iou: 0.5,
        }
    }
}

impl SequenceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_max == 0 {
            return Err(Error::Config("t_max must be at least 1".into()));
        }
        if self.detect_every == 0 {
            return Err(Error::Config("detect_every must be at least 1".into()));
        }
        if let ContentThreshold::Fixed(v) = self.tau {
            ContentThreshold::fixed(v)?;
        }
        self.postproc.validate()
    }

    /// Whether the segmenter runs at 1-based chunk frame `t`.
    pub fn is_detection_frame(&self, t: usize) -> bool {
        t == 1 || t.is_multiple_of(self.detect_every)
    }
}

/// Greedy split into chunks of `t_max` frames plus a shorter remainder.
pub fn chunk_sequence(total: usize, t_max: usize) -> Result<Vec<usize>> {
    if total == 0 {
        return Err(Error::ZeroLength);
    }
    if t_max == 0 {
        return Err(Error::Config("t_max must be at least 1".into()));
    }
    let mut chunks = vec![t_max; total / t_max];
    if !total.is_multiple_of(t_max) {
        chunks.push(total % t_max);
    }
    Ok(chunks)
}

/// The segmentation model and tracker owned by one stream.
pub struct Models<'a> {
    pub segmenter: &'a mut (dyn Segmenter + Send),
    pub tracker: &'a mut (dyn Tracker + Send),
}

impl<'a> Models<'a> {
    pub fn new(segmenter: &'a mut (dyn Segmenter + Send), tracker: &'a mut (dyn Tracker + Send)) -> Self {
        Self { segmenter, tracker }
    }
}

/// Spine state after frame `t` of a chunk. Together with the tracker's own
/// memory this is everything later frames depend on.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PropagationState {
    pub spine: MaskSet,
    /// 1-based frame index within the chunk.
    pub t: usize,
    /// Smallest id never used in this chunk; ids are not recycled.
    pub next_id: u32,
}

impl PropagationState {
    fn note_ids(&mut self) {
        if let Some(m) = self.spine.max_id() {
            self.next_id = self.next_id.max(m.get() + 1);
        }
    }
}

fn segment_masks(segmenter: &mut dyn Segmenter, frame: Frame<'_>, cfg: &SequenceConfig) -> Result<MaskSet> {
    let proposals = segmenter.segment(frame)?;
    if proposals.dims() != frame.image.dims() {
        return Err(Error::dims(frame.image.dims(), proposals.dims()));
    }
    postprocess(&proposals, &cfg.postproc)
}

/// Segments the first primary frame of a chunk.
pub fn initial_state(
    segmenter: &mut dyn Segmenter,
    first: Frame<'_>,
    cfg: &SequenceConfig,
) -> Result<PropagationState> {
    let mut state = PropagationState {
        spine: segment_masks(segmenter, first, cfg)?,
        t: 1,
        next_id: 1,
    };
    state.note_ids();
    Ok(state)
}

/// Adds masks from a fresh segmentation that no spine mask already covers.
fn admit_detections(state: &mut PropagationState, fresh: &MaskSet, spawn_iou: f64) -> Result<()> {
    for m in fresh.iter() {
        let mut tracked = false;
        for s in state.spine.iter() {
            if iou(m, s)? > spawn_iou {
                tracked = true;
                break;
            }
        }
        if tracked {
            continue;
        }
        let mut pixels = m.pixels().clone();
        pixels.subtract(&state.spine.union())?;
        if pixels.is_empty() {
            continue;
        }
        let id = MaskId::new(state.next_id)?;
        state.spine.insert(Mask::new(id, pixels)?)?;
        state.next_id += 1;
    }
    Ok(())
}

/// Propagates the spine from `prev` to `cur` (frame `state.t + 1`).
pub fn spine_step(
    state: &PropagationState,
    models: &mut Models<'_>,
    prev: Frame<'_>,
    cur: Frame<'_>,
    cfg: &SequenceConfig,
) -> Result<PropagationState> {
    let spine = models.tracker.step(prev, cur, &state.spine, Gating::PROPAGATE)?;
    let mut next = PropagationState {
        spine,
        t: state.t + 1,
        next_id: state.next_id,
    };
    next.note_ids();
    if cfg.is_detection_frame(next.t) {
        let fresh = segment_masks(models.segmenter, cur, cfg)?;
        admit_detections(&mut next, &fresh, cfg.spawn_iou)?;
    }
    Ok(next)
}

/// Tracks the current spine into the other sequence's frame.
pub fn branch_step(
    state: &PropagationState,
    tracker: &mut dyn Tracker,
    primary: Frame<'_>,
    branch: Frame<'_>,
) -> Result<MaskSet> {
    let out = tracker.step(primary, branch, &state.spine, Gating::FROZEN)?;
    if let Some(id) = out.ids().find(|&id| !state.spine.contains(id)) {
        return Err(Error::IdSubset { id: id.get() });
    }
    Ok(out)
}

/// Spine and branch sets for one frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectionStep {
    pub spine: MaskSet,
    pub branch: MaskSet,
}

/// Runs one stream over a chunk, handing each frame's spine and branch sets
/// to `sink` as soon as they exist.
///
/// `first_index` is the 1-based sequence index of `primary[0]`.
pub fn drive_direction(
    primary: &[Image],
    branch: &[Image],
    first_index: usize,
    models: &mut Models<'_>,
    cfg: &SequenceConfig,
    stream: Stream,
    mut sink: impl FnMut(&PropagationState, MaskSet) -> Result<()>,
) -> Result<()> {
    cfg.validate()?;
    if primary.is_empty() {
        return Err(Error::ZeroLength);
    }
    if primary.len() != branch.len() {
        return Err(Error::Manifest(format!(
            "{} primary frames but {} branch frames",
            primary.len(),
            branch.len()
        )));
    }
    fn frame_at(imgs: &[Image], first: usize, k: usize) -> Frame<'_> {
        Frame::new(first + k, &imgs[k])
    }
    let frame = |imgs, k| frame_at(imgs, first_index, k);
    let at = |k: usize| move |e: Error| e.at_frame(stream.name(), first_index + k);

    models.tracker.reset();
    let mut state = initial_state(models.segmenter, frame(primary, 0), cfg).map_err(at(0))?;
    for k in 0..primary.len() {
        if k > 0 {
            state = spine_step(&state, models, frame(primary, k - 1), frame(primary, k), cfg)
                .map_err(at(k))?;
        }
        let b = branch_step(&state, models.tracker, frame(primary, k), frame(branch, k)).map_err(at(k))?;
        sink(&state, b)?;
    }
    Ok(())
}

/// Branch-tracked sets for every frame of a chunk.
pub fn run_direction(
    primary: &[Image],
    branch: &[Image],
    first_index: usize,
    models: &mut Models<'_>,
    cfg: &SequenceConfig,
    stream: Stream,
) -> Result<Vec<DirectionStep>> {
    let mut steps = Vec::with_capacity(primary.len());
    drive_direction(primary, branch, first_index, models, cfg, stream, |s, b| {
        steps.push(DirectionStep {
            spine: s.spine.clone(),
            branch: b,
        });
        Ok(())
    })?;
    Ok(steps)
}

/// Masks of `spine_t` that fall below `tau` in every branch output.
pub fn missing_masks_at(spine_t: &MaskSet, branch_outputs: &[MaskSet], tau: f64) -> BTreeSet<MaskId> {
    let areas: Vec<AreaTable> = branch_outputs.iter().map(MaskSet::areas).collect();
    missing_masks_at_areas(&spine_t.areas(), &areas, tau)
}

pub fn missing_masks_at_areas(spine_t: &AreaTable, branch_areas: &[AreaTable], tau: f64) -> BTreeSet<MaskId> {
    let mut iter = branch_areas.iter();
    let Some(first) = iter.next() else {
        return BTreeSet::new();
    };
    let mut out = tau_difference_areas(spine_t, first, tau);
    for b in iter {
        if out.is_empty() {
            break;
        }
        let d = tau_difference_areas(spine_t, b, tau);
        out.retain(|id| d.contains(id));
    }
    out
}

/// What one stream keeps per chunk: full spine sets for rasterizing, and
/// only areas for the branch outputs.
struct StreamRecord {
    spines: Vec<MaskSet>,
    branch_areas: Vec<AreaTable>,
}

fn record_stream(
    primary: &[Image],
    branch: &[Image],
    first_index: usize,
    models: &mut Models<'_>,
    cfg: &SequenceConfig,
    stream: Stream,
) -> Result<StreamRecord> {
    let mut rec = StreamRecord {
        spines: Vec::with_capacity(primary.len()),
        branch_areas: Vec::with_capacity(primary.len()),
    };
    drive_direction(primary, branch, first_index, models, cfg, stream, |s, b| {
        rec.spines.push(s.spine.clone());
        rec.branch_areas.push(b.areas());
        Ok(())
    })?;
    Ok(rec)
}

/// One change map per frame of `pair`.
pub fn run_sequence(
    pair: &SequencePair,
    missing_models: &mut Models<'_>,
    new_models: &mut Models<'_>,
    cfg: &SequenceConfig,
) -> Result<Vec<ChangeMap>> {
    cfg.validate()?;
    pair.validate()?;
    let mut out = Vec::with_capacity(pair.len());
    let mut start = 0;
    for len in chunk_sequence(pair.len(), cfg.t_max)? {
        let refs = &pair.reference[start..start + len];
        let queries = &pair.query[start..start + len];
        let tau = cfg.tau.resolve(len)?;
        let (missing, new) = std::thread::scope(|s| {
            let h = s.spawn(|| record_stream(refs, queries, start + 1, missing_models, cfg, Stream::Missing));
            let new = record_stream(queries, refs, start + 1, new_models, cfg, Stream::New);
            (h.join().expect("missing stream panicked"), new)
        });
        let (missing, new) = (missing?, new?);
        for k in 0..len {
            let m_ids = missing_masks_at_areas(&missing.spines[k].areas(), &missing.branch_areas, tau);
            let n_ids = missing_masks_at_areas(&new.spines[k].areas(), &new.branch_areas, tau);
            out.push(change_map(&missing.spines[k], &m_ids, &new.spines[k], &n_ids)?);
        }
        start += len;
    }
    Ok(out)
}

/// Single reference/query pair.
pub fn detect_images(
    reference: &Image,
    query: &Image,
    missing_models: &mut Models<'_>,
    new_models: &mut Models<'_>,
    tau: f64,
    postproc: &PostprocConfig,
) -> Result<ChangeMap> {
    if reference.dims() != query.dims() {
        return Err(Error::dims(reference.dims(), query.dims()));
    }
    let cfg = SequenceConfig {
        postproc: *postproc,
        ..SequenceConfig::default()
    };
    let r = Frame::new(1, reference);
    let q = Frame::new(1, query);
    let one_way = |models: &mut Models<'_>, src: Frame<'_>, dst: Frame<'_>, stream: Stream| {
        models.tracker.reset();
        let masks = segment_masks(models.segmenter, src, &cfg).map_err(|e| e.at_frame(stream.name(), 1))?;
        let tracked = models
            .tracker
            .step(src, dst, &masks, Gating::FROZEN)
            .map_err(|e| e.at_frame(stream.name(), 1))?;
        Ok::<_, Error>((masks, tracked))
    };
    let (mr, mr_to_q) = one_way(missing_models, r, q, Stream::Missing)?;
    let (mq, mq_to_r) = one_way(new_models, q, r, Stream::New)?;
    detect_pair(&mr, &mr_to_q, &mq, &mq_to_r, tau)
}

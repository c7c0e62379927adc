//! Pre-computed masks from an outside segmentation/tracking run.
//!
//! A model runner writes 16-bit label rasters into one directory per stream:
//!
//! ```text
//! <root>/missing/seg_0001.pgm     segmentation of reference frame 1
//! <root>/missing/spine_0002.pgm   reference-1 masks tracked along the reference to frame 2
//! <root>/missing/branch_0002.pgm  the frame-2 spine masks tracked into query frame 2
//! <root>/new/...                  the same with reference and query exchanged
//! ```
//!
//! Frame numbers are 1-based sequence indices. `seg_*` files are read only at
//! chunk starts and detection frames; a missing `seg_*` file at a detection
//! frame means no fresh detections. Branch files must only use spine ids.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::io::pgm::read_label_raster;
use crate::mask::{from_label_raster, MaskSet};
use crate::model::{Frame, Gating, Segmenter, Stream, Tracker};
use crate::postproc::ProposalSet;

pub fn seg_path(root: &Path, stream: Stream, frame: usize) -> PathBuf {
    root.join(stream.name()).join(format!("seg_{frame:04}.pgm"))
}

pub fn spine_path(root: &Path, stream: Stream, frame: usize) -> PathBuf {
    root.join(stream.name()).join(format!("spine_{frame:04}.pgm"))
}

pub fn branch_path(root: &Path, stream: Stream, frame: usize) -> PathBuf {
    root.join(stream.name()).join(format!("branch_{frame:04}.pgm"))
}

fn read_set(path: &Path, dims: (u32, u32)) -> Result<MaskSet> {
    let raster = read_label_raster(path)?;
    if (raster.width, raster.height) != dims {
        return Err(Error::dims(dims, (raster.width, raster.height)));
    }
    Ok(from_label_raster(&raster))
}

#[derive(Debug, Clone)]
pub struct ExternalSegmenter {
    root: PathBuf,
    stream: Stream,
}

impl ExternalSegmenter {
    pub fn new(root: impl Into<PathBuf>, stream: Stream) -> Self {
        Self {
            root: root.into(),
            stream,
        }
    }
}

impl Segmenter for ExternalSegmenter {
    fn segment(&mut self, frame: Frame<'_>) -> Result<ProposalSet> {
        let dims = frame.image.dims();
        let path = seg_path(&self.root, self.stream, frame.index);
        if !path.is_file() {
            return Ok(ProposalSet::empty(dims.0, dims.1));
        }
        let set = read_set(&path, dims)?;
        ProposalSet::new(dims.0, dims.1, set.iter().cloned().collect(), None)
    }
}

/// Replays tracked sets from disk: propagation steps read `spine_*`, frozen
/// steps read `branch_*`.
#[derive(Debug, Clone)]
pub struct ExternalTracker {
    root: PathBuf,
    stream: Stream,
}

impl ExternalTracker {
    pub fn new(root: impl Into<PathBuf>, stream: Stream) -> Self {
        Self {
            root: root.into(),
            stream,
        }
    }
}

impl Tracker for ExternalTracker {
    fn step(
        &mut self,
        _prev: Frame<'_>,
        cur: Frame<'_>,
        prev_masks: &MaskSet,
        gating: Gating,
    ) -> Result<MaskSet> {
        let path = if gating.update_memory {
            spine_path(&self.root, self.stream, cur.index)
        } else {
            branch_path(&self.root, self.stream, cur.index)
        };
        let out = read_set(&path, prev_masks.dims())?;
        if !gating.detect_new {
            if let Some(id) = out.ids().find(|&id| !prev_masks.contains(id)) {
                return Err(Error::IdSubset { id: id.get() });
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::pgm::write_label_raster;
    use crate::mask::{to_label_raster, LabelRaster, MaskId};
    use crate::raster::Image;

    #[test]
    fn reads_files_by_gating_and_frame() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir_all(dir.path().join("missing")).unwrap();
        let spine = LabelRaster::new(3, 1, vec![1, 1, 2]).unwrap();
        let branch = LabelRaster::new(3, 1, vec![0, 1, 0]).unwrap();
        write_label_raster(&spine, spine_path(dir.path(), Stream::Missing, 2)).unwrap();
        write_label_raster(&branch, branch_path(dir.path(), Stream::Missing, 2)).unwrap();
        write_label_raster(&spine, seg_path(dir.path(), Stream::Missing, 1)).unwrap();

        let img = Image::filled(3, 1, 0);
        let mut seg = ExternalSegmenter::new(dir.path(), Stream::Missing);
        assert_eq!(seg.segment(Frame::new(1, &img)).unwrap().len(), 2);
        assert!(seg.segment(Frame::new(5, &img)).unwrap().is_empty());

        let prev = from_label_raster(&spine);
        let mut t = ExternalTracker::new(dir.path(), Stream::Missing);
        let f1 = Frame::new(1, &img);
        let f2 = Frame::new(2, &img);
        let s = t.step(f1, f2, &prev, Gating::PROPAGATE).unwrap();
        assert_eq!(to_label_raster(&s).unwrap(), spine);
        let b = t.step(f2, f2, &prev, Gating::FROZEN).unwrap();
        assert_eq!(b.area_of(MaskId::new(1).unwrap()), 1);

        let only_two = from_label_raster(&LabelRaster::new(3, 1, vec![0, 0, 2]).unwrap());
        assert!(matches!(
            t.step(f2, f2, &only_two, Gating::FROZEN),
            Err(Error::IdSubset { id: 1 })
        ));
        assert!(matches!(t.step(f2, Frame::new(3, &img), &prev, Gating::FROZEN), Err(Error::Io { .. })));
    }
}

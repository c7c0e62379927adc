//! JSON sequence manifests.
//!
//! ```json
//! {
//!   "ref": ["ref/frame_0001.pgm"],
//!   "query": ["query/frame_0001.pgm"],
//!   "gt": ["gt/change_0001.pgm"],
//!   "width": 96,
//!   "height": 72
//! }
//! ```
//!
//! `gt`, `width` and `height` are optional. Relative paths are resolved
//! against the directory holding the manifest.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::pgm::{read_change_map, read_image};
use crate::raster::{ChangeRaster, Image};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceManifest {
    #[serde(rename = "ref")]
    pub ref_frames: Vec<PathBuf>,
    #[serde(rename = "query")]
    pub query_frames: Vec<PathBuf>,
    #[serde(rename = "gt", default, skip_serializing_if = "Option::is_none")]
    pub gt_frames: Option<Vec<PathBuf>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<u32>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl SequenceManifest {
    pub fn new(ref_frames: Vec<PathBuf>, query_frames: Vec<PathBuf>) -> Self {
        Self {
            ref_frames,
            query_frames,
            gt_frames: None,
            width: None,
            height: None,
            base_dir: PathBuf::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.ref_frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ref_frames.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.ref_frames.is_empty() {
            return Err(Error::Manifest("no frames".into()));
        }
        if self.ref_frames.len() != self.query_frames.len() {
            return Err(Error::Manifest(format!(
                "{} reference frames but {} query frames",
                self.ref_frames.len(),
                self.query_frames.len()
            )));
        }
        if let Some(gt) = &self.gt_frames {
            if gt.len() != self.ref_frames.len() {
                return Err(Error::Manifest(format!(
                    "{} ground-truth frames for a {}-frame sequence",
                    gt.len(),
                    self.ref_frames.len()
                )));
            }
        }
        if self.width.is_some() != self.height.is_some() {
            return Err(Error::Manifest("width and height must be given together".into()));
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn all_paths(&self) -> impl Iterator<Item = &PathBuf> {
        self.ref_frames
            .iter()
            .chain(&self.query_frames)
            .chain(self.gt_frames.iter().flatten())
    }

    /// Serialized form with fixed key order.
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// Parses and validates lengths; does not touch referenced files.
pub fn parse_manifest(json: &str, base_dir: impl Into<PathBuf>) -> Result<SequenceManifest> {
    let mut m: SequenceManifest = serde_json::from_str(json)?;
    m.base_dir = base_dir.into();
    m.validate()?;
    Ok(m)
}

/// Reads a manifest and checks that every referenced raster exists.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<SequenceManifest> {
    let path = path.as_ref();
    let json = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let m = parse_manifest(&json, base)?;
    for p in m.all_paths() {
        let full = m.resolve(p);
        if !full.is_file() {
            return Err(Error::Manifest(format!("missing file {}", full.display())));
        }
    }
    Ok(m)
}

pub fn write_manifest(m: &SequenceManifest, path: impl AsRef<Path>) -> Result<()> {
    m.validate()?;
    let path = path.as_ref();
    std::fs::write(path, m.to_json()?).map_err(|e| Error::io(path, e))
}

/// Reference and query frames of one sequence, plus optional ground truth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequencePair {
    pub reference: Vec<Image>,
    pub query: Vec<Image>,
    pub gt: Option<Vec<ChangeRaster>>,
}

impl SequencePair {
    pub fn new(reference: Vec<Image>, query: Vec<Image>) -> Result<Self> {
        let pair = Self {
            reference,
            query,
            gt: None,
        };
        pair.validate()?;
        Ok(pair)
    }

    pub fn len(&self) -> usize {
        self.reference.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reference.is_empty()
    }

    pub fn dims(&self) -> (u32, u32) {
        self.reference[0].dims()
    }

    pub fn validate(&self) -> Result<()> {
        if self.reference.is_empty() {
            return Err(Error::ZeroLength);
        }
        if self.reference.len() != self.query.len() {
            return Err(Error::Manifest(format!(
                "{} reference frames but {} query frames",
                self.reference.len(),
                self.query.len()
            )));
        }
        let dims = self.dims();
        let gt_dims = self.gt.iter().flatten().map(ChangeRaster::dims);
        for d in self.reference.iter().chain(&self.query).map(Image::dims).chain(gt_dims) {
            if d != dims {
                return Err(Error::dims(dims, d));
            }
        }
        Ok(())
    }

    /// The same sequence with reference and query exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            reference: self.query.clone(),
            query: self.reference.clone(),
            gt: self.gt.clone(),
        }
    }
}

pub fn load_sequence(m: &SequenceManifest) -> Result<SequencePair> {
    m.validate()?;
    let load = |ps: &[PathBuf]| -> Result<Vec<Image>> {
        ps.iter().map(|p| read_image(m.resolve(p))).collect()
    };
    let gt = match &m.gt_frames {
        Some(ps) => Some(
            ps.iter()
                .map(|p| read_change_map(m.resolve(p)))
                .collect::<Result<Vec<_>>>()?,
        ),
        None => None,
    };
    let pair = SequencePair {
        reference: load(&m.ref_frames)?,
        query: load(&m.query_frames)?,
        gt,
    };
    pair.validate()?;
    if let (Some(w), Some(h)) = (m.width, m.height) {
        if pair.dims() != (w, h) {
            return Err(Error::dims((w, h), pair.dims()));
        }
    }
    Ok(pair)
}

//! Connected-component segmenter for flat-colored synthetic images.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bitmap::Bitmap;
use crate::error::Result;
use crate::mask::{Mask, MaskId};
use crate::model::{Frame, Segmenter};
use crate::postproc::ProposalSet;
use crate::raster::Image;

/// Most frequent intensity; ties go to the smaller value.
pub fn dominant_value(img: &Image) -> u16 {
    let mut counts = std::collections::HashMap::new();
    for &v in &img.pixels {
        *counts.entry(v).or_insert(0usize) += 1;
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map_or(0, |(v, _)| v)
}

/// Maximal 4-connected regions of equal intensity, excluding `background`,
/// in raster order of their first pixel.
pub fn connected_regions(img: &Image, background: u16) -> Vec<Bitmap> {
    let (w, h) = (img.width as usize, img.height as usize);
    let mut seen = vec![false; w * h];
    let mut regions = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if seen[start] || img.pixels[start] == background {
            continue;
        }
        let value = img.pixels[start];
        let mut region = Bitmap::new(img.width, img.height);
        seen[start] = true;
        stack.push(start);
        while let Some(i) = stack.pop() {
            region.insert_index(i);
            let (x, y) = (i % w, i / w);
            let mut visit = |j: usize| {
                if !seen[j] && img.pixels[j] == value {
                    seen[j] = true;
                    stack.push(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        regions.push(region);
    }
    regions
}

/// Mock segmentation model: one proposal per same-colored region.
///
/// With `noise > 0` each region is, with probability `noise / 2`, split into
/// left and right halves, and otherwise with probability `noise / 2` joined by
/// an extra overlapping proposal covering it and the next region.
#[derive(Debug, Clone)]
pub struct CcSegmenter {
    noise: f64,
    rng: ChaCha8Rng,
    background: Option<u16>,
}

impl Default for CcSegmenter {
    fn default() -> Self {
        Self::new()
    }
}

impl CcSegmenter {
    pub fn new() -> Self {
        Self::with_noise(0.0, 0)
    }

    pub fn with_noise(noise: f64, seed: u64) -> Self {
        Self {
            noise: noise.clamp(0.0, 1.0),
            rng: ChaCha8Rng::seed_from_u64(seed),
            background: None,
        }
    }

    /// Fixes the background intensity instead of taking the dominant value.
    pub fn with_background(mut self, background: u16) -> Self {
        self.background = Some(background);
        self
    }

    pub fn segment_image(&mut self, img: &Image) -> Result<ProposalSet> {
        let background = self.background.unwrap_or_else(|| dominant_value(img));
        let regions = connected_regions(img, background);
        let mut bitmaps = Vec::with_capacity(regions.len());
        for (k, region) in regions.iter().enumerate() {
            if self.noise == 0.0 {
                bitmaps.push(region.clone());
                continue;
            }
            let r: f64 = self.rng.gen();
            if r < self.noise / 2.0 {
                let (x0, _, x1, _) = region.bounding_box().expect("regions are non-empty");
                let mid = (x0 + x1) / 2;
                let mut left = region.clone();
                left.intersect_with(&Bitmap::from_fn(img.width, img.height, |x, _| x <= mid))?;
                let mut right = region.clone();
                right.subtract(&left)?;
                bitmaps.extend([left, right].into_iter().filter(|b| !b.is_empty()));
            } else if r < self.noise {
                bitmaps.push(region.clone());
                if let Some(next) = regions.get(k + 1) {
                    let mut joined = region.clone();
                    joined.union_with(next)?;
                    bitmaps.push(joined);
                }
            } else {
                bitmaps.push(region.clone());
            }
        }
        let masks = bitmaps
            .into_iter()
            .zip(1u32..)
            .map(|(b, id)| Mask::new(MaskId::new(id)?, b))
            .collect::<Result<Vec<_>>>()?;
        ProposalSet::new(img.width, img.height, masks, None)
    }
}

impl Segmenter for CcSegmenter {
    fn segment(&mut self, frame: Frame<'_>) -> Result<ProposalSet> {
        self.segment_image(frame.image)
    }
}

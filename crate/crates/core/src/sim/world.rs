//! Synthetic scenes with exact change labels.
//!
//! A world is a set of flat-colored objects rendered into a reference and a
//! query sequence. Each object has its own presence flags per sequence, so an
//! object can be removed, added or swapped between the two captures. The query
//! sequence additionally goes through a per-sequence affine intensity change.

use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bitmap::Bitmap;
use crate::change::classify_pixels;
use crate::error::{Error, Result};
use crate::io::SequencePair;
use crate::mask::LabelRaster;
use crate::raster::{ChangeRaster, Image};

/// Camera shake `(dx, dy)` for one frame.
type Offset = (i32, i32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Reference,
    Query,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Rect { x: i32, y: i32, w: u32, h: u32 },
    Ellipse { cx: i32, cy: i32, rx: u32, ry: u32 },
}

impl Shape {
    /// Top-left corner and size of the bounding box.
    fn bbox(&self) -> (i32, i32, u32, u32) {
        match *self {
            Shape::Rect { x, y, w, h } => (x, y, w, h),
            Shape::Ellipse { cx, cy, rx, ry } => (cx - rx as i32, cy - ry as i32, 2 * rx + 1, 2 * ry + 1),
        }
    }

    /// Whether bbox-local pixel `(u, v)` belongs to the shape.
    fn covers(&self, u: u32, v: u32) -> bool {
        match *self {
            Shape::Rect { .. } => true,
            Shape::Ellipse { rx, ry, .. } => {
                let dx = f64::from(u) - f64::from(rx);
                let dy = f64::from(v) - f64::from(ry);
                let (rx, ry) = (f64::from(rx.max(1)), f64::from(ry.max(1)));
                (dx * dx) / (rx * rx) + (dy * dy) / (ry * ry) <= 1.0
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresenceKeyword {
    All,
    None,
}

/// Frames in which an object is rendered: `"all"`, `"none"` or a list of
/// 1-based frame indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Presence {
    Keyword(PresenceKeyword),
    Frames(BTreeSet<usize>),
}

impl Default for Presence {
    fn default() -> Self {
        Presence::Keyword(PresenceKeyword::All)
    }
}

impl Presence {
    pub const ALL: Presence = Presence::Keyword(PresenceKeyword::All);
    pub const NONE: Presence = Presence::Keyword(PresenceKeyword::None);

    pub fn at(&self, t: usize) -> bool {
        match self {
            Presence::Keyword(PresenceKeyword::All) => true,
            Presence::Keyword(PresenceKeyword::None) => false,
            Presence::Frames(f) => f.contains(&t),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldObject {
    pub id: u32,
    pub color: u16,
    pub shape: Shape,
    /// Pixels per frame, in scene coordinates.
    #[serde(default)]
    pub velocity: [i32; 2],
    #[serde(default)]
    pub in_ref: Presence,
    #[serde(default)]
    pub in_query: Presence,
}

/// `v -> round(gain * v + bias)`, clamped to the 16-bit range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StyleTransform {
    pub gain: f64,
    pub bias: f64,
}

impl Default for StyleTransform {
    fn default() -> Self {
        Self {
            gain: 1.0,
            bias: 0.0,
        }
    }
}

impl StyleTransform {
    pub fn apply(&self, v: u16) -> u16 {
        (self.gain * f64::from(v) + self.bias).round().clamp(0.0, 65535.0) as u16
    }

    pub fn apply_image(&self, img: &Image) -> Image {
        Image {
            width: img.width,
            height: img.height,
            pixels: img.pixels.iter().map(|&v| self.apply(v)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticWorld {
    pub width: u32,
    pub height: u32,
    #[serde(default)]
    pub background: u16,
    pub objects: Vec<WorldObject>,
    /// Camera motion in pixels per frame; objects drift the opposite way.
    #[serde(default)]
    pub pan: [i32; 2],
    /// Maximum per-frame camera shake, drawn from the generation seed
    /// independently for each sequence.
    #[serde(default)]
    pub jitter: u32,
    /// Applied to the query sequence only.
    #[serde(default)]
    pub style: StyleTransform,
}

/// Rendered sequences plus per-pixel object ids and change labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticSequence {
    pub reference: Vec<Image>,
    pub query: Vec<Image>,
    pub gt: Vec<ChangeRaster>,
    pub ref_objects: Vec<LabelRaster>,
    pub query_objects: Vec<LabelRaster>,
}

impl SyntheticSequence {
    pub fn len(&self) -> usize {
        self.reference.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reference.is_empty()
    }

    pub fn pair(&self) -> SequencePair {
        SequencePair {
            reference: self.reference.clone(),
            query: self.query.clone(),
            gt: Some(self.gt.clone()),
        }
    }
}

impl SyntheticWorld {
    pub fn from_json(json: &str) -> Result<Self> {
        let w: SyntheticWorld = serde_json::from_str(json)?;
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::World("frame size must be positive".into()));
        }
        if !(self.style.gain > 0.0 && self.style.gain.is_finite() && self.style.bias.is_finite()) {
            return Err(Error::World("style gain must be positive and finite".into()));
        }
        let mut ids = BTreeSet::new();
        for o in &self.objects {
            if o.id == 0 || !ids.insert(o.id) {
                return Err(Error::World(format!("object id {} is zero or repeated", o.id)));
            }
            let (x, y, w, h) = o.shape.bbox();
            if w == 0 || h == 0 {
                return Err(Error::World(format!("object {} has an empty shape", o.id)));
            }
            if w > self.width || h > self.height {
                return Err(Error::World(format!("object {} is larger than the frame", o.id)));
            }
            if x < 0 || y < 0 || x as u32 + w > self.width || y as u32 + h > self.height {
                return Err(Error::World(format!(
                    "object {} starts out of bounds at ({x}, {y})",
                    o.id
                )));
            }
        }
        self.color_table().map(|_| ())
    }

    /// Maps raw and styled intensities to object ids (0 for background).
    pub(crate) fn color_table(&self) -> Result<HashMap<u16, u32>> {
        let mut raw: HashMap<u16, u32> = HashMap::new();
        raw.insert(self.background, 0);
        for o in &self.objects {
            if raw.insert(o.color, o.id).is_some() {
                return Err(Error::World(format!(
                    "object {} reuses color {} (colors must be unique and differ from the background)",
                    o.id, o.color
                )));
            }
        }
        let mut table = raw.clone();
        for (&color, &owner) in &raw {
            let styled = self.style.apply(color);
            match table.insert(styled, owner) {
                Some(prev) if prev != owner => {
                    return Err(Error::World(format!(
                        "style maps color {color} onto intensity {styled} already used by {}",
                        if prev == 0 { "the background".to_string() } else { format!("object {prev}") }
                    )))
                }
                _ => {}
            }
        }
        Ok(table)
    }

    fn jitter_offsets(&self, frames: usize, seed: u64) -> (Vec<Offset>, Vec<Offset>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let j = self.jitter as i32;
        let mut draw = |_| {
            if j == 0 {
                (0, 0)
            } else {
                (rng.gen_range(-j..=j), rng.gen_range(-j..=j))
            }
        };
        let r = (0..frames).map(&mut draw).collect();
        let q = (0..frames).map(&mut draw).collect();
        (r, q)
    }

    /// Top-left corner of an object's bounding box at frame `t`, clamped so
    /// the whole shape stays inside the frame.
    fn position(&self, o: &WorldObject, t: usize, shake: (i32, i32)) -> (u32, u32) {
        let (x, y, w, h) = o.shape.bbox();
        let k = (t - 1) as i32;
        let px = x + k * (o.velocity[0] - self.pan[0]) + shake.0;
        let py = y + k * (o.velocity[1] - self.pan[1]) + shake.1;
        (
            px.clamp(0, (self.width - w) as i32) as u32,
            py.clamp(0, (self.height - h) as i32) as u32,
        )
    }

    fn render(&self, role: Role, t: usize, shake: (i32, i32)) -> (Image, LabelRaster) {
        let mut img = Image::filled(self.width, self.height, self.background);
        let mut labels = LabelRaster::zeros(self.width, self.height);
        let mut objects: Vec<&WorldObject> = self
            .objects
            .iter()
            .filter(|o| match role {
                Role::Reference => o.in_ref.at(t),
                Role::Query => o.in_query.at(t),
            })
            .collect();
        objects.sort_by_key(|o| o.id);
        for o in objects {
            let (x0, y0) = self.position(o, t, shake);
            let (_, _, w, h) = o.shape.bbox();
            for v in 0..h {
                for u in 0..w {
                    if o.shape.covers(u, v) {
                        let i = (y0 + v) as usize * self.width as usize + (x0 + u) as usize;
                        img.pixels[i] = o.color;
                        labels.labels[i] = o.id;
                    }
                }
            }
        }
        if role == Role::Query {
            img = self.style.apply_image(&img);
        }
        (img, labels)
    }
}

/// Renders `frames` frames of both sequences and their change labels.
///
/// A pixel is labeled missing when the reference frame shows an object that is
/// never visible anywhere in the query sequence, new in the converse case, and
/// replaced when both hold.
pub fn generate(world: &SyntheticWorld, frames: usize, seed: u64) -> Result<SyntheticSequence> {
    if frames == 0 {
        return Err(Error::ZeroLength);
    }
    world.validate()?;
    let (r_shake, q_shake) = world.jitter_offsets(frames, seed);
    let mut seq = SyntheticSequence {
        reference: Vec::with_capacity(frames),
        query: Vec::with_capacity(frames),
        gt: Vec::with_capacity(frames),
        ref_objects: Vec::with_capacity(frames),
        query_objects: Vec::with_capacity(frames),
    };
    for t in 1..=frames {
        let (ri, rl) = world.render(Role::Reference, t, r_shake[t - 1]);
        let (qi, ql) = world.render(Role::Query, t, q_shake[t - 1]);
        seq.reference.push(ri);
        seq.query.push(qi);
        seq.ref_objects.push(rl);
        seq.query_objects.push(ql);
    }
    let visible = |rasters: &[LabelRaster]| -> BTreeSet<u32> {
        rasters.iter().flat_map(|r| r.labels.iter().copied()).filter(|&l| l != 0).collect()
    };
    let in_ref = visible(&seq.ref_objects);
    let in_query = visible(&seq.query_objects);
    let (w, h) = (world.width, world.height);
    for t in 0..frames {
        let only_in = |r: &LabelRaster, other: &BTreeSet<u32>| {
            let mut b = Bitmap::new(w, h);
            for (i, &l) in r.labels.iter().enumerate() {
                if l != 0 && !other.contains(&l) {
                    b.insert_index(i);
                }
            }
            b
        };
        let missing = only_in(&seq.ref_objects[t], &in_query);
        let new = only_in(&seq.query_objects[t], &in_ref);
        seq.gt.push(classify_pixels(&missing, &new)?);
    }
    Ok(seq)
}

/// Knobs for [`random_world`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomWorldParams {
    pub cols: u32,
    pub rows: u32,
    pub cell: u32,
    pub jitter: u32,
    pub styled: bool,
}

impl Default for RandomWorldParams {
    fn default() -> Self {
        Self {
            cols: 4,
            rows: 3,
            cell: 24,
            jitter: 2,
            styled: true,
        }
    }
}

/// A seeded world whose objects never touch, so every object's footprint is
/// its full shape in every frame it is rendered.
///
/// Each grid cell holds nothing, an object seen in both sequences, an object
/// seen in one sequence only, or a reference-only and a query-only object
/// sharing the cell (a replacement).
pub fn random_world(seed: u64, params: &RandomWorldParams) -> SyntheticWorld {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let margin = params.jitter + 1;
    let cell = params.cell;
    let max_extent = cell - 2 * margin;
    let mut objects = Vec::new();
    let mut next_id = 1u32;
    let shape_in = |rng: &mut ChaCha8Rng, cx0: u32, cy0: u32| -> Shape {
        let lo = 10.min(max_extent);
        if rng.gen_bool(0.7) {
            let w = rng.gen_range(lo..=max_extent);
            let h = rng.gen_range(lo..=max_extent);
            let x = cx0 + margin + rng.gen_range(0..=max_extent - w);
            let y = cy0 + margin + rng.gen_range(0..=max_extent - h);
            Shape::Rect { x: x as i32, y: y as i32, w, h }
        } else {
            let rmax = (max_extent - 1) / 2;
            let rx = rng.gen_range(rmax.min(7)..=rmax);
            let ry = rng.gen_range(rmax.min(7)..=rmax);
            let cx = cx0 + margin + rx + rng.gen_range(0..=max_extent - (2 * rx + 1));
            let cy = cy0 + margin + ry + rng.gen_range(0..=max_extent - (2 * ry + 1));
            Shape::Ellipse { cx: cx as i32, cy: cy as i32, rx, ry }
        }
    };
    for row in 0..params.rows {
        for col in 0..params.cols {
            let (x0, y0) = (col * cell, row * cell);
            let kind = rng.gen_range(0..5);
            let mut push = |rng: &mut ChaCha8Rng, in_ref: Presence, in_query: Presence| {
                let id = next_id;
                next_id += 1;
                objects.push(WorldObject {
                    id,
                    color: (id * 2000 + 500) as u16,
                    shape: shape_in(rng, x0, y0),
                    velocity: [0, 0],
                    in_ref,
                    in_query,
                });
            };
            match kind {
                0 => {}
                1 => push(&mut rng, Presence::ALL, Presence::ALL),
                2 => push(&mut rng, Presence::ALL, Presence::NONE),
                3 => push(&mut rng, Presence::NONE, Presence::ALL),
                _ => {
                    push(&mut rng, Presence::ALL, Presence::NONE);
                    push(&mut rng, Presence::NONE, Presence::ALL);
                }
            }
        }
    }
    let mut world = SyntheticWorld {
        width: params.cols * cell,
        height: params.rows * cell,
        background: 0,
        objects,
        pan: [0, 0],
        jitter: params.jitter,
        style: StyleTransform::default(),
    };
    if params.styled {
        world.style = StyleTransform {
            gain: rng.gen_range(0.6..0.95),
            bias: f64::from(rng.gen_range(100u32..900)),
        };
        if world.validate().is_err() {
            world.style = StyleTransform::default();
        }
    }
    world
}

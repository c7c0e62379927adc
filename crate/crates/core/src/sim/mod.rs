//! Stand-ins for the segmentation and tracking models, and a scene generator
//! with exact ground truth.

pub mod greedy;
pub mod oracle;
pub mod segmenter;
pub mod world;

pub use greedy::GreedyTracker;
pub use oracle::OracleTracker;
pub use segmenter::CcSegmenter;
pub use world::{
    generate, random_world, Presence, RandomWorldParams, Shape, StyleTransform, SyntheticSequence,
    SyntheticWorld, WorldObject,
};

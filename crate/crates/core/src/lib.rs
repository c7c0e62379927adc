//! Training-free scene change detection from segmentation masks.
//!
//! Reference and query sequences are segmented, tracked along themselves and
//! into each other, and compared mask-by-mask with an area-ratio threshold.
//! Model stand-ins and a synthetic scene generator live in [`sim`].

pub mod bitmap;
pub mod change;
pub mod error;
pub mod eval;
pub mod external;
pub mod io;
pub mod mask;
pub mod model;
pub mod pipeline;
pub mod postproc;
pub mod raster;
pub mod sbl;
pub mod sim;

pub use bitmap::Bitmap;
pub use change::{adaptive_tau, tau_difference, ChangeMap, ContentThreshold};
pub use error::{Error, Result};
pub use mask::{LabelRaster, Mask, MaskId, MaskSet};
pub use model::{Frame, Gating, Segmenter, Stream, Tracker};
pub use pipeline::{detect_images, run_sequence, Models, SequenceConfig};
pub use postproc::{postprocess, PostprocConfig, ProposalSet};
pub use raster::{ChangeClass, ChangeRaster, Image};

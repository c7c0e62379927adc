//! On-disk formats: PGM rasters and JSON sequence manifests.

pub mod manifest;
pub mod pgm;

pub use manifest::{
    load_sequence, parse_manifest, read_manifest, write_manifest, SequenceManifest, SequencePair,
};
pub use pgm::{
    read_change_map, read_image, read_label_raster, write_change_map, write_image,
    write_label_raster,
};

//! On-disk formats.
//!
//! All binary formats are little-endian, fixed-width and unpadded: a 4-byte
//! magic, a `u16` version, a header and a payload. Version 1 stores every
//! real as `f32`; computation happens in `f64`.
//!
//! | magic  | contents                       |
//! |--------|--------------------------------|
//! | `FGRD` | one feature grid               |
//! | `AMSK` | one ground-truth mask          |
//! | `PRDT` | one prototype bank checkpoint  |
//! | `AMAP` | one pixel-level anomaly map    |

mod binary;
pub mod checkpoint;
pub mod config;
pub mod grid;
pub mod manifest;
pub mod map;
pub mod mask;
pub mod synth;
pub mod text;

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Current version of every binary format.
pub const FORMAT_VERSION: u16 = 1;

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub use checkpoint::{read_checkpoint, rng_from_blob, rng_to_blob, write_checkpoint, ProtoCheckpoint};
pub use config::{apply_config, read_config, render_config};
pub use grid::{decode_grid, encode_grid, read_grid, write_grid};
pub use manifest::{AnomalyTag, DatasetManifest, Sample, Split};
pub use map::{decode_map, encode_map, read_map, write_map};
pub use mask::{decode_mask, encode_mask, read_mask, write_mask, Mask};

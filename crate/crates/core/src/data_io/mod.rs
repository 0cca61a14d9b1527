//! On-disk formats.
//!
//! `.smsc` complex array container:
//!
//! ```text
//! bytes 0..4      b"SMSC"
//! bytes 4..8      u32 little-endian header length L
//! bytes 8..8+L    UTF-8 JSON header
//!                 {"dtype":"c64","shape":[..],"layout":"row-major",
//!                  "byte_order":"little","meta":{..}?}
//! bytes 8+L..     payload: (re, im) f32 little-endian pairs, row-major
//! ```
//!
//! Dimension order is (slice | coil | frame ..., readout, phase-encode).
//! Values are held as `f64` in memory and narrowed to `f32` on write.
//!
//! `.smsw` weight manifests use the same framing with magic `b"SMSW"`, a
//! JSON manifest, and a raw little-endian `f32` blob; see [`weights`].

mod array;
pub mod config;
pub mod weights;

pub use array::{read_array, read_array_with_meta, write_array, write_array_with_meta, ArrayHeader};
pub use config::{Fraction, Method, ReconConfig, SamplerVariant};
pub use weights::{load_weights, save_weights, LayerKind, LayerSpec, ScheduleParams, TensorSpec, WeightManifest};

use std::io::Read;

use crate::error::{Error, Result};

/// Reads `magic`, the header length and the JSON header from a framed file.
pub(crate) fn read_frame_header(reader: &mut impl Read, magic: &[u8; 4]) -> Result<Vec<u8>> {
    let mut head = [0u8; 8];
    reader
        .read_exact(&mut head)
        .map_err(|e| Error::Format(format!("truncated preamble: {e}")))?;
    if &head[..4] != magic {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&head[..4]),
            String::from_utf8_lossy(magic)
        )));
    }
    let len = u32::from_le_bytes([head[4], head[5], head[6], head[7]]) as usize;
    let mut json = vec![0u8; len];
    reader
        .read_exact(&mut json)
        .map_err(|e| Error::Format(format!("truncated header: {e}")))?;
    Ok(json)
}

pub(crate) fn frame(magic: &[u8; 4], header: &[u8], payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + header.len() + payload.len());
    out.extend_from_slice(magic);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(header);
    out.extend_from_slice(payload);
    out
}

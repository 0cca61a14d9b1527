use std::fs;
use std::path::Path;

use ndarray::{ArrayD, IxDyn};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{frame, read_frame_header};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"SMSC";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayHeader {
    pub dtype: String,
    pub shape: Vec<usize>,
    pub layout: String,
    pub byte_order: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<Value>,
}

impl ArrayHeader {
    fn validate(&self) -> Result<usize> {
        if self.dtype != "c64" {
            return Err(Error::Unsupported(format!("dtype tag {:?}", self.dtype)));
        }
        if self.byte_order != "little" {
            return Err(Error::Unsupported(format!("byte order {:?}", self.byte_order)));
        }
        if self.layout != "row-major" {
            return Err(Error::Unsupported(format!("layout {:?}", self.layout)));
        }
        if self.shape.is_empty() || self.shape.contains(&0) {
            return Err(Error::Format(format!("shape {:?} must be non-empty with entries >= 1", self.shape)));
        }
        self.shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Format("shape product overflows".into()))
    }
}

pub fn write_array<D: ndarray::Dimension>(array: &ndarray::Array<Complex64, D>, path: impl AsRef<Path>) -> Result<()> {
    write_array_with_meta(array, None, path)
}

pub fn write_array_with_meta<D: ndarray::Dimension>(
    array: &ndarray::Array<Complex64, D>,
    meta: Option<Value>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    if array.ndim() == 0 || array.is_empty() {
        return Err(Error::Shape("cannot write an empty array".into()));
    }
    let header = ArrayHeader {
        dtype: "c64".into(),
        shape: array.shape().to_vec(),
        layout: "row-major".into(),
        byte_order: "little".into(),
        meta,
    };
    let json = serde_json::to_vec(&header)?;
    let mut payload = Vec::with_capacity(array.len() * 8);
    // iter() walks in logical row-major order regardless of memory layout
    for v in array.iter() {
        payload.extend_from_slice(&(v.re as f32).to_le_bytes());
        payload.extend_from_slice(&(v.im as f32).to_le_bytes());
    }
    fs::write(path, frame(MAGIC, &json, &payload)).map_err(|e| Error::io(path, e))
}

pub fn read_array(path: impl AsRef<Path>) -> Result<ArrayD<Complex64>> {
    read_array_with_meta(path).map(|(a, _)| a)
}

pub fn read_array_with_meta(path: impl AsRef<Path>) -> Result<(ArrayD<Complex64>, ArrayHeader)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

fn decode(bytes: &[u8]) -> Result<(ArrayD<Complex64>, ArrayHeader)> {
    let mut cursor = bytes;
    let json = read_frame_header(&mut cursor, MAGIC)?;
    let header: ArrayHeader =
        serde_json::from_slice(&json).map_err(|e| Error::Format(format!("header: {e}")))?;
    let n = header.validate()?;
    let payload = cursor;
    if payload.len() != n * 8 {
        return Err(Error::Format(format!(
            "payload is {} bytes, shape {:?} needs {}",
            payload.len(),
            header.shape,
            n * 8
        )));
    }
    let values: Vec<Complex64> = payload
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
            Complex64::new(re as f64, im as f64)
        })
        .collect();
    let array = ArrayD::from_shape_vec(IxDyn(&header.shape), values).map_err(|e| Error::Format(e.to_string()))?;
    Ok((array, header))
}

//! `.smsw` weight manifests for the epsilon-prediction network.
//!
//! Framing is `b"SMSW"`, u32 LE manifest length, JSON manifest, then a raw
//! little-endian `f32` blob. Tensor offsets are byte offsets into the blob.
//! Conv weights are `[out, in, kh, kw]`, dense weights `[out, in]`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{frame, read_frame_header};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"SMSW";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Conv2d,
    Dense,
    TimeEmbed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset into the blob.
    pub offset: usize,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    pub tensors: Vec<TensorSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    pub timesteps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
}

impl Default for ScheduleParams {
    fn default() -> Self {
        Self { timesteps: 1000, beta_start: 1e-4, beta_end: 0.02 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightManifest {
    pub architecture: String,
    pub layers: Vec<LayerSpec>,
    pub schedule: ScheduleParams,
    #[serde(skip)]
    pub blob: Vec<f32>,
}

impl WeightManifest {
    pub fn validate(&self) -> Result<()> {
        let s = &self.schedule;
        if s.timesteps < 1 || !(s.beta_start > 0.0 && s.beta_start <= s.beta_end && s.beta_end < 1.0) {
            return Err(Error::Format(format!("invalid schedule parameters {s:?}")));
        }
        let blob_bytes = self.blob.len() * 4;
        let mut spans = Vec::new();
        for layer in &self.layers {
            check_layer(layer)?;
            for t in &layer.tensors {
                if t.offset % 4 != 0 {
                    return Err(Error::Format(format!("{}.{}: offset {} not 4-byte aligned", layer.name, t.name, t.offset)));
                }
                let end = t.offset + 4 * t.len();
                if end > blob_bytes {
                    return Err(Error::Format(format!(
                        "{}.{}: bytes {}..{end} exceed blob of {blob_bytes} bytes",
                        layer.name, t.name, t.offset
                    )));
                }
                spans.push((t.offset, end, format!("{}.{}", layer.name, t.name)));
            }
        }
        spans.sort();
        for pair in spans.windows(2) {
            if pair[1].0 < pair[0].1 {
                return Err(Error::Format(format!("tensors {} and {} overlap", pair[0].2, pair[1].2)));
            }
        }
        let declared: usize = spans.iter().map(|(a, b, _)| (b - a) / 4).sum();
        if declared != self.blob.len() {
            return Err(Error::Format(format!(
                "parameter count mismatch: layers declare {declared} floats, blob holds {}",
                self.blob.len()
            )));
        }
        Ok(())
    }

    pub fn layer(&self, name: &str) -> Option<&LayerSpec> {
        self.layers.iter().find(|l| l.name == name)
    }

    /// Data and shape of `layer.tensor`.
    pub fn tensor(&self, layer: &str, tensor: &str) -> Option<(&[f32], &[usize])> {
        let t = self.layer(layer)?.tensors.iter().find(|t| t.name == tensor)?;
        let start = t.offset / 4;
        Some((&self.blob[start..start + t.len()], &t.shape))
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().flat_map(|l| &l.tensors).map(TensorSpec::len).sum()
    }
}

fn check_layer(layer: &LayerSpec) -> Result<()> {
    let want_rank = match layer.kind {
        LayerKind::Conv2d => 4,
        LayerKind::Dense | LayerKind::TimeEmbed => 2,
    };
    let weight = layer
        .tensors
        .iter()
        .find(|t| t.name == "weight")
        .ok_or_else(|| Error::Format(format!("layer {} has no weight tensor", layer.name)))?;
    if weight.shape.len() != want_rank || weight.shape.contains(&0) {
        return Err(Error::Format(format!(
            "layer {} ({:?}) weight shape {:?} should have rank {want_rank}",
            layer.name, layer.kind, weight.shape
        )));
    }
    for t in &layer.tensors {
        match t.name.as_str() {
            "weight" => {}
            "bias" => {
                if t.shape != [weight.shape[0]] {
                    return Err(Error::Format(format!(
                        "layer {} bias shape {:?} does not match {} outputs",
                        layer.name, t.shape, weight.shape[0]
                    )));
                }
            }
            other => return Err(Error::Format(format!("layer {} has unknown tensor {other:?}", layer.name))),
        }
    }
    Ok(())
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<WeightManifest> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut cursor = bytes.as_slice();
    let json = read_frame_header(&mut cursor, MAGIC)?;
    let mut manifest: WeightManifest =
        serde_json::from_slice(&json).map_err(|e| Error::Format(format!("manifest: {e}")))?;
    if cursor.len() % 4 != 0 {
        return Err(Error::Format(format!("blob length {} is not a whole number of floats", cursor.len())));
    }
    manifest.blob = cursor.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    manifest.validate()?;
    Ok(manifest)
}

pub fn save_weights(manifest: &WeightManifest, path: impl AsRef<Path>) -> Result<()> {
    manifest.validate()?;
    let path = path.as_ref();
    let json = serde_json::to_vec(manifest)?;
    let blob: Vec<u8> = manifest.blob.iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(path, frame(MAGIC, &json, &blob)).map_err(|e| Error::io(path, e))
}

use ndarray::{s, Array1, Array2, Array3, Array4, ArrayView3, ArrayView4, Axis};
use rayon::prelude::*;

use super::Denoiser;
use crate::data_io::{LayerKind, WeightManifest};
use crate::error::{Error, Result};

pub const ARCHITECTURE: &str = "sms-eps-cnn-v1";
const BLOCKS: usize = 4;

#[derive(Debug, Clone)]
struct Conv {
    weight: Array4<f64>,
    bias: Array1<f64>,
}

#[derive(Debug, Clone)]
struct Dense {
    weight: Array2<f64>,
    bias: Array1<f64>,
}

#[derive(Debug, Clone)]
struct Block {
    conv1: Conv,
    temb: Dense,
    conv2: Conv,
}

/// Small residual CNN predicting the noise of a two-channel field.
///
/// ```text
/// e = silu(time_embed(sinusoid(t)))
/// h = conv_in(x)
/// h = h + conv2(silu(conv1(silu(h)) + temb(e)))      (x4 blocks)
/// eps = conv_out(silu(h))
/// ```
///
/// Convolutions are 3x3 with zero padding 1. `sinusoid(t)` has the width of
/// the hidden channels: first half `sin(t f_i)`, second half `cos(t f_i)`,
/// `f_i = exp(-ln(10000) i / half)`. Tensor layouts follow PyTorch.
#[derive(Debug, Clone)]
pub struct CnnDenoiser {
    conv_in: Conv,
    time_embed: Dense,
    blocks: Vec<Block>,
    conv_out: Conv,
    channels: usize,
}

fn tensor(m: &WeightManifest, layer: &str, name: &str) -> Result<(Vec<f64>, Vec<usize>)> {
    let (data, shape) = m
        .tensor(layer, name)
        .ok_or_else(|| Error::Format(format!("weights lack {layer}.{name}")))?;
    Ok((data.iter().map(|&v| v as f64).collect(), shape.to_vec()))
}

fn conv(m: &WeightManifest, layer: &str, cin: usize, cout: usize) -> Result<Conv> {
    expect_kind(m, layer, LayerKind::Conv2d)?;
    let (w, shape) = tensor(m, layer, "weight")?;
    if shape[0] != cout || shape[1] != cin || shape[2] != 3 || shape[3] != 3 {
        return Err(Error::Format(format!("{layer}: weight {shape:?}, expected [{cout}, {cin}, 3, 3]")));
    }
    let (b, _) = tensor(m, layer, "bias")?;
    Ok(Conv { weight: Array4::from_shape_vec((cout, cin, 3, 3), w).expect("checked"), bias: Array1::from(b) })
}

fn dense(m: &WeightManifest, layer: &str, kind: LayerKind, cin: usize, cout: usize) -> Result<Dense> {
    expect_kind(m, layer, kind)?;
    let (w, shape) = tensor(m, layer, "weight")?;
    if shape != [cout, cin] {
        return Err(Error::Format(format!("{layer}: weight {shape:?}, expected [{cout}, {cin}]")));
    }
    let (b, _) = tensor(m, layer, "bias")?;
    Ok(Dense { weight: Array2::from_shape_vec((cout, cin), w).expect("checked"), bias: Array1::from(b) })
}

fn expect_kind(m: &WeightManifest, layer: &str, kind: LayerKind) -> Result<()> {
    let l = m.layer(layer).ok_or_else(|| Error::Format(format!("weights lack layer {layer}")))?;
    if l.kind != kind {
        return Err(Error::Format(format!("layer {layer} is {:?}, expected {kind:?}", l.kind)));
    }
    Ok(())
}

impl CnnDenoiser {
    pub fn from_manifest(m: &WeightManifest) -> Result<Self> {
        if m.architecture != ARCHITECTURE {
            return Err(Error::Unsupported(format!("architecture {:?}, expected {ARCHITECTURE:?}", m.architecture)));
        }
        m.validate()?;
        let (_, shape) = m
            .tensor("conv_in", "weight")
            .ok_or_else(|| Error::Format("weights lack conv_in.weight".into()))?;
        let channels = shape[0];
        if channels < 2 || channels % 2 != 0 {
            return Err(Error::Format(format!("hidden width {channels} must be even")));
        }
        let blocks = (0..BLOCKS)
            .map(|b| {
                Ok(Block {
                    conv1: conv(m, &format!("block{b}.conv1"), channels, channels)?,
                    temb: dense(m, &format!("block{b}.temb"), LayerKind::Dense, channels, channels)?,
                    conv2: conv(m, &format!("block{b}.conv2"), channels, channels)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let expected = 3 + 3 * BLOCKS;
        if m.layers.len() != expected {
            return Err(Error::Format(format!("{} layers, architecture has {expected}", m.layers.len())));
        }
        Ok(Self {
            conv_in: conv(m, "conv_in", 2, channels)?,
            time_embed: dense(m, "time_embed", LayerKind::TimeEmbed, channels, channels)?,
            blocks,
            conv_out: conv(m, "conv_out", channels, 2)?,
            channels,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    fn embedding(&self, t: usize) -> Array1<f64> {
        let half = self.channels / 2;
        let mut f = Array1::zeros(self.channels);
        for i in 0..half {
            let freq = (-(10000f64).ln() * i as f64 / half as f64).exp();
            f[i] = (t as f64 * freq).sin();
            f[half + i] = (t as f64 * freq).cos();
        }
        silu1(apply_dense(&self.time_embed, &f))
    }

    fn forward_one(&self, x: ArrayView3<f64>, e: &Array1<f64>) -> Array3<f64> {
        let mut h = conv2d(&self.conv_in, x);
        for b in &self.blocks {
            let mut a = conv2d(&b.conv1, silu3(&h).view());
            let shift = apply_dense(&b.temb, e);
            for (mut ch, s) in a.outer_iter_mut().zip(shift.iter()) {
                ch += *s;
            }
            let a = conv2d(&b.conv2, silu3(&a).view());
            h += &a;
        }
        conv2d(&self.conv_out, silu3(&h).view())
    }
}

impl Denoiser for CnnDenoiser {
    fn predict(&self, x_t: ArrayView4<f64>, t: usize) -> Result<Array4<f64>> {
        if x_t.dim().1 != 2 {
            return Err(Error::Shape(format!("expected 2 channels, got {}", x_t.dim().1)));
        }
        let e = self.embedding(t);
        let mut out = Array4::zeros(x_t.dim());
        for (k, item) in x_t.outer_iter().enumerate() {
            out.index_axis_mut(Axis(0), k).assign(&self.forward_one(item, &e));
        }
        Ok(out)
    }
}

fn silu(v: f64) -> f64 {
    v / (1.0 + (-v).exp())
}

fn silu1(x: Array1<f64>) -> Array1<f64> {
    x.mapv(silu)
}

fn silu3(x: &Array3<f64>) -> Array3<f64> {
    x.mapv(silu)
}

fn apply_dense(d: &Dense, x: &Array1<f64>) -> Array1<f64> {
    d.weight.dot(x) + &d.bias
}

/// 3x3 convolution (cross-correlation), zero padding 1.
fn conv2d(c: &Conv, x: ArrayView3<f64>) -> Array3<f64> {
    let (cin, h, w) = x.dim();
    let cout = c.weight.dim().0;
    let planes: Vec<Array2<f64>> = (0..cout)
        .into_par_iter()
        .map(|o| {
            let mut acc = Array2::from_elem((h, w), c.bias[o]);
            for i in 0..cin {
                let xi = x.index_axis(Axis(0), i);
                for ky in 0..3 {
                    for kx in 0..3 {
                        let wv = c.weight[[o, i, ky, kx]];
                        // output (y, x) reads input (y + ky - 1, x + kx - 1)
                        let (oy0, oy1) = (if ky == 0 { 1 } else { 0 }, if ky == 2 { h - 1 } else { h });
                        let (ox0, ox1) = (if kx == 0 { 1 } else { 0 }, if kx == 2 { w - 1 } else { w });
                        if oy0 >= oy1 || ox0 >= ox1 {
                            continue;
                        }
                        let src = xi.slice(s![oy0 + ky - 1..oy1 + ky - 1, ox0 + kx - 1..ox1 + kx - 1]);
                        acc.slice_mut(s![oy0..oy1, ox0..ox1]).scaled_add(wv, &src);
                    }
                }
            }
            acc
        })
        .collect();
    let mut out = Array3::zeros((cout, h, w));
    for (o, p) in planes.into_iter().enumerate() {
        out.index_axis_mut(Axis(0), o).assign(&p);
    }
    out
}

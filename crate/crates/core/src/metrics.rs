//! PSNR, SSIM and temporal SNR on magnitude images.

use std::path::Path;

use ndarray::{s, Array2, ArrayView2, ArrayView3, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sms_operators::SliceStack;

/// Reported PSNR when the images are identical, and the ceiling otherwise.
pub const PSNR_CAP: f64 = 99.0;
pub const TSNR_CAP: f64 = 1e6;

const SSIM_WIN: usize = 7;
const SSIM_SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;

fn same_shape(a: &ArrayView2<f64>, b: &ArrayView2<f64>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!("reference {:?} vs test {:?}", a.dim(), b.dim())));
    }
    Ok(())
}

fn peak(a: &ArrayView2<f64>) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Psnr {
    pub db: f64,
    /// Set when the value hit [`PSNR_CAP`], including identical inputs.
    pub capped: bool,
}

/// `10 log10(peak^2 / MSE)` with `peak = max |ref|`.
pub fn psnr(reference: ArrayView2<f64>, test: ArrayView2<f64>) -> Result<Psnr> {
    same_shape(&reference, &test)?;
    let p = peak(&reference);
    if !(p > 0.0) {
        return Err(Error::InvalidArgument("PSNR needs a reference with nonzero peak".into()));
    }
    let mse = Zip::from(&reference).and(&test).fold(0.0, |acc, a, b| acc + (a - b).powi(2)) / reference.len() as f64;
    let db = 10.0 * (p * p / mse).log10();
    if mse == 0.0 || db >= PSNR_CAP {
        return Ok(Psnr { db: PSNR_CAP, capped: true });
    }
    Ok(Psnr { db, capped: false })
}

fn gaussian_window() -> [f64; SSIM_WIN] {
    let c = (SSIM_WIN / 2) as f64;
    let mut g = [0.0; SSIM_WIN];
    for (i, v) in g.iter_mut().enumerate() {
        *v = (-(i as f64 - c).powi(2) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = g.iter().sum();
    g.map(|v| v / s)
}

/// Separable Gaussian filtering over valid 7x7 windows only.
fn filter(a: &Array2<f64>, g: &[f64; SSIM_WIN]) -> Array2<f64> {
    let (h, w) = a.dim();
    let (oh, ow) = (h + 1 - SSIM_WIN, w + 1 - SSIM_WIN);
    let mut rows = Array2::zeros((oh, w));
    for i in 0..oh {
        for (k, gk) in g.iter().enumerate() {
            rows.row_mut(i).scaled_add(*gk, &a.row(i + k));
        }
    }
    let mut out = Array2::zeros((oh, ow));
    for j in 0..ow {
        for (k, gk) in g.iter().enumerate() {
            out.column_mut(j).scaled_add(*gk, &rows.column(j + k));
        }
    }
    out
}

/// Mean local SSIM with a 7x7 Gaussian window (sigma 1.5), K1 = 0.01,
/// K2 = 0.03 and dynamic range equal to the reference peak (1 if the
/// reference is all zero). Both sides need at least 7 pixels.
pub fn ssim(reference: ArrayView2<f64>, test: ArrayView2<f64>) -> Result<f64> {
    same_shape(&reference, &test)?;
    let (h, w) = reference.dim();
    if h < SSIM_WIN || w < SSIM_WIN {
        return Err(Error::Shape(format!("SSIM needs at least {SSIM_WIN}x{SSIM_WIN}, got {h}x{w}")));
    }
    let range = match peak(&reference) {
        p if p > 0.0 => p,
        _ => 1.0,
    };
    let c1 = (K1 * range).powi(2);
    let c2 = (K2 * range).powi(2);
    let g = gaussian_window();
    let x = reference.to_owned();
    let y = test.to_owned();
    let mx = filter(&x, &g);
    let my = filter(&y, &g);
    let sxx = filter(&(&x * &x), &g) - &mx * &mx;
    let syy = filter(&(&y * &y), &g) - &my * &my;
    let sxy = filter(&(&x * &y), &g) - &mx * &my;
    let mut total = 0.0;
    Zip::from(&mx).and(&my).and(&sxx).and(&syy).and(&sxy).for_each(|&a, &b, &vx, &vy, &cxy| {
        total += ((2.0 * a * b + c1) * (2.0 * cxy + c2)) / ((a * a + b * b + c1) * (vx + vy + c2));
    });
    Ok(total / mx.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsnrMap {
    pub map: Array2<f64>,
    /// Voxels with zero temporal std and nonzero mean, reported as [`TSNR_CAP`].
    pub capped: usize,
    /// Voxels that are zero in every frame, reported as 0.
    pub degenerate: usize,
}

/// Temporal mean over sample std (N - 1) per voxel of a `(time, h, w)` series.
pub fn tsnr(frames: ArrayView3<f64>) -> Result<TsnrMap> {
    let n = frames.len_of(Axis(0));
    if n < 2 {
        return Err(Error::InvalidArgument(format!("tSNR needs at least 2 frames, got {n}")));
    }
    let mean = frames.mean_axis(Axis(0)).expect("nonempty");
    let std = frames.std_axis(Axis(0), 1.0);
    let (mut capped, mut degenerate) = (0, 0);
    let map = Zip::from(&mean).and(&std).map_collect(|&m, &s| {
        if s > 0.0 {
            m / s
        } else if m == 0.0 {
            degenerate += 1;
            0.0
        } else {
            capped += 1;
            TSNR_CAP.copysign(m)
        }
    });
    Ok(TsnrMap { map, capped, degenerate })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    fn of(v: &[f64]) -> Self {
        let n = v.len().max(1) as f64;
        let mean = v.iter().sum::<f64>() / n;
        let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub psnr: Vec<f64>,
    pub ssim: Vec<f64>,
    /// Per slice, true where PSNR hit the cap.
    pub psnr_capped: Vec<bool>,
    pub psnr_summary: Summary,
    pub ssim_summary: Summary,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tsnr: Option<TsnrMap>,
}

/// Magnitudes of a stack, divided by the reference stack's peak magnitude.
fn normalized_magnitudes(reference: &SliceStack, test: &SliceStack) -> Result<(ndarray::Array3<f64>, ndarray::Array3<f64>)> {
    if reference.dim() != test.dim() {
        return Err(Error::Shape(format!("reference {:?} vs test {:?}", reference.dim(), test.dim())));
    }
    let r = reference.data().mapv(|v| v.norm());
    let t = test.data().mapv(|v| v.norm());
    let p = r.iter().fold(0.0f64, |m, v| m.max(*v));
    if !(p > 0.0) {
        return Err(Error::InvalidArgument("reference stack is all zero".into()));
    }
    Ok((r / p, t / p))
}

/// Per-slice PSNR and SSIM of magnitude images after scaling both stacks
/// so the reference peak is 1.
pub fn evaluate(reference: &SliceStack, test: &SliceStack) -> Result<MetricReport> {
    let (r, t) = normalized_magnitudes(reference, test)?;
    let mut psnr_v = Vec::new();
    let mut capped = Vec::new();
    let mut ssim_v = Vec::new();
    for (rs, ts) in r.outer_iter().zip(t.outer_iter()) {
        // a slice that is empty in the reference has no PSNR peak of its own
        let p = if peak(&rs) > 0.0 {
            psnr(rs, ts)?
        } else {
            let mse = ts.iter().map(|v| v * v).sum::<f64>() / ts.len() as f64;
            if mse == 0.0 {
                Psnr { db: PSNR_CAP, capped: true }
            } else {
                Psnr { db: (-10.0 * mse.log10()).min(PSNR_CAP), capped: false }
            }
        };
        psnr_v.push(p.db);
        capped.push(p.capped);
        ssim_v.push(ssim(rs, ts)?);
    }
    Ok(MetricReport {
        psnr_summary: Summary::of(&psnr_v),
        ssim_summary: Summary::of(&ssim_v),
        psnr: psnr_v,
        ssim: ssim_v,
        psnr_capped: capped,
        tsnr: None,
    })
}

/// Absolute error `| |ref| - |test| |` after peak normalization, slices
/// side by side, `full_scale` (fraction of the reference peak) mapped to
/// white. Returns the image size `(height, width)`.
pub fn write_error_map(reference: &SliceStack, test: &SliceStack, full_scale: f64, path: &Path) -> Result<(u32, u32)> {
    if !(full_scale > 0.0) {
        return Err(Error::InvalidArgument(format!("full scale {full_scale} must be positive")));
    }
    let (r, t) = normalized_magnitudes(reference, test)?;
    let (mb, h, w) = r.dim();
    let mut img = image::GrayImage::new((mb * w) as u32, h as u32);
    for sl in 0..mb {
        let err = (&r.slice(s![sl, .., ..]) - &t.slice(s![sl, .., ..])).mapv(f64::abs);
        for ((i, j), e) in err.indexed_iter() {
            let v = (e / full_scale).clamp(0.0, 1.0) * 255.0;
            img.put_pixel((sl * w + j) as u32, i as u32, image::Luma([v.round() as u8]));
        }
    }
    img.save(path).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Format(other.to_string()),
    })?;
    Ok((h as u32, (mb * w) as u32))
}

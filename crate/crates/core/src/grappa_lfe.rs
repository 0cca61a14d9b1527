//! GRAPPA kernels on the readout-concatenated grid: calibration from a
//! single-band scan, low-frequency enhancement (LFE) and full RO-GRAPPA.
//!
//! Combined MB x R decimation is interpolated in two separable passes. The
//! first pass runs along the extended readout (factor MB) on the acquired
//! phase-encode columns, with orthogonal taps spaced R apart. The second pass
//! runs along phase-encode (factor R) on every row, orthogonal taps spaced 1
//! apart. Each pass keeps one weight set per offset from the acquired
//! lattice. Sources falling outside the grid read as zero.

use std::path::Path;

use nalgebra::DMatrix;
use ndarray::{s, Array2, Array3, Array4, ArrayView3, Axis};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data_io::{read_array_with_meta, write_array_with_meta};
use crate::error::{Error, Result};
use crate::fft::{centered_index, Fft2};
use crate::sms_operators::{CaipiScheme, CoilMaps, Measurement, SamplingPattern, SliceStack, SmsOperator};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelAxis {
    Readout,
    PhaseEncode,
}

/// Source layout of one interpolation pass.
///
/// For a target `r` steps past the acquired line `b` preceding it, the
/// sources along the decimated axis are `b + factor * m` for
/// `m in first_src .. first_src + n_src`, each taken at `n_orth` orthogonal
/// positions centred on the target and spaced `orth_stride` apart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelGeometry {
    pub axis: KernelAxis,
    pub factor: usize,
    pub n_src: usize,
    pub first_src: isize,
    pub n_orth: usize,
    pub orth_stride: usize,
}

impl KernelGeometry {
    /// Sources split evenly around the target (`first_src = 1 - n_src / 2`).
    pub fn centered(axis: KernelAxis, factor: usize, n_src: usize, n_orth: usize, orth_stride: usize) -> Self {
        Self { axis, factor, n_src, first_src: 1 - (n_src / 2) as isize, n_orth, orth_stride }
    }

    /// All sources at or before the acquired line preceding the target.
    pub fn causal(axis: KernelAxis, factor: usize, n_src: usize, n_orth: usize, orth_stride: usize) -> Self {
        Self { axis, factor, n_src, first_src: 1 - n_src as isize, n_orth, orth_stride }
    }

    pub fn validate(&self) -> Result<()> {
        if self.factor == 0 || self.n_src == 0 || self.n_orth == 0 || self.orth_stride == 0 {
            return Err(Error::InvalidArgument(format!("degenerate kernel geometry {self:?}")));
        }
        Ok(())
    }

    pub fn unknowns(&self, coils: usize) -> usize {
        coils * self.n_src * self.n_orth
    }

    /// Offsets along the decimated axis, relative to a target at offset `r`.
    fn src_offsets(&self, r: usize) -> Vec<isize> {
        (0..self.n_src as isize)
            .map(|m| (self.first_src + m) * self.factor as isize - r as isize)
            .collect()
    }

    fn orth_offsets(&self) -> Vec<isize> {
        let half = (self.n_orth / 2) as isize;
        (0..self.n_orth as isize).map(|d| (d - half) * self.orth_stride as isize).collect()
    }
}

/// Interpolation weights for one pass; `weights[r - 1]` maps the source
/// vector (ordered coil, source line, orthogonal tap) to all target coils
/// and has shape `(unknowns, coils)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrappaKernel {
    geometry: KernelGeometry,
    coils: usize,
    tikhonov: f64,
    weights: Vec<Array2<Complex64>>,
    residuals: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct KernelMeta {
    geometry: KernelGeometry,
    coils: usize,
    tikhonov: f64,
    residuals: Vec<f64>,
}

impl GrappaKernel {
    pub fn new(geometry: KernelGeometry, coils: usize, weights: Vec<Array2<Complex64>>) -> Result<Self> {
        geometry.validate()?;
        let n = geometry.unknowns(coils);
        if weights.len() != geometry.factor - 1 || weights.iter().any(|w| w.dim() != (n, coils)) {
            return Err(Error::Shape(format!(
                "kernel needs {} weight sets of shape ({n}, {coils})",
                geometry.factor - 1
            )));
        }
        if weights.iter().flatten().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::InvalidArgument("kernel weights must be finite".into()));
        }
        let residuals = vec![0.0; weights.len()];
        Ok(Self { geometry, coils, tikhonov: 0.0, weights, residuals })
    }

    pub fn geometry(&self) -> &KernelGeometry {
        &self.geometry
    }
    pub fn coils(&self) -> usize {
        self.coils
    }
    pub fn factor(&self) -> usize {
        self.geometry.factor
    }
    pub fn tikhonov(&self) -> f64 {
        self.tikhonov
    }
    pub fn weights(&self) -> &[Array2<Complex64>] {
        &self.weights
    }
    /// Relative fit residual per offset.
    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    /// Writes the weights as a `(factor - 1, unknowns, coils)` array with the
    /// geometry in the header. Weights are stored at `f32` precision.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let n = self.geometry.unknowns(self.coils);
        let mut arr = Array3::zeros((self.weights.len().max(1), n, self.coils));
        for (r, w) in self.weights.iter().enumerate() {
            arr.index_axis_mut(Axis(0), r).assign(w);
        }
        let meta = KernelMeta {
            geometry: self.geometry.clone(),
            coils: self.coils,
            tikhonov: self.tikhonov,
            residuals: self.residuals.clone(),
        };
        write_array_with_meta(&arr, Some(serde_json::to_value(meta)?), path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let (arr, header) = read_array_with_meta(path)?;
        let meta: KernelMeta = serde_json::from_value(
            header.meta.ok_or_else(|| Error::Format("kernel file lacks geometry metadata".into()))?,
        )?;
        let arr = arr
            .into_dimensionality::<ndarray::Ix3>()
            .map_err(|_| Error::Format("kernel array must be 3-D".into()))?;
        let weights = arr.outer_iter().take(meta.geometry.factor - 1).map(|w| w.to_owned()).collect();
        let mut k = Self::new(meta.geometry, meta.coils, weights)?;
        k.tikhonov = meta.tikhonov;
        k.residuals = meta.residuals;
        Ok(k)
    }
}

/// The two separable passes.
#[derive(Debug, Clone, PartialEq)]
pub struct GrappaPlan {
    pub readout: GrappaKernel,
    pub phase_encode: GrappaKernel,
}

impl GrappaPlan {
    pub fn coils(&self) -> usize {
        self.readout.coils
    }
}

/// Kernel size and regularization shared by both passes.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanSettings {
    pub n_src: usize,
    pub n_orth: usize,
    pub tikhonov: f64,
    pub causal: bool,
}

impl Default for PlanSettings {
    fn default() -> Self {
        Self { n_src: 4, n_orth: 5, tikhonov: 1e-4, causal: false }
    }
}

impl PlanSettings {
    pub fn geometries(&self, mb: usize, r: usize) -> (KernelGeometry, KernelGeometry) {
        let make = if self.causal { KernelGeometry::causal } else { KernelGeometry::centered };
        (
            make(KernelAxis::Readout, mb, self.n_src, self.n_orth, r),
            make(KernelAxis::PhaseEncode, r, self.n_src, self.n_orth, 1),
        )
    }
}

/// Puts single-band calibration k-space `(MB, C, n_ro, n_pe)` through the
/// same CAIPI shift and readout concatenation as the target, returning
/// extended calibration k-space `(C, MB * n_ro, n_pe)`.
pub fn reorder_calibration(calib: &Array4<Complex64>, scheme: &CaipiScheme) -> Result<Array3<Complex64>> {
    let (mb, coils, nr, np) = calib.dim();
    if scheme.mb() != mb {
        return Err(Error::Shape(format!("calibration has {mb} slices, CAIPI scheme {}", scheme.mb())));
    }
    let small = Fft2::new(nr, np);
    let big = Fft2::new(mb * nr, np);
    let mut out = Array3::zeros((coils, mb * nr, np));
    for c in 0..coils {
        let mut ext = Array2::zeros((mb * nr, np));
        for (sl, &delta) in scheme.shifts().iter().enumerate() {
            let mut k = calib.slice(s![sl, c, .., ..]).to_owned();
            for mut row in k.rows_mut() {
                for (j, v) in row.iter_mut().enumerate() {
                    let k_pe = centered_index(j, np) as f64;
                    *v *= Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * k_pe * delta);
                }
            }
            small.inverse(&mut k);
            ext.slice_mut(s![sl * nr..(sl + 1) * nr, ..]).assign(&k);
        }
        big.forward(&mut ext);
        out.index_axis_mut(Axis(0), c).assign(&ext);
    }
    Ok(out)
}

/// Least-squares fit of one pass on fully sampled calibration k-space
/// `(C, rows, cols)`. Only windows whose sources all lie inside the grid are
/// used. The normal matrix is regularized with
/// `tikhonov * trace / unknowns` on the diagonal.
pub fn calibrate_kernel(calib: &Array3<Complex64>, geometry: &KernelGeometry, tikhonov: f64) -> Result<GrappaKernel> {
    geometry.validate()?;
    if !(tikhonov >= 0.0 && tikhonov.is_finite()) {
        return Err(Error::InvalidArgument(format!("tikhonov factor {tikhonov} must be finite and >= 0")));
    }
    let view = along_axis(calib.view(), geometry.axis);
    let (coils, len, orth_len) = view.dim();
    let n = geometry.unknowns(coils);
    let orth = geometry.orth_offsets();
    let mut weights = Vec::new();
    let mut residuals = Vec::new();
    for r in 1..geometry.factor {
        let src = geometry.src_offsets(r);
        let windows: Vec<(usize, usize)> = (0..len)
            .flat_map(|t| (0..orth_len).map(move |q| (t, q)))
            .filter(|&(t, q)| {
                src.iter().all(|&o| in_range(t as isize + o, len)) && orth.iter().all(|&o| in_range(q as isize + o, orth_len))
            })
            .collect();
        if windows.len() < 10 * n {
            return Err(Error::Underdetermined(format!(
                "{} calibration windows for {n} unknowns (need >= {})",
                windows.len(),
                10 * n
            )));
        }
        let sm = DMatrix::from_fn(windows.len(), n, |w, u| {
            let (t, q) = windows[w];
            let (c, m, d) = (u / (src.len() * orth.len()), (u / orth.len()) % src.len(), u % orth.len());
            view[[c, (t as isize + src[m]) as usize, (q as isize + orth[d]) as usize]]
        });
        let tm = DMatrix::from_fn(windows.len(), coils, |w, c| {
            let (t, q) = windows[w];
            view[[c, t, q]]
        });
        let sh = sm.adjoint();
        let mut normal = &sh * &sm;
        let trace: f64 = (0..n).map(|i| normal[(i, i)].re).sum();
        if !(trace > 0.0) {
            return Err(Error::Underdetermined("calibration data carry no energy".into()));
        }
        let lambda = tikhonov * trace / n as f64;
        for i in 0..n {
            normal[(i, i)] += Complex64::new(lambda, 0.0);
        }
        let rhs = &sh * &tm;
        let chol = normal
            .cholesky()
            .ok_or_else(|| Error::Singular(format!("GRAPPA normal matrix for offset {r} is not positive definite")))?;
        let sol = chol.solve(&rhs);
        if sol.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::Singular(format!("GRAPPA solve for offset {r} produced non-finite weights")));
        }
        let tnorm = tm.norm();
        residuals.push(if tnorm > 0.0 { (&sm * &sol - &tm).norm() / tnorm } else { 0.0 });
        weights.push(Array2::from_shape_fn((n, coils), |(u, c)| sol[(u, c)]));
    }
    Ok(GrappaKernel { geometry: geometry.clone(), coils, tikhonov, weights, residuals })
}

/// Fits both passes on extended calibration k-space.
pub fn calibrate_plan(calib_ext: &Array3<Complex64>, mb: usize, r: usize, settings: &PlanSettings) -> Result<GrappaPlan> {
    let (g_ro, g_pe) = settings.geometries(mb, r);
    Ok(GrappaPlan {
        readout: calibrate_kernel(calib_ext, &g_ro, settings.tikhonov)?,
        phase_encode: calibrate_kernel(calib_ext, &g_pe, settings.tikhonov)?,
    })
}

fn in_range(i: isize, n: usize) -> bool {
    i >= 0 && (i as usize) < n
}

/// View with the kernel's decimated axis as axis 1.
fn along_axis<T>(a: ArrayView3<'_, T>, axis: KernelAxis) -> ArrayView3<'_, T> {
    match axis {
        KernelAxis::Readout => a,
        KernelAxis::PhaseEncode => a.permuted_axes([0, 2, 1]),
    }
}

/// Interpolates `targets` (given as `(readout, phase-encode)` indices) from
/// the lattice `t % factor == offset` along the kernel axis, writing into
/// `k`. Returns the predicted values in target order.
fn predict(k: &Array3<Complex64>, kernel: &GrappaKernel, offset: usize, targets: &[(usize, usize)]) -> Vec<Vec<Complex64>> {
    let g = &kernel.geometry;
    let view = along_axis(k.view(), g.axis);
    let (coils, len, orth_len) = view.dim();
    let orth = g.orth_offsets();
    let srcs: Vec<Vec<isize>> = (0..g.factor).map(|r| g.src_offsets(r)).collect();
    targets
        .par_iter()
        .map(|&(i, j)| {
            let (t, q) = match g.axis {
                KernelAxis::Readout => (i, j),
                KernelAxis::PhaseEncode => (j, i),
            };
            let r = (t + g.factor - offset % g.factor) % g.factor;
            let w = &kernel.weights[r - 1];
            let mut out = vec![ZERO; coils];
            let mut u = 0;
            for c in 0..coils {
                for &so in &srcs[r] {
                    for &oo in &orth {
                        let (ts, qs) = (t as isize + so, q as isize + oo);
                        if in_range(ts, len) && in_range(qs, orth_len) {
                            let v = view[[c, ts as usize, qs as usize]];
                            for (tc, o) in out.iter_mut().enumerate() {
                                *o += w[[u, tc]] * v;
                            }
                        }
                        u += 1;
                    }
                }
            }
            out
        })
        .collect()
}

fn write(k: &mut Array3<Complex64>, targets: &[(usize, usize)], values: Vec<Vec<Complex64>>) {
    for (&(i, j), v) in targets.iter().zip(values) {
        for (c, x) in v.into_iter().enumerate() {
            k[[c, i, j]] = x;
        }
    }
}

fn check_plan(y: &Measurement, plan: &GrappaPlan) -> Result<()> {
    let p = y.pattern();
    if plan.readout.factor() != p.mb() || plan.phase_encode.factor() != p.r() {
        return Err(Error::InvalidArgument(format!(
            "kernel factors ({}, {}) do not match sampling MB={} R={}",
            plan.readout.factor(),
            plan.phase_encode.factor(),
            p.mb(),
            p.r()
        )));
    }
    if plan.readout.coils != y.coils() || plan.phase_encode.coils != y.coils() {
        return Err(Error::Shape(format!("kernel has {} coils, measurement {}", plan.coils(), y.coils())));
    }
    if plan.readout.geometry.axis != KernelAxis::Readout || plan.phase_encode.geometry.axis != KernelAxis::PhaseEncode {
        return Err(Error::InvalidArgument("plan passes are on the wrong axes".into()));
    }
    Ok(())
}

/// Result of low-frequency enhancement.
#[derive(Debug, Clone)]
pub struct LfeResult {
    /// Measured data plus the synthesized central band, with the band marked
    /// as acquired in its pattern.
    pub measurement: Measurement,
    pub filled: usize,
}

/// Synthesizes the missing points of the central `s x s` band of the
/// extended k-space grid. Measured samples are copied unchanged.
pub fn lfe_fill(y: &Measurement, plan: &GrappaPlan, s: usize) -> Result<LfeResult> {
    check_plan(y, plan)?;
    let p = y.pattern();
    let (rows, cols) = p.dim();
    if s > rows.min(cols) {
        return Err(Error::InvalidArgument(format!("LFE size {s} exceeds matrix extent {}", rows.min(cols))));
    }
    if s == 0 {
        return Ok(LfeResult { measurement: y.clone(), filled: 0 });
    }
    let mask = p.mask();
    let (r0, c0) = (rows / 2 - s / 2, cols / 2 - s / 2);
    let in_band = |i: usize, j: usize| (r0..r0 + s).contains(&i) && (c0..c0 + s).contains(&j);

    let targets2: Vec<(usize, usize)> = iproduct(r0..r0 + s, c0..c0 + s)
        .filter(|&(i, j)| !p.on_pe_lattice(j) && !mask[[i, j]])
        .collect();
    // pass-1 points needed as pass-2 sources, plus the band's own lattice columns
    let mut need = Array2::from_elem((rows, cols), false);
    let g2 = &plan.phase_encode.geometry;
    for &(i, j) in &targets2 {
        let r = (j + g2.factor - p.pe_offset()) % g2.factor;
        for so in g2.src_offsets(r) {
            for oo in g2.orth_offsets() {
                let (ii, jj) = (i as isize + oo, j as isize + so);
                if in_range(ii, rows) && in_range(jj, cols) {
                    need[[ii as usize, jj as usize]] = true;
                }
            }
        }
    }
    let targets1: Vec<(usize, usize)> = iproduct(0..rows, 0..cols)
        .filter(|&(i, j)| !p.on_readout_lattice(i) && p.on_pe_lattice(j) && !mask[[i, j]])
        .filter(|&(i, j)| need[[i, j]] || in_band(i, j))
        .collect();

    let mut work = y.kspace().clone();
    let v1 = predict(&work, &plan.readout, p.ro_offset(), &targets1);
    write(&mut work, &targets1, v1);
    let v2 = predict(&work, &plan.phase_encode, p.pe_offset(), &targets2);
    write(&mut work, &targets2, v2);

    let mut out = y.kspace().clone();
    let mut new_mask = mask.clone();
    let mut filled = 0;
    for &(i, j) in targets1.iter().filter(|&&(i, j)| in_band(i, j)).chain(&targets2) {
        out.slice_mut(s![.., i, j]).assign(&work.slice(s![.., i, j]));
        new_mask[[i, j]] = true;
        filled += 1;
    }
    let measurement = Measurement::new(out, p.with_mask(new_mask), y.noise_sigma())?;
    Ok(LfeResult { measurement, filled })
}

/// Interpolates every missing point (RO-GRAPPA). Measured samples are kept.
pub fn grappa_full(y: &Measurement, plan: &GrappaPlan) -> Result<Array3<Complex64>> {
    check_plan(y, plan)?;
    let p = y.pattern();
    let (rows, cols) = p.dim();
    let mask = p.mask();
    let targets1: Vec<(usize, usize)> = iproduct(0..rows, 0..cols)
        .filter(|&(i, j)| !p.on_readout_lattice(i) && p.on_pe_lattice(j) && !mask[[i, j]])
        .collect();
    let mut k = y.kspace().clone();
    let v1 = predict(&k, &plan.readout, p.ro_offset(), &targets1);
    write(&mut k, &targets1, v1);
    let targets2: Vec<(usize, usize)> = iproduct(0..rows, 0..cols)
        .filter(|&(i, j)| !p.on_pe_lattice(j) && !mask[[i, j]])
        .collect();
    let v2 = predict(&k, &plan.phase_encode, p.pe_offset(), &targets2);
    write(&mut k, &targets2, v2);
    Ok(k)
}

/// RO-GRAPPA baseline image: full interpolation, inverse FFT, coil
/// combination with the conjugate maps and the inverse reorder.
pub fn ro_grappa(y: &Measurement, plan: &GrappaPlan, maps: &CoilMaps, scheme: &CaipiScheme) -> Result<SliceStack> {
    let k = grappa_full(y, plan)?;
    let (rows, cols) = y.pattern().dim();
    let op = SmsOperator::new(maps, scheme, &SamplingPattern::full(rows, cols))?;
    op.adjoint(&k)
}

fn iproduct(
    a: std::ops::Range<usize>,
    b: std::ops::Range<usize>,
) -> impl Iterator<Item = (usize, usize)> {
    a.flat_map(move |i| b.clone().map(move |j| (i, j)))
}

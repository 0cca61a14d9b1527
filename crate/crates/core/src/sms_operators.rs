//! Linear SMS measurement model under readout concatenation.
//!
//! The MB simultaneously excited slices are CAIPI-shifted along phase-encode
//! and stacked along the readout axis into one extended-FOV image. In that
//! frame SMS encoding is ordinary SENSE encoding `A = P F S` with a uniform
//! MB-fold decimation along the extended readout (plus optional R-fold
//! phase-encode decimation), and the full model is `y = A R x + noise`.
//!
//! Array layout is `(slice | coil, readout, phase-encode)`, row-major.

use std::f64::consts::PI;

use ndarray::{s, Array2, Array3, Array4, ArrayView2, ArrayViewMut2, Axis, Zip};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fft::{centered_index, Fft1, Fft2};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// The MB slice images reconstructed jointly, shape `(MB, H, W)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceStack {
    data: Array3<Complex64>,
}

impl SliceStack {
    pub fn new(data: Array3<Complex64>) -> Result<Self> {
        let (mb, h, w) = data.dim();
        if mb == 0 || h == 0 || w == 0 {
            return Err(Error::Shape(format!("slice stack must be non-empty, got {mb}x{h}x{w}")));
        }
        Ok(Self { data })
    }

    pub fn zeros(mb: usize, h: usize, w: usize) -> Self {
        Self { data: Array3::zeros((mb, h, w)) }
    }

    pub fn from_slices(slices: &[Array2<Complex64>]) -> Result<Self> {
        let first = slices
            .first()
            .ok_or_else(|| Error::Shape("at least one slice required".into()))?;
        let (h, w) = first.dim();
        let mut data = Array3::zeros((slices.len(), h, w));
        for (i, sl) in slices.iter().enumerate() {
            if sl.dim() != (h, w) {
                return Err(Error::Shape(format!("slice {i} is {:?}, expected ({h}, {w})", sl.dim())));
            }
            data.index_axis_mut(Axis(0), i).assign(sl);
        }
        Self::new(data)
    }

    pub fn mb(&self) -> usize {
        self.data.dim().0
    }
    pub fn h(&self) -> usize {
        self.data.dim().1
    }
    pub fn w(&self) -> usize {
        self.data.dim().2
    }
    pub fn dim(&self) -> (usize, usize, usize) {
        self.data.dim()
    }
    pub fn data(&self) -> &Array3<Complex64> {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut Array3<Complex64> {
        &mut self.data
    }
    pub fn into_inner(self) -> Array3<Complex64> {
        self.data
    }
    pub fn slice(&self, s: usize) -> ArrayView2<'_, Complex64> {
        self.data.index_axis(Axis(0), s)
    }

    pub fn norm(&self) -> f64 {
        norm(self.data.iter())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

/// Readout-concatenated image, shape `(MB * H, W)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedImage {
    data: Array2<Complex64>,
    mb: usize,
}

impl ExtendedImage {
    pub fn new(data: Array2<Complex64>, mb: usize) -> Result<Self> {
        if mb == 0 || data.dim().0 % mb != 0 {
            return Err(Error::Shape(format!(
                "extended readout length {} not divisible by MB={mb}",
                data.dim().0
            )));
        }
        Ok(Self { data, mb })
    }
    pub fn mb(&self) -> usize {
        self.mb
    }
    pub fn data(&self) -> &Array2<Complex64> {
        &self.data
    }
    pub fn into_inner(self) -> Array2<Complex64> {
        self.data
    }
    pub fn dim(&self) -> (usize, usize) {
        self.data.dim()
    }
}

/// Per-slice phase-encode FOV shift fractions.
#[derive(Debug, Clone, PartialEq)]
pub struct CaipiScheme {
    shifts: Vec<f64>,
}

impl CaipiScheme {
    pub fn new(shifts: Vec<f64>) -> Result<Self> {
        if shifts.is_empty() {
            return Err(Error::InvalidArgument("CAIPI scheme needs at least one slice".into()));
        }
        if shifts[0] != 0.0 {
            return Err(Error::InvalidArgument("first CAIPI shift must be 0".into()));
        }
        if let Some(d) = shifts.iter().find(|d| !(0.0..1.0).contains(*d)) {
            return Err(Error::InvalidArgument(format!("CAIPI shift {d} outside [0, 1)")));
        }
        Ok(Self { shifts })
    }

    /// No shifts at all.
    pub fn none(mb: usize) -> Self {
        Self { shifts: vec![0.0; mb.max(1)] }
    }

    /// Standard FOV/MB interleave, `delta_s = s / MB`.
    pub fn interleaved(mb: usize) -> Self {
        Self { shifts: (0..mb.max(1)).map(|s| s as f64 / mb as f64).collect() }
    }

    /// FOV/MB interleave rounded to whole phase-encode pixels for a matrix of
    /// width `w`. Pixel-aligned shifts commute with coil weighting, which the
    /// readout-concatenated model relies on.
    pub fn interleaved_pixel_aligned(mb: usize, w: usize) -> Self {
        let shifts = (0..mb.max(1))
            .map(|s| {
                let px = (s as f64 * w as f64 / mb as f64).round();
                (px / w as f64) % 1.0
            })
            .collect();
        Self { shifts }
    }

    pub fn mb(&self) -> usize {
        self.shifts.len()
    }
    pub fn shifts(&self) -> &[f64] {
        &self.shifts
    }
    pub fn is_identity(&self) -> bool {
        self.shifts.iter().all(|&d| d == 0.0)
    }
}

/// Coil sensitivities, shape `(C, MB, H, W)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoilMaps {
    data: Array4<Complex64>,
}

impl CoilMaps {
    pub fn new(data: Array4<Complex64>) -> Result<Self> {
        let (c, mb, h, w) = data.dim();
        if c == 0 || mb == 0 || h == 0 || w == 0 {
            return Err(Error::Shape("coil maps must be non-empty".into()));
        }
        Ok(Self { data })
    }

    /// Unit maps for a single coil.
    pub fn uniform(mb: usize, h: usize, w: usize) -> Self {
        Self { data: Array4::from_elem((1, mb, h, w), Complex64::new(1.0, 0.0)) }
    }

    pub fn coils(&self) -> usize {
        self.data.dim().0
    }
    pub fn mb(&self) -> usize {
        self.data.dim().1
    }
    pub fn dim(&self) -> (usize, usize, usize, usize) {
        self.data.dim()
    }
    pub fn data(&self) -> &Array4<Complex64> {
        &self.data
    }
    pub fn into_inner(self) -> Array4<Complex64> {
        self.data
    }

    /// Rescales every pixel so that the coil sum of squared magnitudes is 1
    /// wherever any coil is nonzero.
    pub fn normalized(mut self) -> Self {
        let (_, mb, h, w) = self.data.dim();
        for s in 0..mb {
            for i in 0..h {
                for j in 0..w {
                    let mut lane = self.data.slice_mut(s![.., s, i, j]);
                    let ss: f64 = lane.iter().map(|v| v.norm_sqr()).sum();
                    if ss > 0.0 {
                        let inv = 1.0 / ss.sqrt();
                        lane.mapv_inplace(|v| v * inv);
                    }
                }
            }
        }
        self
    }

    /// Largest deviation of the per-pixel sum of squares from 1 over the
    /// support.
    pub fn normalization_error(&self) -> f64 {
        let (_, mb, h, w) = self.data.dim();
        let mut worst: f64 = 0.0;
        for s in 0..mb {
            for i in 0..h {
                for j in 0..w {
                    let ss: f64 = self.data.slice(s![.., s, i, j]).iter().map(|v| v.norm_sqr()).sum();
                    if ss > 0.0 {
                        worst = worst.max((ss - 1.0).abs());
                    }
                }
            }
        }
        worst
    }

    /// Extended-FOV view: every coil's slice maps put through the same
    /// CAIPI shift and concatenation as the image.
    pub fn extended(&self, scheme: &CaipiScheme) -> Result<ExtendedMaps> {
        let (c, mb, h, w) = self.data.dim();
        if scheme.mb() != mb {
            return Err(Error::Shape(format!("CAIPI scheme has {} slices, maps have {mb}", scheme.mb())));
        }
        let shifter = Fft1::new(w);
        let mut out = Array3::zeros((c, mb * h, w));
        for coil in 0..c {
            let mut stack = SliceStack { data: self.data.index_axis(Axis(0), coil).to_owned() };
            shift_slices(&mut stack.data, scheme, false, &shifter);
            out.index_axis_mut(Axis(0), coil).assign(&concat_rows(&stack.data));
        }
        Ok(ExtendedMaps { data: out, mb })
    }
}

/// Coil maps in the extended frame, shape `(C, MB * H, W)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedMaps {
    data: Array3<Complex64>,
    mb: usize,
}

impl ExtendedMaps {
    pub fn new(data: Array3<Complex64>, mb: usize) -> Result<Self> {
        if mb == 0 || data.dim().1 % mb != 0 || data.dim().0 == 0 {
            return Err(Error::Shape("extended maps readout not divisible by MB".into()));
        }
        Ok(Self { data, mb })
    }
    pub fn coils(&self) -> usize {
        self.data.dim().0
    }
    pub fn mb(&self) -> usize {
        self.mb
    }
    pub fn data(&self) -> &Array3<Complex64> {
        &self.data
    }
    /// `(MB * H, W)`
    pub fn grid(&self) -> (usize, usize) {
        (self.data.dim().1, self.data.dim().2)
    }
}

/// Which extended k-space samples are acquired, shape `(MB * H, W)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPattern {
    mask: Array2<bool>,
    mb: usize,
    r: usize,
    ro_offset: usize,
    pe_offset: usize,
    acs_width: usize,
}

impl SamplingPattern {
    /// MB-fold decimation along the extended readout and R-fold along
    /// phase-encode, both at offset 0, plus `acs_width` central phase-encode
    /// lines.
    pub fn sms(mb: usize, r: usize, h: usize, w: usize, acs_width: usize) -> Result<Self> {
        Self::with_offsets(mb, r, h, w, acs_width, 0, 0)
    }

    pub fn with_offsets(
        mb: usize,
        r: usize,
        h: usize,
        w: usize,
        acs_width: usize,
        ro_offset: usize,
        pe_offset: usize,
    ) -> Result<Self> {
        if mb == 0 || r == 0 {
            return Err(Error::InvalidArgument(format!("decimation factors must be >= 1 (MB={mb}, R={r})")));
        }
        if acs_width > w {
            return Err(Error::InvalidArgument(format!("ACS width {acs_width} exceeds phase-encode size {w}")));
        }
        let (ro_offset, pe_offset) = (ro_offset % mb, pe_offset % r);
        let acs_lo = w / 2 - acs_width / 2;
        let acs_hi = acs_lo + acs_width;
        let mask = Array2::from_shape_fn((mb * h, w), |(i, j)| {
            i % mb == ro_offset && (j % r == pe_offset || (acs_lo..acs_hi).contains(&j))
        });
        Ok(Self { mask, mb, r, ro_offset, pe_offset, acs_width })
    }

    /// Fully sampled extended grid (only meaningful for MB = 1).
    pub fn full(rows: usize, cols: usize) -> Self {
        Self { mask: Array2::from_elem((rows, cols), true), mb: 1, r: 1, ro_offset: 0, pe_offset: 0, acs_width: 0 }
    }

    /// Arbitrary mask; the decimation metadata describe the regular lattice
    /// it was derived from (use 1/1 for irregular masks).
    pub fn from_mask(mask: Array2<bool>, mb: usize, r: usize) -> Result<Self> {
        if mb == 0 || r == 0 || mask.dim().0 % mb != 0 {
            return Err(Error::InvalidArgument("mask rows must be divisible by MB and factors >= 1".into()));
        }
        Ok(Self { mask, mb, r, ro_offset: 0, pe_offset: 0, acs_width: 0 })
    }

    pub(crate) fn with_mask(&self, mask: Array2<bool>) -> Self {
        Self { mask, ..self.clone() }
    }

    pub fn mask(&self) -> &Array2<bool> {
        &self.mask
    }
    pub fn mb(&self) -> usize {
        self.mb
    }
    pub fn r(&self) -> usize {
        self.r
    }
    pub fn ro_offset(&self) -> usize {
        self.ro_offset
    }
    pub fn pe_offset(&self) -> usize {
        self.pe_offset
    }
    pub fn acs_width(&self) -> usize {
        self.acs_width
    }
    pub fn dim(&self) -> (usize, usize) {
        self.mask.dim()
    }
    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
    pub fn on_readout_lattice(&self, i: usize) -> bool {
        i % self.mb == self.ro_offset
    }
    pub fn on_pe_lattice(&self, j: usize) -> bool {
        j % self.r == self.pe_offset
    }

    /// Zeroes every coil's k-space outside the mask.
    pub fn apply(&self, kspace: &mut Array3<Complex64>) {
        for mut coil in kspace.outer_iter_mut() {
            Zip::from(&mut coil).and(&self.mask).for_each(|v, &m| {
                if !m {
                    *v = ZERO;
                }
            });
        }
    }
}

/// Collapsed multi-coil SMS k-space on the extended grid, `(C, MB * H, W)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    kspace: Array3<Complex64>,
    pattern: SamplingPattern,
    noise_sigma: f64,
}

impl Measurement {
    pub fn new(kspace: Array3<Complex64>, pattern: SamplingPattern, noise_sigma: f64) -> Result<Self> {
        let (_, rows, cols) = kspace.dim();
        if pattern.dim() != (rows, cols) {
            return Err(Error::Shape(format!(
                "k-space grid ({rows}, {cols}) does not match mask {:?}",
                pattern.dim()
            )));
        }
        for coil in kspace.outer_iter() {
            let leak = Zip::from(&coil).and(pattern.mask()).fold(false, |acc, v, &m| acc || (!m && *v != ZERO));
            if leak {
                return Err(Error::InvalidArgument("measurement has data at unsampled locations".into()));
            }
        }
        Ok(Self { kspace, pattern, noise_sigma })
    }

    pub fn kspace(&self) -> &Array3<Complex64> {
        &self.kspace
    }
    pub fn pattern(&self) -> &SamplingPattern {
        &self.pattern
    }
    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }
    pub fn coils(&self) -> usize {
        self.kspace.dim().0
    }
    pub fn into_parts(self) -> (Array3<Complex64>, SamplingPattern, f64) {
        (self.kspace, self.pattern, self.noise_sigma)
    }
}

/// Circular phase-encode shift of every slice by `delta_s * W` pixels,
/// applied as a linear phase across each slice's phase-encode frequencies.
pub fn caipi_apply(stack: &SliceStack, scheme: &CaipiScheme, inverse: bool) -> Result<SliceStack> {
    if scheme.mb() != stack.mb() {
        return Err(Error::Shape(format!(
            "CAIPI scheme has {} slices, stack has {}",
            scheme.mb(),
            stack.mb()
        )));
    }
    let mut data = stack.data.clone();
    shift_slices(&mut data, scheme, inverse, &Fft1::new(stack.w()));
    Ok(SliceStack { data })
}

fn shift_slices(data: &mut Array3<Complex64>, scheme: &CaipiScheme, inverse: bool, fft: &Fft1) {
    let w = data.dim().2;
    for (sl, &delta) in data.outer_iter_mut().zip(scheme.shifts()) {
        if delta != 0.0 {
            shift_pe(sl, delta, inverse, fft, w);
        }
    }
}

fn shift_pe(mut sl: ArrayViewMut2<Complex64>, delta: f64, inverse: bool, fft: &Fft1, w: usize) {
    let sign = if inverse { 1.0 } else { -1.0 };
    let ramp: Vec<Complex64> = (0..w)
        .map(|j| Complex64::from_polar(1.0, sign * 2.0 * PI * centered_index(j, w) as f64 * delta))
        .collect();
    fft.transform_axis(sl.view_mut(), 1, false);
    for mut row in sl.rows_mut() {
        for (v, p) in row.iter_mut().zip(&ramp) {
            *v *= p;
        }
    }
    fft.transform_axis(sl.view_mut(), 1, true);
}

fn concat_rows(data: &Array3<Complex64>) -> Array2<Complex64> {
    let (mb, h, w) = data.dim();
    data.to_shape((mb * h, w)).expect("contiguous stack").to_owned()
}

/// Stacks the slices along readout in slice order.
pub fn roc_concat(stack: &SliceStack) -> ExtendedImage {
    ExtendedImage { data: concat_rows(&stack.data), mb: stack.mb() }
}

/// Exact inverse of [`roc_concat`].
pub fn roc_split(ext: &ExtendedImage, mb: usize) -> Result<SliceStack> {
    let (rows, w) = ext.data.dim();
    if mb == 0 || rows % mb != 0 {
        return Err(Error::Shape(format!("extended readout {rows} not divisible by MB={mb}")));
    }
    let data = ext.data.to_shape((mb, rows / mb, w)).expect("contiguous").to_owned();
    SliceStack::new(data)
}

/// `R = roc_concat . caipi_apply`.
pub fn reorder_r(stack: &SliceStack, scheme: &CaipiScheme) -> Result<ExtendedImage> {
    Ok(roc_concat(&caipi_apply(stack, scheme, false)?))
}

/// `R^H = caipi_apply(inverse) . roc_split`; `R` is unitary so this is also
/// its inverse.
pub fn reorder_r_adjoint(ext: &ExtendedImage, scheme: &CaipiScheme) -> Result<SliceStack> {
    caipi_apply(&roc_split(ext, scheme.mb())?, scheme, true)
}

/// `y_c = P F (S_c * ext)` for every coil.
pub fn sense_forward(ext: &ExtendedImage, maps: &ExtendedMaps, pattern: &SamplingPattern) -> Result<Measurement> {
    if maps.grid() != ext.dim() || pattern.dim() != ext.dim() {
        return Err(Error::Shape(format!(
            "image {:?}, maps {:?}, mask {:?} disagree",
            ext.dim(),
            maps.grid(),
            pattern.dim()
        )));
    }
    let (rows, cols) = ext.dim();
    let k = encode(ext.data.view(), maps, pattern, &Fft2::new(rows, cols));
    Measurement::new(k, pattern.clone(), 0.0)
}

/// `sum_c conj(S_c) * F^H (P y_c)`.
pub fn sense_adjoint(y: &Measurement, maps: &ExtendedMaps) -> Result<ExtendedImage> {
    if maps.grid() != y.pattern.dim() || maps.coils() != y.coils() {
        return Err(Error::Shape(format!(
            "measurement ({} coils, {:?}) vs maps ({} coils, {:?})",
            y.coils(),
            y.pattern.dim(),
            maps.coils(),
            maps.grid()
        )));
    }
    let (rows, cols) = maps.grid();
    let img = decode(&y.kspace, maps, &y.pattern, &Fft2::new(rows, cols));
    ExtendedImage::new(img, maps.mb())
}

fn encode(
    ext: ArrayView2<Complex64>,
    maps: &ExtendedMaps,
    pattern: &SamplingPattern,
    fft: &Fft2,
) -> Array3<Complex64> {
    let (rows, cols) = ext.dim();
    let coils: Vec<Array2<Complex64>> = maps
        .data
        .axis_iter(Axis(0))
        .into_par_iter()
        .map(|s| {
            let mut k = &s * &ext;
            fft.forward(&mut k);
            Zip::from(&mut k).and(pattern.mask()).for_each(|v, &m| {
                if !m {
                    *v = ZERO;
                }
            });
            k
        })
        .collect();
    let mut out = Array3::zeros((coils.len(), rows, cols));
    for (mut dst, src) in out.outer_iter_mut().zip(coils) {
        dst.assign(&src);
    }
    out
}

fn decode(
    kspace: &Array3<Complex64>,
    maps: &ExtendedMaps,
    pattern: &SamplingPattern,
    fft: &Fft2,
) -> Array2<Complex64> {
    let parts: Vec<Array2<Complex64>> = kspace
        .axis_iter(Axis(0))
        .into_par_iter()
        .zip(maps.data.axis_iter(Axis(0)).into_par_iter())
        .map(|(k, s)| {
            let mut img = k.to_owned();
            Zip::from(&mut img).and(pattern.mask()).for_each(|v, &m| {
                if !m {
                    *v = ZERO;
                }
            });
            fft.inverse(&mut img);
            Zip::from(&mut img).and(&s).for_each(|v, sv| *v *= sv.conj());
            img
        })
        .collect();
    // fixed coil-order reduction
    let mut acc = Array2::zeros(maps.grid());
    for p in &parts {
        acc += p;
    }
    acc
}

/// Places collapsed SMS k-space (the per-coil sum of the slices' single-band
/// k-space, shape `(C, H, W)`) onto every MB-th line of the extended grid.
///
/// Sample `k` of an `H`-point slice spectrum sits at extended frequency
/// `MB * k`; concatenation about the extended centre adds a phase of
/// `exp(i pi k (MB - 1))`, and the longer unitary transform scales by
/// `1 / sqrt(MB)`.
pub fn roc_embed_kspace(collapsed: &Array3<Complex64>, mb: usize) -> Result<Array3<Complex64>> {
    let (c, h, w) = collapsed.dim();
    if mb == 0 {
        return Err(Error::InvalidArgument("MB must be >= 1".into()));
    }
    if mb > 1 && h % 2 != 0 {
        return Err(Error::Shape(format!("readout length {h} must be even for MB > 1")));
    }
    let scale = 1.0 / (mb as f64).sqrt();
    let mut out = Array3::zeros((c, mb * h, w));
    for i in 0..h {
        let k = centered_index(i, h);
        // exp(i pi k (MB-1)) is +-1
        let sign = if (k * (mb as isize - 1)).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        let f = scale * sign;
        out.slice_mut(s![.., mb * i, ..]).assign(&collapsed.slice(s![.., i, ..]).mapv(|v| v * f));
    }
    Ok(out)
}

/// The composed operator `A R` with cached plans and extended maps.
#[derive(Debug, Clone)]
pub struct SmsOperator {
    scheme: CaipiScheme,
    maps: ExtendedMaps,
    pattern: SamplingPattern,
    fft2: Fft2,
    fft_pe: Fft1,
    h: usize,
    w: usize,
}

impl SmsOperator {
    pub fn new(maps: &CoilMaps, scheme: &CaipiScheme, pattern: &SamplingPattern) -> Result<Self> {
        let (_, mb, h, w) = maps.dim();
        let ext = maps.extended(scheme)?;
        if pattern.dim() != (mb * h, w) {
            return Err(Error::Shape(format!("mask {:?} vs extended grid ({}, {w})", pattern.dim(), mb * h)));
        }
        Ok(Self {
            scheme: scheme.clone(),
            maps: ext,
            pattern: pattern.clone(),
            fft2: Fft2::new(mb * h, w),
            fft_pe: Fft1::new(w),
            h,
            w,
        })
    }

    /// Same operator with a different sampling mask.
    pub fn with_pattern(&self, pattern: &SamplingPattern) -> Result<Self> {
        if pattern.dim() != self.pattern.dim() {
            return Err(Error::Shape("replacement mask has a different grid".into()));
        }
        Ok(Self { pattern: pattern.clone(), ..self.clone() })
    }

    pub fn pattern(&self) -> &SamplingPattern {
        &self.pattern
    }
    pub fn scheme(&self) -> &CaipiScheme {
        &self.scheme
    }
    pub fn extended_maps(&self) -> &ExtendedMaps {
        &self.maps
    }
    pub fn coils(&self) -> usize {
        self.maps.coils()
    }
    pub fn mb(&self) -> usize {
        self.scheme.mb()
    }
    /// `(MB, H, W)`
    pub fn image_dim(&self) -> (usize, usize, usize) {
        (self.mb(), self.h, self.w)
    }
    /// `(C, MB * H, W)`
    pub fn kspace_dim(&self) -> (usize, usize, usize) {
        (self.coils(), self.mb() * self.h, self.w)
    }

    pub fn reorder(&self, stack: &SliceStack) -> Result<ExtendedImage> {
        self.check_stack(stack)?;
        let mut data = stack.data.clone();
        shift_slices(&mut data, &self.scheme, false, &self.fft_pe);
        Ok(ExtendedImage { data: concat_rows(&data), mb: self.mb() })
    }

    pub fn reorder_adjoint(&self, ext: &ExtendedImage) -> Result<SliceStack> {
        let mut stack = roc_split(ext, self.mb())?;
        shift_slices(&mut stack.data, &self.scheme, true, &self.fft_pe);
        Ok(stack)
    }

    /// `A` on an extended image.
    pub fn forward_ext(&self, ext: &ExtendedImage) -> Result<Array3<Complex64>> {
        if ext.dim() != self.maps.grid() {
            return Err(Error::Shape(format!("extended image {:?} vs {:?}", ext.dim(), self.maps.grid())));
        }
        Ok(encode(ext.data.view(), &self.maps, &self.pattern, &self.fft2))
    }

    /// `A^H` onto the extended image.
    pub fn adjoint_ext(&self, kspace: &Array3<Complex64>) -> Result<ExtendedImage> {
        self.check_kspace(kspace)?;
        Ok(ExtendedImage { data: decode(kspace, &self.maps, &self.pattern, &self.fft2), mb: self.mb() })
    }

    /// `A R x`
    pub fn forward(&self, stack: &SliceStack) -> Result<Array3<Complex64>> {
        self.forward_ext(&self.reorder(stack)?)
    }

    /// `(A R)^H y`
    pub fn adjoint(&self, kspace: &Array3<Complex64>) -> Result<SliceStack> {
        self.reorder_adjoint(&self.adjoint_ext(kspace)?)
    }

    /// `(A R)^H A R x`
    pub fn normal(&self, stack: &SliceStack) -> Result<SliceStack> {
        self.adjoint(&self.forward(stack)?)
    }

    fn check_stack(&self, stack: &SliceStack) -> Result<()> {
        if stack.dim() != self.image_dim() {
            return Err(Error::Shape(format!("stack {:?} vs operator {:?}", stack.dim(), self.image_dim())));
        }
        Ok(())
    }

    fn check_kspace(&self, k: &Array3<Complex64>) -> Result<()> {
        if k.dim() != self.kspace_dim() {
            return Err(Error::Shape(format!("k-space {:?} vs operator {:?}", k.dim(), self.kspace_dim())));
        }
        Ok(())
    }
}

/// `sum conj(a) * b`
pub fn inner<'a>(
    a: impl IntoIterator<Item = &'a Complex64>,
    b: impl IntoIterator<Item = &'a Complex64>,
) -> Complex64 {
    a.into_iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm<'a>(a: impl IntoIterator<Item = &'a Complex64>) -> f64 {
    a.into_iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

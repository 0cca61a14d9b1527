//! Synthetic phantoms, coil maps and retrospective SMS acquisition.
//!
//! Acquisition follows the physical path: per-slice coil weighting, FFT,
//! CAIPI phase, summation over slices, placement on the extended readout
//! grid, phase-encode decimation and complex Gaussian noise. It never calls
//! the readout-concatenated operator, so the two can be checked against each
//! other.

use std::f64::consts::PI;

use ndarray::{s, Array2, Array3, Array4, Axis};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data_io::Fraction;
use crate::error::{Error, Result};
use crate::fft::{centered_index, Fft2};
use crate::sms_operators::{roc_embed_kspace, CaipiScheme, CoilMaps, Measurement, SamplingPattern, SliceStack};

/// Ellipse in normalized coordinates: the field of view spans [-1, 1] on
/// both axes, `x` along phase-encode and `y` along readout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub center: (f64, f64),
    pub axes: (f64, f64),
    /// Radians, counter-clockwise.
    pub angle: f64,
    pub amplitude: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub h: usize,
    pub w: usize,
    /// Painted in order; later ellipses overwrite earlier ones.
    pub ellipses: Vec<Ellipse>,
    /// Phase in radians: `c0 + c1 x + c2 y + c3 x^2 + c4 x y + c5 y^2`.
    pub phase: [f64; 6],
    pub seed: u64,
}

impl PhantomSpec {
    pub fn empty(h: usize, w: usize) -> Self {
        Self { h, w, ellipses: Vec::new(), phase: [0.0; 6], seed: 0 }
    }

    /// Head-like phantom: an outer shell, a brain region and a handful of
    /// random inner structures, with a random smooth phase.
    pub fn random(h: usize, w: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut u = |lo: f64, hi: f64| rng.random_range(lo..hi);
        let real = |a: f64| Complex64::new(a, 0.0);
        let (ax, ay) = (u(0.78, 0.9), u(0.82, 0.94));
        let mut ellipses = vec![
            Ellipse { center: (0.0, 0.0), axes: (ax, ay), angle: 0.0, amplitude: real(1.0) },
            Ellipse { center: (0.0, 0.0), axes: (ax - 0.06, ay - 0.06), angle: 0.0, amplitude: real(0.35) },
        ];
        let n = 5 + (u(0.0, 1.0) * 5.0) as usize;
        for _ in 0..n {
            let r = u(0.0, 0.55);
            let th = u(0.0, 2.0 * PI);
            ellipses.push(Ellipse {
                center: (r * th.cos() * ax, r * th.sin() * ay),
                axes: (u(0.05, 0.25), u(0.05, 0.3)),
                angle: u(0.0, PI),
                amplitude: real(u(0.1, 0.9)),
            });
        }
        let mut phase = [0.0; 6];
        phase[0] = u(-PI, PI);
        for c in phase.iter_mut().skip(1) {
            *c = u(-0.6, 0.6);
        }
        Self { h, w, ellipses, phase, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.h < 16 || self.w < 16 {
            return Err(Error::InvalidArgument(format!("phantom matrix {}x{} below 16x16", self.h, self.w)));
        }
        for (k, e) in self.ellipses.iter().enumerate() {
            if !(e.axes.0 > 0.0 && e.axes.1 > 0.0) {
                return Err(Error::InvalidArgument(format!("ellipse {k} has a degenerate axis")));
            }
            if !(e.amplitude.re.is_finite() && e.amplitude.im.is_finite()) {
                return Err(Error::InvalidArgument(format!("ellipse {k} amplitude is not finite")));
            }
        }
        if self.phase.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("phase coefficients must be finite".into()));
        }
        Ok(())
    }
}

pub fn make_phantom(spec: &PhantomSpec) -> Result<Array2<Complex64>> {
    spec.validate()?;
    let (h, w) = (spec.h, spec.w);
    let rot: Vec<(f64, f64)> = spec.ellipses.iter().map(|e| (e.angle.cos(), e.angle.sin())).collect();
    let p = &spec.phase;
    Ok(Array2::from_shape_fn((h, w), |(i, j)| {
        let x = centered_index(j, w) as f64 / (w as f64 / 2.0);
        let y = centered_index(i, h) as f64 / (h as f64 / 2.0);
        let mut v = Complex64::new(0.0, 0.0);
        for (e, &(c, s)) in spec.ellipses.iter().zip(&rot) {
            let (dx, dy) = (x - e.center.0, y - e.center.1);
            let (xr, yr) = (c * dx + s * dy, -s * dx + c * dy);
            if (xr / e.axes.0).powi(2) + (yr / e.axes.1).powi(2) <= 1.0 {
                v = e.amplitude;
            }
        }
        let phi = p[0] + p[1] * x + p[2] * y + p[3] * x * x + p[4] * x * y + p[5] * y * y;
        v * Complex64::from_polar(1.0, phi)
    }))
}

/// One random phantom per slice, slice `s` seeded with `seed + s`.
pub fn make_slice_stack(mb: usize, h: usize, w: usize, seed: u64) -> Result<SliceStack> {
    let slices = (0..mb)
        .map(|s| make_phantom(&PhantomSpec::random(h, w, seed.wrapping_add(s as u64))))
        .collect::<Result<Vec<_>>>()?;
    SliceStack::from_slices(&slices)
}

/// Gaussian receive lobes centred on the FOV perimeter, each with a constant
/// phase and a position along the slice axis, normalized to unit per-pixel
/// sum of squares.
pub fn make_coil_maps(coils: usize, mb: usize, h: usize, w: usize, seed: u64) -> Result<CoilMaps> {
    if coils == 0 || mb == 0 || h == 0 || w == 0 {
        return Err(Error::InvalidArgument("coil maps need C, MB, H, W >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lobes: Vec<(f64, f64, f64, f64, f64)> = (0..coils)
        .map(|c| {
            let th = 2.0 * PI * c as f64 / coils as f64 + rng.random_range(-0.15..0.15);
            let z = if c % 2 == 0 { -0.5 } else { 0.5 } + rng.random_range(-0.2..0.2);
            let width = rng.random_range(0.7..1.0);
            let phi = rng.random_range(-PI..PI);
            (1.1 * th.cos(), 1.1 * th.sin(), z, width, phi)
        })
        .collect();
    let slice_z = |s: usize| if mb == 1 { 0.0 } else { -1.0 + 2.0 * s as f64 / (mb - 1) as f64 };
    let data = Array4::from_shape_fn((coils, mb, h, w), |(c, s, i, j)| {
        let (cx, cy, cz, width, phi) = lobes[c];
        let x = centered_index(j, w) as f64 / (w as f64 / 2.0);
        let y = centered_index(i, h) as f64 / (h as f64 / 2.0);
        let d2 = (x - cx).powi(2) + (y - cy).powi(2);
        let dz = slice_z(s) - cz;
        let mag = (-d2 / (2.0 * width * width) - dz * dz / 1.5).exp();
        Complex64::from_polar(mag, phi + 0.3 * (x * cy - y * cx))
    });
    Ok(CoilMaps::new(data)?.normalized())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionSpec {
    pub mb: usize,
    pub r: usize,
    pub caipi_shifts: Vec<f64>,
    #[serde(default)]
    pub acs_width: usize,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub ro_offset: usize,
    #[serde(default)]
    pub pe_offset: usize,
}

impl AcquisitionSpec {
    /// Pixel-aligned FOV/MB CAIPI interleave, no ACS, no noise.
    pub fn new(mb: usize, r: usize, w: usize) -> Self {
        let caipi_shifts = CaipiScheme::interleaved_pixel_aligned(mb, w).shifts().to_vec();
        Self { mb, r, caipi_shifts, acs_width: 0, noise_sigma: 0.0, ro_offset: 0, pe_offset: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mb == 0 || self.r == 0 {
            return Err(Error::InvalidArgument("MB and R must be >= 1".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("noise sigma {} must be finite and >= 0", self.noise_sigma)));
        }
        if self.caipi_shifts.len() != self.mb {
            return Err(Error::InvalidArgument("CAIPI shift count differs from MB".into()));
        }
        self.scheme().map(|_| ())
    }

    pub fn scheme(&self) -> Result<CaipiScheme> {
        CaipiScheme::new(self.caipi_shifts.clone())
    }

    pub fn pattern(&self, h: usize, w: usize) -> Result<SamplingPattern> {
        SamplingPattern::with_offsets(self.mb, self.r, h, w, self.acs_width, self.ro_offset, self.pe_offset)
    }
}

/// Collapsed SMS k-space through the physical acquisition path.
pub fn simulate_sms(stack: &SliceStack, maps: &CoilMaps, acq: &AcquisitionSpec, seed: u64) -> Result<Measurement> {
    acq.validate()?;
    let (mb, h, w) = stack.dim();
    let (coils, mmb, mh, mw) = maps.dim();
    if acq.mb != mb || (mmb, mh, mw) != (mb, h, w) {
        return Err(Error::Shape(format!("stack {:?}, maps {:?}, MB {}", stack.dim(), maps.dim(), acq.mb)));
    }
    if acq.ro_offset % mb != 0 {
        return Err(Error::Unsupported("physical simulation requires readout offset 0".into()));
    }
    let fft = Fft2::new(h, w);
    let ramps: Vec<Vec<Complex64>> = acq
        .caipi_shifts
        .iter()
        .map(|&d| (0..w).map(|j| Complex64::from_polar(1.0, -2.0 * PI * centered_index(j, w) as f64 * d)).collect())
        .collect();
    let per_coil: Vec<Array2<Complex64>> = (0..coils)
        .into_par_iter()
        .map(|c| {
            let mut acc = Array2::<Complex64>::zeros((h, w));
            for s in 0..mb {
                let mut img = &maps.data().slice(s![c, s, .., ..]) * &stack.slice(s);
                fft.forward(&mut img);
                for (mut row, mut arow) in img.rows_mut().into_iter().zip(acc.rows_mut()) {
                    for ((v, a), p) in row.iter_mut().zip(arow.iter_mut()).zip(&ramps[s]) {
                        *v *= p;
                        *a += *v;
                    }
                }
            }
            acc
        })
        .collect();
    let mut collapsed = Array3::zeros((coils, h, w));
    for (c, k) in per_coil.into_iter().enumerate() {
        collapsed.index_axis_mut(Axis(0), c).assign(&k);
    }
    let mut kspace = roc_embed_kspace(&collapsed, mb)?;
    let pattern = acq.pattern(h, w)?;
    pattern.apply(&mut kspace);
    if acq.noise_sigma > 0.0 {
        add_noise(&mut kspace, &pattern, acq.noise_sigma, seed);
    }
    Measurement::new(kspace, pattern, acq.noise_sigma)
}

/// Complex Gaussian noise with `E|n|^2 = sigma^2` on every sampled point,
/// drawn in row-major order from a generator seeded with `seed`.
pub fn add_noise(kspace: &mut Array3<Complex64>, pattern: &SamplingPattern, sigma: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma / 2f64.sqrt()).expect("finite sigma");
    for mut coil in kspace.outer_iter_mut() {
        for (v, &m) in coil.iter_mut().zip(pattern.mask().iter()) {
            if m {
                *v += Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng));
            }
        }
    }
}

/// Fully sampled single-band central k-space of every slice and coil,
/// shape `(MB, C, size, size)`.
///
/// `gamma` emulates a calibration scan with a different contrast: slice
/// magnitudes are raised to `gamma` (rescaled to the same peak) with phase
/// kept. `gamma = 1` gives the same contrast as the target scan.
pub fn simulate_calibration(stack: &SliceStack, maps: &CoilMaps, size: usize, gamma: f64) -> Result<Array4<Complex64>> {
    let (mb, h, w) = stack.dim();
    let (coils, mmb, mh, mw) = maps.dim();
    if (mmb, mh, mw) != (mb, h, w) {
        return Err(Error::Shape(format!("stack {:?} vs maps {:?}", stack.dim(), maps.dim())));
    }
    if size == 0 || size > h.min(w) {
        return Err(Error::InvalidArgument(format!("calibration size {size} outside 1..={}", h.min(w))));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!("calibration gamma {gamma} must be positive")));
    }
    let fft = Fft2::new(h, w);
    let (r0, c0) = (h / 2 - size / 2, w / 2 - size / 2);
    let mut out = Array4::zeros((mb, coils, size, size));
    for s in 0..mb {
        let img = contrast(stack.slice(s).to_owned(), gamma);
        for c in 0..coils {
            let mut k = &maps.data().slice(s![c, s, .., ..]) * &img;
            fft.forward(&mut k);
            out.slice_mut(s![s, c, .., ..]).assign(&k.slice(s![r0..r0 + size, c0..c0 + size]));
        }
    }
    Ok(out)
}

fn contrast(img: Array2<Complex64>, gamma: f64) -> Array2<Complex64> {
    if gamma == 1.0 {
        return img;
    }
    let peak = img.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if peak == 0.0 {
        return img;
    }
    img.mapv(|v| {
        let m = v.norm();
        if m == 0.0 {
            v
        } else {
            Complex64::from_polar(peak * (m / peak).powf(gamma), v.arg())
        }
    })
}

/// Everything needed to set up one synthetic experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub h: usize,
    pub w: usize,
    pub coils: usize,
    pub mb: usize,
    pub r: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caipi_shifts: Option<Vec<Fraction>>,
    #[serde(default)]
    pub acs_width: usize,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default = "default_calib")]
    pub calib_size: usize,
    #[serde(default = "default_gamma")]
    pub calib_gamma: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_calib() -> usize {
    64
}
fn default_gamma() -> f64 {
    1.0
}

/// Outputs of [`SimulationConfig::run`].
#[derive(Debug, Clone)]
pub struct SimulatedCase {
    pub truth: SliceStack,
    pub maps: CoilMaps,
    pub acquisition: AcquisitionSpec,
    pub measurement: Measurement,
    pub calibration: Array4<Complex64>,
}

impl SimulationConfig {
    pub fn new(h: usize, w: usize, coils: usize, mb: usize, r: usize) -> Self {
        Self {
            h,
            w,
            coils,
            mb,
            r,
            caipi_shifts: None,
            acs_width: 0,
            noise_sigma: 0.0,
            calib_size: default_calib(),
            calib_gamma: default_gamma(),
            seed: 0,
        }
    }

    pub fn acquisition(&self) -> Result<AcquisitionSpec> {
        let mut acq = AcquisitionSpec::new(self.mb, self.r, self.w);
        if let Some(sh) = &self.caipi_shifts {
            acq.caipi_shifts = sh.iter().map(Fraction::value).collect();
        }
        acq.acs_width = self.acs_width;
        acq.noise_sigma = self.noise_sigma;
        acq.validate()?;
        Ok(acq)
    }

    /// Phantom, maps, measurement and calibration from one seed. The
    /// sub-generators use fixed offsets from `seed` so changing one piece of
    /// the config does not reshuffle the others.
    pub fn run(&self) -> Result<SimulatedCase> {
        if self.coils == 0 {
            return Err(Error::InvalidArgument("coils must be >= 1".into()));
        }
        let acq = self.acquisition()?;
        let truth = make_slice_stack(self.mb, self.h, self.w, self.seed)?;
        let maps = make_coil_maps(self.coils, self.mb, self.h, self.w, self.seed ^ 0x6d61_7073)?;
        let measurement = simulate_sms(&truth, &maps, &acq, self.seed ^ 0x6e6f_6973_65)?;
        let calib_size = self.calib_size.min(self.h).min(self.w);
        let calibration = simulate_calibration(&truth, &maps, calib_size, self.calib_gamma)?;
        Ok(SimulatedCase { truth, maps, acquisition: acq, measurement, calibration })
    }
}

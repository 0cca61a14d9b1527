//! Diffusion algebra on the two-channel real representation, and the
//! epsilon-denoiser plug-ins.
//!
//! A complex image stack `(N, H, W)` enters as a real field `(N, 2, H, W)`
//! with channel 0 the real part and channel 1 the imaginary part. Every
//! real entry is treated as an independent coordinate with unit-variance
//! Gaussian noise.

mod cnn;
mod denoisers;

pub use cnn::CnnDenoiser;
pub use denoisers::{Denoiser, GaussianPriorDenoiser, ShrinkageDenoiser};

use ndarray::{Array3, Array4, ArrayView4, Axis, Zip};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::data_io::ScheduleParams;
use crate::error::{Error, Result};

/// Linear beta schedule and its derived products, indexed by `t = 1..=T`
/// with `alpha_bar(0) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

pub fn make_schedule(timesteps: usize, beta_start: f64, beta_end: f64) -> Result<NoiseSchedule> {
    if timesteps < 1 {
        return Err(Error::InvalidArgument("schedule needs T >= 1".into()));
    }
    if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "schedule bounds must satisfy 0 < beta_0 <= beta_T < 1, got {beta_start}, {beta_end}"
        )));
    }
    let betas: Vec<f64> = (0..timesteps)
        .map(|i| {
            if timesteps == 1 {
                beta_start
            } else {
                beta_start + (beta_end - beta_start) * i as f64 / (timesteps - 1) as f64
            }
        })
        .collect();
    let mut alpha_bars = Vec::with_capacity(timesteps + 1);
    alpha_bars.push(1.0);
    for b in &betas {
        let prev = *alpha_bars.last().unwrap();
        alpha_bars.push(prev * (1.0 - b));
    }
    Ok(NoiseSchedule { betas, alpha_bars })
}

impl NoiseSchedule {
    pub fn from_params(p: &ScheduleParams) -> Result<Self> {
        make_schedule(p.timesteps, p.beta_start, p.beta_end)
    }

    pub fn timesteps(&self) -> usize {
        self.betas.len()
    }
    /// `beta_t`, `t >= 1`.
    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t - 1]
    }
    pub fn alpha(&self, t: usize) -> f64 {
        1.0 - self.beta(t)
    }
    /// `alpha_bar_t` for `t in 0..=T`.
    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bars[t]
    }
    /// Posterior variance `(1 - abar_{t-1}) / (1 - abar_t) * beta_t`; zero at
    /// `t = 1`.
    pub fn sigma2(&self, t: usize) -> f64 {
        (1.0 - self.alpha_bar(t - 1)) / (1.0 - self.alpha_bar(t)) * self.beta(t)
    }

    fn check_t(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.timesteps() {
            return Err(Error::InvalidArgument(format!("step {t} outside 1..={}", self.timesteps())));
        }
        Ok(())
    }

    /// `steps` timesteps from `T` down to 1, evenly spaced and rounded.
    pub fn sampling_steps(&self, steps: usize) -> Result<Vec<usize>> {
        let t = self.timesteps();
        if steps == 0 || steps > t {
            return Err(Error::InvalidArgument(format!("cannot take {steps} steps on a {t}-step schedule")));
        }
        if steps == 1 {
            return Ok(vec![t]);
        }
        let mut out: Vec<usize> = (0..steps)
            .map(|i| 1 + ((i as f64) * (t - 1) as f64 / (steps - 1) as f64).round() as usize)
            .collect();
        out.reverse();
        Ok(out)
    }
}

fn same_shape(a: &ArrayView4<f64>, b: &ArrayView4<f64>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

/// `x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) z`
pub fn forward_noise(x0: ArrayView4<f64>, t: usize, z: ArrayView4<f64>, sched: &NoiseSchedule) -> Result<Array4<f64>> {
    sched.check_t(t)?;
    same_shape(&x0, &z)?;
    let ab = sched.alpha_bar(t);
    let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
    Ok(Zip::from(&x0).and(&z).map_collect(|x, z| a * x + b * z))
}

/// `x0 = (x_t - sqrt(1 - abar_t) eps) / sqrt(abar_t)`
pub fn x0_from_eps(x_t: ArrayView4<f64>, t: usize, eps: ArrayView4<f64>, sched: &NoiseSchedule) -> Result<Array4<f64>> {
    sched.check_t(t)?;
    same_shape(&x_t, &eps)?;
    let ab = sched.alpha_bar(t);
    if ab <= 0.0 {
        return Err(Error::InvalidArgument(format!("alpha_bar vanishes at step {t}")));
    }
    let (inv, b) = (1.0 / ab.sqrt(), (1.0 - ab).sqrt());
    Ok(Zip::from(&x_t).and(&eps).map_collect(|x, e| (x - b * e) * inv))
}

/// Inverse of [`x0_from_eps`]: the noise implied by `x_t` and an estimate
/// of `x0`. Requires `t >= 1` so that `1 - abar_t > 0`.
pub fn eps_from_x0(x_t: ArrayView4<f64>, t: usize, x0: ArrayView4<f64>, sched: &NoiseSchedule) -> Result<Array4<f64>> {
    sched.check_t(t)?;
    same_shape(&x_t, &x0)?;
    let ab = sched.alpha_bar(t);
    let (a, inv) = (ab.sqrt(), 1.0 / (1.0 - ab).sqrt());
    Ok(Zip::from(&x_t).and(&x0).map_collect(|x, x0| (x - a * x0) * inv))
}

/// Denoiser output at step `t`.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub x0: Array4<f64>,
    pub eps: Array4<f64>,
}

pub fn predict_x0(x_t: ArrayView4<f64>, t: usize, denoiser: &dyn Denoiser, sched: &NoiseSchedule) -> Result<Prediction> {
    sched.check_t(t)?;
    let eps = denoiser.predict(x_t, t)?;
    if eps.shape() != x_t.shape() {
        return Err(Error::Shape(format!("denoiser returned {:?} for input {:?}", eps.shape(), x_t.shape())));
    }
    let x0 = x0_from_eps(x_t, t, eps.view(), sched)?;
    Ok(Prediction { x0, eps })
}

/// `x_{t'} = sqrt(abar_{t'}) x0 + sqrt(1 - abar_{t'}) z` for any `t' >= 0`.
pub fn renoise(x0: ArrayView4<f64>, t_prev: usize, z: ArrayView4<f64>, sched: &NoiseSchedule) -> Result<Array4<f64>> {
    if t_prev > sched.timesteps() {
        return Err(Error::InvalidArgument(format!("step {t_prev} beyond schedule")));
    }
    same_shape(&x0, &z)?;
    let ab = sched.alpha_bar(t_prev);
    let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
    Ok(Zip::from(&x0).and(&z).map_collect(|x, z| a * x + b * z))
}

/// Ancestral step `x_{t-1} = mu_t + sigma_t z` with
/// `mu_t = (x_t - beta_t / sqrt(1 - abar_t) eps) / sqrt(a_t)`.
pub fn ddpm_step(
    x_t: ArrayView4<f64>,
    t: usize,
    denoiser: &dyn Denoiser,
    z: ArrayView4<f64>,
    sched: &NoiseSchedule,
) -> Result<Array4<f64>> {
    sched.check_t(t)?;
    same_shape(&x_t, &z)?;
    let eps = denoiser.predict(x_t, t)?;
    same_shape(&x_t, &eps.view())?;
    Ok(ddpm_mean_plus(x_t, t, eps.view(), z, sched))
}

fn ddpm_mean_plus(x_t: ArrayView4<f64>, t: usize, eps: ArrayView4<f64>, z: ArrayView4<f64>, sched: &NoiseSchedule) -> Array4<f64> {
    let c = sched.beta(t) / (1.0 - sched.alpha_bar(t)).sqrt();
    let inv = 1.0 / sched.alpha(t).sqrt();
    let sigma = sched.sigma2(t).sqrt();
    Zip::from(&x_t).and(&eps).and(&z).map_collect(|x, e, z| (x - c * e) * inv + sigma * z)
}

/// Fills an array with independent standard normal draws in row-major order.
pub fn standard_normal<R: Rng>(shape: (usize, usize, usize, usize), rng: &mut R) -> Array4<f64> {
    Array4::from_shape_simple_fn(shape, || rng.sample(StandardNormal))
}

/// `(N, H, W)` complex to `(N, 2, H, W)` real.
pub fn to_channels(x: &Array3<Complex64>) -> Array4<f64> {
    let (n, h, w) = x.dim();
    let mut out = Array4::zeros((n, 2, h, w));
    Zip::from(out.index_axis_mut(Axis(1), 0)).and(x).for_each(|o, v| *o = v.re);
    Zip::from(out.index_axis_mut(Axis(1), 1)).and(x).for_each(|o, v| *o = v.im);
    out
}

/// Inverse of [`to_channels`].
pub fn from_channels(x: ArrayView4<f64>) -> Result<Array3<Complex64>> {
    if x.dim().1 != 2 {
        return Err(Error::Shape(format!("expected 2 channels, got {}", x.dim().1)));
    }
    let re = x.index_axis(Axis(1), 0);
    let im = x.index_axis(Axis(1), 1);
    Ok(Zip::from(&re).and(&im).map_collect(|&a, &b| Complex64::new(a, b)))
}

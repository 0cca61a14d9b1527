//! Reverse diffusion with SMS data consistency.
//!
//! Each step predicts `x_{0|t}` with the denoiser, corrects it by one
//! gradient step on `||A R x - y'||^2`, and re-noises the corrected estimate
//! to the next timestep. `y'` is the measurement with its low-frequency band
//! filled by GRAPPA when a calibration scan is supplied.

use std::time::Instant;

use ndarray::{Array3, Array4};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::data_io::{ReconConfig, SamplerVariant};
use crate::diffusion_prior::{from_channels, predict_x0, renoise, standard_normal, to_channels, Denoiser, NoiseSchedule};
use crate::error::{Error, Result};
use crate::grappa_lfe::{calibrate_plan, lfe_fill, reorder_calibration, PlanSettings};
use crate::sms_operators::{norm, CaipiScheme, CoilMaps, Measurement, SliceStack, SmsOperator};

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerSettings {
    pub lambda: f64,
    pub steps: usize,
    pub variant: SamplerVariant,
    pub seed: u64,
    pub lfe_size: usize,
    pub grappa: PlanSettings,
}

impl SamplerSettings {
    pub fn from_config(cfg: &ReconConfig) -> Self {
        Self {
            lambda: cfg.lambda,
            steps: cfg.steps,
            variant: cfg.variant,
            seed: cfg.seed,
            lfe_size: cfg.lfe_size,
            grappa: PlanSettings {
                n_src: cfg.grappa.source_lines,
                n_orth: cfg.grappa.orth_taps,
                tikhonov: cfg.grappa.tikhonov,
                causal: false,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub index: usize,
    pub t: usize,
    /// `||A R x_{0|t} - y'|| / ||y'||` before the correction (absolute when
    /// `y'` is zero).
    pub residual: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub steps: Vec<StepRecord>,
    /// `||A R x_hat - y|| / ||y||` against the original measurement.
    pub final_residual: f64,
    pub lfe_size: usize,
    pub lfe_filled: usize,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub lfe_seconds: f64,
    #[serde(skip)]
    pub sampling_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct RogerOutput {
    pub image: SliceStack,
    pub diagnostics: Diagnostics,
}

/// `x - lambda (A R)^H (A R x - y)`, together with the relative residual
/// of `x`.
pub fn data_consistency(x: &SliceStack, y: &Array3<Complex64>, op: &SmsOperator, lambda: f64) -> Result<(SliceStack, f64)> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda {lambda} must be finite and >= 0")));
    }
    let mut r = op.forward(x)?;
    if r.dim() != y.dim() {
        return Err(Error::Shape(format!("measurement {:?} vs operator {:?}", y.dim(), r.dim())));
    }
    r -= y;
    let ny = norm(y.iter());
    let nr = norm(r.iter());
    let residual = if ny > 0.0 { nr / ny } else { nr };
    if lambda == 0.0 {
        return Ok((x.clone(), residual));
    }
    let g = op.adjoint(&r)?;
    let out = x.data() - &(g.into_inner() * Complex64::new(lambda, 0.0));
    Ok((SliceStack::new(out)?, residual))
}

/// Relative k-space residual `||A R x - y|| / ||y||`.
pub fn kspace_residual(x: &SliceStack, y: &Measurement, op: &SmsOperator) -> Result<f64> {
    let op = op.with_pattern(y.pattern())?;
    let r = op.forward(x)? - y.kspace();
    let ny = norm(y.kspace().iter());
    let nr = norm(r.iter());
    Ok(if ny > 0.0 { nr / ny } else { nr })
}

/// Optional LFE: returns `y'` (or `y` on fallback), the size used and the
/// number of filled points.
fn enhance(
    y: &Measurement,
    scheme: &CaipiScheme,
    calibration: Option<&Array4<Complex64>>,
    settings: &SamplerSettings,
    diag: &mut Diagnostics,
) -> Result<Measurement> {
    if settings.lfe_size == 0 {
        return Ok(y.clone());
    }
    let Some(calib) = calibration else {
        let msg = "no calibration scan; running without low-frequency enhancement".to_string();
        log::warn!("{msg}");
        diag.warnings.push(msg);
        return Ok(y.clone());
    };
    let p = y.pattern();
    let plan = reorder_calibration(calib, scheme).and_then(|c| calibrate_plan(&c, p.mb(), p.r(), &settings.grappa));
    match plan {
        Ok(plan) => {
            let out = lfe_fill(y, &plan, settings.lfe_size)?;
            diag.lfe_size = settings.lfe_size;
            diag.lfe_filled = out.filled;
            Ok(out.measurement)
        }
        Err(e) => {
            let msg = format!("kernel calibration failed ({e}); running without low-frequency enhancement");
            log::warn!("{msg}");
            diag.warnings.push(msg);
            Ok(y.clone())
        }
    }
}

pub fn roger_reconstruct(
    y: &Measurement,
    maps: &CoilMaps,
    scheme: &CaipiScheme,
    calibration: Option<&Array4<Complex64>>,
    denoiser: &dyn Denoiser,
    schedule: &NoiseSchedule,
    settings: &SamplerSettings,
) -> Result<RogerOutput> {
    let op = SmsOperator::new(maps, scheme, y.pattern())?;
    let mut diag = Diagnostics::default();

    let started = Instant::now();
    let y_prime = enhance(y, scheme, calibration, settings, &mut diag)?;
    let op_prime = op.with_pattern(y_prime.pattern())?;
    diag.lfe_seconds = started.elapsed().as_secs_f64();

    let started = Instant::now();
    let taus = schedule.sampling_steps(settings.steps)?;
    let (mb, h, w) = op.image_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut x_t = standard_normal((mb, 2, h, w), &mut rng);
    let mut x_hat = SliceStack::zeros(mb, h, w);
    for (index, &t) in taus.iter().enumerate() {
        let pred = predict_x0(x_t.view(), t, denoiser, schedule)?;
        let x0 = SliceStack::new(from_channels(pred.x0.view())?)?;
        let (corrected, residual) = data_consistency(&x0, y_prime.kspace(), &op_prime, settings.lambda)?;
        if !corrected.is_finite() || !residual.is_finite() {
            return Err(Error::NonFinite { step: index, detail: format!("state diverged at t={t}") });
        }
        diag.steps.push(StepRecord { index, t, residual });
        let t_prev = taus.get(index + 1).copied().unwrap_or(0);
        let x0c = to_channels(corrected.data());
        x_hat = corrected;
        if t_prev > 0 {
            let z = match settings.variant {
                SamplerVariant::PaperRenoise => standard_normal((mb, 2, h, w), &mut rng),
                SamplerVariant::Deterministic => pred.eps,
            };
            x_t = renoise(x0c.view(), t_prev, z.view(), schedule)?;
        }
    }
    diag.sampling_seconds = started.elapsed().as_secs_f64();
    diag.final_residual = kspace_residual(&x_hat, y, &op)?;
    Ok(RogerOutput { image: x_hat, diagnostics: diag })
}

/// JSON summary of a run. `content_hash` is the SHA-256 of everything
/// except the `timings` block, so it is stable across repeated seeded runs.
pub fn run_report(diag: &Diagnostics, config: Option<&Value>, metrics: Option<&Value>) -> Value {
    let mut report = json!({
        "steps": diag.steps.len(),
        "residuals": diag.steps,
        "final_residual": diag.final_residual,
        "lfe": { "size": diag.lfe_size, "filled": diag.lfe_filled },
        "warnings": diag.warnings,
        "config": config.cloned().unwrap_or(Value::Null),
        "metrics": metrics.cloned().unwrap_or(Value::Null),
    });
    let hash = hex::encode(Sha256::digest(serde_json::to_vec(&report).expect("json value serializes")));
    report["content_hash"] = Value::String(hash);
    report["timings"] = json!({ "lfe_seconds": diag.lfe_seconds, "sampling_seconds": diag.sampling_seconds });
    report
}

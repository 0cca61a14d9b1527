//! Classical reconstructions on the same operators as the sampler:
//! zero-filled adjoint, CG-SENSE and L1-wavelet SENSE.

use ndarray::Array3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sms_operators::{inner, norm, CaipiScheme, CoilMaps, Measurement, SliceStack, SmsOperator};
use crate::wavelet::{haar_forward, haar_inverse, soft_threshold};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIterations,
    /// The search direction vanished (exact solution reached).
    Breakdown,
}

/// Per-iteration values of an iterative solve; entry 0 is the start point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterativeSolveLog {
    pub values: Vec<f64>,
    pub iterations: usize,
    pub stop: StopReason,
}

/// `(A R)^H y`
pub fn zero_filled(y: &Measurement, maps: &CoilMaps, scheme: &CaipiScheme) -> Result<SliceStack> {
    SmsOperator::new(maps, scheme, y.pattern())?.adjoint(y.kspace())
}

fn axpy(a: Complex64, x: &SliceStack, y: &SliceStack) -> SliceStack {
    let mut d = y.data().clone();
    d.scaled_add(a, x.data());
    SliceStack::new(d).expect("same shape")
}

fn data_residual(op: &SmsOperator, x: &SliceStack, y: &Array3<Complex64>, ny: f64) -> Result<f64> {
    let r = op.forward(x)? - y;
    Ok(norm(r.iter()) / ny.max(f64::MIN_POSITIVE))
}

/// Conjugate gradient on `(A R)^H A R x = (A R)^H y`, started from the
/// adjoint. Stops when `||r|| / ||b|| <= tol`. The log holds the relative
/// data residual `||A R x - y|| / ||y||` per iterate, which CG on the normal
/// equations never increases.
pub fn cg_sense(
    y: &Measurement,
    maps: &CoilMaps,
    scheme: &CaipiScheme,
    iters: usize,
    tol: f64,
) -> Result<(SliceStack, IterativeSolveLog)> {
    if iters == 0 {
        return Err(Error::InvalidArgument("cg_sense needs iters >= 1".into()));
    }
    let op = SmsOperator::new(maps, scheme, y.pattern())?;
    let ny = norm(y.kspace().iter());
    let b = op.adjoint(y.kspace())?;
    let nb = b.norm();
    let mut x = b.clone();
    let mut r = axpy(Complex64::new(-1.0, 0.0), &op.normal(&x)?, &b);
    let mut p = r.clone();
    let mut rr = r.norm().powi(2);
    let mut values = vec![data_residual(&op, &x, y.kspace(), ny)?];
    let converged = |rr: f64| nb == 0.0 || rr.sqrt() / nb <= tol;
    let mut stop = StopReason::MaxIterations;
    let mut k = 0;
    while k < iters {
        if converged(rr) {
            stop = StopReason::Converged;
            break;
        }
        let ap = op.normal(&p)?;
        let pap = inner(p.data().iter(), ap.data().iter()).re;
        if pap <= 0.0 {
            stop = StopReason::Breakdown;
            break;
        }
        let alpha = rr / pap;
        x = axpy(Complex64::new(alpha, 0.0), &p, &x);
        r = axpy(Complex64::new(-alpha, 0.0), &ap, &r);
        let rr_new = r.norm().powi(2);
        p = axpy(Complex64::new(rr_new / rr, 0.0), &p, &r);
        rr = rr_new;
        k += 1;
        if !x.is_finite() {
            return Err(Error::NonFinite { step: k, detail: "CG-SENSE iterate diverged".into() });
        }
        values.push(data_residual(&op, &x, y.kspace(), ny)?);
    }
    if stop == StopReason::MaxIterations && converged(rr) {
        stop = StopReason::Converged;
    }
    Ok((x, IterativeSolveLog { values, iterations: k, stop }))
}

/// `1/2 ||A R x - y||^2 + lam ||W x||_1` with `W` the per-slice Haar
/// transform and `||.||_1` the sum of complex magnitudes.
pub fn l1_objective(op: &SmsOperator, x: &SliceStack, y: &Array3<Complex64>, lam: f64, levels: usize) -> Result<f64> {
    let r = op.forward(x)? - y;
    let fid = 0.5 * r.iter().map(|v| v.norm_sqr()).sum::<f64>();
    let reg: f64 = x
        .data()
        .outer_iter()
        .map(|s| haar_forward(&s.to_owned(), levels).iter().map(|v| v.norm()).sum::<f64>())
        .sum();
    Ok(fid + lam * reg)
}

fn prox_l1(x: &SliceStack, thr: f64, levels: usize) -> SliceStack {
    let mut out = x.data().clone();
    for mut s in out.outer_iter_mut() {
        let c = haar_forward(&s.to_owned(), levels).mapv(|v| soft_threshold(v, thr));
        s.assign(&haar_inverse(&c, levels));
    }
    SliceStack::new(out).expect("same shape")
}

/// Settings for [`l1_wavelet`].
#[derive(Debug, Clone, PartialEq)]
pub struct L1Settings {
    pub lambda: f64,
    pub iters: usize,
    pub step: f64,
    pub levels: usize,
}

impl Default for L1Settings {
    fn default() -> Self {
        Self { lambda: 1e-3, iters: 100, step: 1.0, levels: 3 }
    }
}

/// Monotone FISTA on the L1-wavelet SENSE objective, started from the
/// zero-filled image. Step 1 is valid because `||A R|| <= 1` for unitary
/// FFTs and normalized maps. The log holds the objective per iterate and
/// is non-increasing.
pub fn l1_wavelet(
    y: &Measurement,
    maps: &CoilMaps,
    scheme: &CaipiScheme,
    settings: &L1Settings,
) -> Result<(SliceStack, IterativeSolveLog)> {
    let L1Settings { lambda, iters, step, levels } = *settings;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("wavelet weight {lambda} must be >= 0")));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidArgument(format!("step {step} must be positive")));
    }
    let op = SmsOperator::new(maps, scheme, y.pattern())?;
    let yk = y.kspace();
    let mut x = op.adjoint(yk)?;
    let mut fx = l1_objective(&op, &x, yk, lambda, levels)?;
    let mut v = x.clone();
    let mut t = 1.0f64;
    let mut values = vec![fx];
    for k in 1..=iters {
        let g = op.adjoint(&(op.forward(&v)? - yk))?;
        let z = prox_l1(&axpy(Complex64::new(-step, 0.0), &g, &v), step * lambda, levels);
        let fz = l1_objective(&op, &z, yk, lambda, levels)?;
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let x_prev = x;
        if fz <= fx {
            x = z.clone();
            fx = fz;
        } else {
            x = x_prev.clone();
        }
        // v = x + (t / t_next) (z - x) + ((t - 1) / t_next) (x - x_prev)
        let mut vd = x.data().clone();
        vd.scaled_add(Complex64::new(t / t_next, 0.0), &(z.data() - x.data()));
        vd.scaled_add(Complex64::new((t - 1.0) / t_next, 0.0), &(x.data() - x_prev.data()));
        v = SliceStack::new(vd)?;
        t = t_next;
        if !v.is_finite() || !fx.is_finite() {
            return Err(Error::NonFinite { step: k, detail: "L1-wavelet iterate diverged".into() });
        }
        values.push(fx);
    }
    Ok((x, IterativeSolveLog { values, iterations: iters, stop: StopReason::MaxIterations }))
}

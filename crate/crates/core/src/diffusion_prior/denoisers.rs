use ndarray::{Array2, Array4, ArrayView4, Axis};
use num_complex::Complex64;
use rayon::prelude::*;

use super::{eps_from_x0, NoiseSchedule};
use crate::error::{Error, Result};
use crate::wavelet::{haar_forward, haar_inverse, soft_threshold};

/// Noise predictor `eps(x_t, t)` on batches of two-channel fields
/// `(N, 2, H, W)`. Implementations must be deterministic and reentrant.
pub trait Denoiser: Send + Sync {
    fn predict(&self, x_t: ArrayView4<f64>, t: usize) -> Result<Array4<f64>>;
}

/// Exact MMSE denoiser for an independent Gaussian prior
/// `x0 ~ N(mu, sigma^2)` on every real coordinate.
#[derive(Debug, Clone)]
pub struct GaussianPriorDenoiser {
    mu: Array4<f64>,
    sigma: f64,
    schedule: NoiseSchedule,
}

impl GaussianPriorDenoiser {
    pub fn new(mu: Array4<f64>, sigma: f64, schedule: NoiseSchedule) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("prior sigma {sigma} must be positive")));
        }
        Ok(Self { mu, sigma, schedule })
    }

    pub fn mu(&self) -> &Array4<f64> {
        &self.mu
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// `E[x0 | x_t] = (sqrt(abar) s^2 x_t + (1 - abar) mu) / (abar s^2 + 1 - abar)`
    pub fn posterior_mean(&self, x_t: ArrayView4<f64>, t: usize) -> Result<Array4<f64>> {
        if x_t.shape() != self.mu.shape() {
            return Err(Error::Shape(format!("input {:?} vs prior mean {:?}", x_t.shape(), self.mu.shape())));
        }
        let ab = self.schedule.alpha_bar(t);
        let s2 = self.sigma * self.sigma;
        let den = ab * s2 + (1.0 - ab);
        let (a, b) = (ab.sqrt() * s2 / den, (1.0 - ab) / den);
        Ok(ndarray::Zip::from(&x_t).and(&self.mu).map_collect(|x, m| a * x + b * m))
    }
}

impl Denoiser for GaussianPriorDenoiser {
    fn predict(&self, x_t: ArrayView4<f64>, t: usize) -> Result<Array4<f64>> {
        let x0 = self.posterior_mean(x_t, t)?;
        eps_from_x0(x_t, t, x0.view(), &self.schedule)
    }
}

/// Trainless prior: rescale `x_t` by `1 / sqrt(abar_t)`, soft-threshold
/// every Haar coefficient of each complex image at
/// `kappa * sqrt(1 - abar_t) / sqrt(abar_t)` (the noise level of the
/// rescaled field), and return the noise implied by the shrunk estimate.
///
/// The approximation band is thresholded too. Left alone, the fresh noise
/// injected at every step piles up there wherever the data term is blind.
#[derive(Debug, Clone)]
pub struct ShrinkageDenoiser {
    levels: usize,
    kappa: f64,
    schedule: NoiseSchedule,
}

impl ShrinkageDenoiser {
    pub fn new(levels: usize, kappa: f64, schedule: NoiseSchedule) -> Result<Self> {
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(Error::InvalidArgument(format!("threshold scale {kappa} must be >= 0")));
        }
        Ok(Self { levels, kappa, schedule })
    }

    pub fn threshold(&self, t: usize) -> f64 {
        let ab = self.schedule.alpha_bar(t);
        self.kappa * ((1.0 - ab) / ab).sqrt()
    }

    pub fn estimate_x0(&self, x_t: ArrayView4<f64>, t: usize) -> Result<Array4<f64>> {
        let (n, ch, h, w) = x_t.dim();
        if ch != 2 {
            return Err(Error::Shape(format!("expected 2 channels, got {ch}")));
        }
        let inv = 1.0 / self.schedule.alpha_bar(t).sqrt();
        let thr = self.threshold(t);
        let items: Vec<Array2<Complex64>> = (0..n)
            .into_par_iter()
            .map(|k| {
                let item = x_t.index_axis(Axis(0), k);
                let img = Array2::from_shape_fn((h, w), |(i, j)| {
                    Complex64::new(item[[0, i, j]], item[[1, i, j]]) * inv
                });
                if thr == 0.0 {
                    return img;
                }
                let c = haar_forward(&img, self.levels).mapv(|v| soft_threshold(v, thr));
                haar_inverse(&c, self.levels)
            })
            .collect();
        let mut out = Array4::zeros((n, 2, h, w));
        for (k, img) in items.iter().enumerate() {
            for ((i, j), v) in img.indexed_iter() {
                out[[k, 0, i, j]] = v.re;
                out[[k, 1, i, j]] = v.im;
            }
        }
        Ok(out)
    }
}

impl Denoiser for ShrinkageDenoiser {
    fn predict(&self, x_t: ArrayView4<f64>, t: usize) -> Result<Array4<f64>> {
        let x0 = self.estimate_x0(x_t, t)?;
        eps_from_x0(x_t, t, x0.view(), &self.schedule)
    }
}

#[cfg(test)]
mod tests {
    use super::super::{forward_noise, make_schedule, predict_x0, standard_normal};
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn standard_gaussian_prior_closed_form() {
        let s = make_schedule(1000, 1e-4, 0.02).unwrap();
        let d = GaussianPriorDenoiser::new(Array4::zeros((1, 2, 3, 3)), 1.0, s.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let xt = standard_normal((1, 2, 3, 3), &mut rng);
        for t in [1, 10, 400, 1000] {
            let p = predict_x0(xt.view(), t, &d, &s).unwrap();
            let ab = s.alpha_bar(t);
            for (a, x) in p.x0.iter().zip(&xt) {
                assert!((a - ab.sqrt() * x).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gaussian_posterior_mean_matches_monte_carlo() {
        // scalar prior x0 ~ N(0.3, 0.5^2): bin joint draws near a fixed x_t
        let s = make_schedule(1000, 1e-4, 0.02).unwrap();
        let t = 300;
        let d = GaussianPriorDenoiser::new(Array4::from_elem((1, 2, 1, 1), 0.3), 0.5, s.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let target = 0.4;
        let (mut sum, mut cnt) = (0.0, 0usize);
        let draws = standard_normal((400_000, 1, 1, 2), &mut rng);
        let ab = s.alpha_bar(t);
        for pair in draws.outer_iter() {
            let x0 = 0.3 + 0.5 * pair[[0, 0, 0]];
            let xt = ab.sqrt() * x0 + (1.0 - ab).sqrt() * pair[[0, 0, 1]];
            if (xt - target).abs() < 0.01 {
                sum += x0;
                cnt += 1;
            }
        }
        let mc = sum / cnt as f64;
        let x = Array4::from_elem((1, 2, 1, 1), target);
        let exact = d.posterior_mean(x.view(), t).unwrap()[[0, 0, 0, 0]];
        assert!(cnt > 1000);
        assert!((mc - exact).abs() < 0.02 * exact.abs(), "mc {mc} exact {exact}");
    }

    #[test]
    fn gaussian_beats_identity_estimator() {
        let s = make_schedule(1000, 1e-4, 0.02).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mu = Array4::from_elem((1, 2, 10, 10), 0.2);
        let d = GaussianPriorDenoiser::new(mu.clone(), 0.7, s.clone()).unwrap();
        for t in [100, 200, 900] {
            assert!(s.alpha_bar(t) < 0.99);
            let (mut e_post, mut e_id) = (0.0, 0.0);
            for _ in 0..50 {
                let x0 = &mu + &(standard_normal((1, 2, 10, 10), &mut rng) * 0.7);
                let z = standard_normal((1, 2, 10, 10), &mut rng);
                let xt = forward_noise(x0.view(), t, z.view(), &s).unwrap();
                let p = predict_x0(xt.view(), t, &d, &s).unwrap();
                e_post += (&p.x0 - &x0).mapv(|v| v * v).sum();
                e_id += (&xt / s.alpha_bar(t).sqrt() - &x0).mapv(|v| v * v).sum();
            }
            assert!(e_post < e_id);
        }
    }

    #[test]
    fn zero_threshold_shrinkage_is_identity() {
        let s = make_schedule(100, 1e-4, 0.02).unwrap();
        let d = ShrinkageDenoiser::new(3, 0.0, s.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xt = standard_normal((2, 2, 8, 8), &mut rng);
        let p = predict_x0(xt.view(), 40, &d, &s).unwrap();
        let ab = s.alpha_bar(40).sqrt();
        assert!(p.x0.iter().zip(&xt).all(|(a, x)| (a - x / ab).abs() < 1e-12));
        assert!(p.eps.iter().all(|e| e.abs() < 1e-9));
    }

    #[test]
    fn shrinkage_reduces_noise_on_piecewise_constant_image() {
        let s = make_schedule(1000, 1e-4, 0.02).unwrap();
        let d = ShrinkageDenoiser::new(3, 1.5, s.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x0 = Array4::from_shape_fn((1, 2, 32, 32), |(_, c, i, j)| {
            if c == 0 && (8..24).contains(&i) && (8..24).contains(&j) { 1.0 } else { 0.0 }
        });
        let t = 100;
        let z = standard_normal((1, 2, 32, 32), &mut rng);
        let xt = forward_noise(x0.view(), t, z.view(), &s).unwrap();
        let est = d.estimate_x0(xt.view(), t).unwrap();
        let e_shrink = (&est - &x0).mapv(|v| v * v).sum();
        let e_id = (&xt / s.alpha_bar(t).sqrt() - &x0).mapv(|v| v * v).sum();
        assert!(e_shrink < 0.5 * e_id, "{e_shrink} vs {e_id}");
    }
}

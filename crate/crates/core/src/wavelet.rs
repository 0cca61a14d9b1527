//! Orthonormal 2-D Haar transform with periodic boundary, Mallat layout
//! (coarsest approximation in the top-left corner).

use ndarray::{s, Array2, ArrayViewMut1, ArrayViewMut2, Axis};
use num_complex::Complex64;

const INV_SQRT2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Number of levels actually usable on an `h x w` image: each level halves
/// both sides, which must be even.
pub fn usable_levels(h: usize, w: usize, levels: usize) -> usize {
    let mut l = 0;
    let (mut a, mut b) = (h, w);
    while l < levels && a % 2 == 0 && b % 2 == 0 && a >= 2 && b >= 2 {
        a /= 2;
        b /= 2;
        l += 1;
    }
    l
}

pub fn haar_forward(x: &Array2<Complex64>, levels: usize) -> Array2<Complex64> {
    let mut out = x.clone();
    let (h, w) = x.dim();
    for k in 0..usable_levels(h, w, levels) {
        step(out.slice_mut(s![..h >> k, ..w >> k]), false);
    }
    out
}

pub fn haar_inverse(c: &Array2<Complex64>, levels: usize) -> Array2<Complex64> {
    let mut out = c.clone();
    let (h, w) = c.dim();
    for k in (0..usable_levels(h, w, levels)).rev() {
        step(out.slice_mut(s![..h >> k, ..w >> k]), true);
    }
    out
}

/// True on the coarsest approximation band.
pub fn approximation_mask(h: usize, w: usize, levels: usize) -> Array2<bool> {
    let l = usable_levels(h, w, levels);
    Array2::from_shape_fn((h, w), |(i, j)| i < h >> l && j < w >> l)
}

fn step(mut x: ArrayViewMut2<Complex64>, inverse: bool) {
    let mut buf = Vec::new();
    let order = if inverse { [Axis(0), Axis(1)] } else { [Axis(1), Axis(0)] };
    for ax in order {
        for lane in x.lanes_mut(ax) {
            pair(lane, &mut buf, inverse);
        }
    }
}

fn pair(mut lane: ArrayViewMut1<Complex64>, buf: &mut Vec<Complex64>, inverse: bool) {
    let n = lane.len();
    let half = n / 2;
    buf.clear();
    buf.extend(lane.iter().copied());
    for k in 0..half {
        if inverse {
            lane[2 * k] = (buf[k] + buf[half + k]) * INV_SQRT2;
            lane[2 * k + 1] = (buf[k] - buf[half + k]) * INV_SQRT2;
        } else {
            lane[k] = (buf[2 * k] + buf[2 * k + 1]) * INV_SQRT2;
            lane[half + k] = (buf[2 * k] - buf[2 * k + 1]) * INV_SQRT2;
        }
    }
}

/// Complex soft threshold: shrinks the magnitude by `t`, keeps the phase.
pub fn soft_threshold(v: Complex64, t: f64) -> Complex64 {
    let m = v.norm();
    if m <= t {
        Complex64::new(0.0, 0.0)
    } else {
        v * ((m - t) / m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn image(h: usize, w: usize, seed: u64) -> Array2<Complex64> {
        let mut x = seed as f64;
        Array2::from_shape_fn((h, w), |_| {
            x = (x * 1.7 + 0.31).fract() + 0.1;
            Complex64::new(x - 0.5, (x * 3.1).fract() - 0.5)
        })
    }

    #[test]
    fn constant_image_has_single_coefficient() {
        let x = Array2::from_elem((8, 8), Complex64::new(1.0, 0.0));
        let c = haar_forward(&x, 3);
        assert!((c[[0, 0]].re - 8.0).abs() < 1e-12);
        assert!(c.iter().skip(1).all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn levels_limited_by_divisibility() {
        assert_eq!(usable_levels(12, 8, 3), 2);
        assert_eq!(usable_levels(7, 8, 3), 0);
        assert_eq!(usable_levels(128, 128, 3), 3);
        assert_eq!(approximation_mask(8, 8, 3).iter().filter(|&&m| m).count(), 1);
    }

    #[test]
    fn soft_threshold_keeps_phase() {
        let v = Complex64::new(3.0, 4.0);
        let t = soft_threshold(v, 1.0);
        assert!((t.norm() - 4.0).abs() < 1e-12);
        assert!((t.arg() - v.arg()).abs() < 1e-12);
        assert_eq!(soft_threshold(v, 5.0), Complex64::new(0.0, 0.0));
    }

    proptest! {
        #[test]
        fn orthonormal_round_trip(h in 1usize..5, w in 1usize..5, seed in 0u64..1000, levels in 0usize..4) {
            let x = image(4 * h, 4 * w, seed);
            let c = haar_forward(&x, levels);
            let n1: f64 = x.iter().map(|v| v.norm_sqr()).sum();
            let n2: f64 = c.iter().map(|v| v.norm_sqr()).sum();
            prop_assert!((n1 - n2).abs() < 1e-10 * n1);
            let back = haar_inverse(&c, levels);
            prop_assert!(back.iter().zip(&x).all(|(a, b)| (a - b).norm() < 1e-12));
        }
    }
}

//! Centered, unitary FFTs over 2-D complex arrays.
//!
//! DC sits at index `n / 2` (integer division) along every transformed axis,
//! and both directions are scaled by `1/sqrt(n)` so the forward transform is
//! exactly unitary and the inverse is its adjoint.

use std::sync::Arc;

use ndarray::{Array2, ArrayViewMut1, ArrayViewMut2, Axis};
use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

/// Centered frequency index of array position `i` on an axis of length `n`.
#[inline]
pub fn centered_index(i: usize, n: usize) -> isize {
    i as isize - (n / 2) as isize
}

/// Cached 1-D plans for a fixed `rows x cols` geometry.
#[derive(Clone)]
pub struct Fft2 {
    rows: usize,
    cols: usize,
    fwd_rows: Arc<dyn Fft<f64>>,
    inv_rows: Arc<dyn Fft<f64>>,
    fwd_cols: Arc<dyn Fft<f64>>,
    inv_cols: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2").field("rows", &self.rows).field("cols", &self.cols).finish()
    }
}

impl Fft2 {
    pub fn new(rows: usize, cols: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            rows,
            cols,
            // plans along axis 0 have length `rows`
            fwd_rows: planner.plan_fft(rows, FftDirection::Forward),
            inv_rows: planner.plan_fft(rows, FftDirection::Inverse),
            fwd_cols: planner.plan_fft(cols, FftDirection::Forward),
            inv_cols: planner.plan_fft(cols, FftDirection::Inverse),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn forward(&self, x: &mut Array2<Complex64>) {
        self.transform(x.view_mut(), FftDirection::Forward);
    }

    pub fn inverse(&self, x: &mut Array2<Complex64>) {
        self.transform(x.view_mut(), FftDirection::Inverse);
    }

    pub fn forward_view(&self, x: ArrayViewMut2<Complex64>) {
        self.transform(x, FftDirection::Forward);
    }

    pub fn inverse_view(&self, x: ArrayViewMut2<Complex64>) {
        self.transform(x, FftDirection::Inverse);
    }

    fn transform(&self, mut x: ArrayViewMut2<Complex64>, dir: FftDirection) {
        assert_eq!(x.dim(), (self.rows, self.cols), "fft plan/array shape mismatch");
        let (p0, p1) = match dir {
            FftDirection::Forward => (&self.fwd_rows, &self.fwd_cols),
            FftDirection::Inverse => (&self.inv_rows, &self.inv_cols),
        };
        let mut buf = vec![Complex64::new(0.0, 0.0); self.rows.max(self.cols)];
        let mut scratch = vec![
            Complex64::new(0.0, 0.0);
            p0.get_inplace_scratch_len().max(p1.get_inplace_scratch_len())
        ];
        for lane in x.lanes_mut(Axis(0)) {
            centered_lane(lane, p0.as_ref(), &mut buf[..self.rows], &mut scratch);
        }
        for lane in x.lanes_mut(Axis(1)) {
            centered_lane(lane, p1.as_ref(), &mut buf[..self.cols], &mut scratch);
        }
        let scale = 1.0 / ((self.rows * self.cols) as f64).sqrt();
        x.mapv_inplace(|v| v * scale);
    }
}

/// Unscaled centered transform of one lane: fftshift(fft(ifftshift(x))).
fn centered_lane(
    mut lane: ArrayViewMut1<Complex64>,
    plan: &dyn Fft<f64>,
    buf: &mut [Complex64],
    scratch: &mut [Complex64],
) {
    let n = buf.len();
    let half = n / 2;
    for i in 0..n {
        buf[i] = lane[(i + half) % n];
    }
    plan.process_with_scratch(buf, scratch);
    for (j, v) in buf.iter().enumerate() {
        lane[(j + half) % n] = *v;
    }
}

/// Cached centered unitary 1-D transform of length `n`.
#[derive(Clone)]
pub struct Fft1 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft1 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft1").field("n", &self.n).finish()
    }
}

impl Fft1 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            fwd: planner.plan_fft(n, FftDirection::Forward),
            inv: planner.plan_fft(n, FftDirection::Inverse),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    /// Transforms every lane of `x` along `axis`.
    pub fn transform_axis(&self, mut x: ArrayViewMut2<Complex64>, axis: usize, inverse: bool) {
        assert_eq!(x.len_of(Axis(axis)), self.n, "fft plan/array length mismatch");
        let plan = if inverse { &self.inv } else { &self.fwd };
        let mut buf = vec![Complex64::new(0.0, 0.0); self.n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        for lane in x.lanes_mut(Axis(axis)) {
            centered_lane(lane, plan.as_ref(), &mut buf, &mut scratch);
        }
        let scale = 1.0 / (self.n as f64).sqrt();
        x.mapv_inplace(|v| v * scale);
    }
}

/// Centered unitary 1-D transform along one axis of a 2-D array.
pub fn fft1_axis(x: &mut Array2<Complex64>, axis: usize, inverse: bool) {
    Fft1::new(x.len_of(Axis(axis))).transform_axis(x.view_mut(), axis, inverse);
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    // direct O(n^2) centered DFT, used as an independent reference
    fn naive_centered_dft(x: &Array2<Complex64>) -> Array2<Complex64> {
        let (m, n) = x.dim();
        let mut out = Array2::zeros((m, n));
        for ((k1, k2), o) in out.indexed_iter_mut() {
            let f1 = centered_index(k1, m) as f64;
            let f2 = centered_index(k2, n) as f64;
            let mut acc = Complex64::new(0.0, 0.0);
            for ((n1, n2), v) in x.indexed_iter() {
                let p1 = centered_index(n1, m) as f64;
                let p2 = centered_index(n2, n) as f64;
                let ph = -2.0 * PI * (f1 * p1 / m as f64 + f2 * p2 / n as f64);
                acc += v * Complex64::from_polar(1.0, ph);
            }
            *o = acc / ((m * n) as f64).sqrt();
        }
        out
    }

    fn test_array(m: usize, n: usize) -> Array2<Complex64> {
        Array2::from_shape_fn((m, n), |(i, j)| {
            Complex64::new((i as f64 * 0.7 + j as f64 * 1.3).sin(), (i * j) as f64 * 0.01 - 0.2)
        })
    }

    #[test]
    fn matches_naive_dft_even_and_odd() {
        for &(m, n) in &[(4usize, 6usize), (5, 3), (8, 7)] {
            let x = test_array(m, n);
            let mut y = x.clone();
            Fft2::new(m, n).forward(&mut y);
            let r = naive_centered_dft(&x);
            for (a, b) in y.iter().zip(r.iter()) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn round_trip_and_unitary() {
        let x = test_array(12, 10);
        let fft = Fft2::new(12, 10);
        let mut y = x.clone();
        fft.forward(&mut y);
        let ex: f64 = x.iter().map(|v| v.norm_sqr()).sum();
        let ey: f64 = y.iter().map(|v| v.norm_sqr()).sum();
        assert!((ex - ey).abs() < 1e-10 * ex);
        fft.inverse(&mut y);
        for (a, b) in y.iter().zip(x.iter()) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn centered_delta_is_flat() {
        let (m, n) = (8, 6);
        let mut x = Array2::zeros((m, n));
        x[[m / 2, n / 2]] = Complex64::new(1.0, 0.0);
        Fft2::new(m, n).forward(&mut x);
        let expect = 1.0 / ((m * n) as f64).sqrt();
        for v in x.iter() {
            assert!((v.re - expect).abs() < 1e-15 && v.im.abs() < 1e-15);
        }
    }

    #[test]
    fn axis_transform_matches_2d_on_single_row() {
        let x = test_array(1, 9);
        let mut a = x.clone();
        fft1_axis(&mut a, 1, false);
        let mut b = x.clone();
        Fft2::new(1, 9).forward(&mut b);
        for (u, v) in a.iter().zip(b.iter()) {
            assert!((u - v).norm() < 1e-14);
        }
    }
}

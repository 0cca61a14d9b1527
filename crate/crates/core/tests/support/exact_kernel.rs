//! K-space that a known GRAPPA kernel reproduces exactly, plus a
//! brute-force interpolation oracle written independently of the library's
//! fill routines.

#![allow(dead_code)]

use ndarray::{Array2, Array3};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smsrecon::grappa_lfe::{GrappaKernel, KernelAxis, KernelGeometry};
use smsrecon::sms_operators::SamplingPattern;

pub fn crand(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

/// Small random weights with a dominant same-coil tap on the nearest source,
/// which keeps the autoregressive calibration from decaying or blowing up.
pub fn random_kernel(geom: &KernelGeometry, coils: usize, seed: u64) -> GrappaKernel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = geom.unknowns(coils);
    let nearest = (-geom.first_src) as usize;
    let centre = geom.n_orth / 2;
    let weights = (1..geom.factor)
        .map(|_| {
            Array2::from_shape_fn((n, coils), |(u, c)| {
                let (cs, m, d) = (u / (geom.n_src * geom.n_orth), (u / geom.n_orth) % geom.n_src, u % geom.n_orth);
                let base = crand(&mut rng) * 0.04;
                if cs == c && m == nearest && d == centre {
                    base + Complex64::new(0.75, 0.2)
                } else {
                    base
                }
            })
        })
        .collect();
    GrappaKernel::new(geom.clone(), coils, weights).unwrap()
}

/// Value the kernel predicts at extended position `(i, j)`, sources read from
/// `k` with zeros outside the grid (or wrapped along the orthogonal axis when
/// `periodic_orth`).
pub fn oracle_predict(
    k: &Array3<Complex64>,
    kernel: &GrappaKernel,
    lattice_offset: usize,
    i: usize,
    j: usize,
    periodic_orth: bool,
) -> Vec<Complex64> {
    let g = kernel.geometry();
    let (coils, rows, cols) = k.dim();
    let (t, q, len, olen) = match g.axis {
        KernelAxis::Readout => (i as isize, j as isize, rows as isize, cols as isize),
        KernelAxis::PhaseEncode => (j as isize, i as isize, cols as isize, rows as isize),
    };
    let f = g.factor as isize;
    let r = (t - lattice_offset as isize).rem_euclid(f);
    assert!(r > 0, "target on the lattice");
    let w = &kernel.weights()[r as usize - 1];
    let mut out = vec![Complex64::new(0.0, 0.0); coils];
    for cs in 0..coils {
        for m in 0..g.n_src {
            for d in 0..g.n_orth {
                let u = (cs * g.n_src + m) * g.n_orth + d;
                let ts = t - r + f * (g.first_src + m as isize);
                let mut qs = q + g.orth_stride as isize * (d as isize - (g.n_orth / 2) as isize);
                if periodic_orth {
                    qs = qs.rem_euclid(olen);
                }
                if ts < 0 || ts >= len || qs < 0 || qs >= olen {
                    continue;
                }
                let v = match g.axis {
                    KernelAxis::Readout => k[[cs, ts as usize, qs as usize]],
                    KernelAxis::PhaseEncode => k[[cs, qs as usize, ts as usize]],
                };
                for (c, o) in out.iter_mut().enumerate() {
                    *o += w[[u, c]] * v;
                }
            }
        }
    }
    out
}

/// Fully sampled calibration obeying a factor-2 causal kernel at every
/// position along its axis: the first `2 n_src - 1` lines are random and
/// every later line is the kernel's prediction from the lines before it
/// (orthogonal axis periodic).
pub fn ar_calibration(kernel: &GrappaKernel, rows: usize, cols: usize, seed: u64) -> Array3<Complex64> {
    let g = kernel.geometry();
    assert_eq!(g.factor, 2);
    assert_eq!(g.first_src, 1 - g.n_src as isize);
    let coils = kernel.coils();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut k = Array3::from_shape_fn((coils, rows, cols), |_| crand(&mut rng));
    let warm = 2 * g.n_src - 1;
    let (len, olen) = match g.axis {
        KernelAxis::Readout => (rows, cols),
        KernelAxis::PhaseEncode => (cols, rows),
    };
    for t in warm..len {
        // lattice offset chosen so that t sits one step past the lattice
        let offset = (t + 1) % 2;
        for q in 0..olen {
            let (i, j) = match g.axis {
                KernelAxis::Readout => (t, q),
                KernelAxis::PhaseEncode => (q, t),
            };
            let v = oracle_predict(&k, kernel, offset, i, j, true);
            for (c, x) in v.into_iter().enumerate() {
                k[[c, i, j]] = x;
            }
        }
    }
    k
}

/// Ground-truth extended k-space and its sampled part: lattice points
/// random, missing readout-lattice lines predicted by the readout kernel,
/// then the remaining phase-encode lines by the phase-encode kernel, both
/// with zero padding at the grid edges.
pub fn exact_kspace(
    readout: &GrappaKernel,
    phase_encode: &GrappaKernel,
    pattern: &SamplingPattern,
    seed: u64,
) -> Array3<Complex64> {
    let coils = readout.coils();
    let (rows, cols) = pattern.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut k = Array3::zeros((coils, rows, cols));
    for i in 0..rows {
        for j in 0..cols {
            if pattern.on_readout_lattice(i) && pattern.on_pe_lattice(j) {
                for c in 0..coils {
                    k[[c, i, j]] = crand(&mut rng);
                }
            }
        }
    }
    for i in 0..rows {
        for j in 0..cols {
            if !pattern.on_readout_lattice(i) && pattern.on_pe_lattice(j) {
                let v = oracle_predict(&k, readout, pattern.ro_offset(), i, j, false);
                for (c, x) in v.into_iter().enumerate() {
                    k[[c, i, j]] = x;
                }
            }
        }
    }
    for i in 0..rows {
        for j in 0..cols {
            if !pattern.on_pe_lattice(j) {
                let v = oracle_predict(&k, phase_encode, pattern.pe_offset(), i, j, false);
                for (c, x) in v.into_iter().enumerate() {
                    k[[c, i, j]] = x;
                }
            }
        }
    }
    k
}

/// Identity weights for factor 1 (no offsets to fill).
pub fn trivial_kernel(axis: KernelAxis, coils: usize) -> GrappaKernel {
    GrappaKernel::new(KernelGeometry::centered(axis, 1, 4, 5, 1), coils, Vec::new()).unwrap()
}

pub fn max_rel<D: ndarray::Dimension>(a: &ndarray::Array<Complex64, D>, b: &ndarray::Array<Complex64, D>) -> f64 {
    let scale = b.iter().map(|v| v.norm()).fold(0.0, f64::max);
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / scale
}

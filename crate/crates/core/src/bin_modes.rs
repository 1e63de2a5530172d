//! Fourier modes of a single time bin and the double integrals that set the
//! second-order thermal and squeezing corrections for zero delay. Only the
//! `k = 0` mode is dynamical; these kernels show the corrections do not reach it.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use std::f64::consts::PI;

use crate::operator::ZERO;

/// Mode `k` of a bin in scaled time `u` in `[0, 1]`: `exp(2 pi i k u)`.
pub fn mode_function(k: i64, u: f64) -> C64 {
    C64::from_polar(1.0, 2.0 * PI * k as f64 * u)
}

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Midpoint rule for `∫∫ sgn(u' - u) f(u, u') du du'` over the unit square.
fn ordered_double_integral(n_quad: usize, f: impl Fn(f64, f64) -> C64) -> C64 {
    let h = 1.0 / n_quad as f64;
    let mut acc = ZERO;
    for i in 0..n_quad {
        let u = (i as f64 + 0.5) * h;
        for j in 0..n_quad {
            let up = (j as f64 + 0.5) * h;
            let s = sgn(up - u);
            if s != 0.0 {
                acc += f(u, up) * s;
            }
        }
    }
    acc * h * h
}

/// Kernel of the number-conserving term, `∫∫ sgn(u'-u) e^{2πi(k u - k' u')}`.
pub fn thermal_kernel(k: i64, kp: i64, n_quad: usize) -> C64 {
    ordered_double_integral(n_quad, |u, up| mode_function(k, u) * mode_function(kp, up).conj())
}

/// Kernel of the pair-creation term, `∫∫ sgn(u'-u) e^{-2πi(k u + k' u')}`.
pub fn squeeze_kernel(k: i64, kp: i64, n_quad: usize) -> C64 {
    ordered_double_integral(n_quad, |u, up| (mode_function(k, u) * mode_function(kp, up)).conj())
}

/// Closed form of [`thermal_kernel`] for the entries used in tests.
pub fn thermal_kernel_exact(k: i64, kp: i64) -> Option<C64> {
    match (k, kp) {
        (0, 0) => Some(ZERO),
        (k, 0) => Some(C64::new(0.0, 1.0 / (PI * k as f64))),
        (0, kp) => Some(C64::new(0.0, 1.0 / (PI * kp as f64))),
        (k, kp) if k == kp => Some(C64::new(0.0, -1.0 / (PI * k as f64))),
        _ => None,
    }
}

/// Kernel matrix over modes `-kmax..=kmax`, row/column `k + kmax`.
pub fn kernel_matrix(kmax: i64, n_quad: usize, kernel: fn(i64, i64, usize) -> C64) -> DMatrix<C64> {
    let n = (2 * kmax + 1) as usize;
    DMatrix::from_fn(n, n, |r, c| kernel(r as i64 - kmax, c as i64 - kmax, n_quad))
}

/// Size of the correction restricted to the `k = k' = 0` mode.
pub fn zero_mode_projection(kernel: &DMatrix<C64>) -> f64 {
    let c = kernel.nrows() / 2;
    kernel[(c, c)].norm()
}

/// `Σ S_kk' b_k b_k'` with commuting `b`: only the symmetric part survives.
pub fn squeeze_symmetric_part(kernel: &DMatrix<C64>) -> f64 {
    ((kernel + kernel.transpose()) * C64::new(0.5, 0.0)).norm()
}

//! Small numeric helpers shared across modules.

use core::f64::consts::PI;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// `log(sigmoid(x))`, accurate for large |x|.
#[inline]
pub fn log_sigmoid(x: f64) -> f64 {
    -softplus(-x)
}

/// `log(1 + exp(x))`.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + libm::log1p(libm::exp(-x))
    } else {
        libm::log1p(libm::exp(x))
    }
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + libm::log(xs.iter().map(|&x| libm::exp(x - m)).sum::<f64>())
}

/// Wraps an angle into `[-pi, pi)`.
#[inline]
pub fn wrap_angle(a: f64) -> f64 {
    // In-range angles pass through untouched so that repeated wrapping is exact.
    if (-PI..PI).contains(&a) {
        return a;
    }
    let mut w = libm::fmod(a + PI, 2.0 * PI);
    if w < 0.0 {
        w += 2.0 * PI;
    }
    w - PI
}

#[inline]
pub fn clamp(x: f64, lo: f64, hi: f64) -> f64 {
    if x < lo {
        lo
    } else if x > hi {
        hi
    } else {
        x
    }
}

#[inline]
pub fn dist3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    libm::sqrt(dx * dx + dy * dy + dz * dz)
}

#[inline]
pub fn dist2(ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    libm::hypot(ax - bx, ay - by)
}

/// Rotates `(x, y)` by `angle` about the vertical axis.
#[inline]
pub fn rot_z(angle: f64, x: f64, y: f64) -> (f64, f64) {
    let (s, c) = libm::sincos(angle);
    (c * x - s * y, s * x + c * y)
}

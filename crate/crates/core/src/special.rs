//! Elementary special functions.

use crate::jets::{Derivs, MAX_ORDER};

const SERIES_CUTOFF: f64 = 0.1;

// ln(x / sinh x) = Σ Aₖ x^{2k}, k = 1..7
const LN_X_OVER_SINH: [f64; 7] = [
    -1.0 / 6.0,
    1.0 / 180.0,
    -1.0 / 2835.0,
    1.0 / 37800.0,
    -1.0 / 467775.0,
    691.0 / 3831077250.0,
    -2.0 / 127702575.0,
];

/// `ln(x / sinh x)` and its first four derivatives for `x ≥ 0`. The value
/// at `x = 0` is the limit `0`.
pub fn ln_x_over_sinh(x: f64) -> Derivs {
    let mut d = [0.0; MAX_ORDER + 1];
    if x < SERIES_CUTOFF {
        for (k, a) in LN_X_OVER_SINH.iter().enumerate() {
            let p = 2 * (k as i32 + 1);
            let mut c = *a;
            for (j, dj) in d.iter_mut().enumerate() {
                if p < j as i32 {
                    break;
                }
                *dj += c * powi(x, p - j as i32);
                c *= (p - j as i32) as f64;
            }
        }
        return d;
    }
    let e = libm::exp(-2.0 * x);
    let one_minus_e = -libm::expm1(-2.0 * x);
    let coth = (1.0 + e) / one_minus_e;
    let csch2 = 4.0 * e / (one_minus_e * one_minus_e);
    let xi = 1.0 / x;
    d[0] = libm::log(x) - (x + libm::log(one_minus_e) - core::f64::consts::LN_2);
    d[1] = xi - coth;
    d[2] = -xi * xi + csch2;
    d[3] = 2.0 * xi * xi * xi - 2.0 * csch2 * coth;
    d[4] = -6.0 * xi * xi * xi * xi + 2.0 * csch2 * (2.0 * coth * coth + csch2);
    d
}

fn powi(x: f64, n: i32) -> f64 {
    (0..n).fold(1.0, |acc, _| acc * x)
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
}

/// Standard normal quantile for `p ∈ (0, 1)`: a rational starting value
/// refined by two Halley steps on `Φ(x) − p`.
pub fn normal_quantile(p: f64) -> f64 {
    if p.is_nan() || p <= 0.0 || p >= 1.0 {
        return if p == 0.0 {
            f64::NEG_INFINITY
        } else if p == 1.0 {
            f64::INFINITY
        } else {
            f64::NAN
        };
    }
    const A: [f64; 6] = [
        -3.969683028665376e1,
        2.209460984245205e2,
        -2.759285104469687e2,
        1.383577518672690e2,
        -3.066479806614716e1,
        2.506628277459239,
    ];
    const B: [f64; 5] =
        [-5.447609879822406e1, 1.615858368580409e2, -1.556989798598866e2, 6.680131188771972e1, -1.328068155288572e1];
    const C: [f64; 6] = [
        -7.784894002430293e-3,
        -3.223964580411365e-1,
        -2.400758277161838,
        -2.549732539343734,
        4.374664141464968,
        2.938163982698783,
    ];
    const D: [f64; 4] = [7.784695709041462e-3, 3.224671290700398e-1, 2.445134137142996, 3.754408661907416];
    const P_LOW: f64 = 0.02425;

    let tail = |q: f64| {
        let t = libm::sqrt(-2.0 * libm::log(q));
        (((((C[0] * t + C[1]) * t + C[2]) * t + C[3]) * t + C[4]) * t + C[5])
            / ((((D[0] * t + D[1]) * t + D[2]) * t + D[3]) * t + 1.0)
    };
    let mut x = if p < P_LOW {
        tail(p)
    } else if p > 1.0 - P_LOW {
        -tail(1.0 - p)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    let sqrt_2pi = libm::sqrt(2.0 * core::f64::consts::PI);
    for _ in 0..2 {
        // work on the smaller tail to keep Φ(x) − p accurate
        let err = if x > 0.0 { (1.0 - p) - normal_cdf(-x) } else { normal_cdf(x) - p };
        let u = err * sqrt_2pi * libm::exp(0.5 * x * x);
        x -= u / (1.0 + 0.5 * x * u);
    }
    x
}

//! Dense symmetric positive-definite factorization on row-major storage.

use alloc::vec;
use alloc::vec::Vec;

/// Lower Cholesky factor of `a + shift·I`, or `None` if a pivot is not
/// strictly positive.
pub fn cholesky(a: &[f64], n: usize, shift: f64) -> Option<Vec<f64>> {
    debug_assert_eq!(a.len(), n * n);
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let (ri, rj) = (&l[i * n..i * n + j], &l[j * n..j * n + j]);
            let s: f64 = ri.iter().zip(rj).map(|(p, q)| p * q).sum();
            if i == j {
                let d = a[i * n + i] + shift - s;
                if !(d > 0.0) || !d.is_finite() {
                    return None;
                }
                l[i * n + i] = libm::sqrt(d);
            } else {
                l[i * n + j] = (a[i * n + j] - s) / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Solves `L Lᵀ x = b` for a lower factor from [`cholesky`].
pub fn cholesky_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut y = b.to_vec();
    for i in 0..n {
        let s: f64 = l[i * n..i * n + i].iter().zip(&y[..i]).map(|(p, q)| p * q).sum();
        y[i] = (y[i] - s) / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = 0.0;
        for k in i + 1..n {
            s += l[k * n + i] * y[k];
        }
        y[i] = (y[i] - s) / l[i * n + i];
    }
    y
}

/// `xᵀ (a + shift·I) y`.
pub fn bilinear(a: &[f64], n: usize, shift: f64, x: &[f64], y: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..n {
        let row: f64 = a[i * n..(i + 1) * n].iter().zip(y).map(|(p, q)| p * q).sum();
        acc += x[i] * (row + shift * y[i]);
    }
    acc
}

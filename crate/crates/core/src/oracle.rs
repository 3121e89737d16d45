//! Brute-force reference machinery, independent of the jet-based code:
//! product quadrature on each manifold, finite differences, a
//! local-coordinate finite-difference Stein operator, and analytic moments.
//!
//! Integrals are accumulated by pairwise summation so they do not depend on
//! evaluation order beyond the node order.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::manifolds::{frame_with_pole, from_frame, ManifoldKind, POLAR_BAND};

/// Gauss-Legendre nodes and weights on `[−1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = libm::cos(PI * (i as f64 + 0.75) / (n as f64 + 0.5));
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        if d != 0.0 {
            dp = d;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// `(P_n(z), P_n′(z))`.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    (p1, n as f64 * (z * p1 - p0) / (z * z - 1.0))
}

/// Gauss-Hermite rule for `∫ g(x) e^{−x²/2} dx`.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    // physicists' rule for e^{−t²}, then x = √2 t
    let mut t = vec![0.0; n];
    let mut w = vec![0.0; n];
    let pim4 = libm::pow(PI, -0.25);
    let mut z = 0.0;
    for i in 0..n.div_ceil(2) {
        z = match i {
            0 => libm::sqrt((2 * n + 1) as f64) - 1.85575 * libm::pow((2 * n + 1) as f64, -1.0 / 6.0),
            1 => z - 1.14 * libm::pow(n as f64, 0.426) / z,
            2 => 1.86 * z - 0.86 * t[0],
            3 => 1.91 * z - 0.91 * t[1],
            _ => 2.0 * z - t[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            let (mut p1, mut p2) = (pim4, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = z * libm::sqrt(2.0 / (j + 1) as f64) * p2 - libm::sqrt(j as f64 / (j + 1) as f64) * p3;
            }
            pp = libm::sqrt(2.0 * n as f64) * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() <= 1e-15 * (1.0 + z.abs()) {
                break;
            }
        }
        t[i] = z;
        t[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    let s2 = core::f64::consts::SQRT_2;
    // ∫ g(x) e^{−x²/2} dx = √2 ∫ g(√2 t) e^{−t²} dt
    let mut x: Vec<f64> = t.iter().rev().map(|v| v * s2).collect();
    let wx: Vec<f64> = w.iter().rev().map(|v| v * s2).collect();
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, wx)
}

/// Gauss-Legendre nodes and weights on consecutive panels `[bᵢ, bᵢ₊₁]`.
pub fn panel_rule(breaks: &[f64], per_panel: usize) -> (Vec<f64>, Vec<f64>) {
    let (gx, gw) = gauss_legendre(per_panel);
    let mut x = Vec::new();
    let mut w = Vec::new();
    for p in breaks.windows(2) {
        let (mid, half) = (0.5 * (p[0] + p[1]), 0.5 * (p[1] - p[0]));
        for (a, b) in gx.iter().zip(&gw) {
            x.push(mid + half * a);
            w.push(half * b);
        }
    }
    (x, w)
}

fn linspace(a: f64, b: f64, panels: usize) -> Vec<f64> {
    (0..=panels).map(|i| a + (b - a) * i as f64 / panels as f64).collect()
}

/// Nodes with positive volume weights on a manifold.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureGrid {
    pub manifold: ManifoldKind,
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl QuadratureGrid {
    /// Tensor Gauss-Hermite on `ℝ^d` with Lebesgue weights `wᵢ e^{‖xᵢ‖²/2}`.
    pub fn euclidean_gauss_hermite(d: usize, order: usize) -> Self {
        let (x, w) = gauss_hermite(order);
        let mut nodes = vec![Vec::new()];
        let mut weights = vec![1.0];
        for _ in 0..d {
            let mut nn = Vec::new();
            let mut nw = Vec::new();
            for (p, pw) in nodes.iter().zip(&weights) {
                for (a, b) in x.iter().zip(&w) {
                    let mut q = p.clone();
                    q.push(*a);
                    nn.push(q);
                    nw.push(pw * b * libm::exp(0.5 * a * a));
                }
            }
            nodes = nn;
            weights = nw;
        }
        QuadratureGrid { manifold: ManifoldKind::Euclidean(d), nodes, weights }
    }

    /// Rule on `[center − radius, center + radius]` split at `center`, each
    /// half cut into `panels` Gauss-Legendre panels.
    pub fn euclidean_1d_split(center: f64, radius: f64, panels: usize, per_panel: usize) -> Self {
        let mut breaks = linspace(center - radius, center, panels);
        breaks.extend(linspace(center, center + radius, panels).into_iter().skip(1));
        let (x, w) = panel_rule(&breaks, per_panel);
        QuadratureGrid { manifold: ManifoldKind::Euclidean(1), nodes: x.into_iter().map(|v| vec![v]).collect(), weights: w }
    }

    /// Polar rule on the disc of given radius around `center` in `ℝ²`:
    /// Gauss-Legendre panels in the radius and a uniform (periodic) rule in
    /// the angle.
    pub fn euclidean_2d_polar(center: [f64; 2], radius: f64, panels: usize, per_panel: usize, n_angle: usize) -> Self {
        let (r, wr) = panel_rule(&linspace(0.0, radius, panels), per_panel);
        let dth = 2.0 * PI / n_angle as f64;
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for (ri, wi) in r.iter().zip(&wr) {
            for k in 0..n_angle {
                let (s, c) = libm::sincos((k as f64 + 0.5) * dth);
                nodes.push(vec![center[0] + ri * c, center[1] + ri * s]);
                weights.push(wi * ri * dth);
            }
        }
        QuadratureGrid { manifold: ManifoldKind::Euclidean(2), nodes, weights }
    }

    /// `n_azimuth` uniform azimuths times `n_polar` Gauss-Legendre nodes in
    /// `cos q₂`. Total weight `4π`.
    pub fn sphere(n_azimuth: usize, n_polar: usize) -> Self {
        let (z, wz) = gauss_legendre(n_polar);
        let dphi = 2.0 * PI / n_azimuth as f64;
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for (zi, wi) in z.iter().zip(&wz) {
            let r = libm::sqrt(1.0 - zi * zi);
            for k in 0..n_azimuth {
                let (s, c) = libm::sincos((k as f64 + 0.5) * dphi);
                nodes.push(vec![r * c, r * s, *zi]);
                weights.push(wi * dphi);
            }
        }
        QuadratureGrid { manifold: ManifoldKind::Sphere2, nodes, weights }
    }

    /// Sphere rule whose own pole sits at `pole`: Gauss-Legendre panels in
    /// the polar angle `θ ∈ [0, π]` (weight `sin θ`) cut at `theta_breaks`,
    /// uniform azimuths. Concentrating panels near `θ = 0` resolves
    /// integrands that peak or kink at `pole`. The azimuth phase is shifted
    /// until no node falls in the chart's polar band.
    pub fn sphere_around(pole: [f64; 3], theta_breaks: &[f64], per_panel: usize, n_azimuth: usize) -> Self {
        let frame = frame_with_pole(pole);
        let (th, wth) = panel_rule(theta_breaks, per_panel);
        let dphi = 2.0 * PI / n_azimuth as f64;
        for attempt in 0..16 {
            let phase = 0.5 + attempt as f64 / 17.0;
            let mut nodes = Vec::new();
            let mut weights = Vec::new();
            for (t, wt) in th.iter().zip(&wth) {
                let (st, ct) = libm::sincos(*t);
                for k in 0..n_azimuth {
                    let (s, c) = libm::sincos((k as f64 + phase) * dphi);
                    nodes.push(from_frame(&frame, st * c, st * s, ct).to_vec());
                    weights.push(wt * st * dphi);
                }
            }
            if nodes.iter().all(|p| p[2].abs() < 1.0 - POLAR_BAND) {
                return QuadratureGrid { manifold: ManifoldKind::Sphere2, nodes, weights };
            }
        }
        unreachable!("a finite grid cannot hit the polar band for 16 distinct phases")
    }

    /// Product of a sphere rule with Gauss-Legendre panels in `κ`.
    pub fn sphere_cross_rplus(sphere: &QuadratureGrid, kappa_breaks: &[f64], per_panel: usize) -> Self {
        let (k, wk) = panel_rule(kappa_breaks, per_panel);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for (p, wp) in sphere.nodes.iter().zip(&sphere.weights) {
            for (ki, wi) in k.iter().zip(&wk) {
                nodes.push(vec![p[0], p[1], p[2], *ki]);
                weights.push(wp * wi);
            }
        }
        QuadratureGrid { manifold: ManifoldKind::Sphere2CrossRPlus, nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Sum with `O(log n)` error growth and a fixed association order.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

/// `Σ wᵢ g(xᵢ)`.
pub fn integrate(grid: &QuadratureGrid, mut g: impl FnMut(&[f64]) -> Result<f64>) -> Result<f64> {
    let mut terms = Vec::with_capacity(grid.len());
    for (i, (x, w)) in grid.nodes.iter().zip(&grid.weights).enumerate() {
        let v = g(x)?;
        if !v.is_finite() {
            return Err(Error::NonFiniteIntegrand { node: i });
        }
        terms.push(w * v);
    }
    Ok(pairwise_sum(&terms))
}

/// Self-normalized expectation `∫ g π / ∫ π` of several integrands at once.
pub fn expectations(
    grid: &QuadratureGrid,
    log_pi: impl Fn(&[f64]) -> Result<f64>,
    integrands: &[&dyn Fn(&[f64]) -> Result<f64>],
) -> Result<Vec<f64>> {
    let lp = grid.nodes.iter().map(|x| log_pi(x)).collect::<Result<Vec<_>>>()?;
    let top = lp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let dens: Vec<f64> = lp.iter().zip(&grid.weights).map(|(l, w)| w * libm::exp(l - top)).collect();
    let z = pairwise_sum(&dens);
    integrands
        .iter()
        .map(|g| {
            let mut terms = Vec::with_capacity(grid.len());
            for (i, (x, d)) in grid.nodes.iter().zip(&dens).enumerate() {
                let v = g(x)?;
                if !v.is_finite() {
                    return Err(Error::NonFiniteIntegrand { node: i });
                }
                terms.push(d * v);
            }
            Ok(pairwise_sum(&terms) / z)
        })
        .collect()
}

/// Result of a Stein identity check at one point `y₀`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SteinIdentity {
    /// `∫ k_π(x, y₀) dP(x)`.
    pub integral: f64,
    /// `k_π(y₀, y₀)`.
    pub diagonal: f64,
    /// `|integral| / diagonal`.
    pub ratio: f64,
}

/// Checks `∫ k_π(·, y₀) dP = 0` on a grid, with the target normalized by the
/// same grid.
pub fn stein_identity_check(
    grid: &QuadratureGrid,
    log_pi: impl Fn(&[f64]) -> Result<f64>,
    stein_kernel: impl Fn(&[f64], &[f64]) -> Result<f64>,
    y0: &[f64],
) -> Result<SteinIdentity> {
    let g = |x: &[f64]| stein_kernel(x, y0);
    let integral = expectations(grid, log_pi, &[&g])?[0];
    let diagonal = stein_kernel(y0, y0)?;
    Ok(SteinIdentity { integral, diagonal, ratio: integral.abs() / diagonal })
}

/// `E[μᵀx]` under `vMF(κ)` on `𝕊²`: `coth κ − 1/κ`.
pub fn vmf_mean_resultant(kappa: f64) -> f64 {
    if kappa < 1e-4 {
        return kappa / 3.0 - kappa * kappa * kappa / 45.0;
    }
    1.0 / libm::tanh(kappa) - 1.0 / kappa
}

const FD1: [(i32, f64); 4] = [(-2, 1.0 / 12.0), (-1, -8.0 / 12.0), (1, 8.0 / 12.0), (2, -1.0 / 12.0)];
const FD2: [(i32, f64); 5] = [(-2, -1.0 / 12.0), (-1, 16.0 / 12.0), (0, -30.0 / 12.0), (1, 16.0 / 12.0), (2, -1.0 / 12.0)];

/// Central finite-difference partial derivative of `g` at `at` along the
/// multi-index `indices` (e.g. `[0]`, `[0, 0]`, `[0, 1]`, `[1, 1, 2]`).
/// Each coordinate may appear at most twice; stencils are the five-point
/// first- and second-derivative rules, combined as a tensor product.
pub fn finite_difference(g: impl Fn(&[f64]) -> Result<f64>, at: &[f64], indices: &[usize], step: f64) -> Result<f64> {
    if !(step > 0.0) {
        return Err(Error::InvalidArgument("step must be positive"));
    }
    let mut axes: Vec<(usize, usize)> = Vec::new();
    for &i in indices {
        if i >= at.len() {
            return Err(Error::Dimension { expected: at.len(), got: i + 1 });
        }
        match axes.iter_mut().find(|(a, _)| *a == i) {
            Some((_, m)) => *m += 1,
            None => axes.push((i, 1)),
        }
    }
    if axes.iter().any(|(_, m)| *m > 2) {
        return Err(Error::InvalidArgument("at most second derivatives per coordinate"));
    }
    let mut x = at.to_vec();
    fd_rec(&g, &mut x, at, &axes, step)
}

fn fd_rec(g: &impl Fn(&[f64]) -> Result<f64>, x: &mut Vec<f64>, at: &[f64], axes: &[(usize, usize)], h: f64) -> Result<f64> {
    let Some(&(axis, mult)) = axes.first() else {
        return g(x);
    };
    let stencil: &[(i32, f64)] = if mult == 1 { &FD1 } else { &FD2 };
    let mut acc = 0.0;
    for &(off, c) in stencil {
        x[axis] = at[axis] + off as f64 * h;
        acc += c * fd_rec(g, x, at, &axes[1..], h)?;
    }
    x[axis] = at[axis];
    Ok(acc / libm::pow(h, mult as f64))
}

const FD9_1: [f64; 4] = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
const FD9_2: [f64; 5] = [-205.0 / 72.0, 8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0];

/// Nine-point first and second derivative of a one-dimensional function.
fn fd9(f: impl Fn(f64) -> Result<f64>, t: f64, h: f64) -> Result<(f64, f64)> {
    let mut d1 = 0.0;
    let mut d2 = FD9_2[0] * f(t)?;
    for k in 1..=4 {
        let (p, m) = (f(t + k as f64 * h)?, f(t - k as f64 * h)?);
        d1 += FD9_1[k - 1] * (p - m);
        d2 += FD9_2[k] * (p + m);
    }
    Ok((d1 / h, d2 / (h * h)))
}

/// Local coordinates `q` of an ambient point: the identity on `ℝ^d`, the
/// polar chart `(atan2(x₂, x₁), acos x₃)` on `𝕊²`, plus `κ` on `𝕊² × ℝ₊`.
pub fn to_local(manifold: ManifoldKind, x: &[f64]) -> Vec<f64> {
    match manifold {
        ManifoldKind::Euclidean(_) => x.to_vec(),
        _ => {
            let mut q = vec![libm::atan2(x[1], x[0]), libm::acos(x[2].clamp(-1.0, 1.0))];
            if manifold == ManifoldKind::Sphere2CrossRPlus {
                q.push(x[3]);
            }
            q
        }
    }
}

pub fn from_local(manifold: ManifoldKind, q: &[f64]) -> Vec<f64> {
    match manifold {
        ManifoldKind::Euclidean(_) => q.to_vec(),
        _ => {
            let (s1, c1) = libm::sincos(q[0]);
            let (s2, c2) = libm::sincos(q[1]);
            let mut x = vec![c1 * s2, s1 * s2, c2];
            if manifold == ManifoldKind::Sphere2CrossRPlus {
                x.push(q[2]);
            }
            x
        }
    }
}

/// The Stein operator `∇log π·∇φ + Δφ` in local coordinates, with every
/// derivative taken by nine-point finite differences of the real-valued
/// `log π` and `φ` (functions of ambient coordinates).
pub fn fd_stein_operator(
    manifold: ManifoldKind,
    log_pi: impl Fn(&[f64]) -> Result<f64>,
    phi: impl Fn(&[f64]) -> Result<f64>,
    at: &[f64],
    step: f64,
) -> Result<f64> {
    let q0 = to_local(manifold, at);
    let partial = |f: &dyn Fn(&[f64]) -> Result<f64>, i: usize| {
        fd9(
            |t| {
                let mut q = q0.clone();
                q[i] = t;
                f(&from_local(manifold, &q))
            },
            q0[i],
            step,
        )
    };
    match manifold {
        ManifoldKind::Euclidean(d) => {
            let mut acc = 0.0;
            for i in 0..d {
                let (l1, _) = partial(&log_pi, i)?;
                let (p1, p2) = partial(&phi, i)?;
                acc += l1 * p1 + p2;
            }
            Ok(acc)
        }
        _ => {
            let q2 = q0[1];
            let (sin2, cos2) = libm::sincos(q2);
            let (l_az, _) = partial(&log_pi, 0)?;
            let (p_az, pp_az) = partial(&phi, 0)?;
            let (l_po, _) = partial(&log_pi, 1)?;
            let (p_po, pp_po) = partial(&phi, 1)?;
            let mut acc = cos2 / sin2 * p_po + (l_az * p_az + pp_az) / (sin2 * sin2) + l_po * p_po + pp_po;
            if manifold == ManifoldKind::Sphere2CrossRPlus {
                let (l_k, _) = partial(&log_pi, 2)?;
                let (p_k, pp_k) = partial(&phi, 2)?;
                acc += l_k * p_k + pp_k;
            }
            Ok(acc)
        }
    }
}

/// Stein kernel by nested finite differences: the operator in `y` with step
/// `inner_step`, then the operator in `x` with step `outer_step`.
pub fn fd_stein_kernel(
    manifold: ManifoldKind,
    log_pi: impl Fn(&[f64]) -> Result<f64> + Copy,
    kernel: impl Fn(&[f64], &[f64]) -> Result<f64> + Copy,
    x: &[f64],
    y: &[f64],
    inner_step: f64,
    outer_step: f64,
) -> Result<f64> {
    let inner = |xp: &[f64]| fd_stein_operator(manifold, log_pi, |yp: &[f64]| kernel(xp, yp), y, inner_step);
    fd_stein_operator(manifold, log_pi, inner, x, outer_step)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_and_hermite_rules() {
        let (x, w) = gauss_legendre(7);
        let s: f64 = x.iter().zip(&w).map(|(a, b)| b * a.powi(6)).sum();
        assert!((s - 2.0 / 7.0).abs() < 1e-14);
        let (x, w) = gauss_hermite(20);
        let z: f64 = w.iter().sum();
        assert!((z - libm::sqrt(2.0 * PI)).abs() < 1e-12);
        let m4: f64 = x.iter().zip(&w).map(|(a, b)| b * a.powi(4)).sum::<f64>() / z;
        assert!((m4 - 3.0).abs() < 1e-12);
        let (x, w) = gauss_hermite(81);
        let z: f64 = w.iter().sum();
        assert!((z - libm::sqrt(2.0 * PI)).abs() < 1e-12);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn sphere_grid_examples() {
        let g = QuadratureGrid::sphere(80, 40);
        assert!((integrate(&g, |_| Ok(1.0)).unwrap() - 4.0 * PI).abs() < 1e-10);
        let z2 = integrate(&g, |x| Ok(x[2] * x[2])).unwrap() / (4.0 * PI);
        assert!((z2 - 1.0 / 3.0).abs() < 1e-12);
        let e = expectations(&g, |x| Ok(x[0]), &[&|x: &[f64]| Ok(x[0])]).unwrap()[0];
        assert!((e - vmf_mean_resultant(1.0)).abs() < 1e-12);
        let r = QuadratureGrid::sphere_around([0.0, 0.6, 0.8], &[0.0, 0.5, PI], 20, 40);
        assert!((integrate(&r, |_| Ok(1.0)).unwrap() - 4.0 * PI).abs() < 1e-10);
        let e = expectations(&r, |x| Ok(3.0 * x[1]), &[&|x: &[f64]| Ok(x[1])]).unwrap()[0];
        assert!((e - vmf_mean_resultant(3.0)).abs() < 1e-12);
    }

    #[test]
    fn finite_difference_examples() {
        let d = finite_difference(|x| Ok(x[0] * x[0]), &[3.0], &[0], 1e-3).unwrap();
        assert!((d - 6.0).abs() < 1e-10);
        let d = finite_difference(|x| Ok(x[0] * x[1]), &[0.4, -2.0], &[0, 1], 1e-3).unwrap();
        assert!((d - 1.0).abs() < 1e-8);
        assert!(finite_difference(|x| Ok(x[0]), &[0.0], &[0, 0, 0], 1e-3).is_err());
    }

    #[test]
    fn fd_operator_on_sphere_harmonic() {
        // Δ x₃ = −2 x₃ on the unit sphere
        let at = [0.36, 0.48, 0.8];
        let v = fd_stein_operator(ManifoldKind::Sphere2, |_| Ok(0.0), |x| Ok(x[2]), &at, 1e-3).unwrap();
        assert!((v + 1.6).abs() < 1e-7, "{v}");
    }

    #[test]
    fn nonfinite_integrand_reports_node() {
        let g = QuadratureGrid::sphere(4, 2);
        let err = integrate(&g, |x| Ok(if x[2] > 0.0 { f64::NAN } else { 1.0 })).unwrap_err();
        assert!(matches!(err, Error::NonFiniteIntegrand { .. }));
    }
}

//! Base reproducing kernels, generic over [`Scalar`] so the Stein kernel can
//! differentiate through them.
//!
//! * Matérn with half-integer smoothness on ambient coordinates.
//! * The Sobolev kernel of `H^α(𝕊^m)`, a terminating `₃F₂` plus a distance term.
//! * The arctan-RBF kernel on `𝕊² × ℝ₊`, whose `(arctan κ)²` factor forces
//!   `∂k/∂κ = 0` at `κ = 0`.
//!
//! Radial kernels are written as functions of `u = ‖x − y‖²` with all
//! `u`-derivatives supplied in closed form, so no jet ever passes through a
//! square root at coincident points.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::jets::{dot, squared_distance, Derivs, Scalar, MAX_ORDER};

/// Below this value of `‖x − y‖²` radial kernels switch to a series branch.
pub const COINCIDENT_U: f64 = 1e-20;

/// A positive half-integer `n + ½`, stored exactly as its double `2n + 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HalfInteger {
    twice: u32,
}

impl HalfInteger {
    /// `n + ½`.
    pub const fn plus_half(n: u32) -> Self {
        HalfInteger { twice: 2 * n + 1 }
    }

    /// Parses a float that must be exactly a positive half-integer.
    pub fn from_f64(alpha: f64) -> Result<Self> {
        let t = alpha * 2.0;
        if !(t.is_finite() && t > 0.0 && t <= 1e6 && t == libm::round(t) && (t as u32) % 2 == 1) {
            return Err(Error::InvalidAlpha { alpha, reason: "must be a positive half-integer" });
        }
        Ok(HalfInteger { twice: t as u32 })
    }

    pub fn value(self) -> f64 {
        self.twice as f64 / 2.0
    }

    /// The integer part `n` of `n + ½`.
    pub fn floor(self) -> u32 {
        self.twice / 2
    }
}

impl fmt::Display for HalfInteger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/2", self.twice)
    }
}

/// User-facing kernel description; see [`Kernel`] for the evaluable form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelSpec {
    Matern { lambda: f64, ell: f64, alpha: HalfInteger },
    SobolevSphere { alpha: HalfInteger, m: u32 },
    PaleoArctanRbf,
}

impl KernelSpec {
    pub fn build(&self) -> Result<Kernel> {
        Ok(match *self {
            KernelSpec::Matern { lambda, ell, alpha } => Kernel::Matern(MaternKernel::new(lambda, ell, alpha)?),
            KernelSpec::SobolevSphere { alpha, m } => Kernel::SobolevSphere(SobolevSphereKernel::new(alpha, m)?),
            KernelSpec::PaleoArctanRbf => Kernel::PaleoArctanRbf,
        })
    }
}

/// A kernel with its series coefficients precomputed.
#[derive(Clone, Debug, PartialEq)]
pub enum Kernel {
    Matern(MaternKernel),
    SobolevSphere(SobolevSphereKernel),
    PaleoArctanRbf,
}

impl Kernel {
    pub fn spec(&self) -> KernelSpec {
        match self {
            Kernel::Matern(k) => KernelSpec::Matern { lambda: k.lambda, ell: k.ell, alpha: k.alpha },
            Kernel::SobolevSphere(k) => KernelSpec::SobolevSphere { alpha: k.alpha, m: k.m },
            Kernel::PaleoArctanRbf => KernelSpec::PaleoArctanRbf,
        }
    }

    pub fn eval<T: Scalar>(&self, x: &[T], y: &[T]) -> Result<T> {
        match self {
            Kernel::Matern(k) => matern_eval(k, x, y),
            Kernel::SobolevSphere(k) => sobolev_sphere_eval(k, x, y),
            Kernel::PaleoArctanRbf => paleo_kernel_eval(x, y),
        }
    }
}

/// `Σ cᵢ r^(lowest + i)`.
#[derive(Clone, Debug, PartialEq)]
struct Laurent {
    lowest: i32,
    coeffs: Vec<f64>,
}

impl Laurent {
    fn eval(&self, r: f64) -> f64 {
        let mut acc = 0.0;
        for c in self.coeffs.iter().rev() {
            acc = acc * r + c;
        }
        acc * libm::pow(r, self.lowest as f64)
    }

    fn coeff(&self, power: i32) -> f64 {
        let i = power - self.lowest;
        if i < 0 {
            return 0.0;
        }
        self.coeffs.get(i as usize).copied().unwrap_or(0.0)
    }

    /// `(p′ − a·p) / r`, optionally dropping the constant term of `p′ − a·p`.
    fn step(&self, a: f64, drop_constant: bool) -> Laurent {
        let lo = self.lowest - 1;
        let hi = self.lowest + self.coeffs.len() as i32 - 1;
        let mut coeffs = Vec::with_capacity((hi - lo + 1) as usize);
        for p in lo..=hi {
            let mut c = (p + 1) as f64 * self.coeff(p + 1) - a * self.coeff(p);
            if drop_constant && p == 0 {
                c = 0.0;
            }
            coeffs.push(c);
        }
        Laurent { lowest: lo - 1, coeffs }
    }
}

/// Matérn kernel with precomputed radial derivative polynomials.
///
/// With `k = e^{−ar} p₀(r)` and `hⱼ₊₁ = hⱼ′ / r`, the `u = r²` derivatives
/// are `g⁽ʲ⁾(u) = hⱼ(r) / 2ʲ` where `hⱼ = e^{−ar} pⱼ(r)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MaternKernel {
    lambda: f64,
    ell: f64,
    alpha: HalfInteger,
    rate: f64,
    radial: Vec<Laurent>,
    series: [f64; 3],
}

impl MaternKernel {
    pub fn new(lambda: f64, ell: f64, alpha: HalfInteger) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0 && ell.is_finite() && ell > 0.0) {
            return Err(Error::InvalidArgument("Matern lambda and ell must be positive"));
        }
        let n = alpha.floor();
        if n < 1 {
            return Err(Error::InvalidAlpha { alpha: alpha.value(), reason: "Matern requires alpha >= 3/2" });
        }
        let a = alpha.value();
        let rate = libm::sqrt(2.0 * a) / ell;
        let b = libm::sqrt(8.0 * a) / ell;
        let n_us = n as usize;

        // p₀(r) = λ² n!/(2n)! Σᵢ (n+i)!/(i!(n−i)!) (b r)^{n−i}
        let norm = lambda * lambda * factorial(n_us) / factorial(2 * n_us);
        let mut p0 = vec![0.0; n_us + 1];
        for i in 0..=n_us {
            let c = factorial(n_us + i) / (factorial(i) * factorial(n_us - i));
            let power = n_us - i;
            p0[power] = norm * c * libm::pow(b, power as f64);
        }
        let mut radial = vec![Laurent { lowest: 0, coeffs: p0 }];
        for j in 0..MAX_ORDER {
            let next = radial[j].step(rate, (j as u32) < n);
            radial.push(next);
        }

        let c0 = radial[0].coeff(0);
        let c1 = radial[1].coeff(0) / 2.0;
        let c2 = if n >= 2 { radial[2].coeff(0) / 8.0 } else { 0.0 };
        Ok(MaternKernel { lambda, ell, alpha, rate, radial, series: [c0, c1, c2] })
    }

    pub fn alpha(&self) -> HalfInteger {
        self.alpha
    }

    /// The radial profile as a function of `r = ‖x − y‖`.
    pub fn profile(&self, r: f64) -> f64 {
        libm::exp(-self.rate * r) * self.radial[0].eval(r)
    }

    fn u_derivs(&self, u: f64) -> Derivs {
        if u < COINCIDENT_U {
            let [c0, c1, c2] = self.series;
            return [c0 + u * (c1 + u * c2), c1 + 2.0 * c2 * u, 2.0 * c2, 0.0, 0.0];
        }
        let r = libm::sqrt(u);
        let e = libm::exp(-self.rate * r);
        let mut d = [0.0; MAX_ORDER + 1];
        let mut scale = 1.0;
        for (j, dj) in d.iter_mut().enumerate() {
            *dj = e * self.radial[j].eval(r) * scale;
            scale *= 0.5;
        }
        d
    }
}

pub fn matern_eval<T: Scalar>(kernel: &MaternKernel, x: &[T], y: &[T]) -> Result<T> {
    if x.len() != y.len() {
        return Err(Error::Dimension { expected: x.len(), got: y.len() });
    }
    let u = squared_distance(x, y);
    Ok(u.map_derivs(&kernel.u_derivs(u.real())))
}

/// Sobolev kernel on `𝕊^m` for half-integer `α ≥ 7/2`.
#[derive(Clone, Debug, PartialEq)]
pub struct SobolevSphereKernel {
    alpha: HalfInteger,
    m: u32,
    hyp_coeffs: Vec<f64>,
    c1: f64,
    c2: f64,
}

impl SobolevSphereKernel {
    pub fn new(alpha: HalfInteger, m: u32) -> Result<Self> {
        if alpha.floor() < 3 {
            return Err(Error::InvalidAlpha {
                alpha: alpha.value(),
                reason: "Sobolev sphere kernel requires alpha >= 7/2",
            });
        }
        if m < 2 {
            return Err(Error::InvalidArgument("sphere dimension m must be at least 2"));
        }
        let (c1, c2) = sobolev_constants(alpha, m)?;
        Ok(SobolevSphereKernel { alpha, m, hyp_coeffs: hypergeometric_coefficients(alpha, m), c1, c2 })
    }

    pub fn alpha(&self) -> HalfInteger {
        self.alpha
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    /// Number of nonzero terms in the terminating `₃F₂`.
    pub fn series_terms(&self) -> usize {
        self.hyp_coeffs.len()
    }

    pub fn constants(&self) -> (f64, f64) {
        (self.c1, self.c2)
    }

    fn distance_derivs(&self, u: f64) -> Derivs {
        let p = self.alpha.value() - 1.0;
        if u < COINCIDENT_U {
            return [0.0; MAX_ORDER + 1];
        }
        let mut d = [0.0; MAX_ORDER + 1];
        let mut c = 1.0;
        for (j, dj) in d.iter_mut().enumerate() {
            *dj = c * libm::pow(u, p - j as f64);
            c *= p - j as f64;
        }
        d
    }
}

/// Coefficients `aₖ` of `₃F₂[3/2−α, 1−α, 3/2−α; 2−α, 3−m/2−2α; z] = Σ aₖ zᵏ`.
fn hypergeometric_coefficients(alpha: HalfInteger, m: u32) -> Vec<f64> {
    let a = alpha.value();
    let upper = [1.5 - a, 1.0 - a, 1.5 - a];
    let lower = [2.0 - a, 3.0 - m as f64 / 2.0 - 2.0 * a];
    let mut coeffs = vec![1.0];
    let mut term = 1.0;
    for k in 0.. {
        let kf = k as f64;
        if upper[0] + kf == 0.0 {
            break;
        }
        term *= (upper[0] + kf) * (upper[1] + kf) * (upper[2] + kf);
        term /= (lower[0] + kf) * (lower[1] + kf) * (kf + 1.0);
        coeffs.push(term);
    }
    coeffs
}

/// The constants `(C⁽¹⁾, C⁽²⁾)` of the Sobolev sphere kernel, for any
/// half-integer `α ≥ 3/2`.
pub fn sobolev_constants(alpha: HalfInteger, m: u32) -> Result<(f64, f64)> {
    let n = alpha.floor();
    if n < 1 || m < 1 {
        return Err(Error::InvalidAlpha { alpha: alpha.value(), reason: "constants need alpha >= 3/2" });
    }
    let half_m = m as f64 / 2.0;
    let k = 2 * n - 1; // 2α − 2
    let c1 = libm::pow(2.0, k as f64) / k as f64 * pochhammer(half_m, k) / pochhammer(m as f64, k);
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let gamma_n = factorial(n as usize - 1);
    let c2 = sign * libm::pow(2.0, 1.0 - alpha.value() * 2.0) * libm::tgamma((m as f64 + 1.0) / 2.0) * gamma_n * gamma_n
        / (libm::sqrt(core::f64::consts::PI) * libm::tgamma(half_m) * pochhammer(0.5, n) * pochhammer(half_m, n));
    Ok((c1, c2))
}

pub fn sobolev_sphere_eval<T: Scalar>(kernel: &SobolevSphereKernel, x: &[T], y: &[T]) -> Result<T> {
    let dim = kernel.m as usize + 1;
    if x.len() != dim || y.len() != dim {
        return Err(Error::Dimension { expected: dim, got: if x.len() != dim { x.len() } else { y.len() } });
    }
    let z = dot(x, y) * -0.5 + 0.5;
    let mut hyp = T::zero();
    for c in kernel.hyp_coeffs.iter().rev() {
        hyp = hyp * z + *c;
    }
    let u = squared_distance(x, y);
    let dist = u.map_derivs(&kernel.distance_derivs(u.real()));
    Ok(hyp * kernel.c1 + dist * kernel.c2)
}

pub fn paleo_kernel_eval<T: Scalar>(x: &[T], y: &[T]) -> Result<T> {
    if x.len() != 4 || y.len() != 4 {
        return Err(Error::Dimension { expected: 4, got: if x.len() != 4 { x.len() } else { y.len() } });
    }
    let tx = x[3].atan().square();
    let ty = y[3].atan().square();
    Ok(tx * ty * (squared_distance(x, y) * -0.5).exp())
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

fn pochhammer(a: f64, n: u32) -> f64 {
    (0..n).fold(1.0, |acc, i| acc * (a + i as f64))
}

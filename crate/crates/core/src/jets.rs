//! Second-order forward-mode automatic differentiation.
//!
//! [`Jet2<T, S>`] carries a value together with its gradient and Hessian with
//! respect to `S` seeded variables. The component type `T` is itself any
//! [`Scalar`], so `Jet2<Jet2<f64, S>, S>` differentiates twice in one set of
//! variables and twice in another: this is how every mixed derivative
//! `∂²_x ∂²_y k(x, y)` of a kernel is obtained in a single evaluation.
//!
//! All elementary functions are routed through [`Scalar::map_derivs`]: the
//! caller supplies the derivatives `f, f', f'', ...` of a univariate function
//! at the innermost real value, and each nesting level peels off the orders
//! it needs. A nested jet of depth two consumes derivatives up to order four.

use core::fmt::Debug;
use core::ops::{Add, Div, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Highest derivative order any supported nesting consumes.
pub const MAX_ORDER: usize = 4;

/// Derivatives `[f(v), f'(v), ..., f''''(v)]` of a univariate function.
pub type Derivs = [f64; MAX_ORDER + 1];

/// A real number, or a jet of real numbers, that kernels and log-densities
/// can be evaluated on.
pub trait Scalar:
    Copy
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    /// Total derivative order carried by this type (0 for `f64`).
    const ORDER: usize;

    fn constant(c: f64) -> Self;

    /// The innermost real value.
    fn real(&self) -> f64;

    /// Applies a univariate function given its derivatives at `self.real()`.
    /// `d` must hold at least `ORDER + 1` entries.
    fn map_derivs(&self, d: &[f64]) -> Self;

    #[inline]
    fn zero() -> Self {
        Self::constant(0.0)
    }

    #[inline]
    fn square(self) -> Self {
        self * self
    }

    fn recip(self) -> Self {
        let r = 1.0 / self.real();
        let r2 = r * r;
        self.map_derivs(&[r, -r2, 2.0 * r2 * r, -6.0 * r2 * r2, 24.0 * r2 * r2 * r])
    }

    fn exp(self) -> Self {
        let e = libm::exp(self.real());
        self.map_derivs(&[e; MAX_ORDER + 1])
    }

    fn ln(self) -> Self {
        let v = self.real();
        let r = 1.0 / v;
        self.map_derivs(&[libm::log(v), r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r])
    }

    fn sqrt(self) -> Self {
        let v = self.real();
        let s = libm::sqrt(v);
        self.map_derivs(&[
            s,
            0.5 / s,
            -0.25 / (s * v),
            0.375 / (s * v * v),
            -0.9375 / (s * v * v * v),
        ])
    }

    /// `self^p` for real `p`; the base must be positive for finite output.
    fn powf(self, p: f64) -> Self {
        let v = self.real();
        let mut d = [0.0; MAX_ORDER + 1];
        let mut falling = 1.0;
        for (k, dk) in d.iter_mut().enumerate() {
            *dk = falling * libm::pow(v, p - k as f64);
            falling *= p - k as f64;
        }
        self.map_derivs(&d)
    }

    /// Integer power by repeated squaring; exact at a zero base.
    fn powi(self, n: i32) -> Self {
        let mut base = if n < 0 { self.recip() } else { self };
        let mut e = n.unsigned_abs();
        let mut acc = Self::constant(1.0);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base;
            }
            e >>= 1;
            if e > 0 {
                base = base * base;
            }
        }
        acc
    }

    fn sin(self) -> Self {
        let (s, c) = (libm::sin(self.real()), libm::cos(self.real()));
        self.map_derivs(&[s, c, -s, -c, s])
    }

    fn cos(self) -> Self {
        let (s, c) = (libm::sin(self.real()), libm::cos(self.real()));
        self.map_derivs(&[c, -s, -c, s, c])
    }

    fn atan(self) -> Self {
        let v = self.real();
        let w = 1.0 / (1.0 + v * v);
        self.map_derivs(&[
            libm::atan(v),
            w,
            -2.0 * v * w * w,
            (6.0 * v * v - 2.0) * w * w * w,
            24.0 * v * (1.0 - v * v) * w * w * w * w,
        ])
    }

    fn sinh(self) -> Self {
        let (sh, ch) = (libm::sinh(self.real()), libm::cosh(self.real()));
        self.map_derivs(&[sh, ch, sh, ch, sh])
    }

    fn cosh(self) -> Self {
        let (sh, ch) = (libm::sinh(self.real()), libm::cosh(self.real()));
        self.map_derivs(&[ch, sh, ch, sh, ch])
    }

    fn try_ln(self) -> Result<Self> {
        if self.real() > 0.0 {
            Ok(self.ln())
        } else {
            Err(Error::Domain("logarithm of a non-positive value"))
        }
    }

    fn try_sqrt(self) -> Result<Self> {
        if self.real() > 0.0 {
            Ok(self.sqrt())
        } else {
            Err(Error::Domain("square root differentiated at a non-positive value"))
        }
    }

    fn try_powf(self, p: f64) -> Result<Self> {
        if self.real() > 0.0 {
            Ok(self.powf(p))
        } else {
            Err(Error::Domain("real power of a non-positive base"))
        }
    }

    fn try_div(self, rhs: Self) -> Result<Self> {
        if rhs.real() != 0.0 {
            Ok(self / rhs)
        } else {
            Err(Error::Domain("division by zero"))
        }
    }
}

impl Scalar for f64 {
    const ORDER: usize = 0;

    #[inline]
    fn constant(c: f64) -> Self {
        c
    }

    #[inline]
    fn real(&self) -> f64 {
        *self
    }

    #[inline]
    fn map_derivs(&self, d: &[f64]) -> Self {
        d[0]
    }
}

/// Value, gradient and Hessian with respect to `S` seeded variables.
///
/// The Hessian is symmetric by construction: every operation computes the
/// lower triangle and mirrors it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet2<T, const S: usize> {
    pub value: T,
    pub grad: [T; S],
    pub hess: [[T; S]; S],
}

impl<T: Scalar, const S: usize> Jet2<T, S> {
    /// A jet with zero derivatives around `value`.
    #[inline]
    pub fn lift(value: T) -> Self {
        Jet2 { value, grad: [T::zero(); S], hess: [[T::zero(); S]; S] }
    }

    /// The `index`-th seeded variable, taking the value `value`.
    #[inline]
    pub fn variable(value: T, index: usize) -> Self {
        let mut j = Self::lift(value);
        j.grad[index] = T::constant(1.0);
        j
    }

    #[inline]
    fn from_lower(value: T, grad: [T; S], mut hess: [[T; S]; S]) -> Self {
        for i in 0..S {
            for j in 0..i {
                hess[j][i] = hess[i][j];
            }
        }
        Jet2 { value, grad, hess }
    }

    /// Applies `f` to every component (value, gradient and Hessian entries).
    pub fn map_components<U: Scalar>(&self, mut f: impl FnMut(&T) -> U) -> Jet2<U, S> {
        let grad = core::array::from_fn(|i| f(&self.grad[i]));
        let mut hess = [[U::zero(); S]; S];
        for i in 0..S {
            for j in 0..=i {
                hess[i][j] = f(&self.hess[i][j]);
            }
        }
        Jet2::from_lower(f(&self.value), grad, hess)
    }

    /// Fallible variant of [`Jet2::map_components`].
    pub fn try_map_components<U: Scalar>(
        &self,
        mut f: impl FnMut(&T) -> Result<U>,
    ) -> Result<Jet2<U, S>> {
        let value = f(&self.value)?;
        let mut grad = [U::zero(); S];
        for i in 0..S {
            grad[i] = f(&self.grad[i])?;
        }
        let mut hess = [[U::zero(); S]; S];
        for i in 0..S {
            for j in 0..=i {
                hess[i][j] = f(&self.hess[i][j])?;
            }
        }
        Ok(Jet2::from_lower(value, grad, hess))
    }
}

impl<const S: usize> Jet2<f64, S> {
    /// Seeds every coordinate of `x` as an independent variable.
    pub fn seed(x: &[f64; S]) -> [Self; S] {
        core::array::from_fn(|i| Self::variable(x[i], i))
    }
}

/// Jet carrying two derivatives in `x` (outer) and two in `y` (inner).
pub type NestedJet<const S: usize> = Jet2<Jet2<f64, S>, S>;

/// Seeds `x` in the outer level and `y` in the inner level.
pub fn seed_nested<const S: usize>(
    x: &[f64; S],
    y: &[f64; S],
) -> ([NestedJet<S>; S], [NestedJet<S>; S]) {
    let xs = core::array::from_fn(|i| Jet2::variable(Jet2::lift(x[i]), i));
    let ys = core::array::from_fn(|i| Jet2::lift(Jet2::variable(y[i], i)));
    (xs, ys)
}

/// Lifts a real constant to a jet in `s` seed variables.
pub fn lift_constant<const S: usize>(c: f64) -> Jet2<f64, S> {
    Jet2::lift(c)
}

impl<T: Scalar, const S: usize> Scalar for Jet2<T, S> {
    const ORDER: usize = T::ORDER + 2;

    #[inline]
    fn constant(c: f64) -> Self {
        Self::lift(T::constant(c))
    }

    #[inline]
    fn real(&self) -> f64 {
        self.value.real()
    }

    #[inline]
    fn map_derivs(&self, d: &[f64]) -> Self {
        let f0 = self.value.map_derivs(d);
        let f1 = self.value.map_derivs(&d[1..]);
        let f2 = self.value.map_derivs(&d[2..]);
        let grad: [T; S] = core::array::from_fn(|i| f1 * self.grad[i]);
        let mut hess = [[T::zero(); S]; S];
        for i in 0..S {
            let fi = f2 * self.grad[i];
            for j in 0..=i {
                hess[i][j] = fi * self.grad[j] + f1 * self.hess[i][j];
            }
        }
        Jet2::from_lower(f0, grad, hess)
    }
}

impl<T: Scalar, const S: usize> Add for Jet2<T, S> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        let grad = core::array::from_fn(|i| self.grad[i] + rhs.grad[i]);
        let mut hess = [[T::zero(); S]; S];
        for i in 0..S {
            for j in 0..=i {
                hess[i][j] = self.hess[i][j] + rhs.hess[i][j];
            }
        }
        Jet2::from_lower(self.value + rhs.value, grad, hess)
    }
}

impl<T: Scalar, const S: usize> Sub for Jet2<T, S> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        let grad = core::array::from_fn(|i| self.grad[i] - rhs.grad[i]);
        let mut hess = [[T::zero(); S]; S];
        for i in 0..S {
            for j in 0..=i {
                hess[i][j] = self.hess[i][j] - rhs.hess[i][j];
            }
        }
        Jet2::from_lower(self.value - rhs.value, grad, hess)
    }
}

impl<T: Scalar, const S: usize> Mul for Jet2<T, S> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        let (a, b) = (self.value, rhs.value);
        let grad = core::array::from_fn(|i| a * rhs.grad[i] + self.grad[i] * b);
        let mut hess = [[T::zero(); S]; S];
        for i in 0..S {
            for j in 0..=i {
                hess[i][j] = a * rhs.hess[i][j]
                    + self.grad[i] * rhs.grad[j]
                    + self.grad[j] * rhs.grad[i]
                    + self.hess[i][j] * b;
            }
        }
        Jet2::from_lower(a * b, grad, hess)
    }
}

impl<T: Scalar, const S: usize> Div for Jet2<T, S> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        self * rhs.recip()
    }
}

impl<T: Scalar, const S: usize> Neg for Jet2<T, S> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        self.map_components(|c| -*c)
    }
}

impl<T: Scalar, const S: usize> Add<f64> for Jet2<T, S> {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: f64) -> Self {
        self.value = self.value + rhs;
        self
    }
}

impl<T: Scalar, const S: usize> Sub<f64> for Jet2<T, S> {
    type Output = Self;
    #[inline]
    fn sub(mut self, rhs: f64) -> Self {
        self.value = self.value - rhs;
        self
    }
}

impl<T: Scalar, const S: usize> Mul<f64> for Jet2<T, S> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: f64) -> Self {
        self.map_components(|c| *c * rhs)
    }
}

impl<T: Scalar, const S: usize> Div<f64> for Jet2<T, S> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: f64) -> Self {
        self.map_components(|c| *c / rhs)
    }
}

/// `Σ aᵢ bᵢ`, accumulated left to right.
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + *x * *y)
}

/// `Σ (aᵢ - bᵢ)²`, accumulated left to right.
pub fn squared_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + (*x - *y).square())
}

/// Euclidean norm; errors at the origin where it is not differentiable.
pub fn norm<T: Scalar>(v: &[T]) -> Result<T> {
    let r2 = dot(v, v);
    if r2.real() > 0.0 {
        Ok(r2.sqrt())
    } else {
        Err(Error::Domain("norm differentiated at the origin"))
    }
}

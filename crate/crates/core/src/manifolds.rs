//! Supported manifolds and the second-order Stein operator
//! `L_π φ = ∇·(π∇φ)/π = ∇log π · ∇φ + Δφ`.
//!
//! Everything is differentiated in ambient coordinates. On the sphere the
//! local-coordinate operator (polar chart `x = (cos q₁ sin q₂, sin q₁ sin q₂,
//! cos q₂)`) is rewritten with the chain rule, which yields fixed
//! coefficient patterns in `x` applied to ambient gradients and Hessians.
//! The chart degenerates at the poles, so points with `|x₃| ≥ 1 - 1e-9` are
//! rejected on sphere-bearing manifolds.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::jets::{Jet2, Scalar};

/// Half-width of the excluded band around the chart poles, in `|x₃|`.
pub const POLAR_BAND: f64 = 1e-9;

/// Tolerance on `‖μ‖ = 1` for points on a sphere.
pub const UNIT_NORM_TOL: f64 = 1e-12;

/// Largest Euclidean dimension with a compiled Stein kernel.
pub const MAX_EUCLIDEAN_DIM: usize = 6;

/// The manifolds the operator is implemented for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ManifoldKind {
    /// `ℝ^d`, the chart is the identity.
    Euclidean(usize),
    /// The unit sphere in `ℝ³`.
    Sphere2,
    /// `𝕊² × ℝ₊` embedded in `ℝ⁴` as `(μ₁, μ₂, μ₃, κ)`.
    Sphere2CrossRPlus,
}

impl ManifoldKind {
    pub fn validate(&self) -> Result<()> {
        match self {
            ManifoldKind::Euclidean(0) => Err(Error::InvalidArgument("Euclidean dimension must be at least 1")),
            _ => Ok(()),
        }
    }

    /// Number of ambient coordinates (the AD seed dimension).
    pub fn ambient_dim(&self) -> usize {
        match self {
            ManifoldKind::Euclidean(d) => *d,
            ManifoldKind::Sphere2 => 3,
            ManifoldKind::Sphere2CrossRPlus => 4,
        }
    }

    pub fn intrinsic_dim(&self) -> usize {
        match self {
            ManifoldKind::Euclidean(d) => *d,
            ManifoldKind::Sphere2 => 2,
            ManifoldKind::Sphere2CrossRPlus => 3,
        }
    }

    pub fn has_sphere_factor(&self) -> bool {
        !matches!(self, ManifoldKind::Euclidean(_))
    }

    /// Checks the manifold invariants of raw ambient coordinates.
    pub fn check_point(&self, coords: &[f64]) -> Result<()> {
        self.validate()?;
        if coords.len() != self.ambient_dim() {
            return Err(Error::Dimension { expected: self.ambient_dim(), got: coords.len() });
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidPoint("coordinates must be finite"));
        }
        if self.has_sphere_factor() {
            let r2 = coords[0] * coords[0] + coords[1] * coords[1] + coords[2] * coords[2];
            if (libm::sqrt(r2) - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::InvalidPoint("sphere component must have unit norm"));
            }
        }
        if *self == ManifoldKind::Sphere2CrossRPlus && coords[3] <= 0.0 {
            return Err(Error::InvalidPoint("concentration kappa must be positive"));
        }
        Ok(())
    }

    /// Rejects points in the polar band where the spherical chart degenerates.
    pub fn check_chart(&self, coords: &[f64]) -> Result<()> {
        if self.has_sphere_factor() && coords[2].abs() >= 1.0 - POLAR_BAND {
            return Err(Error::ChartSingularity { x3: coords[2].abs() });
        }
        Ok(())
    }
}

impl fmt::Display for ManifoldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ManifoldKind::Euclidean(d) => write!(f, "R^{d}"),
            ManifoldKind::Sphere2 => write!(f, "S^2"),
            ManifoldKind::Sphere2CrossRPlus => write!(f, "S^2 x R+"),
        }
    }
}

/// A point of an embedded manifold, stored by its ambient coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct AmbientPoint {
    coords: Vec<f64>,
}

impl AmbientPoint {
    /// Validates `coords` against the invariants of `manifold`.
    pub fn new(manifold: ManifoldKind, coords: Vec<f64>) -> Result<Self> {
        manifold.check_point(&coords)?;
        Ok(AmbientPoint { coords })
    }

    pub fn euclidean(coords: Vec<f64>) -> Result<Self> {
        Self::new(ManifoldKind::Euclidean(coords.len()), coords)
    }

    /// Point on `𝕊²`; the input is renormalized to unit length.
    pub fn on_sphere(x: [f64; 3]) -> Result<Self> {
        let n = libm::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::InvalidPoint("cannot normalize a zero or non-finite vector"));
        }
        Self::new(ManifoldKind::Sphere2, alloc::vec![x[0] / n, x[1] / n, x[2] / n])
    }

    /// Point `(μ, κ)` on `𝕊² × ℝ₊`; `μ` is renormalized to unit length.
    pub fn on_sphere_cross_rplus(mu: [f64; 3], kappa: f64) -> Result<Self> {
        let s = Self::on_sphere(mu)?;
        let mut coords = s.coords;
        coords.push(kappa);
        Self::new(ManifoldKind::Sphere2CrossRPlus, coords)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub(crate) fn from_raw(coords: Vec<f64>) -> Self {
        AmbientPoint { coords }
    }
}

/// An orthonormal frame `[e₁, e₂, pole]` for a unit vector `pole`, so that
/// `a·e₁ + b·e₂ + c·pole` maps the north-pole picture onto `pole`.
pub fn frame_with_pole(pole: [f64; 3]) -> [[f64; 3]; 3] {
    // start from the coordinate axis least aligned with the pole
    let mut k = 0;
    for i in 1..3 {
        if pole[i].abs() < pole[k].abs() {
            k = i;
        }
    }
    let mut a = [0.0; 3];
    a[k] = 1.0;
    let d = a[0] * pole[0] + a[1] * pole[1] + a[2] * pole[2];
    let mut e1 = [a[0] - d * pole[0], a[1] - d * pole[1], a[2] - d * pole[2]];
    let n1 = libm::sqrt(e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]);
    e1 = [e1[0] / n1, e1[1] / n1, e1[2] / n1];
    let e2 = [
        pole[1] * e1[2] - pole[2] * e1[1],
        pole[2] * e1[0] - pole[0] * e1[2],
        pole[0] * e1[1] - pole[1] * e1[0],
    ];
    [e1, e2, pole]
}

/// `a·e₁ + b·e₂ + c·e₃` for a frame from [`frame_with_pole`].
pub fn from_frame(frame: &[[f64; 3]; 3], a: f64, b: f64, c: f64) -> [f64; 3] {
    core::array::from_fn(|i| a * frame[0][i] + b * frame[1][i] + c * frame[2][i])
}

/// A scalar function of ambient coordinates that can be evaluated on any
/// [`Scalar`], and therefore differentiated.
pub trait ScalarField {
    fn eval<T: Scalar>(&self, x: &[T]) -> Result<T>;
}

impl<F: ScalarField + ?Sized> ScalarField for &F {
    fn eval<T: Scalar>(&self, x: &[T]) -> Result<T> {
        (**self).eval(x)
    }
}

/// A vector field `ℝ^d → ℝ^d`, for the first-order Euclidean operator.
pub trait VectorField {
    fn eval<T: Scalar>(&self, x: &[T]) -> Result<Vec<T>>;
}

/// Dispatches a const-generic body on the ambient dimension.
macro_rules! with_ambient_dim {
    ($dim:expr, $S:ident => $body:expr) => {
        match $dim {
            1 => { const $S: usize = 1; $body }
            2 => { const $S: usize = 2; $body }
            3 => { const $S: usize = 3; $body }
            4 => { const $S: usize = 4; $body }
            5 => { const $S: usize = 5; $body }
            6 => { const $S: usize = 6; $body }
            d => Err($crate::error::Error::UnsupportedManifold(alloc::format!(
                "ambient dimension {d} exceeds {}",
                $crate::manifolds::MAX_EUCLIDEAN_DIM
            ))),
        }
    };
}
pub(crate) use with_ambient_dim;

pub(crate) fn as_array<const S: usize>(x: &[f64]) -> Result<&[f64; S]> {
    x.try_into().map_err(|_| Error::Dimension { expected: S, got: x.len() })
}

/// Ambient gradient of a scalar field at a real point.
pub(crate) fn gradient<const S: usize, F: ScalarField>(f: &F, x: &[f64; S]) -> Result<[f64; S]> {
    let seeded = Jet2::<f64, S>::seed(x);
    Ok(f.eval(&seeded)?.grad)
}

/// `L_π φ` at `x` from the ambient gradient of `log π` and the ambient
/// value/gradient/Hessian jet of `φ`. The chart has already been checked.
pub(crate) fn apply_from_jets<const S: usize>(
    manifold: ManifoldKind,
    x: &[f64; S],
    grad_log_pi: &[f64; S],
    phi: &Jet2<f64, S>,
) -> f64 {
    match manifold {
        ManifoldKind::Euclidean(_) => {
            let mut acc = 0.0;
            for i in 0..S {
                acc += grad_log_pi[i] * phi.grad[i] + phi.hess[i][i];
            }
            acc
        }
        ManifoldKind::Sphere2 => sphere_terms(x, grad_log_pi, phi),
        ManifoldKind::Sphere2CrossRPlus => {
            sphere_terms(x, grad_log_pi, phi) + grad_log_pi[3] * phi.grad[3] + phi.hess[3][3]
        }
    }
}

/// The polar-chart operator on the `𝕊²` factor, expressed through ambient
/// derivatives in `x₁, x₂, x₃`.
fn sphere_terms<const S: usize>(x: &[f64; S], lg: &[f64; S], phi: &Jet2<f64, S>) -> f64 {
    let (x1, x2, x3) = (x[0], x[1], x[2]);
    let s = 1.0 - x3 * x3;
    let rs = libm::sqrt(s);
    let cot = x3 / rs;
    let g = &phi.grad;
    let h = &phi.hess;

    // ∂/∂q₁ and ∂/∂q₂ of a function with ambient gradient `v`
    let dq1 = |v: &[f64; S]| -x2 * v[0] + x1 * v[1];
    let dq2 = |v: &[f64; S]| x1 * cot * v[0] + x2 * cot * v[1] - rs * v[2];

    let d2q1 = x2 * x2 * h[0][0] - 2.0 * x1 * x2 * h[0][1] + x1 * x1 * h[1][1] - x1 * g[0] - x2 * g[1];
    let x3sq_over_s = x3 * x3 / s;
    let d2q2 = x1 * x1 * x3sq_over_s * h[0][0]
        + 2.0 * x1 * x2 * x3sq_over_s * h[0][1]
        - 2.0 * x1 * x3 * h[0][2]
        + x2 * x2 * x3sq_over_s * h[1][1]
        - 2.0 * x2 * x3 * h[1][2]
        + s * h[2][2]
        - x1 * g[0]
        - x2 * g[1]
        - x3 * g[2];

    cot * dq2(g) + (dq1(lg) * dq1(g) + d2q1) / s + dq2(lg) * dq2(g) + d2q2
}

/// `L_π φ` at a point, with `log π` and `φ` differentiated by [`Jet2`].
pub fn apply_second_order_stein<L: ScalarField, P: ScalarField>(
    manifold: ManifoldKind,
    log_pi: &L,
    phi: &P,
    at: &AmbientPoint,
) -> Result<f64> {
    manifold.check_point(at.coords())?;
    manifold.check_chart(at.coords())?;
    with_ambient_dim!(manifold.ambient_dim(), S => {
        let x = as_array::<S>(at.coords())?;
        let lg = gradient(log_pi, x)?;
        let jet = phi.eval(&Jet2::<f64, S>::seed(x))?;
        Ok(apply_from_jets(manifold, x, &lg, &jet))
    })
}

/// The first-order operator `∇log π · ψ + ∇·ψ`, defined on `ℝ^d` only.
pub fn apply_first_order_stein_euclidean<L: ScalarField, V: VectorField>(
    manifold: ManifoldKind,
    log_pi: &L,
    psi: &V,
    at: &AmbientPoint,
) -> Result<f64> {
    let ManifoldKind::Euclidean(d) = manifold else {
        return Err(Error::UnsupportedManifold(format!(
            "first-order operator requires a Euclidean space, got {manifold}"
        )));
    };
    manifold.check_point(at.coords())?;
    with_ambient_dim!(d, S => {
        let x = as_array::<S>(at.coords())?;
        let lg = gradient(log_pi, x)?;
        let field = psi.eval(&Jet2::<f64, S>::seed(x))?;
        if field.len() != S {
            return Err(Error::Dimension { expected: S, got: field.len() });
        }
        let mut acc = 0.0;
        for i in 0..S {
            acc += lg[i] * field[i].value + field[i].grad[i];
        }
        Ok(acc)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct HalfGaussian;
    impl ScalarField for HalfGaussian {
        fn eval<T: Scalar>(&self, x: &[T]) -> Result<T> {
            Ok(x.iter().fold(T::zero(), |a, v| a + v.square()) * -0.5)
        }
    }

    struct Uniform;
    impl ScalarField for Uniform {
        fn eval<T: Scalar>(&self, _x: &[T]) -> Result<T> {
            Ok(T::zero())
        }
    }

    struct Coord(usize, i32);
    impl ScalarField for Coord {
        fn eval<T: Scalar>(&self, x: &[T]) -> Result<T> {
            Ok(x[self.0].powi(self.1))
        }
    }

    struct ConstField;
    impl VectorField for ConstField {
        fn eval<T: Scalar>(&self, x: &[T]) -> Result<Vec<T>> {
            Ok(x.iter().map(|_| T::constant(1.0)).collect())
        }
    }

    struct IdentityField;
    impl VectorField for IdentityField {
        fn eval<T: Scalar>(&self, x: &[T]) -> Result<Vec<T>> {
            Ok(x.to_vec())
        }
    }

    #[test]
    fn euclidean_examples() {
        let m = ManifoldKind::Euclidean(1);
        for &x0 in &[-1.3, 0.0, 0.4, 2.0] {
            let p = AmbientPoint::euclidean(alloc::vec![x0]).unwrap();
            let l1 = apply_second_order_stein(m, &HalfGaussian, &Coord(0, 1), &p).unwrap();
            assert!((l1 + x0).abs() < 1e-14);
            let l2 = apply_second_order_stein(m, &HalfGaussian, &Coord(0, 2), &p).unwrap();
            assert!((l2 - (2.0 - 2.0 * x0 * x0)).abs() < 1e-13);
            let f1 = apply_first_order_stein_euclidean(m, &HalfGaussian, &ConstField, &p).unwrap();
            assert!((f1 + x0).abs() < 1e-14);
            let f2 = apply_first_order_stein_euclidean(m, &HalfGaussian, &IdentityField, &p).unwrap();
            assert!((f2 - (1.0 - x0 * x0)).abs() < 1e-13);
        }
    }

    #[test]
    fn sphere_degree_one_harmonic() {
        let p = AmbientPoint::on_sphere([libm::sqrt(0.75), 0.0, 0.5]).unwrap();
        let v = apply_second_order_stein(ManifoldKind::Sphere2, &Uniform, &Coord(2, 1), &p).unwrap();
        assert!((v + 1.0).abs() < 1e-13, "{v}");
    }

    #[test]
    fn polar_band_is_rejected() {
        let p = AmbientPoint::on_sphere([1e-6, 0.0, 1.0]).unwrap();
        let err = apply_second_order_stein(ManifoldKind::Sphere2, &Uniform, &Coord(2, 1), &p).unwrap_err();
        assert!(matches!(err, Error::ChartSingularity { .. }));
    }

    #[test]
    fn first_order_requires_euclidean() {
        let p = AmbientPoint::on_sphere([1.0, 0.0, 0.0]).unwrap();
        let err = apply_first_order_stein_euclidean(ManifoldKind::Sphere2, &Uniform, &ConstField, &p);
        assert!(matches!(err, Err(Error::UnsupportedManifold(_))));
    }

    #[test]
    fn point_invariants() {
        assert!(AmbientPoint::new(ManifoldKind::Sphere2, alloc::vec![1.0, 1.0, 0.0]).is_err());
        assert!(AmbientPoint::new(ManifoldKind::Euclidean(2), alloc::vec![f64::NAN, 0.0]).is_err());
        assert!(AmbientPoint::on_sphere_cross_rplus([0.0, 1.0, 0.0], 0.0).is_err());
        assert!(AmbientPoint::on_sphere_cross_rplus([0.0, 2.0, 0.0], 1.5).is_ok());
        assert!(ManifoldKind::Euclidean(0).validate().is_err());
    }
}

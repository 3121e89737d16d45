//! Stein kernels, their Gram matrices, and the quadrature rules built on them.
//!
//! The Stein kernel applies the target's Stein operator to the base kernel
//! in both arguments. The base kernel is evaluated once on nested jets (outer
//! level seeded in `x`, inner in `y`); the operator in `y` is applied to
//! every `x`-jet component, and the operator in `x` is applied to the result.
//!
//! Given `K` with entries `k_π(xᵢ, xⱼ)` the limit estimator uses weights
//! `K⁻¹1 / 1ᵀK⁻¹1` with worst-case error `(1ᵀK⁻¹1)^{−½}`. For finite `σ` the
//! kernel `σ² + k_π` is handled by a rank-one update, so only `K` is
//! factorized.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::jets::seed_nested;
use crate::kernels::{Kernel, KernelSpec};
use crate::linalg::{bilinear, cholesky, cholesky_solve};
use crate::manifolds::{apply_from_jets, as_array, gradient, with_ambient_dim, AmbientPoint, ManifoldKind, ScalarField};
use crate::targets::Target;

/// Which Stein operator generates the kernel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SteinOperator {
    /// `∇log π · ∇φ + Δφ`, on every manifold.
    SecondOrder,
    /// `∇log π · ψ + ∇·ψ` on vector fields, on `ℝ^d` only.
    FirstOrder,
}

/// A Stein kernel `k_π(x, y)` for a fixed manifold, target and base kernel.
#[derive(Clone, Debug)]
pub struct SteinKernel<L = Target> {
    manifold: ManifoldKind,
    log_pi: L,
    kernel: Kernel,
    operator: SteinOperator,
}

impl SteinKernel<Target> {
    pub fn for_target(target: Target, kernel: KernelSpec, operator: SteinOperator) -> Result<Self> {
        SteinKernel::new(target.manifold(), target, kernel, operator)
    }

    pub fn target(&self) -> &Target {
        &self.log_pi
    }
}

impl<L: ScalarField> SteinKernel<L> {
    pub fn new(manifold: ManifoldKind, log_pi: L, kernel: KernelSpec, operator: SteinOperator) -> Result<Self> {
        manifold.validate()?;
        if manifold.ambient_dim() > crate::manifolds::MAX_EUCLIDEAN_DIM {
            return Err(Error::UnsupportedManifold(format!("{manifold}: dimension too large")));
        }
        if operator == SteinOperator::FirstOrder && !matches!(manifold, ManifoldKind::Euclidean(_)) {
            return Err(Error::UnsupportedManifold(format!("first-order operator on {manifold}")));
        }
        match kernel {
            KernelSpec::Matern { alpha, .. } => {
                if operator == SteinOperator::SecondOrder && alpha.floor() < 2 {
                    return Err(Error::InvalidAlpha {
                        alpha: alpha.value(),
                        reason: "second-order operator requires alpha > 2",
                    });
                }
            }
            KernelSpec::SobolevSphere { m, .. } => {
                if manifold != ManifoldKind::Sphere2 || m != 2 {
                    return Err(Error::UnsupportedManifold(format!("Sobolev kernel on S^{m} used on {manifold}")));
                }
            }
            KernelSpec::PaleoArctanRbf => {
                if manifold != ManifoldKind::Sphere2CrossRPlus {
                    return Err(Error::UnsupportedManifold(format!("arctan-RBF kernel used on {manifold}")));
                }
            }
        }
        Ok(SteinKernel { manifold, log_pi, kernel: kernel.build()?, operator })
    }

    pub fn manifold(&self) -> ManifoldKind {
        self.manifold
    }

    pub fn operator(&self) -> SteinOperator {
        self.operator
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn log_pi(&self) -> &L {
        &self.log_pi
    }

    pub fn eval(&self, x: &AmbientPoint, y: &AmbientPoint) -> Result<f64> {
        self.eval_coords(x.coords(), y.coords())
    }

    pub fn eval_coords(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let m = self.manifold;
        m.check_point(x)?;
        m.check_point(y)?;
        m.check_chart(x)?;
        m.check_chart(y)?;
        with_ambient_dim!(m.ambient_dim(), S => {
            let (x, y) = (as_array::<S>(x)?, as_array::<S>(y)?);
            match self.operator {
                SteinOperator::SecondOrder => self.second_order::<S>(x, y),
                SteinOperator::FirstOrder => self.first_order::<S>(x, y),
            }
        })
    }

    fn second_order<const S: usize>(&self, x: &[f64; S], y: &[f64; S]) -> Result<f64> {
        let gx = gradient(&self.log_pi, x)?;
        let gy = gradient(&self.log_pi, y)?;
        let (xs, ys) = seed_nested(x, y);
        let k = self.kernel.eval(&xs, &ys)?;
        let inner = k.map_components(|c| apply_from_jets(self.manifold, y, &gy, c));
        Ok(apply_from_jets(self.manifold, x, &gx, &inner))
    }

    fn first_order<const S: usize>(&self, x: &[f64; S], y: &[f64; S]) -> Result<f64> {
        let gx = gradient(&self.log_pi, x)?;
        let gy = gradient(&self.log_pi, y)?;
        let (xs, ys) = seed_nested(x, y);
        let k = self.kernel.eval(&xs, &ys)?;
        let mut acc = 0.0;
        let mut score_dot = 0.0;
        for i in 0..S {
            acc += k.grad[i].grad[i] + gx[i] * k.value.grad[i] + gy[i] * k.grad[i].value;
            score_dot += gx[i] * gy[i];
        }
        Ok(acc + score_dot * k.value.value)
    }
}

/// Free-function form of [`SteinKernel::eval`] for the second-order operator.
pub fn stein_kernel<L: ScalarField>(
    manifold: ManifoldKind,
    log_pi: &L,
    kernel: KernelSpec,
    x: &AmbientPoint,
    y: &AmbientPoint,
) -> Result<f64> {
    SteinKernel::new(manifold, log_pi, kernel, SteinOperator::SecondOrder)?.eval(x, y)
}

/// How the constant part of the kernel `σ² + k_π` is treated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SigmaMode {
    /// `σ → ∞`.
    Limit,
    Finite(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureResult {
    pub weights: Vec<f64>,
    pub estimate: f64,
    pub wce: f64,
    pub sigma_mode: SigmaMode,
}

/// Jitter multipliers of the maximum diagonal entry, tried in order.
pub const JITTER_LADDER: [f64; 4] = [0.0, 1e-12, 1e-10, 1e-8];

/// Symmetric Stein Gram matrix with a cached factorization of
/// `K + jitter·I`. All solves and quadratic forms use that shifted matrix.
#[derive(Clone, Debug)]
pub struct SteinGram {
    points: Vec<AmbientPoint>,
    n: usize,
    entries: Vec<f64>,
    jitter: f64,
    chol: Vec<f64>,
}

impl SteinGram {
    /// Evaluates the upper triangle in row order and mirrors it.
    pub fn assemble<L: ScalarField>(kernel: &SteinKernel<L>, points: &[AmbientPoint]) -> Result<Self> {
        let n = points.len();
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = kernel.eval(&points[i], &points[j])?;
                entries[i * n + j] = v;
                entries[j * n + i] = v;
            }
        }
        Self::from_entries(points.to_vec(), entries)
    }

    /// Wraps precomputed entries (row-major, exactly symmetric).
    pub fn from_entries(points: Vec<AmbientPoint>, entries: Vec<f64>) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(Error::InvalidArgument("Gram matrix needs at least one point"));
        }
        if entries.len() != n * n {
            return Err(Error::Dimension { expected: n * n, got: entries.len() });
        }
        for i in 0..n {
            for j in 0..i {
                if entries[i * n + j] != entries[j * n + i] {
                    return Err(Error::InvalidArgument("Gram entries must be exactly symmetric"));
                }
            }
        }
        if let Some(k) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteIntegrand { node: k / n });
        }
        let tau = (0..n).map(|i| entries[i * n + i]).fold(0.0, f64::max);
        for rung in JITTER_LADDER {
            let jitter = rung * tau;
            if let Some(chol) = cholesky(&entries, n, jitter) {
                return Ok(SteinGram { points, n, entries, jitter, chol });
            }
        }
        Err(Error::NotPositiveDefinite { max_jitter: JITTER_LADDER[JITTER_LADDER.len() - 1] * tau })
    }

    /// The Gram matrix of the first `m` points, refactorized.
    pub fn leading(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.n {
            return Err(Error::InvalidArgument("leading block size out of range"));
        }
        let mut entries = Vec::with_capacity(m * m);
        for i in 0..m {
            entries.extend_from_slice(&self.entries[i * self.n..i * self.n + m]);
        }
        Self::from_entries(self.points[..m].to_vec(), entries)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn points(&self) -> &[AmbientPoint] {
        &self.points
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn jitter_used(&self) -> f64 {
        self.jitter
    }

    /// `(K + jitter·I)⁻¹ b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.check_len(b)?;
        Ok(cholesky_solve(&self.chol, self.n, b))
    }

    /// `wᵀ (K + jitter·I) w`.
    pub fn quadratic_form(&self, w: &[f64]) -> Result<f64> {
        self.check_len(w)?;
        Ok(bilinear(&self.entries, self.n, self.jitter, w, w))
    }

    /// Worst-case error (kernel Stein discrepancy) of an arbitrary weighting.
    pub fn wce_of_weights(&self, w: &[f64]) -> Result<f64> {
        Ok(libm::sqrt(self.quadratic_form(w)?.max(0.0)))
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.n {
            return Err(Error::Dimension { expected: self.n, got: v.len() });
        }
        Ok(())
    }

    fn check_values(&self, f: &[f64]) -> Result<()> {
        self.check_len(f)?;
        if let Some(i) = f.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteIntegrand { node: i });
        }
        Ok(())
    }

    /// `(K⁻¹1, 1ᵀK⁻¹1)`.
    fn ones_solve(&self) -> (Vec<f64>, f64) {
        let z = cholesky_solve(&self.chol, self.n, &vec![1.0; self.n]);
        let s = z.iter().sum();
        (z, s)
    }

    pub fn solve_limit_estimator(&self, f: &[f64]) -> Result<QuadratureResult> {
        self.check_values(f)?;
        let (z, s) = self.ones_solve();
        let weights: Vec<f64> = z.iter().map(|v| v / s).collect();
        let estimate = dot(&weights, f);
        Ok(QuadratureResult { weights, estimate, wce: 1.0 / libm::sqrt(s), sigma_mode: SigmaMode::Limit })
    }

    /// Estimator for the kernel `σ² + k_π`: weights `σ²K⁻¹1 / (1 + σ²·1ᵀK⁻¹1)`.
    pub fn finite_sigma_estimate(&self, f: &[f64], sigma: f64) -> Result<QuadratureResult> {
        self.check_values(f)?;
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::InvalidArgument("sigma must be finite and nonnegative"));
        }
        let s2 = sigma * sigma;
        let (z, s) = self.ones_solve();
        let denom = 1.0 + s2 * s;
        let weights: Vec<f64> = z.iter().map(|v| s2 * v / denom).collect();
        let estimate = dot(&weights, f);
        Ok(QuadratureResult { weights, estimate, wce: libm::sqrt(s2 / denom), sigma_mode: SigmaMode::Finite(sigma) })
    }

    /// Coefficients of the minimum-norm interpolant in `H_{π,σ}`.
    pub fn interpolant(&self, f: &[f64], sigma: SigmaMode) -> Result<Interpolant> {
        self.check_values(f)?;
        let (z, s) = self.ones_solve();
        let kf = cholesky_solve(&self.chol, self.n, f);
        let sum_kf: f64 = kf.iter().sum();
        match sigma {
            SigmaMode::Limit => {
                let offset = sum_kf / s;
                let coeffs = kf.iter().zip(&z).map(|(a, b)| a - offset * b).collect();
                Ok(Interpolant { offset, coeffs })
            }
            SigmaMode::Finite(sigma) => {
                let s2 = sigma * sigma;
                let scale = s2 * sum_kf / (1.0 + s2 * s);
                let coeffs: Vec<f64> = kf.iter().zip(&z).map(|(a, b)| a - scale * b).collect();
                let offset = s2 * coeffs.iter().sum::<f64>();
                Ok(Interpolant { offset, coeffs })
            }
        }
    }

    pub fn interpolant_eval<L: ScalarField>(
        &self,
        kernel: &SteinKernel<L>,
        f: &[f64],
        sigma: SigmaMode,
        at: &AmbientPoint,
    ) -> Result<f64> {
        let interp = self.interpolant(f, sigma)?;
        let kv = self.points.iter().map(|p| kernel.eval(at, p)).collect::<Result<Vec<_>>>()?;
        Ok(interp.eval(&kv))
    }

    /// Eigenpairs of `D^{½} K D^{½}` with `D = diag(surface_weights)`, sorted
    /// by decreasing eigenvalue. Node values are `u / √w`, orthonormal in the
    /// `D`-weighted inner product.
    pub fn nystrom_eigenfunctions(&self, surface_weights: &[f64], count: usize) -> Result<Vec<Eigenpair>> {
        self.check_len(surface_weights)?;
        if count > self.n {
            return Err(Error::InvalidArgument("more eigenfunctions requested than nodes"));
        }
        if surface_weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument("surface weights must be positive"));
        }
        let n = self.n;
        let root: Vec<f64> = surface_weights.iter().map(|w| libm::sqrt(*w)).collect();
        let m = nalgebra::DMatrix::from_fn(n, n, |i, j| root[i] * self.entries[i * n + j] * root[j]);
        let eig = nalgebra::SymmetricEigen::new(m);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|a, b| eig.eigenvalues[*b].total_cmp(&eig.eigenvalues[*a]));
        Ok(order
            .into_iter()
            .take(count)
            .map(|k| Eigenpair {
                value: eig.eigenvalues[k],
                node_values: (0..n).map(|i| eig.eigenvectors[(i, k)] / root[i]).collect(),
            })
            .collect())
    }
}

/// `f̂(x) = offset + Σ cᵢ k_π(x, xᵢ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Interpolant {
    pub offset: f64,
    pub coeffs: Vec<f64>,
}

impl Interpolant {
    /// Evaluates from the kernel column `k_π(x, xᵢ)`.
    pub fn eval(&self, kernel_column: &[f64]) -> f64 {
        self.offset + dot(&self.coeffs, kernel_column)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Eigenpair {
    pub value: f64,
    pub node_values: Vec<f64>,
}

/// Nyström extension `e(x) = λ⁻¹ Σᵢ wᵢ k_π(x, xᵢ) e(xᵢ)` of an eigenfunction.
pub fn nystrom_extend(pair: &Eigenpair, surface_weights: &[f64], kernel_column: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..kernel_column.len() {
        acc += surface_weights[i] * kernel_column[i] * pair.node_values[i];
    }
    acc / pair.value
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

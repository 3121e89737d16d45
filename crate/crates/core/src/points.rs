//! Point-set generators: Gaussian draws, normal percentiles, Riesz-energy
//! sphere points, random-walk Metropolis on `𝕊² × ℝ₊`, the tensor design for
//! the paleomagnetic posterior, and importance-sampling baselines.
//!
//! Every generator is a pure function of its arguments and an [`RngSeed`].

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::manifolds::{frame_with_pole, from_frame, AmbientPoint, ManifoldKind, ScalarField, POLAR_BAND};
use crate::special::normal_quantile;
use crate::targets::PaleoPosterior;

/// Seed plus stream index; together they fix every random sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RngSeed {
    pub seed: u64,
    pub stream: u64,
}

impl RngSeed {
    pub const fn new(seed: u64, stream: u64) -> Self {
        RngSeed { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    /// The same seed on another stream.
    pub fn with_stream(&self, stream: u64) -> Self {
        RngSeed { seed: self.seed, stream }
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// `n` draws from `N(mean, scale²·I)`.
pub fn gaussian_iid(d: usize, n: usize, mean: &[f64], scale: f64, seed: RngSeed) -> Result<Vec<AmbientPoint>> {
    if mean.len() != d {
        return Err(Error::Dimension { expected: d, got: mean.len() });
    }
    if !(scale >= 0.0) || !scale.is_finite() {
        return Err(Error::InvalidArgument("scale must be finite and nonnegative"));
    }
    let mut rng = seed.rng();
    (0..n)
        .map(|_| {
            let x = mean.iter().map(|m| m + scale * normal(&mut rng)).collect();
            AmbientPoint::new(ManifoldKind::Euclidean(d), x)
        })
        .collect()
}

/// `Φ⁻¹(i / (n + 1))` for `i = 1..n`, mirrored so `xᵢ = −x_{n+1−i}` exactly.
pub fn stratified_percentiles(n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for i in 0..n / 2 {
        let q = normal_quantile((i + 1) as f64 / (n + 1) as f64);
        out[i] = q;
        out[n - 1 - i] = -q;
    }
    out
}

/// Riesz exponent used for quasi-uniform sphere points.
pub const RIESZ_EXPONENT: f64 = 1.0;

/// `Σ_{i<j} ‖xᵢ − xⱼ‖^{−s}`.
pub fn riesz_energy(points: &[[f64; 3]], s: f64) -> f64 {
    let mut e = 0.0;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            e += libm::pow(dist2(&points[i], &points[j]), -0.5 * s);
        }
    }
    e
}

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) + (a[2] - b[2]) * (a[2] - b[2])
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = libm::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    [v[0] / n, v[1] / n, v[2] / n]
}

/// Spherical Fibonacci lattice.
pub fn fibonacci_sphere(n: usize) -> Vec<[f64; 3]> {
    let golden = core::f64::consts::PI * (3.0 - libm::sqrt(5.0));
    (0..n)
        .map(|i| {
            let z = 1.0 - (2 * i + 1) as f64 / n as f64;
            let r = libm::sqrt((1.0 - z * z).max(0.0));
            let (s, c) = libm::sincos(golden * i as f64);
            [r * c, r * s, z]
        })
        .collect()
}

/// Uniformly random rotation, as a unit quaternion.
fn random_rotation(rng: &mut ChaCha8Rng) -> impl Fn([f64; 3]) -> [f64; 3] {
    let q = loop {
        let q: [f64; 4] = core::array::from_fn(|_| normal(rng));
        let n = libm::sqrt(q.iter().map(|v| v * v).sum());
        if n > 1e-6 {
            break q.map(|v| v / n);
        }
    };
    let [w, x, y, z] = q;
    let m = [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ];
    move |v: [f64; 3]| core::array::from_fn(|i| m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2])
}

/// Tangential part of the Riesz energy gradient at every point.
fn riesz_gradient(points: &[[f64; 3]], s: f64) -> Vec<[f64; 3]> {
    let n = points.len();
    let mut g = vec![[0.0; 3]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = [points[i][0] - points[j][0], points[i][1] - points[j][1], points[i][2] - points[j][2]];
            let c = -s * libm::pow(d[0] * d[0] + d[1] * d[1] + d[2] * d[2], -0.5 * s - 1.0);
            for k in 0..3 {
                g[i][k] += c * d[k];
                g[j][k] -= c * d[k];
            }
        }
    }
    for (gi, x) in g.iter_mut().zip(points) {
        let r = gi[0] * x[0] + gi[1] * x[1] + gi[2] * x[2];
        for k in 0..3 {
            gi[k] -= r * x[k];
        }
    }
    g
}

/// Quasi-uniform points from projected gradient descent on the Riesz
/// `s = 1` energy, started from a randomly rotated Fibonacci lattice. The
/// energy never increases; the final set is rotated off the polar band.
pub fn riesz_quasi_uniform_sphere(n: usize, iters: usize, seed: RngSeed) -> Result<Vec<AmbientPoint>> {
    Ok(riesz_descent(n, iters, RIESZ_EXPONENT, seed)?.0)
}

/// As [`riesz_quasi_uniform_sphere`], also returning the energy trace.
pub fn riesz_descent(n: usize, iters: usize, s: f64, seed: RngSeed) -> Result<(Vec<AmbientPoint>, Vec<f64>)> {
    if n < 2 {
        return Err(Error::InvalidArgument("Riesz points need n >= 2"));
    }
    let mut rng = seed.rng();
    let rot = random_rotation(&mut rng);
    let mut x: Vec<[f64; 3]> = fibonacci_sphere(n).into_iter().map(|p| normalize(rot(p))).collect();
    let mut energy = riesz_energy(&x, s);
    let mut trace = vec![energy];
    let mut step = 0.1 * libm::sqrt(4.0 * core::f64::consts::PI / n as f64);
    for _ in 0..iters {
        let g = riesz_gradient(&x, s);
        let gmax = g.iter().map(|v| libm::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])).fold(0.0, f64::max);
        if !(gmax > 0.0) {
            break;
        }
        let mut accepted = false;
        for _ in 0..40 {
            let t = step / gmax;
            let cand: Vec<[f64; 3]> = x
                .iter()
                .zip(&g)
                .map(|(p, d)| normalize([p[0] - t * d[0], p[1] - t * d[1], p[2] - t * d[2]]))
                .collect();
            let e = riesz_energy(&cand, s);
            if e <= energy {
                x = cand;
                energy = e;
                step *= 1.25;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        trace.push(energy);
    }
    clear_polar_band(&mut x);
    let pts = x.into_iter().map(|p| AmbientPoint::from_raw(p.to_vec())).collect();
    Ok((pts, trace))
}

/// Rotates the whole configuration about the first axis until no point
/// lies in the polar band.
fn clear_polar_band(x: &mut [[f64; 3]]) {
    let (s, c) = libm::sincos(1e-3);
    for _ in 0..1000 {
        if x.iter().all(|p| p[2].abs() < 1.0 - POLAR_BAND) {
            return;
        }
        for p in x.iter_mut() {
            *p = [p[0], c * p[1] - s * p[2], s * p[1] + c * p[2]];
        }
    }
}

/// Draws from the von Mises-Fisher distribution on `𝕊²` by inverting the
/// distribution of `μᵀx` and drawing a uniform azimuth.
pub fn sample_von_mises_fisher(mu: [f64; 3], kappa: f64, n: usize, seed: RngSeed) -> Result<Vec<[f64; 3]>> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::InvalidArgument("vMF concentration must be positive"));
    }
    let frame = frame_with_pole(normalize(mu));
    let mut rng = seed.rng();
    Ok((0..n)
        .map(|_| {
            let u: f64 = rng.random();
            let w = 1.0 + libm::log(u + (1.0 - u) * libm::exp(-2.0 * kappa)) / kappa;
            let w = w.clamp(-1.0, 1.0);
            let phi = 2.0 * core::f64::consts::PI * rng.random::<f64>();
            let r = libm::sqrt(1.0 - w * w);
            let (s, c) = libm::sincos(phi);
            unit_exact(from_frame(&frame, r * c, r * s, w))
        })
        .collect())
}

/// Normalizes unless already unit to within rounding, so repeated
/// normalization is a fixed point.
fn unit_exact(v: [f64; 3]) -> [f64; 3] {
    let n2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    if (n2 - 1.0).abs() <= 4.0 * f64::EPSILON {
        v
    } else {
        normalize(v)
    }
}

/// Seed of the synthetic pole fixture.
pub const SYNTHETIC_POLE_SEED: RngSeed = RngSeed::new(33, 0);

/// 33 synthetic poles from `vMF(μ = (0, 0, −1), κ = 30)`, standing in for a
/// real paleomagnetic table.
pub fn synthetic_pole_fixture() -> Vec<[f64; 3]> {
    sample_von_mises_fisher([0.0, 0.0, -1.0], 30.0, 33, SYNTHETIC_POLE_SEED).expect("valid parameters")
}

/// Random-walk Metropolis settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McmcConfig {
    pub n_samples: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub step_mu: f64,
    pub step_log_kappa: f64,
}

impl McmcConfig {
    pub fn new(n_samples: usize) -> Self {
        McmcConfig { n_samples, burn_in: 2000, thin: 1, step_mu: 0.1, step_log_kappa: 0.3 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 || self.thin == 0 {
            return Err(Error::InvalidArgument("n_samples and thin must be positive"));
        }
        if !(self.step_mu > 0.0 && self.step_log_kappa > 0.0) || !self.step_mu.is_finite() || !self.step_log_kappa.is_finite() {
            return Err(Error::InvalidArgument("proposal scales must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct McmcChain {
    pub points: Vec<AmbientPoint>,
    pub acceptance_mu: f64,
    pub acceptance_kappa: f64,
}

/// Component-wise random-walk Metropolis for the paleomagnetic posterior.
///
/// The `μ` move adds isotropic Gaussian noise in `ℝ³` and renormalizes, a
/// proposal that depends on `μᵀμ′` only and is therefore symmetric. The `κ`
/// move is log-normal and carries the `κ′/κ` correction. Proposals in the
/// polar band are rejected. The chain starts at `(μ_n, κ_mode)`.
pub fn rw_metropolis_sphere_kappa(target: &PaleoPosterior, cfg: &McmcConfig, seed: RngSeed) -> Result<McmcChain> {
    cfg.validate()?;
    let mut rng = seed.rng();
    let mut mu = target.mun();
    let mut kappa = target.kappa_mode().max(1e-3);
    let log_pi = |mu: &[f64; 3], kappa: f64| target.eval(&[mu[0], mu[1], mu[2], kappa]);
    let mut lp = log_pi(&mu, kappa)?;
    let total = cfg.burn_in + cfg.n_samples * cfg.thin;
    let (mut acc_mu, mut acc_kappa) = (0usize, 0usize);
    let mut points = Vec::with_capacity(cfg.n_samples);
    for it in 0..total {
        let prop = normalize([
            mu[0] + cfg.step_mu * normal(&mut rng),
            mu[1] + cfg.step_mu * normal(&mut rng),
            mu[2] + cfg.step_mu * normal(&mut rng),
        ]);
        let u: f64 = rng.random();
        if prop[2].abs() < 1.0 - POLAR_BAND {
            let lp_new = log_pi(&prop, kappa)?;
            if libm::log(u) < lp_new - lp {
                mu = prop;
                lp = lp_new;
                acc_mu += 1;
            }
        }

        let step = cfg.step_log_kappa * normal(&mut rng);
        let kappa_new = kappa * libm::exp(step);
        let u: f64 = rng.random();
        if kappa_new > 0.0 && kappa_new.is_finite() {
            let lp_new = log_pi(&mu, kappa_new)?;
            if libm::log(u) < lp_new - lp + step {
                kappa = kappa_new;
                lp = lp_new;
                acc_kappa += 1;
            }
        }

        if it >= cfg.burn_in && (it - cfg.burn_in) % cfg.thin == 0 {
            points.push(AmbientPoint::from_raw(vec![mu[0], mu[1], mu[2], kappa]));
        }
    }
    Ok(McmcChain {
        points,
        acceptance_mu: acc_mu as f64 / total as f64,
        acceptance_kappa: acc_kappa as f64 / total as f64,
    })
}

/// Number of trapezoid cells used to invert the concentration heuristic.
pub const KAPPA_CDF_CELLS: usize = 4000;

/// Quantiles of the concentration heuristic on `(0, κ_max]`, by inverting a
/// trapezoid CDF with `cells` cells. Within a cell the density is linear,
/// so the CDF is quadratic and inverted exactly.
pub fn kappa_quantiles(target: &PaleoPosterior, probs: &[f64], cells: usize) -> Result<Vec<f64>> {
    if cells == 0 || probs.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
        return Err(Error::InvalidArgument("probabilities must lie in (0, 1)"));
    }
    let kmax = target.kappa_max();
    let h = kmax / cells as f64;
    let top = target.log_kappa_heuristic_unnormalized(target.kappa_mode());
    let dens: Vec<f64> =
        (0..=cells).map(|j| libm::exp(target.log_kappa_heuristic_unnormalized(j as f64 * h) - top)).collect();
    let mut cdf = vec![0.0; cells + 1];
    for j in 0..cells {
        cdf[j + 1] = cdf[j] + 0.5 * h * (dens[j] + dens[j + 1]);
    }
    let mass = cdf[cells];
    Ok(probs
        .iter()
        .map(|p| {
            let m = p * mass;
            let j = cdf.partition_point(|c| *c <= m).clamp(1, cells) - 1;
            let rem = m - cdf[j];
            let (fa, slope) = (dens[j], (dens[j + 1] - dens[j]) / h);
            let disc = (fa * fa + 2.0 * slope * rem).max(0.0);
            let t = if fa + libm::sqrt(disc) > 0.0 { 2.0 * rem / (fa + libm::sqrt(disc)) } else { 0.0 };
            let k = j as f64 * h + t.clamp(0.0, h);
            k.clamp(f64::MIN_POSITIVE, kmax * (1.0 - f64::EPSILON))
        })
        .collect())
}

/// Smallest `m` with `m³ ≥ v`.
fn icbrt_ceil(v: u128) -> usize {
    let mut m = libm::cbrt(v as f64) as u128;
    while m * m * m < v {
        m += 1;
    }
    while m > 0 && (m - 1) * (m - 1) * (m - 1) >= v {
        m -= 1;
    }
    m as usize
}

/// Sizes `(⌈n^{2/3}⌉, ⌈n^{1/3}⌉)` of the tensor design.
pub fn tensor_design_sizes(n: usize) -> (usize, usize) {
    (icbrt_ceil((n as u128) * (n as u128)), icbrt_ceil(n as u128))
}

/// Quasi-uniform sphere points tensored with concentration quantiles
/// `j / (m + 1)` of the heuristic marginal.
pub fn paleo_stratified_tensor(target: &PaleoPosterior, n: usize, seed: RngSeed) -> Result<Vec<AmbientPoint>> {
    if n < 8 {
        return Err(Error::InvalidArgument("tensor design needs n >= 8"));
    }
    let (ms, mk) = tensor_design_sizes(n);
    let sphere = riesz_quasi_uniform_sphere(ms, 200, seed)?;
    let probs: Vec<f64> = (1..=mk).map(|j| j as f64 / (mk + 1) as f64).collect();
    let kappas = kappa_quantiles(target, &probs, KAPPA_CDF_CELLS)?;
    let mut out = Vec::with_capacity(ms * mk);
    for p in &sphere {
        for &k in &kappas {
            let c = p.coords();
            out.push(AmbientPoint::from_raw(vec![c[0], c[1], c[2], k]));
        }
    }
    Ok(out)
}

/// How importance weights enter the estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImportanceMode {
    /// `(1/n) Σ fᵢ exp(ℓᵢ)` with `ℓᵢ = log(π/q)` for normalized densities.
    Ratio,
    /// `Σ fᵢ πᵢ / Σ πᵢ` with unnormalized log weights.
    SelfNormalized,
}

pub fn importance_sampling_estimate(f: &[f64], log_weights: &[f64], mode: ImportanceMode) -> Result<f64> {
    if f.len() != log_weights.len() {
        return Err(Error::Dimension { expected: f.len(), got: log_weights.len() });
    }
    if f.is_empty() {
        return Err(Error::DegenerateWeights);
    }
    if log_weights.iter().any(|w| w.is_nan() || *w == f64::INFINITY) {
        return Err(Error::DegenerateWeights);
    }
    match mode {
        ImportanceMode::Ratio => {
            let s: f64 = f.iter().zip(log_weights).map(|(v, w)| v * libm::exp(*w)).sum();
            Ok(s / f.len() as f64)
        }
        ImportanceMode::SelfNormalized => {
            let top = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if top == f64::NEG_INFINITY {
                return Err(Error::DegenerateWeights);
            }
            let (mut num, mut den) = (0.0, 0.0);
            for (v, w) in f.iter().zip(log_weights) {
                let e = libm::exp(w - top);
                num += v * e;
                den += e;
            }
            if !(den > 0.0) || !den.is_finite() {
                return Err(Error::DegenerateWeights);
            }
            Ok(num / den)
        }
    }
}

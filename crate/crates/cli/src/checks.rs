//! Oracle and invariant checks behind the `check` subcommand.
//!
//! Every check compares an automatic-differentiation or linear-algebra
//! result with an independent route: quadrature, finite differences or a
//! closed form. Outcomes are plain data so that callers can print, store or
//! assert on them.

use std::f64::consts::PI;

use rayon::prelude::*;
use riemann_stein::jets::{seed_nested, Jet2, NestedJet, Scalar};
use riemann_stein::kernels::{HalfInteger, Kernel, KernelSpec};
use riemann_stein::manifolds::{apply_second_order_stein, AmbientPoint, ManifoldKind, ScalarField};
use riemann_stein::oracle::{
    expectations, fd_stein_kernel, fd_stein_operator, finite_difference, integrate, stein_identity_check, vmf_mean_resultant,
    QuadratureGrid,
};
use riemann_stein::points::{gaussian_iid, riesz_quasi_uniform_sphere, synthetic_pole_fixture, RngSeed};
use riemann_stein::stein::{SteinGram, SteinKernel, SteinOperator};
use riemann_stein::targets::{GaussianTarget, PaleoPosterior, Target, VonMisesFisherTarget};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::experiments::paleo_oracle_grid;
use crate::io::{fmt_f64, write_table, Metadata, Table};

pub const CHECK_REPORT: &str = "check_report.csv";
const REPORT_COLUMNS: [&str; 5] = ["check", "status", "value", "bound", "kind"];

pub const IDENTITY_TOL: f64 = 1e-6;
pub const AD_TOL: f64 = 1e-4;
pub const LIMIT_SUM_TOL: f64 = 1e-10;
pub const LIMIT_SIGMA_TOL: f64 = 1e-6;
pub const LIMIT_WCE_TOL: f64 = 1e-8;
/// The identity must already hold on the halved grid.
pub const GRID_CONVERGENCE_TOL: f64 = IDENTITY_TOL;

/// How `value` is compared with `bound`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bound {
    /// Passes when `value < bound`.
    Below,
    /// Passes when `value > bound`.
    Above,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub kind: Bound,
    pub passed: bool,
}

impl CheckOutcome {
    pub fn below(name: impl Into<String>, value: f64, bound: f64) -> Self {
        CheckOutcome { name: name.into(), value, bound, kind: Bound::Below, passed: value < bound }
    }

    pub fn above(name: impl Into<String>, value: f64, bound: f64) -> Self {
        CheckOutcome { name: name.into(), value, bound, kind: Bound::Above, passed: value > bound }
    }

    fn errored(name: impl Into<String>) -> Self {
        CheckOutcome { name: name.into(), value: f64::NAN, bound: f64::NAN, kind: Bound::Below, passed: false }
    }

    /// `PASS name value=… bound<…`.
    pub fn line(&self) -> String {
        let op = if self.kind == Bound::Below { "<" } else { ">" };
        format!(
            "{} {} value={} {op} {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            fmt_f64(self.value),
            fmt_f64(self.bound)
        )
    }
}

fn settle(name: &str, r: Result<Vec<CheckOutcome>, CliError>) -> Vec<CheckOutcome> {
    r.unwrap_or_else(|e| {
        let mut o = CheckOutcome::errored(name);
        o.name = format!("{name} (error: {e})");
        vec![o]
    })
}

// ---------------------------------------------------------------- identity

fn matern72() -> KernelSpec {
    KernelSpec::Matern { lambda: 1.0, ell: 1.0, alpha: HalfInteger::plus_half(3) }
}

fn sobolev72() -> KernelSpec {
    KernelSpec::SobolevSphere { alpha: HalfInteger::plus_half(3), m: 2 }
}

fn vmf_target() -> Target {
    Target::VonMisesFisher(VonMisesFisherTarget::new([1.0, 0.0, 0.0]).expect("valid"))
}

fn gaussian_target(d: usize) -> Target {
    Target::Gaussian(GaussianTarget::new(d).expect("valid"))
}

pub fn synthetic_posterior() -> PaleoPosterior {
    PaleoPosterior::with_flat_prior(synthetic_pole_fixture()).expect("fixture is valid")
}

/// One identity case: a Stein kernel, three evaluation points and a grid
/// builder taking a refinement level (`1` full, `2` halved).
struct IdentityCase<L> {
    name: &'static str,
    kernel: SteinKernel<L>,
    log_pi: L,
    y0: Vec<Vec<f64>>,
    grid: Box<dyn Fn(&[f64], usize) -> QuadratureGrid + Sync>,
}

fn r1_case() -> IdentityCase<Target> {
    IdentityCase {
        name: "r1_gaussian_matern72",
        kernel: SteinKernel::for_target(gaussian_target(1), matern72(), SteinOperator::SecondOrder).expect("valid"),
        log_pi: gaussian_target(1),
        y0: vec![vec![-1.3], vec![0.2], vec![0.9]],
        grid: Box::new(|y0, r| QuadratureGrid::euclidean_1d_split(y0[0], 14.0, 20 / r, 20)),
    }
}

fn r2_case() -> IdentityCase<Target> {
    IdentityCase {
        name: "r2_gaussian_matern72",
        kernel: SteinKernel::for_target(gaussian_target(2), matern72(), SteinOperator::SecondOrder).expect("valid"),
        log_pi: gaussian_target(2),
        y0: vec![vec![0.3, -0.5], vec![1.1, 0.4], vec![-0.7, -0.2]],
        grid: Box::new(|y0, r| {
            let c = [y0[0], y0[1]];
            QuadratureGrid::euclidean_2d_polar(c, c[0].hypot(c[1]) + 12.0, 24 / r, 16, 96 / r)
        }),
    }
}

fn s2_case() -> IdentityCase<Target> {
    IdentityCase {
        name: "s2_vmf_sobolev72",
        kernel: SteinKernel::for_target(vmf_target(), sobolev72(), SteinOperator::SecondOrder).expect("valid"),
        log_pi: vmf_target(),
        y0: vec![vec![0.6, 0.0, 0.8], vec![-0.48, 0.6, 0.64], vec![0.0, -0.6, -0.8]],
        grid: Box::new(|y0, r| {
            let panels = 16 / r;
            let breaks: Vec<f64> = (0..=panels).map(|i| PI * i as f64 / panels as f64).collect();
            QuadratureGrid::sphere_around([y0[0], y0[1], y0[2]], &breaks, 12, 96 / r)
        }),
    }
}

fn paleo_y0(post: &PaleoPosterior) -> Vec<Vec<f64>> {
    let m = post.mun();
    [([0.03, 0.0, 0.0], 28.0), ([0.0, -0.05, 0.0], 45.0), ([0.02, 0.02, 0.0], 60.0)]
        .iter()
        .map(|(d, k)| {
            AmbientPoint::on_sphere_cross_rplus([m[0] + d[0], m[1] + d[1], m[2] + d[2]], *k).expect("valid").into_coords()
        })
        .collect()
}

fn paleo_case() -> IdentityCase<Target> {
    let post = synthetic_posterior();
    let target = Target::Paleo(post.clone());
    IdentityCase {
        name: "paleo_synthetic_arctan_rbf",
        kernel: SteinKernel::for_target(target.clone(), KernelSpec::PaleoArctanRbf, SteinOperator::SecondOrder).expect("valid"),
        log_pi: target,
        y0: paleo_y0(&post),
        grid: Box::new(move |_, r| {
            if r == 1 {
                return paleo_oracle_grid(&post);
            }
            let (lo, hi) = post.kappa_range(40.0);
            let theta = [0.0, 0.025, 0.05, 0.1, 0.2, 0.4, 0.8, 1.6, PI];
            let sphere = QuadratureGrid::sphere_around(post.mun(), &theta, 8, 8);
            let kb: Vec<f64> = (0..=15).map(|i| lo + (hi - lo) * i as f64 / 15.0).collect();
            QuadratureGrid::sphere_cross_rplus(&sphere, &kb, 12)
        }),
    }
}

/// `(full-grid ratio, |full − half| / k_π(y₀, y₀))` at each `y₀`.
fn identity_ratios<L: ScalarField + Sync>(case: &IdentityCase<L>) -> Result<Vec<(f64, f64)>, CliError> {
    case.y0
        .par_iter()
        .map(|y0| {
            let run = |r: usize| {
                stein_identity_check(&(case.grid)(y0, r), |x| case.log_pi.eval(x), |x, y| case.kernel.eval_coords(x, y), y0)
            };
            let full = run(1)?;
            let half = run(2)?;
            Ok((full.ratio, (full.integral - half.integral).abs() / full.diagonal))
        })
        .collect()
}

fn identity_outcomes<L: ScalarField + Sync>(case: &IdentityCase<L>) -> Vec<CheckOutcome> {
    let name = format!("identity/{}", case.name);
    settle(
        &name,
        identity_ratios(case).map(|v| {
            v.iter()
                .enumerate()
                .flat_map(|(i, (ratio, drift))| {
                    [
                        CheckOutcome::below(format!("{name}/y{i}"), *ratio, IDENTITY_TOL),
                        CheckOutcome::below(format!("{name}/y{i}/grid_convergence"), *drift, GRID_CONVERGENCE_TOL),
                    ]
                })
                .collect()
        }),
    )
}

/// Stein identity on every supported manifold.
pub fn identity_checks() -> Vec<CheckOutcome> {
    [r1_case(), r2_case(), s2_case(), paleo_case()].iter().flat_map(identity_outcomes).collect()
}

/// `log π` with its score scaled by `factor`, i.e. the target `π^factor`.
struct ScaledScore<L> {
    inner: L,
    factor: f64,
}

impl<L: ScalarField> ScalarField for ScaledScore<L> {
    fn eval<T: Scalar>(&self, x: &[T]) -> riemann_stein::Result<T> {
        Ok(self.inner.eval(x)? * self.factor)
    }
}

/// The identity check must reject a Stein kernel whose operator uses the
/// wrong score. Returns the ratio the check sees.
pub fn mutated_identity_ratio(factor: f64) -> Result<f64, CliError> {
    let case = s2_case();
    let kernel = SteinKernel::new(
        ManifoldKind::Sphere2,
        ScaledScore { inner: vmf_target(), factor },
        sobolev72(),
        SteinOperator::SecondOrder,
    )?;
    let y0 = &case.y0[0];
    let r = stein_identity_check(&(case.grid)(y0, 1), |x| case.log_pi.eval(x), |x, y| kernel.eval_coords(x, y), y0)?;
    Ok(r.ratio)
}

pub fn mutation_checks() -> Vec<CheckOutcome> {
    settle(
        "mutation/doubled_score",
        mutated_identity_ratio(2.0).map(|r| vec![CheckOutcome::above("mutation/doubled_score_is_detected", r, 1e3 * IDENTITY_TOL)]),
    )
}

// ---------------------------------------------------------------- AD

fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
    v.iter().map(|c| c / n).collect()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

#[derive(Clone, Copy)]
enum Space {
    Euclidean(usize),
    Sphere,
    SphereCrossRPlus,
}

/// Deterministic point pairs at distance above 0.2, away from the poles.
fn random_pairs(space: Space, count: usize, seed: u64) -> Result<Vec<(Vec<f64>, Vec<f64>)>, CliError> {
    let d = match space {
        Space::Euclidean(d) => d,
        Space::Sphere => 3,
        Space::SphereCrossRPlus => 4,
    };
    let raw = gaussian_iid(d, 8 * count, &vec![0.0; d], 1.0, RngSeed::new(seed, 0))?;
    let map = |p: &AmbientPoint| -> Vec<f64> {
        let c = p.coords();
        match space {
            Space::Euclidean(_) => c.to_vec(),
            Space::Sphere => unit(c),
            Space::SphereCrossRPlus => {
                let mut v = unit(&c[..3]);
                v.push(0.5 + 3.5 / (1.0 + (-c[3]).exp()));
                v
            }
        }
    };
    let pts: Vec<Vec<f64>> = raw.iter().map(map).filter(|v| matches!(space, Space::Euclidean(_)) || v[2].abs() < 0.95).collect();
    let mut out = Vec::new();
    for pair in pts.chunks_exact(2) {
        if out.len() == count {
            break;
        }
        if dist(&pair[0], &pair[1]) > 0.2 {
            out.push((pair[0].clone(), pair[1].clone()));
        }
    }
    if out.len() < count {
        return Err(CliError::Data("not enough random pairs".into()));
    }
    Ok(out)
}

/// Derivative orders `(in x, in y)` compared against finite differences.
pub const KERNEL_ORDERS: [(usize, usize); 5] = [(1, 0), (2, 0), (1, 1), (2, 1), (2, 2)];

/// The nested-jet component for `∂x^{ix} ∂y^{iy}` (each of length ≤ 2).
fn component<const S: usize>(jet: &NestedJet<S>, ix: &[usize], iy: &[usize]) -> f64 {
    let outer: &Jet2<f64, S> = match ix {
        [] => &jet.value,
        [i] => &jet.grad[*i],
        [i, j] => &jet.hess[*i][*j],
        _ => unreachable!(),
    };
    match iy {
        [] => outer.value,
        [k] => outer.grad[*k],
        [k, l] => outer.hess[*k][*l],
        _ => unreachable!(),
    }
}

/// Sorted index tuples of length `order` over `0..s`.
fn tuples(s: usize, order: usize) -> Vec<Vec<usize>> {
    match order {
        0 => vec![vec![]],
        1 => (0..s).map(|i| vec![i]).collect(),
        _ => (0..s).flat_map(|i| (i..s).map(move |j| vec![i, j])).collect(),
    }
}

/// Finite differences at `h` and `h/2` combined to cancel the `h⁴` term of
/// the five-point stencils; needed for third and fourth mixed derivatives.
fn richardson_fd(g: impl Fn(&[f64]) -> riemann_stein::Result<f64> + Copy, at: &[f64], idx: &[usize], h: f64) -> Result<f64, CliError> {
    let coarse = finite_difference(g, at, idx, h)?;
    let fine = finite_difference(g, at, idx, 0.5 * h)?;
    Ok((16.0 * fine - coarse) / 15.0)
}

/// Worst relative AD-vs-FD error of kernel derivatives at each order.
fn kernel_order_errors<const S: usize>(k: &Kernel, space: Space, pairs: usize) -> Result<Vec<f64>, CliError> {
    let joint = |z: &[f64]| k.eval::<f64>(&z[..S], &z[S..]);
    let per_pair: Vec<Vec<f64>> = random_pairs(space, pairs, 17)?
        .par_iter()
        .map(|(x, y)| -> Result<Vec<f64>, CliError> {
            let (xs, ys) = seed_nested::<S>(x.as_slice().try_into().expect("dim"), y.as_slice().try_into().expect("dim"));
            let jet: NestedJet<S> = k.eval(&xs, &ys)?;
            let z: Vec<f64> = x.iter().chain(y).cloned().collect();
            KERNEL_ORDERS
                .iter()
                .map(|&(ox, oy)| {
                    let mut cases = Vec::new();
                    for ix in tuples(S, ox) {
                        for iy in tuples(S, oy) {
                            let ad = component(&jet, &ix, &iy);
                            let idx: Vec<usize> = ix.iter().cloned().chain(iy.iter().map(|j| S + j)).collect();
                            let fd = if ox + oy <= 2 {
                                finite_difference(joint, &z, &idx, 1e-3)?
                            } else {
                                richardson_fd(joint, &z, &idx, 4e-2)?
                            };
                            cases.push((ad, fd));
                        }
                    }
                    let scale = cases.iter().fold(0.0f64, |m, (ad, _)| m.max(ad.abs()));
                    Ok(cases.iter().fold(0.0f64, |m, (ad, fd)| m.max((ad - fd).abs() / ad.abs().max(1e-3 * scale))))
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;
    Ok((0..KERNEL_ORDERS.len()).map(|o| per_pair.iter().fold(0.0f64, |m, v| m.max(v[o]))).collect())
}

fn kernel_outcomes<const S: usize>(label: &str, spec: KernelSpec, space: Space) -> Vec<CheckOutcome> {
    let name = format!("ad/kernel/{label}");
    settle(
        &name,
        spec.build().map_err(CliError::from).and_then(|k| kernel_order_errors::<S>(&k, space, 20)).map(|errs| {
            KERNEL_ORDERS
                .iter()
                .zip(errs)
                .map(|((ox, oy), e)| CheckOutcome::below(format!("{name}/order_{ox}{oy}"), e, AD_TOL))
                .collect()
        }),
    )
}

/// Worst relative error of the gradient and Hessian of `log π`.
fn log_density_errors<const S: usize>(target: &Target, space: Space) -> Result<[f64; 2], CliError> {
    let f = |z: &[f64]| target.eval::<f64>(z);
    let mut worst = [0.0f64; 2];
    for (x, _) in random_pairs(space, 20, 5)? {
        let jet: Jet2<f64, S> = target.eval(&Jet2::seed(x.as_slice().try_into().expect("dim")))?;
        let scale = jet.grad.iter().chain(jet.hess.iter().flatten()).fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..S {
            let fd = finite_difference(f, &x, &[i], 1e-3)?;
            worst[0] = worst[0].max((jet.grad[i] - fd).abs() / jet.grad[i].abs().max(1e-3 * scale));
        }
        for i in 0..S {
            for j in i..S {
                let fd = finite_difference(f, &x, &[i, j], 1e-3)?;
                let ad = jet.hess[i][j];
                worst[1] = worst[1].max((ad - fd).abs() / ad.abs().max(1e-3 * scale));
            }
        }
    }
    Ok(worst)
}

fn log_density_outcomes<const S: usize>(label: &str, target: Target, space: Space) -> Vec<CheckOutcome> {
    let name = format!("ad/log_density/{label}");
    settle(
        &name,
        log_density_errors::<S>(&target, space).map(|[g, h]| {
            vec![
                CheckOutcome::below(format!("{name}/gradient"), g, AD_TOL),
                CheckOutcome::below(format!("{name}/hessian"), h, AD_TOL),
            ]
        }),
    )
}

/// Jet derivatives of every kernel and log-density against finite differences.
pub fn ad_checks() -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    for a in 1..=3 {
        let spec = KernelSpec::Matern { lambda: 1.0, ell: 1.0, alpha: HalfInteger::plus_half(a) };
        out.extend(kernel_outcomes::<1>(&format!("matern_{a}.5_d1"), spec, Space::Euclidean(1)));
        out.extend(kernel_outcomes::<2>(&format!("matern_{a}.5_d2"), spec, Space::Euclidean(2)));
    }
    for a in 3..=5 {
        let spec = KernelSpec::SobolevSphere { alpha: HalfInteger::plus_half(a), m: 2 };
        out.extend(kernel_outcomes::<3>(&format!("sobolev_{a}.5"), spec, Space::Sphere));
    }
    out.extend(kernel_outcomes::<4>("paleo_arctan_rbf", KernelSpec::PaleoArctanRbf, Space::SphereCrossRPlus));

    out.extend(log_density_outcomes::<1>("gaussian_d1", gaussian_target(1), Space::Euclidean(1)));
    out.extend(log_density_outcomes::<2>("gaussian_d2", gaussian_target(2), Space::Euclidean(2)));
    let vmf = Target::VonMisesFisher(VonMisesFisherTarget::new([1.0, -0.5, 2.0]).expect("valid"));
    out.extend(log_density_outcomes::<3>("vmf", vmf, Space::Sphere));
    out.extend(log_density_outcomes::<4>("paleo_synthetic", Target::Paleo(synthetic_posterior()), Space::SphereCrossRPlus));
    out
}

/// Stein kernels built from jets against nested finite differences of the
/// operator in local coordinates.
pub fn stein_kernel_checks() -> Vec<CheckOutcome> {
    let p = |v: [f64; 3]| AmbientPoint::on_sphere(v).expect("valid").into_coords();
    let pk = |v: [f64; 3], k: f64| AmbientPoint::on_sphere_cross_rplus(v, k).expect("valid").into_coords();
    let cases: Vec<(&str, Target, KernelSpec, Vec<(Vec<f64>, Vec<f64>)>)> = vec![
        ("r1", gaussian_target(1), matern72(), vec![(vec![-0.8], vec![0.3]), (vec![0.1], vec![1.7]), (vec![1.2], vec![1.25])]),
        ("s2", vmf_target(), sobolev72(), vec![(p([0.3, 0.5, 0.2]), p([-0.4, 0.1, 0.6])), (p([0.9, -0.2, -0.3]), p([0.1, 0.8, 0.1]))]),
        (
            "paleo",
            Target::Paleo(synthetic_posterior()),
            KernelSpec::PaleoArctanRbf,
            vec![(pk([0.6, 0.0, 0.8], 2.0), pk([0.0, 0.6, 0.8], 1.5)), (pk([0.5, -0.5, 0.2], 0.7), pk([0.4, -0.6, 0.1], 3.0))],
        ),
    ];
    cases
        .into_iter()
        .flat_map(|(label, target, spec, pairs)| {
            let name = format!("stein_kernel/{label}");
            let r = (|| -> Result<Vec<CheckOutcome>, CliError> {
                let sk = SteinKernel::for_target(target, spec, SteinOperator::SecondOrder)?;
                let k = spec.build()?;
                let lp = |x: &[f64]| sk.target().eval(x);
                let kf = |x: &[f64], y: &[f64]| k.eval(x, y);
                let mut worst = 0.0f64;
                for (x, y) in &pairs {
                    let ad = sk.eval_coords(x, y)?;
                    let fd = fd_stein_kernel(sk.manifold(), lp, kf, x, y, 1e-3, 1e-2)?;
                    worst = worst.max((ad - fd).abs() / ad.abs().max(1e-3));
                }
                Ok(vec![CheckOutcome::below(name.clone(), worst, AD_TOL)])
            })();
            settle(&name, r)
        })
        .collect()
}

// ---------------------------------------------------------------- estimator

/// Limit-estimator mechanics on `𝕊²` at one `n`.
pub fn limit_errors(n: usize) -> Result<[f64; 3], CliError> {
    let sk = SteinKernel::for_target(vmf_target(), sobolev72(), SteinOperator::SecondOrder)?;
    let pts = if n == 1 {
        vec![AmbientPoint::on_sphere([0.3, -0.4, 0.5])?]
    } else {
        riesz_quasi_uniform_sphere(n, 100, RngSeed::new(5, 0))?
    };
    let g = SteinGram::assemble(&sk, &pts)?;
    let f: Vec<f64> = pts.iter().map(|p| p.coords()[0]).collect();
    let lim = g.solve_limit_estimator(&f)?;
    let sum_err = (lim.weights.iter().sum::<f64>() - 1.0).abs();
    let big = g.finite_sigma_estimate(&f, 1e8)?;
    let sigma_err = (big.estimate - lim.estimate).abs() / lim.estimate.abs().max(f64::MIN_POSITIVE);
    let wce_err = (g.quadratic_form(&lim.weights)?.sqrt() - lim.wce).abs() / lim.wce;
    Ok([sum_err, sigma_err, wce_err])
}

pub fn limit_checks() -> Vec<CheckOutcome> {
    [1usize, 2, 8, 64]
        .iter()
        .flat_map(|&n| {
            let name = format!("limit/n{n}");
            settle(
                &name,
                limit_errors(n).map(|[s, g, w]| {
                    vec![
                        CheckOutcome::below(format!("{name}/weights_sum_to_one"), s, LIMIT_SUM_TOL),
                        CheckOutcome::below(format!("{name}/large_sigma_matches_limit"), g, LIMIT_SIGMA_TOL),
                        CheckOutcome::below(format!("{name}/wce_is_quadratic_form"), w, LIMIT_WCE_TOL),
                    ]
                }),
            )
        })
        .collect()
}

// ---------------------------------------------------------------- oracle

struct X3;

impl ScalarField for X3 {
    fn eval<T: Scalar>(&self, x: &[T]) -> riemann_stein::Result<T> {
        Ok(x[2])
    }
}

struct Flat;

impl ScalarField for Flat {
    fn eval<T: Scalar>(&self, x: &[T]) -> riemann_stein::Result<T> {
        Ok(x[0] * 0.0)
    }
}

/// Quadrature and finite-difference oracles against closed forms.
pub fn oracle_checks() -> Vec<CheckOutcome> {
    let r = (|| -> Result<Vec<CheckOutcome>, CliError> {
        let grid = QuadratureGrid::sphere(64, 48);
        let area = integrate(&grid, |_| Ok(1.0))?;
        let flat = |_: &[f64]| Ok(0.0);
        let x3sq = |x: &[f64]| Ok(x[2] * x[2]);
        let m2 = expectations(&grid, flat, &[&x3sq])?[0];
        let vmf = VonMisesFisherTarget::new([1.0, 0.0, 0.0])?;
        let x1 = |x: &[f64]| Ok(x[0]);
        let mean = expectations(&grid, |x| vmf.eval(x), &[&x1])?[0];
        let at = AmbientPoint::on_sphere([0.6, 0.39f64.sqrt(), 0.5])?;
        let ad = apply_second_order_stein(ManifoldKind::Sphere2, &Flat, &X3, &at)?;
        let fd = fd_stein_operator(ManifoldKind::Sphere2, |x| Flat.eval(x), |x| X3.eval(x), at.coords(), 1e-2)?;
        Ok(vec![
            CheckOutcome::below("oracle/sphere_area", (area - 4.0 * PI).abs(), 1e-12),
            CheckOutcome::below("oracle/uniform_x3_squared", (m2 - 1.0 / 3.0).abs(), 1e-12),
            CheckOutcome::below("oracle/vmf_mean", (mean - vmf_mean_resultant(1.0)).abs(), 1e-12),
            CheckOutcome::below("oracle/laplacian_of_x3_ad", (ad + 1.0).abs(), 1e-12),
            CheckOutcome::below("oracle/laplacian_of_x3_fd", (fd + 1.0).abs(), 1e-8),
        ])
    })();
    settle("oracle", r)
}

// ---------------------------------------------------------------- suite

/// Every check, in a fixed order.
pub fn run_all() -> Vec<CheckOutcome> {
    let mut out = identity_checks();
    out.extend(mutation_checks());
    out.extend(ad_checks());
    out.extend(stein_kernel_checks());
    out.extend(limit_checks());
    out.extend(oracle_checks());
    out
}

pub fn report_table(outcomes: &[CheckOutcome]) -> Table {
    let mut t = Table::new(&REPORT_COLUMNS);
    for o in outcomes {
        t.push(vec![
            o.name.clone(),
            if o.passed { "PASS" } else { "FAIL" }.into(),
            fmt_f64(o.value),
            fmt_f64(o.bound),
            if o.kind == Bound::Below { "below" } else { "above" }.into(),
        ]);
    }
    t
}

pub fn report_metadata() -> Metadata {
    let mut m = Metadata::default();
    m.push("generator", concat!("riemann-stein-cli ", env!("CARGO_PKG_VERSION")));
    m.push("command", "check");
    m
}

/// Runs the suite, prints one line per check and writes the report under
/// `cfg.out`. Fails with [`CliError::ChecksFailed`] if any check fails.
pub fn cmd_check(cfg: &RunConfig) -> Result<Vec<CheckOutcome>, CliError> {
    let outcomes = run_all();
    for o in &outcomes {
        println!("{}", o.line());
    }
    write_table(&cfg.out.join(CHECK_REPORT), &report_metadata(), &report_table(&outcomes))?;
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    if failed > 0 {
        return Err(CliError::ChecksFailed { failed, total: outcomes.len() });
    }
    Ok(outcomes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outcome_lines_are_machine_readable() {
        let o = CheckOutcome::below("a/b", 0.5, 1.0);
        assert!(o.passed);
        assert_eq!(o.line(), "PASS a/b value=5.0000000000000000e-1 < 1.0000000000000000e0");
        let o = CheckOutcome::above("c", 0.5, 1.0);
        assert!(!o.passed && o.line().starts_with("FAIL c "));
        assert!(!CheckOutcome::below("nan", f64::NAN, 1.0).passed);
    }

    #[test]
    fn index_tuples_cover_symmetric_orders() {
        assert_eq!(tuples(3, 0), vec![Vec::<usize>::new()]);
        assert_eq!(tuples(3, 1).len(), 3);
        assert_eq!(tuples(3, 2).len(), 6);
    }

    #[test]
    fn random_pairs_are_separated_and_reproducible() {
        let a = random_pairs(Space::SphereCrossRPlus, 20, 3).unwrap();
        assert_eq!(a, random_pairs(Space::SphereCrossRPlus, 20, 3).unwrap());
        for (x, y) in &a {
            assert!(dist(x, y) > 0.2 && x[3] > 0.5 && x[2].abs() < 0.95);
        }
    }
}

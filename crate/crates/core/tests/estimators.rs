use nalgebra::{DMatrix, DVector};
use riemann_stein::kernels::{HalfInteger, KernelSpec};
use riemann_stein::manifolds::{AmbientPoint, ScalarField};
use riemann_stein::oracle::{expectations, QuadratureGrid};
use riemann_stein::points::{riesz_quasi_uniform_sphere, RngSeed};
use riemann_stein::stein::{nystrom_extend, SigmaMode, SteinGram, SteinKernel, SteinOperator};
use riemann_stein::targets::{Target, VonMisesFisherTarget};

fn sphere_kernel(alpha: u32) -> SteinKernel {
    SteinKernel::for_target(
        Target::VonMisesFisher(VonMisesFisherTarget::new([1.0, 0.0, 0.0]).unwrap()),
        KernelSpec::SobolevSphere { alpha: HalfInteger::plus_half(alpha), m: 2 },
        SteinOperator::SecondOrder,
    )
    .unwrap()
}

fn sphere_points(n: usize, seed: u64) -> Vec<AmbientPoint> {
    if n == 1 {
        return vec![AmbientPoint::on_sphere([0.3, -0.4, 0.5]).unwrap()];
    }
    riesz_quasi_uniform_sphere(n, 100, RngSeed::new(seed, 0)).unwrap()
}

fn gram(sk: &SteinKernel, pts: &[AmbientPoint]) -> SteinGram {
    SteinGram::assemble(sk, pts).unwrap()
}

fn dense(g: &SteinGram) -> DMatrix<f64> {
    let n = g.n();
    DMatrix::from_fn(n, n, |i, j| g.entry(i, j) + if i == j { g.jitter_used() } else { 0.0 })
}

fn x1(pts: &[AmbientPoint]) -> Vec<f64> {
    pts.iter().map(|p| p.coords()[0]).collect()
}

#[test]
fn limit_estimator_mechanics_on_the_sphere() {
    let sk = sphere_kernel(3);
    for n in [1usize, 2, 8, 64] {
        let pts = sphere_points(n, 5);
        let g = gram(&sk, &pts);
        let f = x1(&pts);
        let lim = g.solve_limit_estimator(&f).unwrap();
        let sum: f64 = lim.weights.iter().sum();
        assert!((sum - 1.0).abs() < 1e-10, "n = {n}: sum {sum}");

        let big = g.finite_sigma_estimate(&f, 1e8).unwrap();
        let rel = (big.estimate - lim.estimate).abs() / lim.estimate.abs().max(1e-300);
        assert!(rel < 1e-6, "n = {n}: {} vs {}", big.estimate, lim.estimate);

        let direct = g.quadratic_form(&lim.weights).unwrap().sqrt();
        assert!((direct - lim.wce).abs() <= 1e-8 * lim.wce, "n = {n}: {direct} vs {}", lim.wce);
    }
}

#[test]
fn finite_sigma_matches_a_dense_solve() {
    let sk = sphere_kernel(3);
    let pts = sphere_points(8, 11);
    let g = gram(&sk, &pts);
    let f: Vec<f64> = pts.iter().map(|p| p.coords()[0] * p.coords()[1] + p.coords()[2]).collect();
    let sigma = 3.0;
    let est = g.finite_sigma_estimate(&f, sigma).unwrap().estimate;

    let k = dense(&g).add_scalar(sigma * sigma);
    let w = k.lu().solve(&DVector::from_vec(f.clone())).unwrap();
    let oracle = sigma * sigma * w.sum();
    assert!((est - oracle).abs() <= 1e-10 * oracle.abs().max(1.0), "{est} vs {oracle}");
}

#[test]
fn interpolant_reproduces_data_and_constants() {
    let sk = sphere_kernel(3);
    let pts = sphere_points(12, 3);
    let g = gram(&sk, &pts);
    let f: Vec<f64> = pts.iter().map(|p| (2.0 * p.coords()[0]).sin() + p.coords()[2]).collect();
    for mode in [SigmaMode::Limit, SigmaMode::Finite(2.0)] {
        for (i, p) in pts.iter().enumerate() {
            let v = g.interpolant_eval(&sk, &f, mode, p).unwrap();
            assert!((v - f[i]).abs() <= 1e-8 * f[i].abs().max(1.0), "{mode:?} node {i}: {v} vs {}", f[i]);
        }
    }
    let c = vec![2.5; pts.len()];
    for probe in sphere_points(5, 99) {
        let v = g.interpolant_eval(&sk, &c, SigmaMode::Limit, &probe).unwrap();
        assert!((v - 2.5).abs() < 1e-8, "{v}");
    }
}

#[test]
fn interpolant_has_minimum_norm() {
    let sk = sphere_kernel(3);
    let sigma = 1.5;
    let s2 = sigma * sigma;
    let all = sphere_points(6, 21);
    let nodes = &all[..4];
    let g = gram(&sk, nodes);
    let f: Vec<f64> = nodes.iter().map(|p| p.coords()[1] - 0.3 * p.coords()[2]).collect();
    let interp = g.interpolant(&f, SigmaMode::Finite(sigma)).unwrap();
    // With k_σ = σ² + k_π the interpolant is Σ cᵢ k_σ(·, xᵢ), offset = σ² Σ cᵢ.
    assert!((interp.offset - s2 * interp.coeffs.iter().sum::<f64>()).abs() < 1e-12);

    let big = gram(&sk, &all);
    let ks = DMatrix::from_fn(6, 6, |i, j| s2 + big.entry(i, j));
    let base = DVector::from_iterator(6, interp.coeffs.iter().cloned().chain([0.0, 0.0]));
    let base_norm = (base.transpose() * &ks * &base)[(0, 0)];
    let kxx = ks.view((0, 0), (4, 4)).into_owned();
    let kxz = ks.view((0, 4), (4, 2)).into_owned();
    for b in [[1.0, 0.0], [0.0, 1.0], [0.7, -1.3], [-2.0, 0.4]] {
        let b = DVector::from_row_slice(&b);
        // Coefficients on the nodes chosen so the perturbation vanishes there.
        let a = -kxx.clone().lu().solve(&(&kxz * &b)).unwrap();
        let pert = DVector::from_iterator(6, a.iter().chain(b.iter()).cloned());
        let vanish = kxx.clone() * &a + &kxz * &b;
        assert!(vanish.amax() < 1e-9);
        let total = &base + &pert;
        let norm = (total.transpose() * &ks * &total)[(0, 0)];
        assert!(norm >= base_norm - 1e-10 * base_norm.abs(), "{norm} < {base_norm}");
    }
}

#[test]
fn estimator_is_exact_up_to_wce_on_the_stein_space() {
    let sk = sphere_kernel(3);
    let pts = sphere_points(30, 8);
    let centers = sphere_points(3, 77);
    let coeffs = [0.8, -1.1, 0.5];
    let g = gram(&sk, &pts);
    let gz = gram(&sk, &centers);
    let norm = gz.quadratic_form(&coeffs).unwrap().sqrt();
    let f: Vec<f64> = pts
        .iter()
        .map(|p| 4.0 + centers.iter().zip(coeffs).map(|(z, a)| a * sk.eval(p, z).unwrap()).sum::<f64>())
        .collect();
    let res = g.solve_limit_estimator(&f).unwrap();
    assert!((res.estimate - 4.0).abs() <= res.wce * norm * (1.0 + 1e-9), "{} vs bound {}", res.estimate - 4.0, res.wce * norm);
}

#[test]
fn estimator_is_affine_equivariant() {
    let sk = sphere_kernel(4);
    let pts = sphere_points(20, 2);
    let g = gram(&sk, &pts);
    let f = x1(&pts);
    let base = g.solve_limit_estimator(&f).unwrap().estimate;
    let (a, b) = (-3.5, 1.25);
    let moved: Vec<f64> = f.iter().map(|v| a * v + b).collect();
    let est = g.solve_limit_estimator(&moved).unwrap().estimate;
    assert!((est - (a * base + b)).abs() < 1e-12 * (1.0 + est.abs()), "{est} vs {}", a * base + b);
}

#[test]
fn wce_is_nonincreasing_under_bordering() {
    let sk = sphere_kernel(3);
    let pts = sphere_points(40, 4);
    let full = gram(&sk, &pts);
    let mut prev = f64::INFINITY;
    for m in 1..=40 {
        let g = full.leading(m).unwrap();
        let wce = g.solve_limit_estimator(&vec![0.0; m]).unwrap().wce;
        assert!(wce <= prev + 1e-10, "m = {m}: {wce} > {prev}");
        prev = wce;
    }
}

#[test]
fn nystrom_eigenfunctions_are_orthonormal_and_integrate_to_zero() {
    let sk = sphere_kernel(3);
    let n = 60;
    let pts = sphere_points(n, 12);
    let g = gram(&sk, &pts);
    let w = vec![4.0 * std::f64::consts::PI / n as f64; n];
    let pairs = g.nystrom_eigenfunctions(&w, 12).unwrap();
    let top = pairs[0].value;
    for k in 0..12 {
        assert!(pairs[k].value >= -1e-8 * top);
        if k > 0 {
            assert!(pairs[k].value <= pairs[k - 1].value);
        }
        for l in 0..12 {
            let ip: f64 = (0..n).map(|i| w[i] * pairs[k].node_values[i] * pairs[l].node_values[i]).sum();
            let want = if k == l { 1.0 } else { 0.0 };
            assert!((ip - want).abs() < 1e-8, "<e{k}, e{l}> = {ip}");
        }
    }

    let target = VonMisesFisherTarget::new([1.0, 0.0, 0.0]).unwrap();
    let grid = QuadratureGrid::sphere(64, 48);
    for pair in pairs.iter().take(3) {
        let scale = pair.node_values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let ext = |x: &[f64]| {
            let at = AmbientPoint::on_sphere([x[0], x[1], x[2]])?;
            let col = pts.iter().map(|p| sk.eval(&at, p)).collect::<riemann_stein::Result<Vec<_>>>()?;
            Ok(nystrom_extend(pair, &w, &col))
        };
        let mean = expectations(&grid, |x| target.eval(x), &[&ext]).unwrap()[0];
        assert!(mean.abs() < 1e-4 * scale, "{mean} vs scale {scale}");
    }
}

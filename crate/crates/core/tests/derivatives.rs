use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use riemann_stein::jets::{seed_nested, Jet2, NestedJet};
use riemann_stein::kernels::{HalfInteger, Kernel, KernelSpec};
use riemann_stein::manifolds::ScalarField;
use riemann_stein::oracle::finite_difference;
use riemann_stein::points::synthetic_pole_fixture;
use riemann_stein::targets::{GaussianTarget, PaleoPosterior, Target, VonMisesFisherTarget};

fn unit(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 0.2 && n < 1.0 {
            return v.map(|c| c / n);
        }
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

/// Random pairs at distance at least 0.2 on the manifold of `kind`.
fn pairs(kind: &str, d: usize, count: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            match kind {
                "euclidean" => (0..d).map(|_| rng.random_range(-2.0..2.0)).collect(),
                "sphere" => unit(rng).to_vec(),
                _ => {
                    let mut v = unit(rng).to_vec();
                    v.push(rng.random_range(0.5..4.0));
                    v
                }
            }
        };
        let (x, y) = (draw(&mut rng), draw(&mut rng));
        if dist(&x, &y) > 0.2 {
            out.push((x, y));
        }
    }
    out
}

fn nested<const S: usize>(k: &Kernel, x: &[f64], y: &[f64]) -> NestedJet<S> {
    let (xs, ys) = seed_nested::<S>(x.try_into().unwrap(), y.try_into().unwrap());
    k.eval(&xs, &ys).unwrap()
}

/// Compares the orders (1,0), (2,0), (0,1), (1,1), (0,2) of the nested jet
/// with finite differences of the joint function `(x, y) ↦ k(x, y)`.
fn check_kernel<const S: usize>(spec: KernelSpec, kind: &str) {
    let k = spec.build().unwrap();
    let joint = |z: &[f64]| k.eval::<f64>(&z[..S], &z[S..]);
    for (x, y) in pairs(kind, S, 20, 17) {
        let jet = nested::<S>(&k, &x, &y);
        let z: Vec<f64> = x.iter().chain(&y).cloned().collect();
        let mut cases: Vec<(Vec<usize>, f64)> = Vec::new();
        for i in 0..S {
            cases.push((vec![i], jet.grad[i].value));
            cases.push((vec![S + i], jet.value.grad[i]));
            for j in 0..S {
                cases.push((vec![i, j], jet.hess[i][j].value));
                cases.push((vec![i, S + j], jet.grad[i].grad[j]));
                cases.push((vec![S + i, S + j], jet.value.hess[i][j]));
            }
        }
        let scale = cases.iter().fold(jet.value.value.abs(), |m, (_, v)| m.max(v.abs()));
        for (idx, ad) in cases {
            let fd = finite_difference(joint, &z, &idx, 1e-3).unwrap();
            let err = (ad - fd).abs() / ad.abs().max(1e-3 * scale);
            assert!(err < 1e-5, "{spec:?} {idx:?} at {x:?}, {y:?}: ad {ad} fd {fd}");
        }
    }
}

#[test]
fn matern_kernels_match_finite_differences() {
    for a in 1..=3 {
        let spec = KernelSpec::Matern { lambda: 1.3, ell: 0.8, alpha: HalfInteger::plus_half(a) };
        check_kernel::<1>(spec, "euclidean");
        check_kernel::<2>(spec, "euclidean");
    }
}

#[test]
fn sobolev_kernels_match_finite_differences() {
    for a in 3..=5 {
        check_kernel::<3>(KernelSpec::SobolevSphere { alpha: HalfInteger::plus_half(a), m: 2 }, "sphere");
    }
}

#[test]
fn paleo_kernel_matches_finite_differences() {
    check_kernel::<4>(KernelSpec::PaleoArctanRbf, "paleo");
}

fn check_log_density<const S: usize>(target: &Target, kind: &str) {
    let f = |z: &[f64]| target.eval::<f64>(z);
    for (x, _) in pairs(kind, S, 20, 5) {
        let jet: Jet2<f64, S> = target.eval(&Jet2::seed(x.as_slice().try_into().unwrap())).unwrap();
        let scale = jet.grad.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for i in 0..S {
            let fd = finite_difference(f, &x, &[i], 1e-3).unwrap();
            assert!((jet.grad[i] - fd).abs() < 1e-5 * jet.grad[i].abs().max(1e-3 * scale), "grad {i}: {} vs {fd}", jet.grad[i]);
            for j in 0..S {
                let fd = finite_difference(f, &x, &[i, j], 1e-3).unwrap();
                let ad = jet.hess[i][j];
                assert!((ad - fd).abs() < 1e-5 * ad.abs().max(1e-3 * scale), "hess {i}{j}: {ad} vs {fd}");
            }
        }
    }
}

#[test]
fn log_densities_match_finite_differences() {
    check_log_density::<1>(&Target::Gaussian(GaussianTarget::new(1).unwrap()), "euclidean");
    check_log_density::<2>(&Target::Gaussian(GaussianTarget::new(2).unwrap()), "euclidean");
    check_log_density::<3>(&Target::VonMisesFisher(VonMisesFisherTarget::new([1.0, -0.5, 2.0]).unwrap()), "sphere");
    let post = PaleoPosterior::with_flat_prior(synthetic_pole_fixture()).unwrap();
    check_log_density::<4>(&Target::Paleo(post), "paleo");
}

use std::f64::consts::PI;

use rayon::prelude::*;
use riemann_stein::kernels::KernelSpec;
use riemann_stein::manifolds::{AmbientPoint, ScalarField};
use riemann_stein::oracle::{expectations, QuadratureGrid};
use riemann_stein::points::{paleo_stratified_tensor, rw_metropolis_sphere_kappa, synthetic_pole_fixture, RngSeed};
use riemann_stein::stein::{SteinKernel, SteinOperator};
use riemann_stein::targets::{PaleoPosterior, Target};

use super::{assemble_gram, base_metadata, Output};
use crate::config::{RunConfig, Scenario};
use crate::error::CliError;
use crate::io::{fmt_f64, load_poles, Table};

pub const PALEO_MOMENTS: &str = "paleo_moments.csv";
pub const PALEO_KSD: &str = "paleo_ksd.csv";
pub const PALEO_CHAINS: &str = "paleo_chains.csv";

const MOMENT_COLUMNS: [&str; 7] = ["chain", "n", "n_unique", "function", "ergodic", "stein", "oracle"];
const KSD_COLUMNS: [&str; 6] = ["chain", "n", "n_unique", "ksd_uniform", "ksd_stein", "jitter"];
const CHAIN_COLUMNS: [&str; 6] = ["chain", "index", "mu1", "mu2", "mu3", "kappa"];

/// Test functions of `(μ, κ)`.
pub const PALEO_FUNCTIONS: [(&str, fn(&[f64]) -> f64); 8] = [
    ("mu1", |x| x[0]),
    ("mu2", |x| x[1]),
    ("mu3", |x| x[2]),
    ("kappa", |x| x[3]),
    ("mu1^2", |x| x[0] * x[0]),
    ("mu2^2", |x| x[1] * x[1]),
    ("mu3^2", |x| x[2] * x[2]),
    ("kappa^2", |x| x[3] * x[3]),
];

pub fn load_posterior(cfg: &RunConfig) -> Result<PaleoPosterior, CliError> {
    let data = match &cfg.data {
        Some(path) if !cfg.synthetic => load_poles(path)?,
        _ => synthetic_pole_fixture(),
    };
    PaleoPosterior::new(data, cfg.c0, cfg.r0, cfg.mu0).map_err(|e| CliError::Data(e.to_string()))
}

/// Tensor quadrature on `𝕊² × ℝ₊`: polar panels refined towards `μ_n` and
/// Gauss-Legendre panels over the bulk of the concentration marginal.
pub fn paleo_oracle_grid(post: &PaleoPosterior) -> QuadratureGrid {
    let (lo, hi) = post.kappa_range(40.0);
    let theta = [0.0, 0.025, 0.05, 0.1, 0.2, 0.4, 0.8, 1.6, PI];
    let sphere = QuadratureGrid::sphere_around(post.mun(), &theta, 8, 16);
    let kb: Vec<f64> = (0..=30).map(|i| lo + (hi - lo) * i as f64 / 30.0).collect();
    QuadratureGrid::sphere_cross_rplus(&sphere, &kb, 12)
}

/// Posterior expectations of [`PALEO_FUNCTIONS`] by quadrature.
pub fn oracle_moments(post: &PaleoPosterior) -> Result<Vec<f64>, CliError> {
    let grid = paleo_oracle_grid(post);
    let fs: Vec<Box<dyn Fn(&[f64]) -> riemann_stein::Result<f64>>> =
        PALEO_FUNCTIONS.iter().map(|(_, f)| Box::new(move |x: &[f64]| Ok(f(x))) as Box<_>).collect();
    let refs: Vec<&dyn Fn(&[f64]) -> riemann_stein::Result<f64>> = fs.iter().map(|b| b.as_ref()).collect();
    Ok(expectations(&grid, |x| post.eval(x), &refs)?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PaleoRow {
    pub chain: usize,
    pub n: usize,
    pub n_unique: usize,
    pub ksd_uniform: f64,
    pub ksd_stein: f64,
    pub jitter: f64,
    /// `(ergodic average, Stein estimate)` per test function.
    pub estimates: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PaleoResults {
    pub rows: Vec<PaleoRow>,
    pub oracle: Vec<f64>,
    /// Point set of each chain (the largest design for `tensor`).
    pub chains: Vec<Vec<AmbientPoint>>,
    /// `(μ, κ)` acceptance rates per chain; empty for `tensor`.
    pub acceptance: Vec<(f64, f64)>,
}

impl PaleoResults {
    /// `(ergodic, Stein)` estimates of function `f` by chain at size `n`.
    pub fn at(&self, n: usize, f: usize) -> Vec<(f64, f64)> {
        self.rows.iter().filter(|r| r.n == n).map(|r| r.estimates[f]).collect()
    }
}

/// Collapses consecutive repeats (rejected moves) into `(state, multiplicity)`.
fn runs(points: &[AmbientPoint]) -> (Vec<AmbientPoint>, Vec<usize>) {
    let mut unique: Vec<AmbientPoint> = Vec::new();
    let mut starts = Vec::new();
    for (i, p) in points.iter().enumerate() {
        if unique.last() != Some(p) {
            unique.push(p.clone());
            starts.push(i);
        }
    }
    (unique, starts)
}

fn row_for(
    chain: usize,
    points: &[AmbientPoint],
    unique: &[AmbientPoint],
    mult: &[usize],
    gram: &riemann_stein::stein::SteinGram,
) -> Result<PaleoRow, CliError> {
    let n = points.len();
    let u = unique.len();
    let g = if gram.n() == u { gram.clone() } else { gram.leading(u)? };
    let uw: Vec<f64> = mult.iter().map(|&m| m as f64 / n as f64).collect();
    let values: Vec<Vec<f64>> = PALEO_FUNCTIONS.iter().map(|(_, f)| unique.iter().map(|p| f(p.coords())).collect()).collect();
    let q = g.solve_limit_estimator(&values[0])?;
    let estimates = values
        .iter()
        .map(|v| {
            let erg: f64 = uw.iter().zip(v).map(|(w, f)| w * f).sum();
            let st: f64 = q.weights.iter().zip(v).map(|(w, f)| w * f).sum();
            (erg, st)
        })
        .collect();
    Ok(PaleoRow {
        chain,
        n,
        n_unique: u,
        ksd_uniform: g.wce_of_weights(&uw)?,
        ksd_stein: q.wce,
        jitter: g.jitter_used(),
        estimates,
    })
}

fn multiplicities(starts: &[usize], u: usize, n: usize) -> Vec<usize> {
    (0..u).map(|i| starts.get(i + 1).copied().unwrap_or(n).min(n) - starts[i]).collect()
}

pub fn run_paleo(cfg: &RunConfig) -> Result<PaleoResults, CliError> {
    let post = load_posterior(cfg)?;
    let kernel = SteinKernel::for_target(Target::Paleo(post.clone()), KernelSpec::PaleoArctanRbf, SteinOperator::SecondOrder)?;
    let mut ns = cfg.n.clone();
    ns.sort_unstable();
    ns.dedup();
    let n_max = *ns.last().expect("validated");

    type Chain = (Vec<PaleoRow>, Vec<AmbientPoint>, Option<(f64, f64)>);
    let chains: Vec<Chain> = (0..cfg.reps)
        .into_par_iter()
        .map(|c| -> Result<Chain, CliError> {
            let seed = RngSeed::new(cfg.seed, c as u64);
            match cfg.points {
                Scenario::Tensor => {
                    let mut rows = Vec::new();
                    let mut last = Vec::new();
                    for &n in &ns {
                        let pts = paleo_stratified_tensor(&post, n, seed)?;
                        let gram = assemble_gram(&kernel, &pts)?;
                        rows.push(row_for(c, &pts, &pts, &vec![1; pts.len()], &gram)?);
                        last = pts;
                    }
                    Ok((rows, last, None))
                }
                _ => {
                    let chain = rw_metropolis_sphere_kappa(&post, &cfg.mcmc(n_max), seed)?;
                    let (unique, starts) = runs(&chain.points);
                    let gram = assemble_gram(&kernel, &unique)?;
                    let rows = ns
                        .iter()
                        .map(|&n| {
                            let u = starts.partition_point(|&s| s < n);
                            let mult = multiplicities(&starts, u, n);
                            row_for(c, &chain.points[..n], &unique[..u], &mult, &gram)
                        })
                        .collect::<Result<_, _>>()?;
                    Ok((rows, chain.points, Some((chain.acceptance_mu, chain.acceptance_kappa))))
                }
            }
        })
        .collect::<Result<_, _>>()?;

    let mut res = PaleoResults { rows: Vec::new(), oracle: oracle_moments(&post)?, chains: Vec::new(), acceptance: Vec::new() };
    for (rows, pts, acc) in chains {
        res.rows.extend(rows);
        res.chains.push(pts);
        res.acceptance.extend(acc);
    }
    Ok(res)
}

fn paleo_output(cfg: &RunConfig, post: &PaleoPosterior, res: &PaleoResults) -> Output {
    let mut meta = base_metadata(cfg);
    let mun = post.mun();
    meta.push("observations", post.n().to_string());
    meta.push("rn", fmt_f64(post.rn()));
    meta.push("mun", format!("{} {} {}", fmt_f64(mun[0]), fmt_f64(mun[1]), fmt_f64(mun[2])));
    meta.push("kappa_mode", fmt_f64(post.kappa_mode()));
    for (c, (am, ak)) in res.acceptance.iter().enumerate() {
        meta.push(format!("acceptance_chain_{c}"), format!("mu {} kappa {}", fmt_f64(*am), fmt_f64(*ak)));
    }

    let mut moments = Table::new(&MOMENT_COLUMNS);
    let mut ksd = Table::new(&KSD_COLUMNS);
    for r in &res.rows {
        let key = [r.chain.to_string(), r.n.to_string(), r.n_unique.to_string()];
        for (((name, _), (erg, st)), truth) in PALEO_FUNCTIONS.iter().zip(&r.estimates).zip(&res.oracle) {
            let mut row = key.to_vec();
            row.extend([name.to_string(), fmt_f64(*erg), fmt_f64(*st), fmt_f64(*truth)]);
            moments.push(row);
        }
        let mut row = key.to_vec();
        row.extend([fmt_f64(r.ksd_uniform), fmt_f64(r.ksd_stein), fmt_f64(r.jitter)]);
        ksd.push(row);
    }
    let mut chains = Table::new(&CHAIN_COLUMNS);
    for (c, pts) in res.chains.iter().enumerate() {
        for (i, p) in pts.iter().enumerate() {
            let mut row = vec![c.to_string(), i.to_string()];
            row.extend(p.coords().iter().map(|v| fmt_f64(*v)));
            chains.push(row);
        }
    }

    let mut out = Output::default();
    out.add(PALEO_MOMENTS, meta.clone(), moments);
    out.add(PALEO_KSD, meta.clone(), ksd);
    out.add(PALEO_CHAINS, meta, chains);
    out
}

pub fn cmd_paleo(cfg: &RunConfig) -> Result<Output, CliError> {
    let post = load_posterior(cfg)?;
    let res = run_paleo(cfg)?;
    let out = paleo_output(cfg, &post, &res);
    out.write(&cfg.out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn runs_and_multiplicities() {
        let p = |k: f64| AmbientPoint::on_sphere_cross_rplus([0.0, 0.6, 0.8], k).unwrap();
        let chain = vec![p(1.0), p(1.0), p(2.0), p(3.0), p(3.0), p(3.0)];
        let (unique, starts) = runs(&chain);
        assert_eq!(unique.len(), 3);
        assert_eq!(starts, vec![0, 2, 3]);
        assert_eq!(multiplicities(&starts, 3, 6), vec![2, 1, 3]);
        assert_eq!(multiplicities(&starts, 3, 5), vec![2, 1, 2]);
        assert_eq!(starts.partition_point(|&s| s < 3), 2);
    }
}

use std::f64::consts::PI;

use rayon::prelude::*;
use riemann_stein::kernels::KernelSpec;
use riemann_stein::manifolds::{AmbientPoint, ScalarField};
use riemann_stein::oracle::{expectations, QuadratureGrid};
use riemann_stein::points::{importance_sampling_estimate, riesz_quasi_uniform_sphere, ImportanceMode, RngSeed};
use riemann_stein::stein::{SteinKernel, SteinOperator};
use riemann_stein::targets::{Target, VonMisesFisherTarget};

use super::{assemble_gram, base_metadata, uniform_ksd, Output};
use crate::config::RunConfig;
use crate::error::CliError;
use crate::io::{fmt_f64, Table};

pub const SPHERE_WCE: &str = "sphere_wce.csv";
pub const SPHERE_MOMENTS: &str = "sphere_moments.csv";
pub const EIGENFUNCTIONS: &str = "eigenfunctions.csv";

const WCE_COLUMNS: [&str; 6] = ["n", "alpha", "rep", "wce", "wce_uniform", "jitter"];
const MOMENT_COLUMNS: [&str; 7] = ["n", "alpha", "rep", "function", "stein", "importance", "truth"];
const EIGEN_COLUMNS: [&str; 8] = ["alpha", "index", "eigenvalue", "point", "x1", "x2", "x3", "value"];

/// Test functions for the moment comparison.
const FUNCTIONS: [(&str, fn(&[f64]) -> f64); 6] = [
    ("x1", |x| x[0]),
    ("x2", |x| x[1]),
    ("x3", |x| x[2]),
    ("x1^2", |x| x[0] * x[0]),
    ("x2^2", |x| x[1] * x[1]),
    ("x3^2", |x| x[2] * x[2]),
];

#[derive(Clone, Debug, PartialEq)]
pub struct SphereRow {
    pub n: usize,
    pub alpha: f64,
    pub rep: usize,
    pub wce: f64,
    pub wce_uniform: f64,
    pub jitter: f64,
    /// `(function, Stein estimate, importance-sampling estimate)`.
    pub moments: Vec<(&'static str, f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SphereResults {
    pub rows: Vec<SphereRow>,
    /// Oracle values of [`FUNCTIONS`] under the target.
    pub truth: Vec<f64>,
}

impl SphereResults {
    /// WCE of one replicate for one `α`, in increasing `n`.
    pub fn curve(&self, alpha: f64, rep: usize) -> Vec<(usize, f64)> {
        self.rows.iter().filter(|r| r.alpha == alpha && r.rep == rep).map(|r| (r.n, r.wce)).collect()
    }
}

fn target(cfg: &RunConfig) -> Result<VonMisesFisherTarget, CliError> {
    Ok(VonMisesFisherTarget::new(cfg.vmf_c)?)
}

/// Oracle expectations of the test functions under `vMF(c)`.
fn vmf_truth(t: &VonMisesFisherTarget) -> Result<Vec<f64>, CliError> {
    let c = t.c();
    let norm = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
    let pole = if norm > 0.0 { [c[0] / norm, c[1] / norm, c[2] / norm] } else { [0.0, 0.0, 1.0] };
    let breaks: Vec<f64> = (0..=16).map(|i| PI * i as f64 / 16.0).collect();
    let grid = QuadratureGrid::sphere_around(pole, &breaks, 12, 96);
    let fs: Vec<Box<dyn Fn(&[f64]) -> riemann_stein::Result<f64>>> =
        FUNCTIONS.iter().map(|(_, f)| Box::new(move |x: &[f64]| Ok(f(x))) as Box<_>).collect();
    let refs: Vec<&dyn Fn(&[f64]) -> riemann_stein::Result<f64>> = fs.iter().map(|b| b.as_ref()).collect();
    Ok(expectations(&grid, |x| t.eval(x), &refs)?)
}

fn sphere_kernels(cfg: &RunConfig, t: &VonMisesFisherTarget) -> Result<Vec<SteinKernel>, CliError> {
    cfg.alphas()
        .into_iter()
        .map(|alpha| {
            let spec = KernelSpec::SobolevSphere { alpha, m: 2 };
            Ok(SteinKernel::for_target(Target::VonMisesFisher(*t), spec, SteinOperator::SecondOrder)?)
        })
        .collect()
}

pub fn run_sphere(cfg: &RunConfig) -> Result<SphereResults, CliError> {
    let t = target(cfg)?;
    let kernels = sphere_kernels(cfg, &t)?;
    let alphas = cfg.alphas();
    let tasks: Vec<(usize, usize)> = (0..cfg.reps).flat_map(|r| cfg.n.iter().map(move |&n| (r, n))).collect();

    let per_task: Vec<Vec<SphereRow>> = tasks
        .par_iter()
        .map(|&(rep, n)| {
            let pts = riesz_quasi_uniform_sphere(n, cfg.riesz_iters, RngSeed::new(cfg.seed, rep as u64))?;
            let values: Vec<Vec<f64>> = FUNCTIONS.iter().map(|(_, f)| pts.iter().map(|p| f(p.coords())).collect()).collect();
            let lw: Vec<f64> = pts.iter().map(|p| t.eval(p.coords())).collect::<riemann_stein::Result<_>>()?;
            let is: Vec<f64> = values
                .iter()
                .map(|v| importance_sampling_estimate(v, &lw, ImportanceMode::SelfNormalized))
                .collect::<riemann_stein::Result<_>>()?;
            kernels
                .iter()
                .zip(&alphas)
                .map(|(k, alpha)| {
                    let g = assemble_gram(k, &pts)?;
                    let q = g.solve_limit_estimator(&values[0])?;
                    let moments = FUNCTIONS
                        .iter()
                        .zip(&values)
                        .zip(&is)
                        .map(|(((name, _), v), is)| (*name, q.weights.iter().zip(v).map(|(w, f)| w * f).sum(), *is))
                        .collect();
                    Ok(SphereRow {
                        n,
                        alpha: alpha.value(),
                        rep,
                        wce: q.wce,
                        wce_uniform: uniform_ksd(&g)?,
                        jitter: g.jitter_used(),
                        moments,
                    })
                })
                .collect()
        })
        .collect::<Result<_, CliError>>()?;

    let mut rows: Vec<SphereRow> = per_task.into_iter().flatten().collect();
    rows.sort_by(|a, b| a.alpha.total_cmp(&b.alpha).then(a.n.cmp(&b.n)).then(a.rep.cmp(&b.rep)));
    Ok(SphereResults { rows, truth: vmf_truth(&t)? })
}

fn sphere_output(cfg: &RunConfig, res: &SphereResults) -> Output {
    let mut wce = Table::new(&WCE_COLUMNS);
    let mut moments = Table::new(&MOMENT_COLUMNS);
    for r in &res.rows {
        let key = [r.n.to_string(), fmt_f64(r.alpha), r.rep.to_string()];
        let mut row = key.to_vec();
        row.extend([fmt_f64(r.wce), fmt_f64(r.wce_uniform), fmt_f64(r.jitter)]);
        wce.push(row);
        for ((name, stein, is), truth) in r.moments.iter().zip(&res.truth) {
            let mut row = key.to_vec();
            row.extend([name.to_string(), fmt_f64(*stein), fmt_f64(*is), fmt_f64(*truth)]);
            moments.push(row);
        }
    }
    let mut out = Output::default();
    let meta = base_metadata(cfg);
    out.add(SPHERE_WCE, meta.clone(), wce);
    out.add(SPHERE_MOMENTS, meta, moments);
    out
}

pub fn cmd_sphere(cfg: &RunConfig) -> Result<Output, CliError> {
    let out = sphere_output(cfg, &run_sphere(cfg)?);
    out.write(&cfg.out)?;
    Ok(out)
}

/// Nyström eigenfunctions at the nodes, one entry per `α`.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenResults {
    pub points: Vec<AmbientPoint>,
    /// `(α, eigenvalues, node values per eigenfunction)`.
    pub spectra: Vec<(f64, Vec<f64>, Vec<Vec<f64>>)>,
}

pub fn run_eigenfunctions(cfg: &RunConfig) -> Result<EigenResults, CliError> {
    let t = target(cfg)?;
    let n = cfg.n[0];
    let points = riesz_quasi_uniform_sphere(n, cfg.riesz_iters, RngSeed::new(cfg.seed, 0))?;
    let weights = vec![4.0 * PI / n as f64; n];
    let mut spectra = Vec::new();
    for (k, alpha) in sphere_kernels(cfg, &t)?.iter().zip(cfg.alphas()) {
        let g = assemble_gram(k, &points)?;
        let pairs = g.nystrom_eigenfunctions(&weights, cfg.eigen_count)?;
        let values = pairs.iter().map(|p| p.value).collect();
        let nodes = pairs.into_iter().map(|p| p.node_values).collect();
        spectra.push((alpha.value(), values, nodes));
    }
    Ok(EigenResults { points, spectra })
}

pub fn cmd_eigenfunctions(cfg: &RunConfig) -> Result<Output, CliError> {
    let res = run_eigenfunctions(cfg)?;
    let mut table = Table::new(&EIGEN_COLUMNS);
    for (alpha, values, nodes) in &res.spectra {
        for (index, (lambda, node)) in values.iter().zip(nodes).enumerate() {
            for (i, (p, v)) in res.points.iter().zip(node).enumerate() {
                let x = p.coords();
                table.push(vec![
                    fmt_f64(*alpha),
                    (index + 1).to_string(),
                    fmt_f64(*lambda),
                    i.to_string(),
                    fmt_f64(x[0]),
                    fmt_f64(x[1]),
                    fmt_f64(x[2]),
                    fmt_f64(*v),
                ]);
            }
        }
    }
    let mut out = Output::default();
    out.add(EIGENFUNCTIONS, base_metadata(cfg), table);
    out.write(&cfg.out)?;
    Ok(out)
}

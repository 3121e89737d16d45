use rayon::prelude::*;
use riemann_stein::kernels::{HalfInteger, KernelSpec};
use riemann_stein::manifolds::AmbientPoint;
use riemann_stein::points::{gaussian_iid, importance_sampling_estimate, stratified_percentiles, ImportanceMode, RngSeed};
use riemann_stein::stein::SteinKernel;
use riemann_stein::targets::{GaussianTarget, Target};

use super::{assemble_gram, base_metadata, Output};
use crate::config::{RunConfig, Scenario};
use crate::error::CliError;
use crate::io::{fmt_f64, Table};

pub const EUCLIDEAN_WCE: &str = "euclidean_wce.csv";
pub const EUCLIDEAN_SUMMARY: &str = "euclidean_wce_summary.csv";
pub const EUCLIDEAN_MOMENTS: &str = "euclidean_moments.csv";

const WCE_COLUMNS: [&str; 8] = ["d", "n", "alpha", "operator", "scenario", "rep", "wce", "jitter"];
const SUMMARY_COLUMNS: [&str; 8] = ["d", "n", "alpha", "operator", "scenario", "reps", "mean_wce", "sd_wce"];
const MOMENT_COLUMNS: [&str; 10] = ["d", "n", "alpha", "operator", "scenario", "rep", "function", "stein", "importance", "truth"];

/// One replicate at one `(α, n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct EuclideanRow {
    pub n: usize,
    pub alpha: f64,
    pub rep: usize,
    pub wce: f64,
    pub jitter: f64,
    /// `(function, Stein estimate, importance-sampling estimate, truth)`.
    pub moments: Vec<(&'static str, f64, f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EuclideanResults {
    pub rows: Vec<EuclideanRow>,
}

impl EuclideanResults {
    /// WCE values for one `α` in increasing `n`, averaged over replicates.
    pub fn mean_curve(&self, alpha: f64) -> (Vec<f64>, Vec<f64>) {
        let mut ns: Vec<usize> = self.rows.iter().filter(|r| r.alpha == alpha).map(|r| r.n).collect();
        ns.dedup();
        let means = ns
            .iter()
            .map(|&n| {
                let v: Vec<f64> = self.rows.iter().filter(|r| r.alpha == alpha && r.n == n).map(|r| r.wce).collect();
                v.iter().sum::<f64>() / v.len() as f64
            })
            .collect();
        (ns.iter().map(|&n| n as f64).collect(), means)
    }
}

fn points(cfg: &RunConfig, n: usize, rep: usize) -> Result<Vec<AmbientPoint>, CliError> {
    let seed = RngSeed::new(cfg.seed, rep as u64);
    Ok(match cfg.points {
        Scenario::Stratified => stratified_percentiles(n)
            .into_iter()
            .map(|x| AmbientPoint::euclidean(vec![x]))
            .collect::<riemann_stein::Result<_>>()?,
        Scenario::Biased => gaussian_iid(cfg.d, n, &vec![1.0; cfg.d], 3f64.sqrt(), seed)?,
        _ => gaussian_iid(cfg.d, n, &vec![0.0; cfg.d], 1.0, seed)?,
    })
}

/// `log N(x; 0, I) − log N(x; 1, 3I)`.
fn log_ratio_biased(x: &[f64]) -> f64 {
    let d = x.len() as f64;
    let a: f64 = x.iter().map(|v| v * v).sum();
    let b: f64 = x.iter().map(|v| (v - 1.0) * (v - 1.0)).sum();
    -0.5 * a + b / 6.0 + 0.5 * d * 3f64.ln()
}

pub fn run_euclidean(cfg: &RunConfig) -> Result<EuclideanResults, CliError> {
    let target = GaussianTarget::new(cfg.d)?;
    let kernels = cfg
        .alphas()
        .into_iter()
        .map(|alpha| {
            let spec = KernelSpec::Matern { lambda: 1.0, ell: 1.0, alpha };
            SteinKernel::for_target(Target::Gaussian(target), spec, cfg.operator.operator())
        })
        .collect::<riemann_stein::Result<Vec<_>>>()?;
    let reps = if cfg.points == Scenario::Stratified { 1 } else { cfg.reps };
    let tasks: Vec<(usize, usize)> = cfg.n.iter().flat_map(|&n| (0..reps).map(move |r| (n, r))).collect();

    let per_task: Vec<Vec<EuclideanRow>> = tasks
        .par_iter()
        .map(|&(n, rep)| {
            let pts = points(cfg, n, rep)?;
            let f1: Vec<f64> = pts.iter().map(|p| p.coords()[0]).collect();
            let f2: Vec<f64> = f1.iter().map(|v| v * v).collect();
            let importance = |f: &[f64]| -> Result<f64, CliError> {
                Ok(match cfg.points {
                    Scenario::Biased => {
                        let lw: Vec<f64> = pts.iter().map(|p| log_ratio_biased(p.coords())).collect();
                        importance_sampling_estimate(f, &lw, ImportanceMode::Ratio)?
                    }
                    _ => f.iter().sum::<f64>() / f.len() as f64,
                })
            };
            let (is1, is2) = (importance(&f1)?, importance(&f2)?);
            kernels
                .iter()
                .zip(cfg.alphas())
                .map(|(k, alpha): (_, HalfInteger)| {
                    let g = assemble_gram(k, &pts)?;
                    let e1 = g.solve_limit_estimator(&f1)?;
                    let e2 = g.solve_limit_estimator(&f2)?;
                    let moments = vec![("x1", e1.estimate, is1, 0.0), ("x1^2", e2.estimate, is2, 1.0)];
                    Ok(EuclideanRow { n, alpha: alpha.value(), rep, wce: e1.wce, jitter: g.jitter_used(), moments })
                })
                .collect()
        })
        .collect::<Result<_, CliError>>()?;

    let mut rows: Vec<EuclideanRow> = per_task.into_iter().flatten().collect();
    rows.sort_by(|a, b| a.alpha.total_cmp(&b.alpha).then(a.n.cmp(&b.n)).then(a.rep.cmp(&b.rep)));
    Ok(EuclideanResults { rows })
}

pub fn euclidean_output(cfg: &RunConfig, res: &EuclideanResults) -> Output {
    let key = |r: &EuclideanRow| -> Vec<String> {
        vec![cfg.d.to_string(), r.n.to_string(), fmt_f64(r.alpha), cfg.operator.name().into(), cfg.points.name().into()]
    };
    let mut wce = Table::new(&WCE_COLUMNS);
    let mut moments = Table::new(&MOMENT_COLUMNS);
    for r in &res.rows {
        let mut row = key(r);
        row.extend([r.rep.to_string(), fmt_f64(r.wce), fmt_f64(r.jitter)]);
        wce.push(row);
        for (name, stein, is, truth) in &r.moments {
            let mut row = key(r);
            row.extend([r.rep.to_string(), name.to_string(), fmt_f64(*stein), fmt_f64(*is), fmt_f64(*truth)]);
            moments.push(row);
        }
    }
    let mut summary = Table::new(&SUMMARY_COLUMNS);
    let mut i = 0;
    while i < res.rows.len() {
        let first = &res.rows[i];
        let group: Vec<f64> = res.rows[i..]
            .iter()
            .take_while(|r| r.alpha == first.alpha && r.n == first.n)
            .map(|r| r.wce)
            .collect();
        let m = group.len() as f64;
        let mean = group.iter().sum::<f64>() / m;
        let sd = if group.len() > 1 {
            (group.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0)).sqrt()
        } else {
            0.0
        };
        let mut row = key(first);
        row.extend([group.len().to_string(), fmt_f64(mean), fmt_f64(sd)]);
        summary.push(row);
        i += group.len();
    }

    let mut out = Output::default();
    let meta = base_metadata(cfg);
    out.add(EUCLIDEAN_WCE, meta.clone(), wce);
    out.add(EUCLIDEAN_SUMMARY, meta.clone(), summary);
    out.add(EUCLIDEAN_MOMENTS, meta, moments);
    out
}

pub fn cmd_euclidean(cfg: &RunConfig) -> Result<Output, CliError> {
    let res = run_euclidean(cfg)?;
    let out = euclidean_output(cfg, &res);
    out.write(&cfg.out)?;
    Ok(out)
}

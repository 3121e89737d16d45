//! The experiment drivers. Each `run_*` function returns its tables in
//! memory; each `cmd_*` function also writes them to the output directory.

mod euclidean;
mod paleo;
mod sphere;

pub use euclidean::{cmd_euclidean, euclidean_output, run_euclidean, EuclideanResults, EuclideanRow, EUCLIDEAN_MOMENTS, EUCLIDEAN_SUMMARY, EUCLIDEAN_WCE};
pub use paleo::{
    cmd_paleo, load_posterior, oracle_moments, paleo_oracle_grid, run_paleo, PaleoResults, PaleoRow, PALEO_CHAINS,
    PALEO_FUNCTIONS, PALEO_KSD, PALEO_MOMENTS,
};
pub use sphere::{
    cmd_eigenfunctions, cmd_sphere, run_eigenfunctions, run_sphere, EigenResults, SphereResults, SphereRow, EIGENFUNCTIONS, SPHERE_MOMENTS,
    SPHERE_WCE,
};

use std::path::PathBuf;

use rayon::prelude::*;
use riemann_stein::manifolds::{AmbientPoint, ScalarField};
use riemann_stein::stein::{SteinGram, SteinKernel};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::io::{write_table, Metadata, Table};

/// Assembles the Stein Gram matrix with rows evaluated in parallel. Every
/// entry is a pure function of its two points, so the result does not
/// depend on the thread count.
pub fn assemble_gram<L: ScalarField + Sync>(kernel: &SteinKernel<L>, points: &[AmbientPoint]) -> Result<SteinGram, CliError> {
    let n = points.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (i..n).map(|j| kernel.eval(&points[i], &points[j])).collect::<riemann_stein::Result<Vec<f64>>>())
        .collect::<riemann_stein::Result<_>>()?;
    let mut entries = vec![0.0; n * n];
    for (i, row) in rows.iter().enumerate() {
        for (k, v) in row.iter().enumerate() {
            entries[i * n + i + k] = *v;
            entries[(i + k) * n + i] = *v;
        }
    }
    Ok(SteinGram::from_entries(points.to_vec(), entries)?)
}

/// `√(wᵀKw)` for the uniform weights `1/n`.
pub fn uniform_ksd(gram: &SteinGram) -> Result<f64, CliError> {
    let n = gram.n();
    Ok(gram.wce_of_weights(&vec![1.0 / n as f64; n])?)
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let m = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / m, ly.iter().sum::<f64>() / m);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Named tables produced by one command.
#[derive(Clone, Debug, Default)]
pub struct Output {
    pub files: Vec<(String, Metadata, Table)>,
}

impl Output {
    pub fn add(&mut self, name: &str, meta: Metadata, table: Table) {
        self.files.push((name.to_string(), meta, table));
    }

    /// Writes every table under `dir`; returns the paths written.
    pub fn write(&self, dir: &std::path::Path) -> Result<Vec<PathBuf>, CliError> {
        let mut paths = Vec::new();
        for (name, meta, table) in &self.files {
            let path = dir.join(name);
            write_table(&path, meta, table)?;
            paths.push(path);
        }
        Ok(paths)
    }
}

pub(crate) fn base_metadata(cfg: &RunConfig) -> Metadata {
    Metadata::for_run(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_a_power_law() {
        let x = [10.0, 100.0, 1000.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-1.5)).collect();
        assert!((log_log_slope(&x, &y) + 1.5).abs() < 1e-12);
    }
}

//! Run configuration: defaults per experiment, an optional TOML file, and
//! command-line flags, merged in that order of increasing precedence.

use std::path::{Path, PathBuf};

use riemann_stein::kernels::HalfInteger;
use riemann_stein::manifolds::MAX_EUCLIDEAN_DIM;
use riemann_stein::points::McmcConfig;
use riemann_stein::stein::SteinOperator;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Logarithmically spaced sample sizes used when `--n` is not given.
pub const DEFAULT_N_GRID: [usize; 9] = [10, 18, 32, 56, 100, 178, 316, 562, 1000];

/// Largest sample size kept from the default grid in `--fast` mode.
pub const FAST_MAX_N: usize = 316;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Euclidean,
    Sphere,
    Eigenfunctions,
    Paleo,
    Check,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Euclidean => "euclidean",
            Experiment::Sphere => "sphere",
            Experiment::Eigenfunctions => "eigenfunctions",
            Experiment::Paleo => "paleo",
            Experiment::Check => "check",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorArg {
    Second,
    First,
}

impl OperatorArg {
    pub fn operator(self) -> SteinOperator {
        match self {
            OperatorArg::Second => SteinOperator::SecondOrder,
            OperatorArg::First => SteinOperator::FirstOrder,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            OperatorArg::Second => "second",
            OperatorArg::First => "first",
        }
    }
}

/// Point-set scenarios. The first three are Euclidean, `quasi-uniform` is
/// for the sphere, and `mcmc`/`tensor` for the paleomagnetic posterior.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// Independent draws from the target.
    Mc,
    /// Independent draws from `N(1, 3I)`.
    Biased,
    /// Percentiles `i/(n+1)` of the standard normal (d = 1).
    Stratified,
    /// Riesz-energy points on the sphere.
    QuasiUniform,
    /// Random-walk Metropolis chains.
    Mcmc,
    /// Sphere-by-concentration tensor design.
    Tensor,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Mc => "mc",
            Scenario::Biased => "biased",
            Scenario::Stratified => "stratified",
            Scenario::QuasiUniform => "quasi-uniform",
            Scenario::Mcmc => "mcmc",
            Scenario::Tensor => "tensor",
        }
    }
}

/// Every setting, all optional. Used both for the TOML file and for the
/// command-line flags.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub d: Option<usize>,
    pub n: Option<Vec<usize>>,
    pub alpha: Option<Vec<f64>>,
    pub operator: Option<OperatorArg>,
    pub points: Option<Scenario>,
    pub reps: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub synthetic: Option<bool>,
    pub fast: Option<bool>,
    pub vmf_c: Option<[f64; 3]>,
    pub riesz_iters: Option<usize>,
    pub eigen_count: Option<usize>,
    pub c0: Option<f64>,
    pub r0: Option<f64>,
    pub mu0: Option<[f64; 3]>,
    pub burn_in: Option<usize>,
    pub thin: Option<usize>,
    pub step_mu: Option<f64>,
    pub step_log_kappa: Option<f64>,
}

macro_rules! merge_fields {
    ($hi:ident, $lo:ident; $($f:ident),*) => {
        Settings { $($f: $hi.$f.or($lo.$f)),* }
    };
}

impl Settings {
    /// Fields set in `self` win over those in `lower`.
    pub fn over(self, lower: Settings) -> Settings {
        let hi = self;
        merge_fields!(hi, lower; d, n, alpha, operator, points, reps, seed, out, data, synthetic, fast,
            vmf_c, riesz_iters, eigen_count, c0, r0, mu0, burn_in, thin, step_mu, step_log_kappa)
    }

    pub fn from_toml_str(text: &str) -> Result<Settings, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("invalid config file: {e}")))
    }

    pub fn from_toml_file(path: &Path) -> Result<Settings, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config file {}: {e}", path.display())))?;
        Settings::from_toml_str(&text)
    }
}

/// Fully resolved configuration of one run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub d: usize,
    pub n: Vec<usize>,
    pub alpha: Vec<f64>,
    pub operator: OperatorArg,
    pub points: Scenario,
    pub reps: usize,
    pub seed: u64,
    /// Left out of the metadata so that file contents do not depend on
    /// where they are written.
    #[serde(skip_serializing)]
    pub out: PathBuf,
    pub data: Option<PathBuf>,
    pub synthetic: bool,
    pub fast: bool,
    pub vmf_c: [f64; 3],
    pub riesz_iters: usize,
    pub eigen_count: usize,
    pub c0: f64,
    pub r0: f64,
    pub mu0: [f64; 3],
    pub burn_in: usize,
    pub thin: usize,
    pub step_mu: f64,
    pub step_log_kappa: f64,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Parses `"3.5"` or `"7/2"`.
pub fn parse_alpha(text: &str) -> Result<f64, String> {
    let text = text.trim();
    let value = match text.split_once('/') {
        Some((num, den)) => {
            let num: f64 = num.trim().parse().map_err(|_| format!("invalid alpha '{text}'"))?;
            let den: f64 = den.trim().parse().map_err(|_| format!("invalid alpha '{text}'"))?;
            num / den
        }
        None => text.parse().map_err(|_| format!("invalid alpha '{text}'"))?,
    };
    HalfInteger::from_f64(value).map_err(|_| format!("alpha must be a half-integer such as 3/2 or 7/2, got '{text}'"))?;
    Ok(value)
}

impl RunConfig {
    /// Applies defaults for `experiment` under `settings`, then validates.
    pub fn resolve(experiment: Experiment, settings: Settings) -> Result<RunConfig, CliError> {
        let fast = settings.fast.unwrap_or(false);
        let operator = settings.operator.unwrap_or(OperatorArg::Second);
        let default_n = |cap: usize| -> Vec<usize> {
            DEFAULT_N_GRID.iter().copied().filter(|&n| n <= cap).collect()
        };
        let grid_cap = if fast { FAST_MAX_N } else { usize::MAX };
        let mcmc = McmcConfig::new(1);

        let (n, alpha, points, reps) = match experiment {
            Experiment::Euclidean => {
                let alpha = match operator {
                    OperatorArg::Second => vec![2.5, 3.5],
                    OperatorArg::First => vec![1.5, 2.5, 3.5],
                };
                (default_n(grid_cap), alpha, Scenario::Stratified, if fast { 10 } else { 100 })
            }
            Experiment::Sphere => {
                (default_n(grid_cap), vec![3.5, 4.5, 5.5], Scenario::QuasiUniform, if fast { 3 } else { 10 })
            }
            Experiment::Eigenfunctions => {
                (vec![if fast { 200 } else { 500 }], vec![3.5], Scenario::QuasiUniform, 1)
            }
            Experiment::Paleo => (default_n(grid_cap), vec![], Scenario::Mcmc, 3),
            Experiment::Check => (vec![], vec![], Scenario::Stratified, 1),
        };

        let cfg = RunConfig {
            experiment,
            d: settings.d.unwrap_or(1),
            n: settings.n.unwrap_or(n),
            alpha: settings.alpha.unwrap_or(alpha),
            operator,
            points: settings.points.unwrap_or(points),
            reps: settings.reps.unwrap_or(reps),
            seed: settings.seed.unwrap_or(0),
            out: settings.out.unwrap_or_else(|| PathBuf::from("results")),
            data: settings.data,
            synthetic: settings.synthetic.unwrap_or(false),
            fast,
            vmf_c: settings.vmf_c.unwrap_or([1.0, 0.0, 0.0]),
            riesz_iters: settings.riesz_iters.unwrap_or(200),
            eigen_count: settings.eigen_count.unwrap_or(12),
            c0: settings.c0.unwrap_or(0.0),
            r0: settings.r0.unwrap_or(0.0),
            mu0: settings.mu0.unwrap_or([0.0, 0.0, 1.0]),
            burn_in: settings.burn_in.unwrap_or(mcmc.burn_in),
            thin: settings.thin.unwrap_or(mcmc.thin),
            step_mu: settings.step_mu.unwrap_or(mcmc.step_mu),
            step_log_kappa: settings.step_log_kappa.unwrap_or(mcmc.step_log_kappa),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.n.iter().any(|&n| n == 0) {
            return Err(config_err("every n must be positive"));
        }
        if self.reps == 0 {
            return Err(config_err("reps must be positive"));
        }
        for &a in &self.alpha {
            HalfInteger::from_f64(a).map_err(|_| config_err(format!("alpha must be a half-integer, got {a}")))?;
        }
        if self.operator == OperatorArg::First && self.experiment != Experiment::Euclidean {
            return Err(config_err("operator=first is only available for the euclidean experiment"));
        }
        let scenario_ok = match self.experiment {
            Experiment::Euclidean => matches!(self.points, Scenario::Mc | Scenario::Biased | Scenario::Stratified),
            Experiment::Sphere | Experiment::Eigenfunctions => self.points == Scenario::QuasiUniform,
            Experiment::Paleo => matches!(self.points, Scenario::Mcmc | Scenario::Tensor),
            Experiment::Check => true,
        };
        if !scenario_ok {
            return Err(config_err(format!(
                "points={} is not available for the {} experiment",
                self.points.name(),
                self.experiment.name()
            )));
        }
        match self.experiment {
            Experiment::Euclidean => self.validate_euclidean(),
            Experiment::Sphere | Experiment::Eigenfunctions => self.validate_sphere(),
            Experiment::Paleo => self.validate_paleo(),
            Experiment::Check => Ok(()),
        }
    }

    fn validate_euclidean(&self) -> Result<(), CliError> {
        if self.d == 0 || self.d > MAX_EUCLIDEAN_DIM {
            return Err(config_err(format!("d must lie in 1..={MAX_EUCLIDEAN_DIM}, got {}", self.d)));
        }
        if self.points == Scenario::Stratified && self.d != 1 {
            return Err(config_err("points=stratified requires d=1"));
        }
        for &a in &self.alpha {
            if a < 1.5 {
                return Err(config_err(format!("alpha must be at least 3/2, got {a}")));
            }
            if self.operator == OperatorArg::Second && a < 2.0 {
                return Err(config_err(format!(
                    "operator=second requires alpha > 2 (the second-order operator needs two derivatives in each argument), got {a}"
                )));
            }
        }
        Ok(())
    }

    fn validate_sphere(&self) -> Result<(), CliError> {
        for &a in &self.alpha {
            if ![3.5, 4.5, 5.5].contains(&a) {
                return Err(config_err(format!("sphere experiments take alpha in {{7/2, 9/2, 11/2}}, got {a}")));
            }
        }
        if self.n.iter().any(|&n| n < 2) {
            return Err(config_err("quasi-uniform sphere points need n >= 2"));
        }
        let c = self.vmf_c;
        if !c.iter().all(|v| v.is_finite()) {
            return Err(config_err("vmf_c must be finite"));
        }
        if self.experiment == Experiment::Eigenfunctions {
            if self.n.len() != 1 {
                return Err(config_err("eigenfunctions takes a single n"));
            }
            if self.eigen_count == 0 || self.eigen_count > self.n[0] {
                return Err(config_err(format!("eigen_count must lie in 1..={}", self.n[0])));
            }
        }
        Ok(())
    }

    fn validate_paleo(&self) -> Result<(), CliError> {
        if !self.alpha.is_empty() {
            return Err(config_err("the paleo kernel has no alpha parameter"));
        }
        match (&self.data, self.synthetic) {
            (None, false) => return Err(config_err("paleo needs --data <csv> or --synthetic")),
            (Some(_), true) => return Err(config_err("--data and --synthetic are mutually exclusive")),
            _ => {}
        }
        if self.points == Scenario::Tensor && self.n.iter().any(|&n| n < 8) {
            return Err(config_err("the tensor design needs n >= 8"));
        }
        self.mcmc(1).validate().map_err(|e| config_err(e.to_string()))?;
        if !(self.c0 >= 0.0 && self.r0 >= 0.0) {
            return Err(config_err("c0 and r0 must be nonnegative"));
        }
        Ok(())
    }

    /// MCMC settings for a chain of `n_samples` states.
    pub fn mcmc(&self, n_samples: usize) -> McmcConfig {
        McmcConfig {
            n_samples,
            burn_in: self.burn_in,
            thin: self.thin,
            step_mu: self.step_mu,
            step_log_kappa: self.step_log_kappa,
        }
    }

    pub fn alphas(&self) -> Vec<HalfInteger> {
        self.alpha.iter().map(|&a| HalfInteger::from_f64(a).expect("validated")).collect()
    }

    /// The configuration as TOML, for output metadata.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_per_experiment() {
        let e = RunConfig::resolve(Experiment::Euclidean, Settings::default()).unwrap();
        assert_eq!(e.n, DEFAULT_N_GRID.to_vec());
        assert_eq!((e.reps, e.points, e.alpha.clone()), (100, Scenario::Stratified, vec![2.5, 3.5]));
        let fast = RunConfig::resolve(Experiment::Euclidean, Settings { fast: Some(true), ..Default::default() }).unwrap();
        assert_eq!(fast.reps, 10);
        assert_eq!(*fast.n.last().unwrap(), FAST_MAX_N);
        let s = RunConfig::resolve(Experiment::Sphere, Settings::default()).unwrap();
        assert_eq!(s.alpha, vec![3.5, 4.5, 5.5]);
    }

    #[test]
    fn flags_override_file() {
        let file = Settings::from_toml_str("seed = 4\nreps = 7\nalpha = [3.5]\noperator = \"first\"\n").unwrap();
        let flags = Settings { seed: Some(9), ..Default::default() };
        let cfg = RunConfig::resolve(Experiment::Euclidean, flags.over(file)).unwrap();
        assert_eq!((cfg.seed, cfg.reps, cfg.operator), (9, 7, OperatorArg::First));
        assert_eq!(cfg.alpha, vec![3.5]);
    }

    #[test]
    fn unknown_keys_and_bad_combinations_are_config_errors() {
        assert!(matches!(Settings::from_toml_str("sede = 1"), Err(CliError::Config(_))));
        let bad = [
            (Experiment::Euclidean, Settings { alpha: Some(vec![1.5]), ..Default::default() }),
            (Experiment::Euclidean, Settings { d: Some(2), ..Default::default() }),
            (Experiment::Sphere, Settings { operator: Some(OperatorArg::First), ..Default::default() }),
            (Experiment::Sphere, Settings { alpha: Some(vec![2.5]), ..Default::default() }),
            (Experiment::Paleo, Settings::default()),
            (Experiment::Paleo, Settings { synthetic: Some(true), alpha: Some(vec![3.5]), ..Default::default() }),
            (Experiment::Euclidean, Settings { reps: Some(0), ..Default::default() }),
        ];
        for (exp, s) in bad {
            let err = RunConfig::resolve(exp, s.clone()).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{exp:?} {s:?}");
        }
        let msg = RunConfig::resolve(Experiment::Euclidean, Settings { alpha: Some(vec![1.5]), ..Default::default() })
            .unwrap_err()
            .to_string();
        assert!(msg.contains("operator=second requires alpha > 2"), "{msg}");
    }

    #[test]
    fn alpha_parsing() {
        assert_eq!(parse_alpha("7/2"), Ok(3.5));
        assert_eq!(parse_alpha("4.5"), Ok(4.5));
        assert!(parse_alpha("3").is_err());
        assert!(parse_alpha("x").is_err());
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = RunConfig::resolve(Experiment::Sphere, Settings { seed: Some(3), ..Default::default() }).unwrap();
        let text = cfg.to_toml();
        let mut back = Settings::from_toml_str(&text.replace("experiment = \"sphere\"\n", "")).unwrap();
        back.fast = Some(cfg.fast);
        assert_eq!(RunConfig::resolve(Experiment::Sphere, back).unwrap(), cfg);
    }
}

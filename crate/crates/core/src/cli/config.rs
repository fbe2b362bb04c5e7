use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Penalty;
use crate::sparse::{DEFAULT_MAX_ITER, DEFAULT_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Fig2,
    Fig3,
    Fig4,
    #[serde(alias = "design")]
    SingleDesign,
    Detect,
}

impl std::str::FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig2" => Ok(Experiment::Fig2),
            "fig3" => Ok(Experiment::Fig3),
            "fig4" => Ok(Experiment::Fig4),
            "design" | "single_design" => Ok(Experiment::SingleDesign),
            "detect" => Ok(Experiment::Detect),
            other => Err(Error::Config(format!("unknown experiment '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Pca,
    Diagonal,
    Random,
    L0,
    L1,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pca" => Ok(Method::Pca),
            "diagonal" => Ok(Method::Diagonal),
            "random" => Ok(Method::Random),
            "l0" => Ok(Method::L0),
            "l1" => Ok(Method::L1),
            other => Err(Error::Config(format!("unknown method '{other}'"))),
        }
    }
}

/// Everything needed to regenerate a run. Unknown keys in the TOML file are
/// rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_i")]
    pub i: usize,
    #[serde(default = "default_penalty")]
    pub penalty: Penalty,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub target_deactivation: Option<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Random designs per seed (fig2) or Monte-Carlo trials (detect).
    #[serde(default)]
    pub trials: Option<usize>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_pfa")]
    pub pfa: f64,
    #[serde(default = "default_method")]
    pub method: Method,
    /// Optional CSV of signals; otherwise a Gaussian class is drawn from the
    /// first seed.
    #[serde(default)]
    pub signals: Option<PathBuf>,
    /// M values (fig2) or I values (fig3).
    #[serde(default)]
    pub sweep: Option<Vec<usize>>,
    /// Number of γ grid points (fig4).
    #[serde(default = "default_grid")]
    pub grid: usize,
    /// Normalized C-DC level at which fig4 reports the achievable deactivation.
    #[serde(default = "default_level")]
    pub performance_level: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_n() -> usize {
    30
}
fn default_m() -> usize {
    10
}
fn default_i() -> usize {
    10
}
fn default_penalty() -> Penalty {
    Penalty::L0
}
fn default_seeds() -> Vec<u64> {
    (0..50).collect()
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_sigma() -> f64 {
    1.0
}
fn default_pfa() -> f64 {
    0.05
}
fn default_method() -> Method {
    Method::Pca
}
fn default_grid() -> usize {
    200
}
fn default_level() -> f64 {
    0.9
}
fn default_tol() -> f64 {
    DEFAULT_TOL
}
fn default_max_iter() -> usize {
    DEFAULT_MAX_ITER
}

pub const DEFAULT_TARGET_DEACTIVATION: f64 = 0.4;
pub const DEFAULT_RANDOM_DRAWS: usize = 100;
pub const DEFAULT_DETECTION_TRIALS: usize = 100_000;

impl RunConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            n: default_n(),
            m: default_m(),
            i: default_i(),
            penalty: default_penalty(),
            gamma: None,
            target_deactivation: None,
            seeds: default_seeds(),
            trials: None,
            output_dir: default_output_dir(),
            sigma: default_sigma(),
            pfa: default_pfa(),
            method: default_method(),
            signals: None,
            sweep: None,
            grid: default_grid(),
            performance_level: default_level(),
            tol: default_tol(),
            max_iter: default_max_iter(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn target(&self) -> f64 {
        self.target_deactivation.unwrap_or(DEFAULT_TARGET_DEACTIVATION)
    }

    pub fn random_draws(&self) -> usize {
        self.trials.unwrap_or(DEFAULT_RANDOM_DRAWS)
    }

    pub fn detection_trials(&self) -> usize {
        self.trials.unwrap_or(DEFAULT_DETECTION_TRIALS)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.seeds.is_empty() {
            return fail("seeds must not be empty".into());
        }
        if self.n == 0 || self.m == 0 || self.i == 0 {
            return fail("n, m and i must be positive".into());
        }
        if self.m > self.n {
            return fail(format!("need m <= n, got m={}, n={}", self.m, self.n));
        }
        if self.i > self.n {
            return fail(format!("need i <= n, got i={}, n={}", self.i, self.n));
        }
        if self.gamma.is_some() && self.target_deactivation.is_some() {
            return fail("set either gamma or target_deactivation, not both".into());
        }
        if let Some(g) = self.gamma {
            if !(g >= 0.0 && g.is_finite()) {
                return fail(format!("gamma must be >= 0, got {g}"));
            }
        }
        if let Some(t) = self.target_deactivation {
            if !(0.0..=1.0).contains(&t) {
                return fail(format!("target_deactivation must lie in [0,1], got {t}"));
            }
        }
        if let Some(sweep) = &self.sweep {
            if sweep.is_empty() {
                return fail("sweep must not be empty".into());
            }
            let limit = self.n;
            if sweep.iter().any(|&v| v == 0 || v > limit) {
                return fail(format!("sweep values must lie in 1..={limit}"));
            }
        }
        if self.grid < 2 {
            return fail("grid needs at least 2 points".into());
        }
        if !(self.sigma > 0.0) {
            return fail("sigma must be > 0".into());
        }
        if !(self.pfa > 0.0 && self.pfa < 1.0) {
            return fail("pfa must lie in (0,1)".into());
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return fail("tol must be > 0 and max_iter >= 1".into());
        }
        if self.experiment == Experiment::Detect && self.detection_trials() < 100 {
            return fail("detect needs trials >= 100".into());
        }
        Ok(())
    }
}

/// Parses `"3"`, `"1,4,9"` or the half-open range `"0..50"`.
pub fn parse_seed_list(text: &str) -> Result<Vec<u64>> {
    let bad = |_| Error::Config(format!("invalid seed list '{text}'"));
    if let Some((a, b)) = text.split_once("..") {
        let lo: u64 = a.trim().parse().map_err(bad)?;
        let hi: u64 = b.trim().parse().map_err(bad)?;
        if hi <= lo {
            return Err(Error::Config(format!("empty seed range '{text}'")));
        }
        return Ok((lo..hi).collect());
    }
    text.split(',')
        .map(|s| s.trim().parse::<u64>().map_err(bad))
        .collect()
}

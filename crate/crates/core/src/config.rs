//! Run configuration: defaults, flat `key = value` files and flag overrides.
//!
//! File syntax: one `key = value` per line, `#` starts a comment, blank lines
//! are ignored. Keys are the long command-line flag names without dashes
//! (`S`, `N`, `L`, `M`, `alpha`, `grid_step`, ...). Unknown keys are errors.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmm::CovarianceStructure;
use crate::problem::QUADROTOR;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Baseline,
    SampleLp,
    Gmm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionSampling {
    Uniform,
    Grid,
    Waypoint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub problem: String,
    pub method: Method,
    pub seed: u64,
    pub decision_sampling: Option<DecisionSampling>,
    pub grid_step: f64,
    /// Decision samples for uniform and waypoint sampling.
    #[serde(rename = "S")]
    pub s: Option<usize>,
    #[serde(rename = "N")]
    pub n: usize,
    pub alpha: Option<f64>,
    /// Level of the point baseline; defaults to `alpha`.
    pub epsilon: Option<f64>,
    pub gamma: f64,
    #[serde(rename = "L")]
    pub components: Option<usize>,
    pub restarts: Option<usize>,
    pub mc_samples: Option<usize>,
    pub penalty_initial: Option<f64>,
    pub penalty_growth: f64,
    pub max_iterations: Option<usize>,
    pub max_stages: Option<usize>,
    pub covariance: Option<CovarianceStructure>,
    pub step_scale: Option<f64>,
    /// Seed the mixture search with the sample-LP and baseline solutions.
    pub warm_start: Option<bool>,
    /// Validation trials; 0 skips validation.
    #[serde(rename = "M")]
    pub m_val: u64,
    pub plot_rollouts: usize,
    pub scenario_file: Option<PathBuf>,
    pub lipschitz: Option<f64>,
    pub beta: Option<f64>,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: crate::problem::TOY1D.into(),
            method: Method::SampleLp,
            seed: 0,
            decision_sampling: None,
            grid_step: 0.02,
            s: None,
            n: 2000,
            alpha: None,
            epsilon: None,
            gamma: 0.0,
            components: None,
            restarts: None,
            mc_samples: None,
            penalty_initial: None,
            penalty_growth: 10.0,
            max_iterations: None,
            max_stages: None,
            covariance: None,
            step_scale: None,
            warm_start: None,
            m_val: 10_000,
            plot_rollouts: 200,
            scenario_file: None,
            lipschitz: None,
            beta: None,
            out: None,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{value}' for '{key}'")))
}

fn parse_enum<T: for<'de> Deserialize<'de>>(key: &str, value: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(value.replace('-', "_")))
        .map_err(|_| Error::Config(format!("invalid value '{value}' for '{key}'")))
}

/// Splits a flat config text into `(key, value)` pairs.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Config(format!("line {}: expected key = value", no + 1)));
        };
        let (k, v) = (k.trim(), v.trim().trim_matches('"'));
        if k.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", no + 1)));
        }
        pairs.push((k.to_string(), v.to_string()));
    }
    Ok(pairs)
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "problem" => self.problem = value.to_string(),
            "method" => self.method = parse_enum(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "decision_sampling" => self.decision_sampling = Some(parse_enum(key, value)?),
            "grid_step" => self.grid_step = parse(key, value)?,
            "S" => self.s = Some(parse(key, value)?),
            "N" => self.n = parse(key, value)?,
            "alpha" => self.alpha = Some(parse(key, value)?),
            "epsilon" => self.epsilon = Some(parse(key, value)?),
            "gamma" => self.gamma = parse(key, value)?,
            "L" => self.components = Some(parse(key, value)?),
            "restarts" => self.restarts = Some(parse(key, value)?),
            "mc_samples" => self.mc_samples = Some(parse(key, value)?),
            "penalty_initial" => self.penalty_initial = Some(parse(key, value)?),
            "penalty_growth" => self.penalty_growth = parse(key, value)?,
            "max_iterations" => self.max_iterations = Some(parse(key, value)?),
            "max_stages" => self.max_stages = Some(parse(key, value)?),
            "covariance" => self.covariance = Some(parse_enum(key, value)?),
            "step_scale" => self.step_scale = Some(parse(key, value)?),
            "warm_start" => self.warm_start = Some(parse(key, value)?),
            "M" => self.m_val = parse(key, value)?,
            "plot_rollouts" => self.plot_rollouts = parse(key, value)?,
            "scenario_file" => self.scenario_file = Some(PathBuf::from(value)),
            "lipschitz" => self.lipschitz = Some(parse(key, value)?),
            "beta" => self.beta = Some(parse(key, value)?),
            "out" => self.out = Some(PathBuf::from(value)),
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (k, v) in parse_pairs(text)? {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    fn is_quadrotor(&self) -> bool {
        self.problem == QUADROTOR
    }

    pub fn sampling_mode(&self) -> DecisionSampling {
        self.decision_sampling
            .unwrap_or(self.pick(DecisionSampling::Waypoint, DecisionSampling::Grid))
    }

    pub fn covariance_structure(&self) -> CovarianceStructure {
        self.covariance
            .unwrap_or(self.pick(CovarianceStructure::Diagonal, CovarianceStructure::Full))
    }

    pub fn decision_count(&self) -> usize {
        self.s.unwrap_or(self.pick(1000, 200))
    }

    /// Per-problem choice: the first value for the quadrotor, the second otherwise.
    fn pick<T>(&self, quadrotor: T, other: T) -> T {
        if self.is_quadrotor() {
            quadrotor
        } else {
            other
        }
    }

    pub fn mixture_components(&self) -> usize {
        self.components.unwrap_or(self.pick(2, 6))
    }

    pub fn gmm_restarts(&self) -> usize {
        self.restarts.unwrap_or(self.pick(2, 4))
    }

    pub fn gmm_mc_samples(&self) -> usize {
        self.mc_samples.unwrap_or(self.pick(64, 2000))
    }

    pub fn gmm_penalty_initial(&self) -> f64 {
        self.penalty_initial.unwrap_or(self.pick(1e5, 10.0))
    }

    pub fn gmm_max_iterations(&self) -> usize {
        self.max_iterations.unwrap_or(self.pick(300, 1500))
    }

    pub fn gmm_max_stages(&self) -> usize {
        self.max_stages.unwrap_or(self.pick(3, 6))
    }

    pub fn simplex_step(&self) -> f64 {
        self.step_scale.unwrap_or(self.pick(0.05, 0.5))
    }

    pub fn use_warm_start(&self) -> bool {
        self.warm_start.unwrap_or(self.pick(true, false))
    }

    /// Range checks that do not need the problem.
    pub fn check(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.s == Some(0) || self.n == 0 {
            return bad("S and N must be positive");
        }
        if !(self.grid_step > 0.0) {
            return bad("grid_step must be positive");
        }
        if !(self.gamma >= 0.0) {
            return bad("gamma must be non-negative");
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a < 1.0) {
                return bad("alpha must lie in (0, 1)");
            }
        }
        if let Some(e) = self.epsilon {
            if !(0.0..1.0).contains(&e) {
                return bad("epsilon must lie in [0, 1)");
            }
        }
        if self.mixture_components() == 0 || self.gmm_restarts() == 0 || self.gmm_mc_samples() == 0 {
            return bad("L, restarts and mc_samples must be positive");
        }
        if !(self.gmm_penalty_initial() > 0.0) || !(self.penalty_growth > 1.0) {
            return bad("penalty_initial must be positive and penalty_growth above 1");
        }
        Ok(())
    }
}

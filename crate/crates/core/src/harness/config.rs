use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::{BonusMode, TargetPerturbation};
use crate::cme_estimator::ConfidenceConfig;
use crate::environments::{make_env, Env, Environment, FiniteMdp};
use crate::error::{Error, Result};
use crate::kernel_core::{KernelSpec, SketchKind};
use crate::oracles::FiniteEmbeddingModel;

/// Environment variable that overrides `master_seed`.
pub const SEED_ENV_VAR: &str = "CMERL_SEED";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Optimism,
    VarianceSum,
    Concentration,
    ClosedForm,
}

/// Confidence scalars as written in a config; unset bounds are derived from
/// the environment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfidenceSection {
    pub lambda: f64,
    pub delta: f64,
    pub b_p: Option<f64>,
    pub b_v: Option<f64>,
    pub b_phi: Option<f64>,
    #[serde(default)]
    pub zeta: f64,
    pub one_norm: Option<f64>,
}

impl Default for ConfidenceSection {
    fn default() -> Self {
        ConfidenceSection {
            lambda: 1.0,
            delta: 0.1,
            b_p: None,
            b_v: None,
            b_phi: None,
            zeta: 0.0,
            one_norm: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApproximationSection {
    pub kind: SketchKind,
    /// Feature count (random Fourier) or number of landmarks (Nyström).
    pub m: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Catalog name; mutually exclusive with `env_path`.
    pub env: Option<String>,
    /// JSON file holding a custom finite MDP.
    pub env_path: Option<PathBuf>,
    pub episodes: usize,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub mode: BonusMode,
    #[serde(default = "one")]
    pub beta_scale: f64,
    /// Per-episode checks. Unset means optimism, variance_sum and
    /// concentration on exact finite runs and variance_sum alone otherwise.
    #[serde(default)]
    pub checks: Option<BTreeSet<Check>>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Defaults to a unit-scale Delta kernel on finite MDPs and a unit
    /// squared-exponential kernel otherwise.
    pub kernel: Option<KernelSpec>,
    #[serde(default)]
    pub confidence: ConfidenceSection,
    pub approximation: Option<ApproximationSection>,
    pub perturbation: Option<TargetPerturbation>,
    /// Rollouts per policy evaluation on continuous environments.
    #[serde(default = "default_rollouts")]
    pub mc_rollouts: usize,
    /// Record wall-clock time per episode. Off by default so that outputs are
    /// byte-for-byte reproducible.
    #[serde(default)]
    pub timing: bool,
}

fn one() -> f64 {
    1.0
}

fn default_checks(finite_exact: bool) -> BTreeSet<Check> {
    if finite_exact {
        [Check::Optimism, Check::VarianceSum, Check::Concentration].into()
    } else {
        [Check::VarianceSum].into()
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_rollouts() -> usize {
    1000
}

impl ExperimentConfig {
    /// Minimal config for a catalog environment.
    pub fn for_env(env: &str, episodes: usize, seeds: Vec<u64>) -> Self {
        ExperimentConfig {
            env: Some(env.to_string()),
            env_path: None,
            episodes,
            seeds,
            master_seed: 0,
            mode: BonusMode::WellSpecified,
            beta_scale: 1.0,
            checks: None,
            output_dir: default_output_dir(),
            kernel: None,
            confidence: ConfidenceSection::default(),
            approximation: None,
            perturbation: None,
            mc_rollouts: default_rollouts(),
            timing: false,
        }
    }

    /// Reads TOML, or JSON when the extension is `.json`. Relative `env_path`
    /// entries resolve against the config's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?
        };
        if let (Some(p), Some(dir)) = (&cfg.env_path, path.parent()) {
            if p.is_relative() {
                cfg.env_path = Some(dir.join(p));
            }
        }
        Ok(cfg)
    }

    /// Applies `CMERL_SEED` if set.
    pub fn apply_env_overrides(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV_VAR) {
            self.master_seed = v.trim().parse().map_err(|_| {
                Error::Config(format!("{SEED_ENV_VAR}={v} is not an unsigned integer"))
            })?;
        }
        Ok(())
    }

    pub fn build_env(&self) -> Result<Env> {
        match (&self.env, &self.env_path) {
            (Some(name), None) => make_env(name).map_err(|e| Error::Config(e.to_string())),
            (None, Some(path)) => {
                Ok(Env::Finite(FiniteMdp::load_json(path).map_err(|e| {
                    Error::Config(format!("{}: {e}", path.display()))
                })?))
            }
            _ => Err(Error::Config(
                "set exactly one of `env` and `env_path`".into(),
            )),
        }
    }

    /// Validates everything and fills in derived bounds.
    pub fn resolve(&self) -> Result<ResolvedExperiment> {
        if self.episodes == 0 {
            return Err(Error::Config("episodes must be >= 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must be non-empty".into()));
        }
        if !(self.beta_scale >= 0.0 && self.beta_scale.is_finite()) {
            return Err(Error::Config("beta_scale must be non-negative".into()));
        }
        if self.mc_rollouts == 0 {
            return Err(Error::Config("mc_rollouts must be >= 1".into()));
        }
        let env = self.build_env()?;
        let finite = env.as_finite();
        let kernel = match self.kernel {
            Some(k) => k,
            None if finite.is_some() => KernelSpec::delta(1.0)?,
            None => KernelSpec::squared_exponential(1.0, 1.0)?,
        };
        let checks = self
            .checks
            .clone()
            .unwrap_or_else(|| default_checks(finite.is_some() && self.approximation.is_none()));
        if let Some(a) = &self.approximation {
            if a.m == 0 {
                return Err(Error::Config("approximation.m must be >= 1".into()));
            }
            if finite.is_some() && checks.iter().any(|c| *c != Check::VarianceSum) {
                return Err(Error::Config(
                    "sketched models only support the variance_sum check on finite MDPs".into(),
                ));
            }
        }
        let h = env.horizon() as f64;
        let c = &self.confidence;
        let (b_p, b_v, one_norm) = match finite {
            Some(mdp) => {
                let fem = FiniteEmbeddingModel::new(
                    mdp,
                    c.lambda.max(f64::MIN_POSITIVE),
                    kernel.output_scale,
                )?;
                let s = (mdp.num_states() as f64).sqrt();
                (
                    c.b_p.unwrap_or_else(|| fem.hs_norm_theta_p()),
                    c.b_v.unwrap_or(h * s),
                    c.one_norm.unwrap_or(s),
                )
            }
            None => (
                c.b_p.unwrap_or(1.0),
                c.b_v.unwrap_or(h),
                c.one_norm.unwrap_or(1.0),
            ),
        };
        let confidence = ConfidenceConfig {
            lambda: c.lambda,
            delta: c.delta,
            b_p,
            b_v,
            b_phi: c
                .b_phi
                .unwrap_or_else(|| kernel.sup_norm_bound().unwrap_or(1.0)),
            zeta: c.zeta,
            one_norm,
        };
        confidence
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if finite.is_none() && checks.iter().any(|c| *c != Check::VarianceSum) {
            return Err(Error::Config(
                "optimism, concentration and closed_form checks need a finite MDP".into(),
            ));
        }
        Ok(ResolvedExperiment {
            config: self.clone(),
            env,
            kernel,
            confidence,
            checks,
        })
    }
}

/// A validated config together with its environment and derived constants.
#[derive(Clone, Debug)]
pub struct ResolvedExperiment {
    pub config: ExperimentConfig,
    pub env: Env,
    pub kernel: KernelSpec,
    pub confidence: ConfidenceConfig,
    /// Checks in force after defaults were applied.
    pub checks: BTreeSet<Check>,
}

impl ResolvedExperiment {
    pub fn check_enabled(&self, check: Check) -> bool {
        self.checks.contains(&check)
    }
}

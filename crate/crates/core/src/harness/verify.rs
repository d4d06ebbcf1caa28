use std::fmt;

use rand::distr::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{Check, ExperimentConfig};
use super::runner::{run_seed, CheckStatus, SeedRun, CLOSED_FORM_TOLERANCE};
use crate::agent::{BonusMode, TargetPerturbation};
use crate::cme_estimator::{CmeModel, EmbeddingModel, Transition};
use crate::environments::{Environment, FiniteMdp};
use crate::error::Result;
use crate::kernel_core::KernelSpec;
use crate::oracles::FiniteEmbeddingModel;

/// Random finite MDP with `S` states and `A` actions; rows are normalized
/// uniforms, rewards uniform in `[0, 1]`.
pub fn random_mdp(
    rng: &mut ChaCha8Rng,
    num_states: usize,
    num_actions: usize,
    horizon: usize,
) -> Result<FiniteMdp> {
    let mut p = Vec::with_capacity(num_states);
    let mut r = Vec::with_capacity(num_states);
    for _ in 0..num_states {
        let mut rows = Vec::with_capacity(num_actions);
        for _ in 0..num_actions {
            let raw: Vec<f64> = (0..num_states)
                .map(|_| rng.random::<f64>() + 1e-3)
                .collect();
            let total: f64 = raw.iter().sum();
            let mut row: Vec<f64> = raw.iter().map(|x| x / total).collect();
            // push rounding error into the largest entry so the row sums to 1
            let drift = 1.0 - row.iter().sum::<f64>();
            let imax = (0..num_states)
                .max_by(|&a, &b| row[a].total_cmp(&row[b]))
                .unwrap_or(0);
            row[imax] += drift;
            rows.push(row);
        }
        p.push(rows);
        r.push((0..num_actions).map(|_| rng.random::<f64>()).collect());
    }
    FiniteMdp::new("random", horizon, 0, p, r)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClosedFormReport {
    pub instances: usize,
    pub agree: usize,
    pub max_gap: f64,
}

impl ClosedFormReport {
    pub fn passed(&self) -> bool {
        self.agree == self.instances
    }
}

impl fmt::Display for ClosedFormReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{} instances agree ≤ 1e-6 (max gap {:.3e})",
            self.agree, self.instances, self.max_gap
        )
    }
}

/// Compares the agent-side closed form (dual weights, Delta kernel) with the
/// oracle's maximization over the confidence ball on random small instances:
/// `S <= 4`, `A <= 3`, `n <= 30`, `beta in (0, 5]`.
pub fn closed_form_suite(instances: usize, seed: u64) -> Result<ClosedFormReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut agree = 0;
    let mut max_gap: f64 = 0.0;
    for i in 0..instances {
        let ns = rng.random_range(2..=4);
        let na = rng.random_range(1..=3);
        let n = rng.random_range(1..=30);
        let lambda = rng.random_range(0.1..2.0);
        let beta = 5.0 * (1.0 - rng.random::<f64>());
        let scale = rng.random_range(0.5..2.0);
        let mdp = random_mdp(&mut rng, ns, na, 1)?;

        let kernel = KernelSpec::delta(scale)?;
        let mut model = CmeModel::new(kernel, lambda, 1)?;
        let mut fem = FiniteEmbeddingModel::new(&mdp, lambda, scale)?;
        let mut next_states = Vec::with_capacity(n);
        for ep in 1..=n {
            let s = rng.random_range(0..ns);
            let a = rng.random_range(0..na);
            let s2 = mdp.sample_next(s, a, &mut rng)?;
            model.append_transition(Transition {
                state: mdp.state_point(s),
                action: a,
                action_point: mdp.action_point(a),
                next_state: mdp.state_point(s2),
                reward: mdp.reward_at(s, a),
                episode: ep,
                step: 1,
            })?;
            fem.observe(s, a, s2)?;
            next_states.push(s2);
        }
        let f: Vec<f64> = (0..ns).map(|_| rng.random_range(-1.0..2.0)).collect();
        let (qs, qa) = (rng.random_range(0..ns), rng.random_range(0..na));
        let query = mdp.state_point(qs).join(&mdp.action_point(qa));
        let values: Vec<f64> = next_states.iter().map(|&s| f[s]).collect();
        let f_norm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
        let analytic = model.mean_embedding_prediction(&query, &values)?
            + beta / lambda.sqrt() * f_norm * model.predictive_variance(&query)?.sqrt();
        let gap = match fem.brute_force_optimistic_value(beta, qs, qa, &f, seed ^ (i as u64 + 1)) {
            Ok(v) => (v.value() - analytic).abs(),
            Err(_) => f64::INFINITY,
        };
        max_gap = max_gap.max(gap);
        if gap <= CLOSED_FORM_TOLERANCE {
            agree += 1;
        }
    }
    Ok(ClosedFormReport {
        instances,
        agree,
        max_gap,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DualityReport {
    pub queries: usize,
    pub max_prediction_gap: f64,
    pub max_variance_gap: f64,
}

/// Matrix-form predictions and variances against the dual kernel forms on
/// random finite data with Delta kernels.
pub fn duality_suite(queries: usize, seed: u64) -> Result<DualityReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_prediction_gap: f64 = 0.0;
    let mut max_variance_gap: f64 = 0.0;
    let per_instance = 50;
    let mut done = 0;
    while done < queries {
        let ns = rng.random_range(2..=5);
        let na = rng.random_range(1..=3);
        let lambda = rng.random_range(0.1..3.0);
        let scale = rng.random_range(0.5..2.0);
        let mdp = random_mdp(&mut rng, ns, na, 1)?;
        let mut model = CmeModel::new(KernelSpec::delta(scale)?, lambda, 1)?;
        let mut fem = FiniteEmbeddingModel::new(&mdp, lambda, scale)?;
        let mut next_states = Vec::new();
        for ep in 1..=rng.random_range(0..=60) {
            let (s, a) = (rng.random_range(0..ns), rng.random_range(0..na));
            let s2 = mdp.sample_next(s, a, &mut rng)?;
            model.append_transition(Transition {
                state: mdp.state_point(s),
                action: a,
                action_point: mdp.action_point(a),
                next_state: mdp.state_point(s2),
                reward: 0.0,
                episode: ep,
                step: 1,
            })?;
            fem.observe(s, a, s2)?;
            next_states.push(s2);
        }
        for _ in 0..per_instance.min(queries - done) {
            let (s, a) = (rng.random_range(0..ns), rng.random_range(0..na));
            let f: Vec<f64> = (0..ns).map(|_| rng.random_range(-2.0..2.0)).collect();
            let values: Vec<f64> = next_states.iter().map(|&x| f[x]).collect();
            let q = mdp.state_point(s).join(&mdp.action_point(a));
            let dual = model.mean_embedding_prediction(&q, &values)?;
            let primal = fem.predict(&f, s, a)?;
            max_prediction_gap = max_prediction_gap.max((dual - primal).abs());
            let dual_var = model.predictive_variance(&q)?;
            max_variance_gap = max_variance_gap.max((dual_var - fem.variance(s, a)?).abs());
            done += 1;
        }
    }
    Ok(DualityReport {
        queries,
        max_prediction_gap,
        max_variance_gap,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoverageReport {
    pub env: String,
    pub runs: usize,
    pub episodes: usize,
    /// Runs in which the concentration inequality held at every episode.
    pub runs_all_hold: usize,
    /// Episodes where the true operator was inside the agent's confidence set.
    pub episodes_in_set: usize,
    /// Optimism checks evaluated (episodes in the set) and how many failed.
    pub optimism_checked: usize,
    pub optimism_violations: usize,
    /// Largest `lhs / beta` ratio seen.
    pub max_ratio: f64,
}

impl CoverageReport {
    pub fn coverage(&self) -> f64 {
        self.runs_all_hold as f64 / self.runs as f64
    }

    fn absorb(&mut self, run: &SeedRun) {
        self.runs += 1;
        if run
            .records
            .iter()
            .all(|r| r.check_conc == CheckStatus::Pass)
        {
            self.runs_all_hold += 1;
        }
        for (r, d) in run.records.iter().zip(&run.diagnostics) {
            if d.in_confidence_set == Some(true) {
                self.episodes_in_set += 1;
            }
            match r.check_optimism {
                CheckStatus::Pass => self.optimism_checked += 1,
                CheckStatus::Fail => {
                    self.optimism_checked += 1;
                    self.optimism_violations += 1;
                }
                CheckStatus::Na => {}
            }
            if let (Some(l), Some(b)) = (d.conc_lhs, d.conc_beta) {
                self.max_ratio = self.max_ratio.max(l / b);
            }
        }
    }
}

impl fmt::Display for CoverageReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: concentration held at every episode in {}/{} runs ({:.1}%), max lhs/beta {:.3}; optimism violations {}/{}",
            self.env,
            self.runs_all_hold,
            self.runs,
            100.0 * self.coverage(),
            self.max_ratio,
            self.optimism_violations,
            self.optimism_checked
        )
    }
}

/// Options for the seeded coverage and optimism runs.
#[derive(Clone, Debug, PartialEq)]
pub struct CoverageOptions {
    pub env: String,
    pub runs: usize,
    pub episodes: usize,
    pub lambda: f64,
    pub delta: f64,
    pub master_seed: u64,
    pub mode: BonusMode,
    pub perturbation: Option<f64>,
    pub beta_scale: f64,
}

impl Default for CoverageOptions {
    fn default() -> Self {
        CoverageOptions {
            env: "chain2".into(),
            runs: 200,
            episodes: 50,
            lambda: 1.0,
            delta: 0.1,
            master_seed: 0,
            mode: BonusMode::WellSpecified,
            perturbation: None,
            beta_scale: 1.0,
        }
    }
}

/// Seeded runs with the concentration and optimism checks on.
pub fn coverage_suite(opts: &CoverageOptions) -> Result<CoverageReport> {
    let mut cfg =
        ExperimentConfig::for_env(&opts.env, opts.episodes, (0..opts.runs as u64).collect());
    cfg.master_seed = opts.master_seed;
    cfg.confidence.lambda = opts.lambda;
    cfg.confidence.delta = opts.delta;
    cfg.mode = opts.mode;
    cfg.beta_scale = opts.beta_scale;
    cfg.checks = Some([Check::Concentration, Check::Optimism, Check::VarianceSum].into());
    if let Some(zeta) = opts.perturbation {
        cfg.confidence.zeta = zeta;
        cfg.perturbation = Some(TargetPerturbation {
            magnitude: zeta,
            seed: opts.master_seed,
        });
    }
    let exp = cfg.resolve()?;
    let mut report = CoverageReport {
        env: opts.env.clone(),
        runs: 0,
        episodes: opts.episodes,
        runs_all_hold: 0,
        episodes_in_set: 0,
        optimism_checked: 0,
        optimism_violations: 0,
        max_ratio: 0.0,
    };
    let runs: Vec<Result<SeedRun>> = {
        use rayon::prelude::*;
        exp.config
            .seeds
            .par_iter()
            .map(|&s| run_seed(&exp, s))
            .collect()
    };
    for run in runs {
        report.absorb(&run?);
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq)]
pub struct InvariantReport {
    pub name: String,
    pub runs: usize,
    pub failures: usize,
    pub detail: String,
}

impl InvariantReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

impl fmt::Display for InvariantReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed() { "ok" } else { "FAILED" };
        write!(
            f,
            "{tag:6} {} ({} runs, {} failing): {}",
            self.name, self.runs, self.failures, self.detail
        )
    }
}

/// Optimism, approximate optimism and the variance-sum inequality across the
/// finite catalog.
pub fn invariants_suite(
    seeds: usize,
    episodes: usize,
    master_seed: u64,
) -> Result<Vec<InvariantReport>> {
    let mut out = Vec::new();
    for env in ["chain2", "riverswim6", "gridworld4x4"] {
        let opts = CoverageOptions {
            env: env.into(),
            runs: seeds,
            episodes,
            master_seed,
            ..Default::default()
        };
        let r = coverage_suite(&opts)?;
        out.push(InvariantReport {
            name: format!("optimism on {env}"),
            runs: r.runs,
            failures: r.optimism_violations,
            detail: format!(
                "{} episodes checked inside the confidence set",
                r.optimism_checked
            ),
        });
    }
    for env in ["chain2", "riverswim6"] {
        let opts = CoverageOptions {
            env: env.into(),
            runs: seeds,
            episodes,
            master_seed,
            mode: BonusMode::Misspecified,
            perturbation: Some(0.05),
            ..Default::default()
        };
        let r = coverage_suite(&opts)?;
        out.push(InvariantReport {
            name: format!("approximate optimism on {env} (zeta = 0.05)"),
            runs: r.runs,
            failures: r.optimism_violations,
            detail: format!("{} episodes checked", r.optimism_checked),
        });
    }
    for env in ["chain2", "riverswim6", "gridworld4x4", "nlds2d"] {
        let mut cfg =
            ExperimentConfig::for_env(env, episodes.min(20), (0..seeds.min(5) as u64).collect());
        cfg.master_seed = master_seed;
        cfg.checks = Some([Check::VarianceSum].into());
        cfg.mc_rollouts = 20;
        let exp = cfg.resolve()?;
        let mut failures = 0;
        let mut worst: f64 = 0.0;
        for &s in &exp.config.seeds {
            let run = run_seed(&exp, s)?;
            if run
                .records
                .iter()
                .any(|r| r.check_varsum == CheckStatus::Fail)
            {
                failures += 1;
            }
            if let Some(last) = run.records.last() {
                worst = worst.max(last.var_sum);
            }
        }
        out.push(InvariantReport {
            name: format!("variance sum on {env}"),
            runs: exp.config.seeds.len(),
            failures,
            detail: format!("largest final sum {worst:.4}"),
        });
    }
    Ok(out)
}

/// `gamma` after each episode of a uniformly exploring run, for the kernel
/// and environment in `cfg`.
pub fn info_gain_curve(cfg: &ExperimentConfig) -> Result<Vec<(usize, f64)>> {
    let exp = cfg.resolve()?;
    let env = &exp.env;
    let mut model = CmeModel::new(exp.kernel, exp.confidence.lambda, env.horizon())?;
    let seed = cfg.seeds[0];
    let mut rng = crate::environments::env_rng(cfg.master_seed, env.name(), seed);
    let mut policy_rng = ChaCha8Rng::seed_from_u64(seed);
    let actions = Uniform::new(0, env.num_actions())
        .map_err(|e| crate::Error::InvalidParameter(e.to_string()))?;
    let mut curve = Vec::with_capacity(cfg.episodes);
    for t in 1..=cfg.episodes {
        let mut s = env.reset();
        for h in 1..=env.horizon() {
            let a = actions.sample(&mut policy_rng);
            let (r, next) = env.step(&s, a, &mut rng)?;
            model.append_transition(Transition {
                state: s,
                action: a,
                action_point: env.action_point(a),
                next_state: next.clone(),
                reward: r,
                episode: t,
                step: h,
            })?;
            s = next;
        }
        curve.push((model.len(), model.info_gain()));
    }
    Ok(curve)
}

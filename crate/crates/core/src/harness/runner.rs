use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ApproximationSection, Check, ResolvedExperiment};
use crate::agent::{AgentConfig, BonusMode, CmeRlAgent, EpisodeValueTable};
use crate::cme_estimator::{
    beta_width, CmeModel, ConfidenceConfig, EmbeddingModel, SketchedCmeModel,
};
use crate::environments::{env_rng, Env, EnvRng, Environment, FiniteMdp, NonlinearGaussianEnv};
use crate::error::{Error, Result};
use crate::kernel_core::{FeatureSketch, Point, SketchKind};
use crate::oracles::{regret_term, solve_dp, DpSolution, FiniteEmbeddingModel};

/// Slack allowed on the optimism and variance-sum inequalities.
pub const CHECK_SLACK: f64 = 1e-8;
/// Allowed gap between the agent's closed form and the oracle maximizer.
pub const CLOSED_FORM_TOLERANCE: f64 = 1e-6;

pub const CSV_COLUMNS: [&str; 13] = [
    "seed",
    "episode",
    "step_count",
    "inst_regret",
    "cum_regret",
    "beta",
    "info_gain",
    "var_sum",
    "bound",
    "check_optimism",
    "check_varsum",
    "check_conc",
    "wall_ms",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Na,
}

impl CheckStatus {
    fn from_bool(ok: bool) -> Self {
        if ok {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        }
    }

    pub fn failed(self) -> bool {
        self == CheckStatus::Fail
    }
}

/// One CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub episode: usize,
    pub step_count: usize,
    pub inst_regret: f64,
    pub cum_regret: f64,
    pub beta: f64,
    pub info_gain: f64,
    pub var_sum: f64,
    pub bound: f64,
    pub check_optimism: CheckStatus,
    pub check_varsum: CheckStatus,
    pub check_conc: CheckStatus,
    pub wall_ms: f64,
}

/// Per-episode numbers that do not go into the CSV.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeDiagnostics {
    pub episode: usize,
    /// `||(Theta_P - Theta_hat) M^{1/2}||` at episode start (finite MDPs).
    pub conc_lhs: Option<f64>,
    /// Theoretical width `beta_t(delta)` the lhs is compared against.
    pub conc_beta: Option<f64>,
    /// Whether the true operator lies in the agent's own confidence set.
    pub in_confidence_set: Option<bool>,
    /// `min_{h,s,a} Q - Q* + slack_h`.
    pub optimism_margin: Option<f64>,
    /// Largest closed-form vs oracle-maximizer gap.
    pub closed_form_gap: Option<f64>,
    /// Reward actually collected.
    pub episode_reward: f64,
    /// Monte-Carlo standard error of `inst_regret` (continuous envs).
    pub regret_std_err: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub records: Vec<RunRecord>,
    pub diagnostics: Vec<EpisodeDiagnostics>,
}

impl SeedRun {
    pub fn cum_regret(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.cum_regret)
    }

    pub fn total_reward(&self) -> f64 {
        self.diagnostics.iter().map(|d| d.episode_reward).sum()
    }

    pub fn any_failure(&self) -> bool {
        self.records
            .iter()
            .any(|r| r.check_optimism.failed() || r.check_varsum.failed() || r.check_conc.failed())
            || self.diagnostics.iter().any(|d| {
                d.closed_form_gap
                    .is_some_and(|g| !(g <= CLOSED_FORM_TOLERANCE))
            })
    }
}

/// Regret trajectory of the uniformly random baseline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineRun {
    pub seed: u64,
    pub inst_regret: Vec<f64>,
    pub total_reward: f64,
}

impl BaselineRun {
    pub fn cum_regret(&self) -> f64 {
        self.inst_regret.iter().sum()
    }
}

/// Right-hand side of the cumulative regret bound after `n_steps = t H` steps
/// with realized information gain `info_gain`. Misspecified mode uses the
/// enlarged coefficient and adds `4 zeta N`.
pub fn theoretical_bound(
    conf: &ConfidenceConfig,
    mode: BonusMode,
    horizon: usize,
    info_gain: f64,
    n_steps: usize,
) -> f64 {
    if n_steps == 0 {
        return 0.0;
    }
    let n = n_steps as f64;
    let h = horizon as f64;
    let lambda = conf.lambda;
    let alpha = (2.0 * lambda * conf.b_p * conf.b_p
        + crate::cme_estimator::NOISE_CONSTANT
            * (1.0 + 1.0 / lambda)
            * info_gain
            * (4.0 * n * n / conf.delta).ln())
    .sqrt();
    let (coef, linear) = match mode {
        BonusMode::WellSpecified => (conf.b_v, 0.0),
        BonusMode::Misspecified => (conf.b_v + conf.zeta * conf.one_norm, 4.0 * conf.zeta * n),
    };
    let var_factor = 2.0 * (1.0 + conf.b_phi * conf.b_phi * h / lambda) * n * info_gain;
    2.0 * coef * alpha * var_factor.sqrt()
        + linear
        + 2.0 * h * (2.0 * n * (2.0 / conf.delta).ln()).sqrt()
}

fn agent_config(exp: &ResolvedExperiment) -> Result<AgentConfig> {
    let env = &exp.env;
    let mut cfg = AgentConfig::new(
        env.horizon(),
        exp.config.mode,
        exp.confidence,
        env.action_points(),
    )?;
    cfg.beta_scale = exp.config.beta_scale;
    cfg.target_perturbation = exp.config.perturbation;
    Ok(cfg)
}

fn build_sketch(exp: &ResolvedExperiment, approx: &ApproximationSection) -> Result<FeatureSketch> {
    let env = &exp.env;
    let actions = env.action_points();
    let input_dim = env.reset().dim() + actions[0].dim();
    match approx.kind {
        SketchKind::RandomFourier => {
            FeatureSketch::random_fourier(exp.kernel, input_dim, approx.m, approx.seed)
        }
        SketchKind::Nystrom => {
            let landmarks: Vec<Point> = match env {
                Env::Finite(mdp) => (0..mdp.num_states())
                    .flat_map(|s| actions.iter().map(move |a| mdp.state_point(s).join(a)))
                    .take(approx.m)
                    .collect(),
                Env::Gaussian(g) => {
                    let mut rng = env_rng(approx.seed, "nystrom-landmarks", 0);
                    let (lo, hi) = g.bounds();
                    (0..approx.m)
                        .map(|_| {
                            let s: Vec<f64> = (0..g.state_dim())
                                .map(|_| rng.random_range(lo..=hi))
                                .collect();
                            let a = &actions[rng.random_range(0..actions.len())];
                            Point::new(s).map(|p| p.join(a))
                        })
                        .collect::<Result<_>>()?
                }
            };
            FeatureSketch::nystrom(exp.kernel, landmarks)
        }
    }
}

/// Runs one seed of the experiment.
pub fn run_seed(exp: &ResolvedExperiment, seed: u64) -> Result<SeedRun> {
    let cfg = agent_config(exp)?;
    let horizon = exp.env.horizon();
    match &exp.config.approximation {
        None => {
            let model = CmeModel::new(exp.kernel, exp.confidence.lambda, horizon)?;
            run_with_agent(exp, seed, CmeRlAgent::new(cfg, model)?)
        }
        Some(approx) => {
            let sketch = build_sketch(exp, approx)?;
            let model = SketchedCmeModel::new(sketch, exp.confidence.lambda, horizon)?;
            run_with_agent(exp, seed, CmeRlAgent::new(cfg, model)?)
        }
    }
}

struct FiniteContext<'a> {
    mdp: &'a FiniteMdp,
    dp: DpSolution,
    fem: FiniteEmbeddingModel,
}

struct EpisodeOutcome {
    inst_regret: f64,
    check_optimism: CheckStatus,
    check_conc: CheckStatus,
    diag: EpisodeDiagnostics,
}

fn run_with_agent<M: EmbeddingModel>(
    exp: &ResolvedExperiment,
    seed: u64,
    mut agent: CmeRlAgent<M>,
) -> Result<SeedRun> {
    let env = &exp.env;
    let horizon = env.horizon();
    let conf = exp.confidence;
    let mut rng = env_rng(exp.config.master_seed, env.name(), seed);
    let mut finite = match env.as_finite() {
        Some(mdp) => Some(FiniteContext {
            mdp,
            dp: solve_dp(mdp),
            fem: FiniteEmbeddingModel::new(mdp, conf.lambda, exp.kernel.output_scale)?,
        }),
        None => None,
    };
    let reference = match env {
        Env::Gaussian(g) => Some(reference_value(exp, g, seed)?),
        Env::Finite(_) => None,
    };

    let mut records = Vec::with_capacity(exp.config.episodes);
    let mut diagnostics = Vec::with_capacity(exp.config.episodes);
    let mut cum_regret = 0.0;
    let mut var_sum = 0.0;
    for t in 1..=exp.config.episodes {
        let start = Instant::now();
        let reward_fn = |s: &Point, a: usize| env.reward(s, a);
        let table = agent.plan_episode(t, &reward_fn)?;

        let mut outcome = match (&finite, env) {
            (Some(ctx), _) => finite_episode_checks(exp, &mut agent, &table, ctx, t)?,
            (None, Env::Gaussian(g)) => {
                let (v_ref, _) = reference.expect("reference computed for continuous envs");
                let (v_pi, se) = mc_policy_value(exp, g, seed, |s, h| {
                    agent
                        .select_action_uncached(&table, h, s, &reward_fn)
                        .map(|(a, _)| a)
                })?;
                EpisodeOutcome {
                    inst_regret: v_ref - v_pi,
                    check_optimism: CheckStatus::Na,
                    check_conc: CheckStatus::Na,
                    diag: EpisodeDiagnostics {
                        regret_std_err: Some(se),
                        ..Default::default()
                    },
                }
            }
            (None, Env::Finite(_)) => unreachable!("finite context always present for finite envs"),
        };

        let trace = agent.execute_episode(&table, env, &mut rng)?;
        agent.absorb(&trace)?;
        if let Some(ctx) = finite.as_mut() {
            for st in &trace.steps {
                let s = ctx.mdp.state_index(&st.state)?;
                let s2 = ctx.mdp.state_index(&st.next_state)?;
                ctx.fem.observe(s, st.action, s2)?;
            }
        }

        var_sum += trace.scaled_variance_sum(conf.lambda);
        let logdet = agent.model().log_det_accum();
        let check_varsum = if exp.check_enabled(Check::VarianceSum) {
            let rhs = (1.0 + conf.b_phi * conf.b_phi * horizon as f64 / conf.lambda) * logdet;
            CheckStatus::from_bool(var_sum <= rhs + CHECK_SLACK)
        } else {
            CheckStatus::Na
        };
        let info_gain = agent.model().info_gain();
        cum_regret += outcome.inst_regret;
        outcome.diag.episode = t;
        outcome.diag.episode_reward = trace.total_reward();
        let wall_ms = if exp.config.timing {
            start.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        };
        records.push(RunRecord {
            seed,
            episode: t,
            step_count: t * horizon,
            inst_regret: outcome.inst_regret,
            cum_regret,
            beta: table.beta(),
            info_gain,
            var_sum,
            bound: theoretical_bound(&conf, exp.config.mode, horizon, info_gain, t * horizon),
            check_optimism: outcome.check_optimism,
            check_varsum,
            check_conc: outcome.check_conc,
            wall_ms,
        });
        diagnostics.push(outcome.diag);
    }
    Ok(SeedRun {
        seed,
        records,
        diagnostics,
    })
}

fn finite_episode_checks<M: EmbeddingModel>(
    exp: &ResolvedExperiment,
    agent: &mut CmeRlAgent<M>,
    table: &EpisodeValueTable,
    ctx: &FiniteContext,
    t: usize,
) -> Result<EpisodeOutcome> {
    let mdp = ctx.mdp;
    let horizon = mdp.horizon();
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let conf = exp.confidence;
    let reward_fn =
        |s: &Point, a: usize| mdp.reward_at(mdp.state_index(s).expect("one-hot state"), a);

    // Q^t over every (h, s, a) and the greedy policy it induces
    let mut q = vec![vec![vec![0.0; na]; ns]; horizon];
    let mut policy = vec![vec![0; ns]; horizon];
    let mut prediction = vec![vec![vec![0.0; na]; ns]; horizon];
    let mut variance = vec![vec![vec![0.0; na]; ns]; horizon];
    for h in 1..=horizon {
        for s in 0..ns {
            let qs = agent.q_values(table, h, &mdp.state_point(s), &reward_fn)?;
            let mut best = 0;
            for (a, qv) in qs.iter().enumerate() {
                q[h - 1][s][a] = qv.q;
                prediction[h - 1][s][a] = qv.prediction;
                variance[h - 1][s][a] = qv.variance;
                if qv.q > qs[best].q {
                    best = a;
                }
            }
            policy[h - 1][s] = best;
        }
    }
    let inst_regret = regret_term(mdp, &ctx.dp, &policy)?;

    let mut diag = EpisodeDiagnostics::default();
    let wants_conc = exp.check_enabled(Check::Concentration) || exp.check_enabled(Check::Optimism);
    let mut check_conc = CheckStatus::Na;
    let mut check_optimism = CheckStatus::Na;
    if wants_conc {
        let beta_theory = beta_width(
            conf.lambda,
            conf.b_p,
            agent.model().info_gain(),
            t,
            horizon,
            conf.delta,
        );
        let conc = ctx.fem.concentration_check(beta_theory)?;
        diag.conc_lhs = Some(conc.lhs);
        diag.conc_beta = Some(beta_theory);
        let in_set = conc.lhs <= table.beta();
        diag.in_confidence_set = Some(in_set);
        if exp.check_enabled(Check::Concentration) {
            check_conc = CheckStatus::from_bool(conc.holds);
        }
        if exp.check_enabled(Check::Optimism) {
            let zeta = match exp.config.mode {
                BonusMode::Misspecified => conf.zeta,
                BonusMode::WellSpecified => 0.0,
            };
            let mut margin = f64::INFINITY;
            for h in 1..=horizon {
                let slack = 2.0 * (horizon - h) as f64 * zeta;
                for s in 0..ns {
                    for a in 0..na {
                        margin = margin.min(q[h - 1][s][a] - ctx.dp.q(h, s, a) + slack);
                    }
                }
            }
            diag.optimism_margin = Some(margin);
            if in_set {
                check_optimism = CheckStatus::from_bool(margin >= -CHECK_SLACK);
            }
        }
    }

    if exp.check_enabled(Check::ClosedForm) && exp.config.perturbation.is_none() && horizon >= 2 {
        // value function the agent backs up into step 1, as a vector over states
        let cap = horizon as f64;
        let f: Vec<f64> = (0..ns)
            .map(|s| {
                q[1][s]
                    .iter()
                    .cloned()
                    .fold(f64::NEG_INFINITY, f64::max)
                    .min(cap)
            })
            .collect();
        let f_norm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
        let s0 = mdp.initial_state();
        let mut gap: f64 = 0.0;
        for a in 0..na {
            let oracle = ctx.fem.brute_force_optimistic_value(
                table.beta(),
                s0,
                a,
                &f,
                t as u64 * 7919 + a as u64,
            )?;
            let analytic = prediction[0][s0][a]
                + table.beta() / conf.lambda.sqrt() * f_norm * variance[0][s0][a].sqrt();
            gap = gap.max((oracle.value() - analytic).abs());
        }
        diag.closed_form_gap = Some(gap);
    }

    Ok(EpisodeOutcome {
        inst_regret,
        check_optimism,
        check_conc,
        diag,
    })
}

/// Mean `H`-step return (and its standard error) of `policy` over the
/// configured number of rollouts. Rollout `i` draws its noise from a stream
/// that depends only on `(master_seed, env, seed, i)`, so different policies
/// are compared under common random numbers.
fn mc_policy_value(
    exp: &ResolvedExperiment,
    env: &NonlinearGaussianEnv,
    seed: u64,
    mut policy: impl FnMut(&Point, usize) -> Result<usize>,
) -> Result<(f64, f64)> {
    let n = exp.config.mc_rollouts;
    let stream = format!("{}/evaluation/{seed}", env.name());
    let mut returns = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng: EnvRng = env_rng(exp.config.master_seed, &stream, i as u64);
        let mut s = env.reset();
        let mut total = 0.0;
        for h in 1..=env.horizon() {
            let a = policy(&s, h)?;
            let (r, next) = env.step(&s, a, &mut rng)?;
            total += r;
            s = next;
        }
        returns.push(total);
    }
    let mean = returns.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    Ok((mean, (var / n as f64).sqrt()))
}

/// Reference value for continuous environments: a two-step lookahead policy
/// on the known noise-free dynamics, evaluated by Monte Carlo.
fn reference_value(
    exp: &ResolvedExperiment,
    env: &NonlinearGaussianEnv,
    seed: u64,
) -> Result<(f64, f64)> {
    let na = env.num_actions();
    mc_policy_value(exp, env, seed, |s, _| {
        let mut best = (0, f64::NEG_INFINITY);
        for a in 0..na {
            let m1: Vec<f64> = env
                .mean_next(s.coords(), a)?
                .into_iter()
                .map(|v| env.clip(v))
                .collect();
            let mut tail = f64::NEG_INFINITY;
            for a2 in 0..na {
                let m2: Vec<f64> = env
                    .mean_next(&m1, a2)?
                    .into_iter()
                    .map(|v| env.clip(v))
                    .collect();
                tail = tail.max(env.reward_at(&m2));
            }
            let score = env.reward_at(&m1) + tail;
            if score > best.1 {
                best = (a, score);
            }
        }
        Ok(best.0)
    })
}

/// Uniformly random baseline: each episode draws a fresh deterministic policy
/// with every `pi_h(s)` uniform over actions. Regret is exact.
pub fn run_baseline(exp: &ResolvedExperiment, seed: u64) -> Result<BaselineRun> {
    let mdp = exp
        .env
        .as_finite()
        .ok_or_else(|| Error::Config("the random baseline needs a finite MDP".into()))?;
    let dp = solve_dp(mdp);
    let mut policy_rng = env_rng(
        exp.config.master_seed,
        &format!("{}/baseline", mdp.name()),
        seed,
    );
    let mut env_stream = env_rng(exp.config.master_seed, mdp.name(), seed);
    let (ns, na, horizon) = (mdp.num_states(), mdp.num_actions(), mdp.horizon());
    let mut inst_regret = Vec::with_capacity(exp.config.episodes);
    let mut total_reward = 0.0;
    for _ in 0..exp.config.episodes {
        let policy: Vec<Vec<usize>> = (0..horizon)
            .map(|_| (0..ns).map(|_| policy_rng.random_range(0..na)).collect())
            .collect();
        inst_regret.push(regret_term(mdp, &dp, &policy)?);
        let mut s = mdp.initial_state();
        for h in 0..horizon {
            let a = policy[h][s];
            total_reward += mdp.reward_at(s, a);
            s = mdp.sample_next(s, a, &mut env_stream)?;
        }
    }
    Ok(BaselineRun {
        seed,
        inst_regret,
        total_reward,
    })
}

/// Exact value of the uniformly random stochastic policy from the initial state.
pub fn uniform_policy_value(mdp: &FiniteMdp) -> f64 {
    let (ns, na, horizon) = (mdp.num_states(), mdp.num_actions(), mdp.horizon());
    let mut v = vec![0.0; ns];
    for _ in 0..horizon {
        v = (0..ns)
            .map(|s| {
                (0..na)
                    .map(|a| {
                        mdp.reward_at(s, a)
                            + mdp
                                .row(s, a)
                                .iter()
                                .zip(&v)
                                .map(|(p, x)| p * x)
                                .sum::<f64>()
                    })
                    .sum::<f64>()
                    / na as f64
            })
            .collect();
    }
    v[mdp.initial_state()]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub env: String,
    pub runs: Vec<SeedRun>,
}

impl ExperimentResult {
    pub fn any_failure(&self) -> bool {
        self.runs.iter().any(SeedRun::any_failure)
    }

    pub fn mean_cum_regret(&self) -> f64 {
        self.runs.iter().map(SeedRun::cum_regret).sum::<f64>() / self.runs.len() as f64
    }
}

/// Runs every seed, on a pool of `parallel` threads when given.
pub fn run_experiment(
    exp: &ResolvedExperiment,
    parallel: Option<usize>,
) -> Result<ExperimentResult> {
    let seeds = &exp.config.seeds;
    let runs: Result<Vec<SeedRun>> = match parallel {
        Some(k) if k > 1 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::Config(e.to_string()))?;
            pool.install(|| seeds.par_iter().map(|&s| run_seed(exp, s)).collect())
        }
        _ => seeds.iter().map(|&s| run_seed(exp, s)).collect(),
    };
    Ok(ExperimentResult {
        env: exp.env.name().to_string(),
        runs: runs?,
    })
}

pub fn write_csv<W: std::io::Write>(records: &[RunRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    if records.is_empty() {
        w.write_record(CSV_COLUMNS)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `seed_<s>.csv` per seed, the merged `results.csv` (seed order as
/// configured) and `summary.json`. Returns the merged CSV path.
pub fn write_outputs(result: &ExperimentResult, out_dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(out_dir)?;
    for run in &result.runs {
        let f = std::fs::File::create(out_dir.join(format!("seed_{}.csv", run.seed)))?;
        write_csv(&run.records, std::io::BufWriter::new(f))?;
    }
    let merged_path = out_dir.join("results.csv");
    let mut merged = csv::Writer::from_path(&merged_path)?;
    merged.write_record(CSV_COLUMNS)?;
    for run in &result.runs {
        let mut rd = csv::Reader::from_path(out_dir.join(format!("seed_{}.csv", run.seed)))?;
        for row in rd.records() {
            merged.write_record(&row?)?;
        }
    }
    merged.flush()?;

    let summary = serde_json::json!({
        "env": result.env,
        "seeds": result.runs.iter().map(|r| r.seed).collect::<Vec<_>>(),
        "mean_cum_regret": result.mean_cum_regret(),
        "any_check_failed": result.any_failure(),
        "runs": result.runs.iter().map(|r| serde_json::json!({
            "seed": r.seed,
            "cum_regret": r.cum_regret(),
            "total_reward": r.total_reward(),
            "failed_checks": r.any_failure(),
            "diagnostics": r.diagnostics,
        })).collect::<Vec<_>>(),
    });
    std::fs::write(
        out_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;
    Ok(merged_path)
}

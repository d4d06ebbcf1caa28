//! Load a tabular MDP from JSON, solve it exactly and compare CME-RL with the
//! uniformly random baseline.
//!
//!     cargo run --release --example custom_mdp -- examples/configs/coin.json

use anyhow::{Context, Result};
use cme_rl::environments::{Environment, FiniteMdp};
use cme_rl::harness::{run_baseline, run_experiment, uniform_policy_value, ExperimentConfig};
use cme_rl::oracles::solve_dp;

fn main() -> Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| {
        concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs/coin.json").into()
    });
    let mdp = FiniteMdp::load_json(&path).with_context(|| format!("loading {path}"))?;
    let dp = solve_dp(&mdp);
    println!(
        "{}: S={} A={} H={}  V*={:.4}  uniform={:.4}",
        mdp.name(),
        mdp.num_states(),
        mdp.num_actions(),
        mdp.horizon(),
        dp.v(1, mdp.initial_state()),
        uniform_policy_value(&mdp)
    );
    for h in 1..=mdp.horizon() {
        println!("  optimal actions at step {h}: {:?}", dp.policy()[h - 1]);
    }

    let mut cfg = ExperimentConfig::for_env("unused", 100, (0..5).collect());
    cfg.env = None;
    cfg.env_path = Some(path.into());
    for beta_scale in [1.0, 0.1, 0.01] {
        cfg.beta_scale = beta_scale;
        let exp = cfg.resolve()?;
        let result = run_experiment(&exp, None)?;
        let mut baseline = 0.0;
        for &s in &exp.config.seeds {
            baseline += run_baseline(&exp, s)?.cum_regret();
        }
        println!(
            "beta_scale {beta_scale:<5} mean regret over 100 episodes: agent {:.2}, random {:.2}{}",
            result.mean_cum_regret(),
            baseline / exp.config.seeds.len() as f64,
            if result.any_failure() {
                " (a check failed)"
            } else {
                ""
            }
        );
    }
    Ok(())
}

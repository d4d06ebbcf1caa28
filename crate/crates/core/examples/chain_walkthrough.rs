//! One agent on the two-state chain, printing what it believes each episode.
//!
//!     cargo run --example chain_walkthrough

use anyhow::Result;
use cme_rl::agent::{AgentConfig, BonusMode, CmeRlAgent};
use cme_rl::cme_estimator::{CmeModel, EmbeddingModel};
use cme_rl::environments::{env_rng, make_env, Env, Environment};
use cme_rl::harness::ExperimentConfig;
use cme_rl::kernel_core::Point;
use cme_rl::oracles::{regret_term, solve_dp};

fn main() -> Result<()> {
    let Env::Finite(mdp) = make_env("chain2")? else {
        unreachable!()
    };
    // resolve() fills in the default norm bounds for the environment
    let exp = ExperimentConfig::for_env("chain2", 1, vec![0]).resolve()?;
    let cfg = AgentConfig::new(
        mdp.horizon(),
        BonusMode::WellSpecified,
        exp.confidence,
        mdp.action_points(),
    )?;
    let model = CmeModel::new(exp.kernel, exp.confidence.lambda, mdp.horizon())?;
    let mut agent = CmeRlAgent::new(cfg, model)?;
    let dp = solve_dp(&mdp);
    let reward = |s: &Point, a: usize| mdp.reward_at(mdp.state_index(s).unwrap(), a);
    let mut rng = env_rng(0, "chain2", 0);

    println!("V*_1(s0) = {}", dp.v(1, 0));
    println!(
        "{:>3} {:>9} {:>10} {:>10} {:>8} {:>7}",
        "t", "beta", "Q(s0,go)", "Q(s0,stay)", "action", "regret"
    );
    for t in 1..=12 {
        let table = agent.plan_episode(t, &reward)?;
        let q = agent.q_values(&table, 1, &mdp.state_point(0), &reward)?;
        let policy: Vec<Vec<usize>> = (1..=mdp.horizon())
            .map(|h| {
                (0..mdp.num_states())
                    .map(|s| {
                        agent
                            .select_action(&table, h, &mdp.state_point(s), &reward)
                            .map(|(a, _)| a)
                    })
                    .collect::<Result<_, _>>()
            })
            .collect::<Result<_, _>>()?;
        let regret = regret_term(&mdp, &dp, &policy)?;
        let trace = agent.execute_episode(&table, &mdp, &mut rng)?;
        agent.absorb(&trace)?;
        println!(
            "{t:>3} {:>9.2} {:>10.2} {:>10.2} {:>8} {:>7.2}",
            table.beta(),
            q[0].q,
            q[1].q,
            if trace.steps[0].action == 0 {
                "go"
            } else {
                "stay"
            },
            regret
        );
    }
    println!(
        "info gain after 12 episodes: {:.3}",
        agent.model().info_gain()
    );
    Ok(())
}

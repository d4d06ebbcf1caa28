use anyhow::Result;
use approx::assert_abs_diff_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cme_rl::environments::{env_rng, make_env, standard_envs, Env, Environment, FiniteMdp};
use cme_rl::harness::{random_mdp, uniform_policy_value};
use cme_rl::oracles::{evaluate_policy, regret_term, solve_dp, FiniteEmbeddingModel};

/// Upper 0.1% points of the chi-square distribution, indexed by degrees of freedom.
const CHI2_999: [f64; 5] = [f64::NAN, 10.828, 13.816, 16.266, 18.467];

fn chi_square(mdp: &FiniteMdp, s: usize, a: usize, draws: usize, seed: u64) -> (f64, usize) {
    let mut rng = env_rng(seed, "chi-square", (s * 31 + a) as u64);
    let mut counts = vec![0usize; mdp.num_states()];
    for _ in 0..draws {
        counts[mdp.sample_next(s, a, &mut rng).unwrap()] += 1;
    }
    let row = mdp.row(s, a);
    let mut stat = 0.0;
    let mut support = 0;
    for (p, c) in row.iter().zip(&counts) {
        if *p > 0.0 {
            let e = p * draws as f64;
            stat += (*c as f64 - e).powi(2) / e;
            support += 1;
        } else {
            assert_eq!(*c, 0, "sampled a zero-probability state");
        }
    }
    (stat, support.max(1) - 1)
}

#[test]
fn finite_transitions_pass_goodness_of_fit() -> Result<()> {
    for name in ["riverswim6", "gridworld4x4"] {
        let Env::Finite(mdp) = make_env(name)? else {
            unreachable!()
        };
        for (s, a) in [(0, 1), (2, 1), (5, 1), (5, 0)]
            .into_iter()
            .filter(|(s, a)| *s < mdp.num_states() && *a < mdp.num_actions())
        {
            let (stat, df) = chi_square(&mdp, s, a, 100_000, 1);
            if df > 0 {
                assert!(
                    stat < CHI2_999[df],
                    "{name} ({s},{a}): chi2 {stat:.2} with {df} dof"
                );
            }
        }
    }
    Ok(())
}

#[test]
fn catalog_entries_build() -> Result<()> {
    for entry in standard_envs() {
        let env = make_env(entry.name)?;
        assert_eq!(env.name(), entry.name);
        assert!(env.horizon() >= 1 && env.num_actions() >= 2);
    }
    assert!(make_env("nope").is_err());
    Ok(())
}

#[test]
fn seeded_trajectories_repeat() -> Result<()> {
    for entry in standard_envs() {
        let env = make_env(entry.name)?;
        let roll = |run: u64| -> Result<Vec<(f64, Vec<f64>)>> {
            let mut rng = env_rng(9, entry.name, run);
            let mut s = env.reset();
            let mut out = Vec::new();
            for h in 0..env.horizon() {
                let (r, next) = env.step(&s, h % env.num_actions(), &mut rng)?;
                out.push((r, next.coords().to_vec()));
                s = next;
            }
            Ok(out)
        };
        assert_eq!(roll(0)?, roll(0)?);
        if entry.name != "chain2" {
            assert_ne!(roll(0)?, roll(1)?, "{} runs should differ", entry.name);
        }
    }
    Ok(())
}

#[test]
fn gaussian_step_statistics() -> Result<()> {
    let env = make_env("nlds2d")?;
    let g = env.as_gaussian().expect("continuous env");
    let mut rng = env_rng(1, "nlds2d-stats", 0);
    let s = env.reset();
    let mean = g.mean_next(s.coords(), 1)?;
    let n = 20_000;
    let mut acc = vec![0.0; mean.len()];
    let mut sq = vec![0.0; mean.len()];
    for _ in 0..n {
        let (r, next) = env.step(&s, 1, &mut rng)?;
        assert!((0.0..=1.0).contains(&r));
        for (i, x) in next.coords().iter().enumerate() {
            acc[i] += x;
            sq[i] += (x - mean[i]).powi(2);
        }
    }
    let sd = g.noise_sd();
    for i in 0..mean.len() {
        let m = acc[i] / n as f64;
        assert!(
            (m - mean[i]).abs() < 4.0 * sd / (n as f64).sqrt(),
            "coord {i}: {m} vs {}",
            mean[i]
        );
        let v = sq[i] / n as f64;
        assert!((v.sqrt() - sd).abs() < 0.05 * sd);
    }
    Ok(())
}

#[test]
fn chain_dp_values() -> Result<()> {
    let Env::Finite(mdp) = make_env("chain2")? else {
        unreachable!()
    };
    let dp = solve_dp(&mdp);
    assert_eq!(dp.v(1, 0), 1.0);
    assert_eq!(dp.v(1, 1), 2.0);
    assert_eq!(dp.v(3, 0), 0.0);
    assert_eq!(dp.policy()[0][0], 0);
    assert_abs_diff_eq!(uniform_policy_value(&mdp), 0.5, epsilon = 1e-15);
    let stay = vec![vec![1, 1]; 2];
    assert_eq!(regret_term(&mdp, &dp, &stay)?, 1.0);
    Ok(())
}

#[test]
fn policy_evaluation_matches_rollouts() -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mdp = random_mdp(&mut rng, 4, 3, 5)?;
    let dp = solve_dp(&mdp);
    let policy: Vec<Vec<usize>> = (0..5)
        .map(|_| (0..4).map(|_| rng.random_range(0..3)).collect())
        .collect();
    let v = evaluate_policy(&mdp, &policy)?;
    let n = 40_000;
    let mut stream = env_rng(3, "rollouts", 0);
    let mut returns = Vec::with_capacity(n);
    for _ in 0..n {
        let mut s = mdp.initial_state();
        let mut total = 0.0;
        for pi in &policy {
            total += mdp.reward_at(s, pi[s]);
            s = mdp.sample_next(s, pi[s], &mut stream)?;
        }
        returns.push(total);
    }
    let mean = returns.iter().sum::<f64>() / n as f64;
    let sd = (returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let s0 = mdp.initial_state();
    assert!((mean - v[0][s0]).abs() < 4.0 * sd / (n as f64).sqrt());
    assert!(dp.v(1, s0) >= v[0][s0] - 1e-12);
    let greedy = evaluate_policy(&mdp, dp.policy())?;
    assert_abs_diff_eq!(greedy[0][s0], dp.v(1, s0), epsilon = 1e-12);
    Ok(())
}

#[test]
fn concentration_tightens_and_bounds_embedding_error() -> Result<()> {
    let Env::Finite(mdp) = make_env("riverswim6")? else {
        unreachable!()
    };
    let mut fem = FiniteEmbeddingModel::new(&mdp, 1.0, 1.0)?;
    let mut rng = env_rng(2, "fem", 0);
    let mut ratios = Vec::new();
    for n in 1..=3000 {
        let s = n % mdp.num_states();
        let a = (n / mdp.num_states()) % 2;
        let s2 = mdp.sample_next(s, a, &mut rng)?;
        fem.observe(s, a, s2)?;
        if n % 600 == 0 {
            let conc = fem.concentration_check(f64::INFINITY)?;
            for s in 0..mdp.num_states() {
                for a in 0..2 {
                    // Cauchy-Schwarz: error <= lhs * ||M^{-1/2} phi||
                    let bound = conc.lhs * (fem.variance(s, a)? / fem.lambda()).sqrt();
                    assert!(fem.embedding_error(s, a)? <= bound + 1e-12);
                }
            }
            ratios.push(conc.lhs / (n as f64).sqrt());
        }
    }
    assert!(
        ratios.last().unwrap() < &ratios[0],
        "lhs / sqrt(n) should shrink: {ratios:?}"
    );
    Ok(())
}

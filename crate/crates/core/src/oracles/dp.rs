use crate::environments::{Environment, FiniteMdp};
use crate::error::{Error, Result};

/// Exact solution of the finite-horizon Bellman optimality equations.
/// Steps are 1-based in the accessors.
#[derive(Clone, Debug, PartialEq)]
pub struct DpSolution {
    /// `q[h - 1][s][a]`, `h = 1..=H`
    q: Vec<Vec<Vec<f64>>>,
    /// `v[h - 1][s]`, `h = 1..=H+1`
    v: Vec<Vec<f64>>,
    /// `policy[h - 1][s]`
    policy: Vec<Vec<usize>>,
}

impl DpSolution {
    pub fn horizon(&self) -> usize {
        self.q.len()
    }

    pub fn q(&self, h: usize, s: usize, a: usize) -> f64 {
        self.q[h - 1][s][a]
    }

    pub fn v(&self, h: usize, s: usize) -> f64 {
        self.v[h - 1][s]
    }

    pub fn q_table(&self) -> &[Vec<Vec<f64>>] {
        &self.q
    }

    pub fn v_table(&self) -> &[Vec<f64>] {
        &self.v
    }

    /// Greedy optimal policy, ties to the lowest action.
    pub fn policy(&self) -> &[Vec<usize>] {
        &self.policy
    }
}

fn expected_next(mdp: &FiniteMdp, s: usize, a: usize, next: &[f64]) -> f64 {
    mdp.row(s, a).iter().zip(next).map(|(p, v)| p * v).sum()
}

/// Backward induction `Q*_h = R + P V*_{h+1}`, `V*_h = max_a Q*_h`, `V*_{H+1} = 0`.
pub fn solve_dp(mdp: &FiniteMdp) -> DpSolution {
    let (ns, na, horizon) = (mdp.num_states(), mdp.num_actions(), mdp.horizon());
    let mut q = vec![vec![vec![0.0; na]; ns]; horizon];
    let mut v = vec![vec![0.0; ns]; horizon + 1];
    let mut policy = vec![vec![0; ns]; horizon];
    for h in (0..horizon).rev() {
        for s in 0..ns {
            let mut best = 0;
            for a in 0..na {
                q[h][s][a] = mdp.reward_at(s, a) + expected_next(mdp, s, a, &v[h + 1]);
                if q[h][s][a] > q[h][s][best] {
                    best = a;
                }
            }
            policy[h][s] = best;
            v[h][s] = q[h][s][best];
        }
    }
    DpSolution { q, v, policy }
}

/// `V^pi_h` for a deterministic non-stationary policy `policy[h - 1][s]`.
pub fn evaluate_policy(mdp: &FiniteMdp, policy: &[Vec<usize>]) -> Result<Vec<Vec<f64>>> {
    let (ns, na, horizon) = (mdp.num_states(), mdp.num_actions(), mdp.horizon());
    if policy.len() != horizon || policy.iter().any(|row| row.len() != ns) {
        return Err(Error::InvalidParameter(format!(
            "policy must be an H x S table ({horizon} x {ns})"
        )));
    }
    let mut v = vec![vec![0.0; ns]; horizon + 1];
    for h in (0..horizon).rev() {
        for s in 0..ns {
            let a = policy[h][s];
            if a >= na {
                return Err(Error::InvalidParameter(format!(
                    "policy action {a} out of range"
                )));
            }
            v[h][s] = mdp.reward_at(s, a) + expected_next(mdp, s, a, &v[h + 1]);
        }
    }
    Ok(v)
}

/// `V*_1(s_init) - V^pi_1(s_init)`.
pub fn regret_term(mdp: &FiniteMdp, dp: &DpSolution, policy: &[Vec<usize>]) -> Result<f64> {
    let v = evaluate_policy(mdp, policy)?;
    let s0 = mdp.initial_state();
    Ok(dp.v(1, s0) - v[0][s0])
}

use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use serde::{Deserialize, Serialize};

use super::{EnvRng, Environment};
use crate::error::{Error, Result};
use crate::kernel_core::Point;

const ROW_TOLERANCE: f64 = 1e-12;

/// Tabular episodic MDP with known rewards. States and actions are exposed to
/// the agent as one-hot points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FiniteMdpRepr", into = "FiniteMdpRepr")]
pub struct FiniteMdp {
    name: String,
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    initial_state: usize,
    /// `P[s, a, s']` flattened row-major.
    transitions: Vec<f64>,
    /// `R[s, a]` flattened row-major.
    rewards: Vec<f64>,
}

impl FiniteMdp {
    pub fn new(
        name: impl Into<String>,
        horizon: usize,
        initial_state: usize,
        transitions: Vec<Vec<Vec<f64>>>,
        rewards: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let num_states = transitions.len();
        if num_states == 0 {
            return Err(Error::InvalidMdp("no states".into()));
        }
        let num_actions = transitions[0].len();
        if num_actions == 0 {
            return Err(Error::InvalidMdp("no actions".into()));
        }
        if horizon == 0 {
            return Err(Error::InvalidMdp("horizon must be >= 1".into()));
        }
        if initial_state >= num_states {
            return Err(Error::InvalidMdp(format!(
                "initial state {initial_state} out of range for {num_states} states"
            )));
        }
        if rewards.len() != num_states {
            return Err(Error::InvalidMdp(format!(
                "reward table has {} rows, expected {num_states}",
                rewards.len()
            )));
        }
        let mut flat_p = Vec::with_capacity(num_states * num_actions * num_states);
        let mut flat_r = Vec::with_capacity(num_states * num_actions);
        for (s, (p_rows, r_row)) in transitions.iter().zip(&rewards).enumerate() {
            if p_rows.len() != num_actions || r_row.len() != num_actions {
                return Err(Error::InvalidMdp(format!(
                    "state {s}: expected {num_actions} actions in P and R"
                )));
            }
            for (a, row) in p_rows.iter().enumerate() {
                if row.len() != num_states {
                    return Err(Error::InvalidMdp(format!(
                        "P[{s}][{a}] has {} entries, expected {num_states}",
                        row.len()
                    )));
                }
                if row.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
                    return Err(Error::InvalidMdp(format!(
                        "P[{s}][{a}] has a negative entry"
                    )));
                }
                let total: f64 = row.iter().sum();
                if (total - 1.0).abs() > ROW_TOLERANCE {
                    return Err(Error::InvalidMdp(format!(
                        "P[{s}][{a}] sums to {total}, not 1"
                    )));
                }
                flat_p.extend_from_slice(row);
            }
            for (a, &r) in r_row.iter().enumerate() {
                if !(0.0..=1.0).contains(&r) {
                    return Err(Error::InvalidMdp(format!(
                        "R[{s}][{a}] = {r} outside [0, 1]"
                    )));
                }
                flat_r.push(r);
            }
        }
        Ok(FiniteMdp {
            name: name.into(),
            num_states,
            num_actions,
            horizon,
            initial_state,
            transitions: flat_p,
            rewards: flat_r,
        })
    }

    pub fn from_json_str(name: impl Into<String>, json: &str) -> Result<Self> {
        let mut mdp: FiniteMdp = serde_json::from_str(json)?;
        mdp.name = name.into();
        Ok(mdp)
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "custom".into());
        Self::from_json_str(name, &text)
    }

    pub fn with_horizon(mut self, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidMdp("horizon must be >= 1".into()));
        }
        self.horizon = horizon;
        Ok(self)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    /// `P(. | s, a)`.
    pub fn row(&self, state: usize, action: usize) -> &[f64] {
        let start = (state * self.num_actions + action) * self.num_states;
        &self.transitions[start..start + self.num_states]
    }

    pub fn prob(&self, state: usize, action: usize, next: usize) -> f64 {
        self.row(state, action)[next]
    }

    pub fn reward_at(&self, state: usize, action: usize) -> f64 {
        self.rewards[state * self.num_actions + action]
    }

    pub fn state_point(&self, state: usize) -> Point {
        Point::one_hot(state, self.num_states).expect("state index in range")
    }

    pub fn state_index(&self, state: &Point) -> Result<usize> {
        if state.dim() != self.num_states {
            return Err(Error::DimensionMismatch {
                expected: self.num_states,
                found: state.dim(),
            });
        }
        state
            .one_hot_index()
            .ok_or_else(|| Error::InvalidParameter("state is not a one-hot point".into()))
    }

    /// Samples `s' ~ P(. | s, a)`.
    pub fn sample_next(&self, state: usize, action: usize, rng: &mut EnvRng) -> Result<usize> {
        if state >= self.num_states || action >= self.num_actions {
            return Err(Error::InvalidParameter(format!(
                "state {state} / action {action} out of range"
            )));
        }
        let dist = WeightedIndex::new(self.row(state, action))
            .map_err(|e| Error::InvalidMdp(e.to_string()))?;
        Ok(dist.sample(rng))
    }
}

impl Environment for FiniteMdp {
    fn name(&self) -> &str {
        &self.name
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn num_actions(&self) -> usize {
        self.num_actions
    }

    fn action_point(&self, action: usize) -> Point {
        Point::one_hot(action, self.num_actions).expect("action index in range")
    }

    fn reset(&self) -> Point {
        self.state_point(self.initial_state)
    }

    fn reward(&self, state: &Point, action: usize) -> f64 {
        let s = self
            .state_index(state)
            .expect("reward queried at a valid finite state");
        self.reward_at(s, action)
    }

    fn step(&self, state: &Point, action: usize, rng: &mut EnvRng) -> Result<(f64, Point)> {
        let s = self.state_index(state)?;
        let next = self.sample_next(s, action, rng)?;
        Ok((self.reward_at(s, action), self.state_point(next)))
    }

    fn as_finite(&self) -> Option<&FiniteMdp> {
        Some(self)
    }
}

#[derive(Serialize, Deserialize)]
#[allow(non_snake_case)]
struct FiniteMdpRepr {
    S: usize,
    A: usize,
    H: usize,
    s_init: usize,
    P: Vec<Vec<Vec<f64>>>,
    R: Vec<Vec<f64>>,
}

impl TryFrom<FiniteMdpRepr> for FiniteMdp {
    type Error = Error;

    fn try_from(r: FiniteMdpRepr) -> Result<Self> {
        if r.P.len() != r.S || r.P.iter().any(|rows| rows.len() != r.A) {
            return Err(Error::InvalidMdp(format!(
                "P must have shape S x A x S = {} x {} x {}",
                r.S, r.A, r.S
            )));
        }
        FiniteMdp::new("custom", r.H, r.s_init, r.P, r.R)
    }
}

impl From<FiniteMdp> for FiniteMdpRepr {
    fn from(m: FiniteMdp) -> Self {
        let (s_n, a_n) = (m.num_states, m.num_actions);
        FiniteMdpRepr {
            S: s_n,
            A: a_n,
            H: m.horizon,
            s_init: m.initial_state,
            P: (0..s_n)
                .map(|s| (0..a_n).map(|a| m.row(s, a).to_vec()).collect())
                .collect(),
            R: (0..s_n)
                .map(|s| (0..a_n).map(|a| m.reward_at(s, a)).collect())
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    const TWO_STATE: &str = r#"{"S": 2, "A": 1, "H": 3, "s_init": 0,
        "P": [[[0.3, 0.7]], [[0.0, 1.0]]], "R": [[0.2], [1.0]]}"#;

    #[test]
    fn json_roundtrip_and_validation() {
        let mdp = FiniteMdp::from_json_str("two", TWO_STATE).unwrap();
        assert_eq!(mdp.num_states(), 2);
        assert_eq!(mdp.horizon(), 3);
        assert_eq!(mdp.prob(0, 0, 1), 0.7);
        let back = serde_json::to_string(&mdp).unwrap();
        let again = FiniteMdp::from_json_str("two", &back).unwrap();
        assert_eq!(again, mdp);

        let bad_row = TWO_STATE.replace("[0.3, 0.7]", "[0.3, 0.6]");
        assert!(FiniteMdp::from_json_str("x", &bad_row).is_err());
        let bad_reward = TWO_STATE.replace("[1.0]]}", "[1.5]]}");
        assert!(FiniteMdp::from_json_str("x", &bad_reward).is_err());
        let negative = TWO_STATE.replace("[0.3, 0.7]", "[-0.3, 1.3]");
        assert!(FiniteMdp::from_json_str("x", &negative).is_err());
        let bad_shape = TWO_STATE.replace("\"S\": 2", "\"S\": 3");
        assert!(FiniteMdp::from_json_str("x", &bad_shape).is_err());
    }

    #[test]
    fn deterministic_row() {
        let mdp = FiniteMdp::from_json_str("two", TWO_STATE).unwrap();
        let mut rng = EnvRng::seed_from_u64(0);
        for _ in 0..50 {
            let (r, s) = mdp.step(&mdp.state_point(1), 0, &mut rng).unwrap();
            assert_eq!(r, 1.0);
            assert_eq!(mdp.state_index(&s).unwrap(), 1);
        }
    }

    #[test]
    fn invalid_indices() {
        let mdp = FiniteMdp::from_json_str("two", TWO_STATE).unwrap();
        let mut rng = EnvRng::seed_from_u64(0);
        assert!(mdp.step(&mdp.state_point(0), 3, &mut rng).is_err());
        assert!(mdp
            .step(&Point::one_hot(0, 5).unwrap(), 0, &mut rng)
            .is_err());
        assert!(mdp
            .step(&Point::new(vec![0.5, 0.5]).unwrap(), 0, &mut rng)
            .is_err());
    }

    #[test]
    fn empirical_frequencies_match_row() {
        let mdp = FiniteMdp::from_json_str("two", TWO_STATE).unwrap();
        let mut rng = EnvRng::seed_from_u64(99);
        let n = 100_000;
        let ones = (0..n)
            .filter(|_| mdp.sample_next(0, 0, &mut rng).unwrap() == 1)
            .count();
        let p = 0.7;
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((ones as f64 - n as f64 * p).abs() <= 3.0 * sd);
    }
}

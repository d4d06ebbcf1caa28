use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel_core::Point;

/// One observed step `(s_h, a_h, s_{h+1})` of episode `episode` (both 1-based).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Point,
    pub action: usize,
    pub action_point: Point,
    pub next_state: Point,
    pub reward: f64,
    pub episode: usize,
    pub step: usize,
}

impl Transition {
    /// The regression input: state coordinates followed by the action encoding.
    pub fn input(&self) -> Point {
        self.state.join(&self.action_point)
    }
}

/// Chronological transitions grouped into complete episodes of `horizon` steps.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    horizon: usize,
    transitions: Vec<Transition>,
}

impl ReplayBuffer {
    pub fn new(horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be >= 1".into()));
        }
        Ok(ReplayBuffer {
            horizon,
            transitions: Vec::new(),
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Transition> {
        self.transitions.iter()
    }

    /// Number of complete episodes stored.
    pub fn completed_episodes(&self) -> usize {
        self.transitions.len() / self.horizon
    }

    /// Checks that `tr` may be appended: rewards in [0, 1], steps 1..=H in order,
    /// and a new episode only after the previous one is complete.
    pub fn check_next(&self, tr: &Transition) -> Result<()> {
        if !(0.0..=1.0).contains(&tr.reward) {
            return Err(Error::InvalidParameter(format!(
                "reward {} outside [0, 1]",
                tr.reward
            )));
        }
        let out_of_order = |after: String| Error::OutOfOrder {
            episode: tr.episode,
            step: tr.step,
            after,
        };
        if tr.step == 0 || tr.step > self.horizon {
            return Err(out_of_order(format!("step range 1..={}", self.horizon)));
        }
        match self.transitions.last() {
            None => {
                if tr.episode == 0 || tr.step != 1 {
                    return Err(out_of_order("an empty buffer".into()));
                }
            }
            Some(last) => {
                let ok = if last.step < self.horizon {
                    tr.episode == last.episode && tr.step == last.step + 1
                } else {
                    tr.episode == last.episode + 1 && tr.step == 1
                };
                if !ok {
                    return Err(out_of_order(format!("({}, {})", last.episode, last.step)));
                }
            }
        }
        Ok(())
    }

    pub fn push(&mut self, tr: Transition) -> Result<()> {
        self.check_next(&tr)?;
        self.transitions.push(tr);
        Ok(())
    }
}

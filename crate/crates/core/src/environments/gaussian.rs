use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Normal};

use super::{EnvRng, Environment};
use crate::error::{Error, Result};
use crate::kernel_core::Point;

/// Continuous-state system `s' = clip(W [tanh(s); a] + eps)` with Gaussian
/// noise, a finite set of action vectors and a Gaussian bump reward.
#[derive(Clone, Debug, PartialEq)]
pub struct NonlinearGaussianEnv {
    name: String,
    horizon: usize,
    actions: Vec<Vec<f64>>,
    weights: DMatrix<f64>,
    noise_sd: f64,
    initial: Vec<f64>,
    bounds: (f64, f64),
    goal: Vec<f64>,
    reward_width: f64,
}

impl NonlinearGaussianEnv {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        horizon: usize,
        actions: Vec<Vec<f64>>,
        weights: DMatrix<f64>,
        noise_sd: f64,
        initial: Vec<f64>,
        bounds: (f64, f64),
        goal: Vec<f64>,
        reward_width: f64,
    ) -> Result<Self> {
        let d = initial.len();
        if d == 0 || horizon == 0 || actions.is_empty() {
            return Err(Error::InvalidParameter(
                "need a state dimension, a horizon and at least one action".into(),
            ));
        }
        let action_dim = actions[0].len();
        if actions.iter().any(|a| a.len() != action_dim) {
            return Err(Error::InvalidParameter(
                "action vectors differ in length".into(),
            ));
        }
        if weights.nrows() != d || weights.ncols() != d + action_dim {
            return Err(Error::DimensionMismatch {
                expected: d * (d + action_dim),
                found: weights.nrows() * weights.ncols(),
            });
        }
        if goal.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: goal.len(),
            });
        }
        if !(noise_sd >= 0.0) || !(reward_width > 0.0) || !(bounds.0 < bounds.1) {
            return Err(Error::InvalidParameter("bad noise, width or bounds".into()));
        }
        Ok(NonlinearGaussianEnv {
            name: name.into(),
            horizon,
            actions,
            weights,
            noise_sd,
            initial,
            bounds,
            goal,
            reward_width,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.initial.len()
    }

    pub fn noise_sd(&self) -> f64 {
        self.noise_sd
    }

    pub fn bounds(&self) -> (f64, f64) {
        self.bounds
    }

    /// Noise-free next state before clipping.
    pub fn mean_next(&self, state: &[f64], action: usize) -> Result<Vec<f64>> {
        if state.len() != self.state_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.state_dim(),
                found: state.len(),
            });
        }
        let a = self
            .actions
            .get(action)
            .ok_or_else(|| Error::InvalidParameter(format!("action {action} out of range")))?;
        let x = DVector::from_iterator(
            state.len() + a.len(),
            state.iter().map(|v| v.tanh()).chain(a.iter().copied()),
        );
        Ok((&self.weights * x).iter().copied().collect())
    }

    pub fn clip(&self, v: f64) -> f64 {
        v.clamp(self.bounds.0, self.bounds.1)
    }

    pub fn reward_at(&self, state: &[f64]) -> f64 {
        let d2: f64 = state
            .iter()
            .zip(&self.goal)
            .map(|(s, g)| (s - g).powi(2))
            .sum();
        (-d2 / (2.0 * self.reward_width * self.reward_width)).exp()
    }
}

impl Environment for NonlinearGaussianEnv {
    fn name(&self) -> &str {
        &self.name
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn num_actions(&self) -> usize {
        self.actions.len()
    }

    fn action_point(&self, action: usize) -> Point {
        Point::new(self.actions[action].clone()).expect("finite action vector")
    }

    fn reset(&self) -> Point {
        Point::new(self.initial.clone()).expect("finite initial state")
    }

    fn reward(&self, state: &Point, _action: usize) -> f64 {
        self.reward_at(state.coords())
    }

    fn step(&self, state: &Point, action: usize, rng: &mut EnvRng) -> Result<(f64, Point)> {
        let mean = self.mean_next(state.coords(), action)?;
        let noise =
            Normal::new(0.0, self.noise_sd).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let next: Vec<f64> = mean
            .iter()
            .map(|m| self.clip(m + noise.sample(rng)))
            .collect();
        Ok((self.reward_at(state.coords()), Point::new(next)?))
    }
}

//! Episodic environments: tabular MDPs loaded from JSON, a continuous
//! nonlinear system, and the built-in catalog used by experiments.

mod catalog;
mod finite;
mod gaussian;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub use catalog::{make_env, standard_envs, CatalogEntry};
pub use finite::FiniteMdp;
pub use gaussian::NonlinearGaussianEnv;

use crate::error::Result;
use crate::kernel_core::Point;

pub type EnvRng = ChaCha8Rng;

/// Generator for the transitions of run `run_index` on `env_name`. Streams are
/// independent across runs and environments and reproducible from the master seed.
pub fn env_rng(master_seed: u64, env_name: &str, run_index: u64) -> EnvRng {
    let mut hasher = Sha256::new();
    hasher.update(master_seed.to_le_bytes());
    hasher.update((env_name.len() as u64).to_le_bytes());
    hasher.update(env_name.as_bytes());
    hasher.update(run_index.to_le_bytes());
    let digest: [u8; 32] = hasher.finalize().into();
    ChaCha8Rng::from_seed(digest)
}

pub trait Environment {
    fn name(&self) -> &str;
    fn horizon(&self) -> usize;
    fn num_actions(&self) -> usize;
    fn action_point(&self, action: usize) -> Point;
    fn reset(&self) -> Point;
    /// Known reward `R(s, a)` in `[0, 1]`.
    fn reward(&self, state: &Point, action: usize) -> f64;
    /// Returns `(R(s, a), s')` with `s' ~ P(. | s, a)`.
    fn step(&self, state: &Point, action: usize, rng: &mut EnvRng) -> Result<(f64, Point)>;

    fn as_finite(&self) -> Option<&FiniteMdp> {
        None
    }

    fn action_points(&self) -> Vec<Point> {
        (0..self.num_actions())
            .map(|a| self.action_point(a))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Env {
    Finite(FiniteMdp),
    Gaussian(NonlinearGaussianEnv),
}

impl Env {
    fn inner(&self) -> &dyn Environment {
        match self {
            Env::Finite(m) => m,
            Env::Gaussian(g) => g,
        }
    }

    pub fn as_gaussian(&self) -> Option<&NonlinearGaussianEnv> {
        match self {
            Env::Gaussian(g) => Some(g),
            Env::Finite(_) => None,
        }
    }
}

impl Environment for Env {
    fn name(&self) -> &str {
        self.inner().name()
    }

    fn horizon(&self) -> usize {
        self.inner().horizon()
    }

    fn num_actions(&self) -> usize {
        self.inner().num_actions()
    }

    fn action_point(&self, action: usize) -> Point {
        self.inner().action_point(action)
    }

    fn reset(&self) -> Point {
        self.inner().reset()
    }

    fn reward(&self, state: &Point, action: usize) -> f64 {
        self.inner().reward(state, action)
    }

    fn step(&self, state: &Point, action: usize, rng: &mut EnvRng) -> Result<(f64, Point)> {
        self.inner().step(state, action, rng)
    }

    fn as_finite(&self) -> Option<&FiniteMdp> {
        self.inner().as_finite()
    }
}

impl From<FiniteMdp> for Env {
    fn from(m: FiniteMdp) -> Self {
        Env::Finite(m)
    }
}

impl From<NonlinearGaussianEnv> for Env {
    fn from(g: NonlinearGaussianEnv) -> Self {
        Env::Gaussian(g)
    }
}

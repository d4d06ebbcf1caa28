use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Constant multiplying the information-gain term of the confidence width.
pub const NOISE_CONSTANT: f64 = 256.0;

/// Scalars driving the confidence width and the exploration bonus.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceConfig {
    pub lambda: f64,
    pub delta: f64,
    /// Bound on the Hilbert-Schmidt norm of the true embedding operator.
    pub b_p: f64,
    /// Bound on the RKHS norm of the optimistic value functions.
    pub b_v: f64,
    /// Bound on `sqrt(k_phi(x, x))`.
    pub b_phi: f64,
    /// Misspecification error (sup-norm distance to the RKHS).
    #[serde(default)]
    pub zeta: f64,
    /// Bound on the RKHS norm of the constant function 1.
    #[serde(default)]
    pub one_norm: f64,
}

impl ConfidenceConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda", self.lambda),
            ("b_p", self.b_p),
            ("b_v", self.b_v),
            ("b_phi", self.b_phi),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive (got {v})"
                )));
            }
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "delta must lie in (0, 1] (got {})",
                self.delta
            )));
        }
        for (name, v) in [("zeta", self.zeta), ("one_norm", self.one_norm)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be non-negative (got {v})"
                )));
            }
        }
        Ok(())
    }
}

/// Anytime confidence width
/// `sqrt(2 lambda B_P^2 + 256 (1 + 1/lambda) * gamma * log(2 t^2 H / delta))`,
/// where `gamma = 1/2 log det(I + K/lambda)` is the information gain of the data
/// collected before episode `t`.
pub fn beta_width(
    lambda: f64,
    b_p: f64,
    info_gain: f64,
    episode: usize,
    horizon: usize,
    delta: f64,
) -> f64 {
    let t = episode as f64;
    let log_term = (2.0 * t * t * horizon as f64 / delta).ln();
    let second = NOISE_CONSTANT * (1.0 + 1.0 / lambda) * info_gain * log_term;
    (2.0 * lambda * b_p * b_p + second.max(0.0)).sqrt()
}

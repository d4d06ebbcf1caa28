use serde::{Deserialize, Serialize};

use crate::cme_estimator::ConfidenceConfig;
use crate::error::{Error, Result};
use crate::kernel_core::Point;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BonusMode {
    #[default]
    WellSpecified,
    /// Bonus coefficient `B_V + zeta * ||1||` to absorb a sup-norm model error.
    Misspecified,
}

/// Deterministic `±magnitude` offsets added to the rewards used for value
/// targets only. Lets tests plant a misspecification of known size.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetPerturbation {
    pub magnitude: f64,
    pub seed: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl TargetPerturbation {
    pub fn offset(&self, state: &Point, action: usize) -> f64 {
        let mut h = splitmix64(self.seed ^ action as u64);
        for bits in state.key() {
            h = splitmix64(h ^ bits);
        }
        if h & 1 == 0 {
            self.magnitude
        } else {
            -self.magnitude
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgentConfig {
    pub horizon: usize,
    pub mode: BonusMode,
    pub confidence: ConfidenceConfig,
    pub action_set: Vec<Point>,
    /// Multiply the bonus by `lambda^{-1/2}` in both modes.
    pub include_lambda_root: bool,
    /// Multiplier on the theoretical width. 1 reproduces the theory; other
    /// values are ablations.
    pub beta_scale: f64,
    pub target_perturbation: Option<TargetPerturbation>,
}

impl AgentConfig {
    pub fn new(
        horizon: usize,
        mode: BonusMode,
        confidence: ConfidenceConfig,
        action_set: Vec<Point>,
    ) -> Result<Self> {
        let cfg = AgentConfig {
            horizon,
            mode,
            confidence,
            action_set,
            include_lambda_root: true,
            beta_scale: 1.0,
            target_perturbation: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be >= 1".into()));
        }
        if self.action_set.is_empty() {
            return Err(Error::InvalidParameter("action set is empty".into()));
        }
        let d = self.action_set[0].dim();
        if self.action_set.iter().any(|a| a.dim() != d) {
            return Err(Error::InvalidParameter(
                "action points differ in dimension".into(),
            ));
        }
        if !(self.beta_scale >= 0.0 && self.beta_scale.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "beta_scale must be non-negative (got {})",
                self.beta_scale
            )));
        }
        if let Some(p) = &self.target_perturbation {
            if !(p.magnitude >= 0.0 && p.magnitude.is_finite()) {
                return Err(Error::InvalidParameter(
                    "perturbation magnitude must be >= 0".into(),
                ));
            }
        }
        self.confidence.validate()
    }

    pub fn num_actions(&self) -> usize {
        self.action_set.len()
    }

    /// Factor in front of `beta * sigma`.
    pub fn bonus_coefficient(&self) -> f64 {
        let c = &self.confidence;
        let base = match self.mode {
            BonusMode::WellSpecified => c.b_v,
            BonusMode::Misspecified => c.b_v + c.zeta * c.one_norm,
        };
        if self.include_lambda_root {
            base / c.lambda.sqrt()
        } else {
            base
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conf() -> ConfidenceConfig {
        ConfidenceConfig {
            lambda: 4.0,
            delta: 0.1,
            b_p: 1.0,
            b_v: 2.0,
            b_phi: 1.0,
            zeta: 0.1,
            one_norm: 1.0,
        }
    }

    #[test]
    fn coefficient_by_mode() {
        let a = vec![Point::one_hot(0, 1).unwrap()];
        let mut cfg = AgentConfig::new(2, BonusMode::WellSpecified, conf(), a).unwrap();
        assert_eq!(cfg.bonus_coefficient(), 1.0);
        cfg.mode = BonusMode::Misspecified;
        assert!((cfg.bonus_coefficient() - 1.05).abs() < 1e-15);
        cfg.include_lambda_root = false;
        assert!((cfg.bonus_coefficient() - 2.1).abs() < 1e-15);
    }

    #[test]
    fn rejects_empty_actions() {
        assert!(AgentConfig::new(2, BonusMode::WellSpecified, conf(), vec![]).is_err());
        let a = vec![Point::one_hot(0, 1).unwrap()];
        assert!(AgentConfig::new(0, BonusMode::WellSpecified, conf(), a).is_err());
    }

    #[test]
    fn perturbation_is_deterministic_and_signed() {
        let p = TargetPerturbation {
            magnitude: 0.05,
            seed: 3,
        };
        let mut seen = [false; 2];
        for s in 0..16 {
            let x = Point::one_hot(s, 16).unwrap();
            let o = p.offset(&x, 1);
            assert_eq!(o, p.offset(&x, 1));
            assert_eq!(o.abs(), 0.05);
            seen[(o > 0.0) as usize] = true;
        }
        assert!(seen[0] && seen[1]);
    }
}

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// `r − β · (log π(Ŷ|X) − log P(Ŷ|X))`.
pub fn kl_penalized_reward(r: f64, logprob_policy: f64, logprob_ref: f64, beta: f64) -> Result<f64> {
    if !(r.is_finite() && logprob_policy.is_finite() && logprob_ref.is_finite() && beta.is_finite()) {
        return Err(Error::invalid(format!(
            "non-finite reward input (r={r}, log π={logprob_policy}, log P={logprob_ref}, β={beta})"
        )));
    }
    if beta < 0.0 {
        return Err(Error::invalid(format!("beta must be non-negative, got {beta}")));
    }
    Ok(r - beta * (logprob_policy - logprob_ref))
}

/// Proportional controller that nudges β toward a target sequence KL.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptiveKl {
    pub target: f64,
    pub horizon: f64,
}

impl AdaptiveKl {
    pub fn update(&self, beta: f64, observed_kl: f64, batch_size: usize) -> f64 {
        let err = (observed_kl / self.target - 1.0).clamp(-0.2, 0.2);
        beta * (1.0 + err * batch_size as f64 / self.horizon)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substitution() {
        assert!((kl_penalized_reward(0.8, -1.0, -1.5, 0.2).unwrap() - 0.7).abs() < 1e-12);
        assert_eq!(kl_penalized_reward(0.3, -2.0, -2.0, 5.0).unwrap(), 0.3);
        assert_eq!(kl_penalized_reward(0.3, -1.0, -9.0, 0.0).unwrap(), 0.3);
        assert!(kl_penalized_reward(f64::NAN, 0.0, 0.0, 0.1).is_err());
        assert!(kl_penalized_reward(0.1, f64::NEG_INFINITY, 0.0, 0.1).is_err());
    }

    #[test]
    fn controller_direction() {
        let c = AdaptiveKl { target: 1.0, horizon: 100.0 };
        assert!(c.update(0.1, 5.0, 8) > 0.1);
        assert!(c.update(0.1, 0.1, 8) < 0.1);
    }
}

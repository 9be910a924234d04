//! Composite rewards fed to the gradient estimate, and the running baseline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Trade-off `(λσ, λμ)` with `λμ <= 0 <= λσ`, not both zero.
///
/// Minimising `λσ·σ² + λμ·μ` with `λμ < 0` rewards a higher mean; `(1, 0)` is
/// pure variance minimisation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskWeights {
    lambda_sigma: f64,
    lambda_mu: f64,
}

impl RiskWeights {
    pub const VARIANCE: RiskWeights = RiskWeights { lambda_sigma: 1.0, lambda_mu: 0.0 };

    pub fn new(lambda_sigma: f64, lambda_mu: f64) -> Result<Self> {
        if !lambda_sigma.is_finite() || !lambda_mu.is_finite() {
            return Err(Error::InvalidWeights("weights must be finite".into()));
        }
        if lambda_mu > 0.0 || lambda_sigma < 0.0 {
            return Err(Error::InvalidWeights(format!(
                "need lambda_mu <= 0 <= lambda_sigma, got ({lambda_sigma}, {lambda_mu})"
            )));
        }
        if lambda_sigma == 0.0 && lambda_mu == 0.0 {
            return Err(Error::InvalidWeights("weights cannot both be zero".into()));
        }
        Ok(Self { lambda_sigma, lambda_mu })
    }

    pub fn lambda_sigma(&self) -> f64 {
        self.lambda_sigma
    }

    pub fn lambda_mu(&self) -> f64 {
        self.lambda_mu
    }

    pub fn risk(&self, mean: f64, variance: f64) -> f64 {
        self.lambda_sigma * variance + self.lambda_mu * mean
    }
}

/// `½(r − r′)²`: unbiased for the variance when `r`, `r′` are independent draws of one arm.
pub fn paired_variance_reward(r: f64, r_prime: f64) -> f64 {
    let d = r - r_prime;
    0.5 * d * d
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchStats {
    pub mean: f64,
    /// Bessel-corrected (divides by `ℓ − 1`).
    pub variance: f64,
}

/// Empirical mean and unbiased variance of a mini-batch of size `ℓ >= 2`.
pub fn batch_stats(rewards: &[f64]) -> Result<BatchStats> {
    let n = rewards.len();
    if n < 2 {
        return Err(Error::BatchTooSmall);
    }
    let mean = rewards.iter().sum::<f64>() / n as f64;
    let variance = if n == 2 {
        // closed two-sample form; keeps ℓ = 2 bit-identical to the paired reward
        paired_variance_reward(rewards[0], rewards[1])
    } else {
        rewards.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1) as f64
    };
    Ok(BatchStats { mean, variance })
}

/// `λσ·σ̂² + λμ·μ̂`.
pub fn composite_reward(stats: &BatchStats, w: &RiskWeights) -> f64 {
    w.risk(stats.mean, stats.variance)
}

/// Running baseline `R̄`, started at `R̄₁ = 0` and updated as
/// `R̄_{t+1} = R̄_t + (R_t − R̄_t)/(t + 1)`.
///
/// The initial zero counts as a term, so after `n` updates the value is
/// `(Σ R_i)/(n + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    value: f64,
    count: u64,
}

impl Default for Baseline {
    fn default() -> Self {
        Self { value: 0.0, count: 1 }
    }
}

impl Baseline {
    pub fn new() -> Self {
        Self::default()
    }

    /// A baseline pinned at `value` (count 1).
    pub fn at(value: f64) -> Self {
        Self { value, count: 1 }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn update(&mut self, reward: f64) {
        self.value += (reward - self.value) / (self.count + 1) as f64;
        self.count += 1;
    }

    pub fn updated(mut self, reward: f64) -> Self {
        self.update(reward);
        self
    }
}

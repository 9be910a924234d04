//! Arm reward distributions and bandit instances.
//!
//! Each arm knows its exact mean and variance. The learner never reads them;
//! they exist for regret, optimal-arm bookkeeping and the exact-gradient oracle.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::RiskWeights;

/// Smallest probability mass a truncation window may keep. Below this the
/// rejection sampler would effectively never terminate.
const MIN_TRUNCATED_MASS: f64 = 1e-6;

const PROB_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RewardDistribution {
    Gaussian { mean: f64, std_dev: f64 },
    /// Gaussian restricted to `[-bound, bound]`.
    TruncatedGaussian { mean: f64, std_dev: f64, bound: f64 },
    /// Takes `hi` with probability `p`, `lo` otherwise.
    Bernoulli { p: f64, lo: f64, hi: f64 },
    Uniform { lo: f64, hi: f64 },
    Discrete { values: Vec<f64>, probs: Vec<f64> },
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidDistribution(msg.into())
}

impl RewardDistribution {
    pub fn gaussian(mean: f64, std_dev: f64) -> Result<Self> {
        Self::Gaussian { mean, std_dev }.validated()
    }

    pub fn truncated_gaussian(mean: f64, std_dev: f64, bound: f64) -> Result<Self> {
        Self::TruncatedGaussian { mean, std_dev, bound }.validated()
    }

    pub fn bernoulli(p: f64, lo: f64, hi: f64) -> Result<Self> {
        Self::Bernoulli { p, lo, hi }.validated()
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        Self::Uniform { lo, hi }.validated()
    }

    pub fn discrete(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        Self::Discrete { values, probs }.validated()
    }

    fn validated(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }

    /// Checks the parameter invariants of the distribution family.
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Gaussian { mean, std_dev } => {
                if !mean.is_finite() || !std_dev.is_finite() || *std_dev <= 0.0 {
                    return Err(invalid(format!("gaussian needs finite mean and std_dev > 0, got ({mean}, {std_dev})")));
                }
            }
            Self::TruncatedGaussian { mean, std_dev, bound } => {
                if !mean.is_finite() || !std_dev.is_finite() || *std_dev <= 0.0 {
                    return Err(invalid(format!("truncated gaussian needs finite mean and std_dev > 0, got ({mean}, {std_dev})")));
                }
                if !bound.is_finite() || *bound <= 0.0 {
                    return Err(invalid(format!("truncation bound must be > 0, got {bound}")));
                }
                let (a, b) = self.truncation_limits();
                let mass = std_normal_cdf(b) - std_normal_cdf(a);
                if mass < MIN_TRUNCATED_MASS {
                    return Err(invalid(format!("truncation window [-{bound}, {bound}] keeps mass {mass:e}")));
                }
            }
            Self::Bernoulli { p, lo, hi } => {
                if !(0.0..=1.0).contains(p) || !lo.is_finite() || !hi.is_finite() {
                    return Err(invalid(format!("bernoulli needs p in [0,1] and finite values, got p={p}")));
                }
            }
            Self::Uniform { lo, hi } => {
                if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                    return Err(invalid(format!("uniform needs lo < hi, got [{lo}, {hi}]")));
                }
            }
            Self::Discrete { values, probs } => {
                if values.is_empty() || values.len() != probs.len() {
                    return Err(invalid("discrete needs matching non-empty values and probs"));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(invalid("discrete values must be finite"));
                }
                if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                    return Err(invalid("discrete probabilities must be >= 0"));
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > PROB_SUM_TOL {
                    return Err(invalid(format!("discrete probabilities sum to {total}")));
                }
            }
        }
        Ok(())
    }

    /// Standardized truncation limits `((-R - μ)/σ, (R - μ)/σ)`; only meaningful
    /// for the truncated family.
    fn truncation_limits(&self) -> (f64, f64) {
        match *self {
            Self::TruncatedGaussian { mean, std_dev, bound } => ((-bound - mean) / std_dev, (bound - mean) / std_dev),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Self::Gaussian { mean, .. } => *mean,
            Self::TruncatedGaussian { mean, std_dev, .. } => {
                let (a, b) = self.truncation_limits();
                let z = std_normal_cdf(b) - std_normal_cdf(a);
                mean + std_dev * (std_normal_pdf(a) - std_normal_pdf(b)) / z
            }
            Self::Bernoulli { p, lo, hi } => lo + p * (hi - lo),
            Self::Uniform { lo, hi } => 0.5 * (lo + hi),
            Self::Discrete { values, probs } => values.iter().zip(probs).map(|(v, p)| v * p).sum(),
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            Self::Gaussian { std_dev, .. } => std_dev * std_dev,
            Self::TruncatedGaussian { std_dev, .. } => {
                let (a, b) = self.truncation_limits();
                let z = std_normal_cdf(b) - std_normal_cdf(a);
                let (pa, pb) = (std_normal_pdf(a), std_normal_pdf(b));
                // a·φ(a) and b·φ(b) vanish at infinite limits
                let apa = if a.is_finite() { a * pa } else { 0.0 };
                let bpb = if b.is_finite() { b * pb } else { 0.0 };
                let shift = (pa - pb) / z;
                std_dev * std_dev * (1.0 + (apa - bpb) / z - shift * shift)
            }
            Self::Bernoulli { p, lo, hi } => p * (1.0 - p) * (hi - lo) * (hi - lo),
            Self::Uniform { lo, hi } => (hi - lo) * (hi - lo) / 12.0,
            Self::Discrete { values, probs } => {
                let m = self.mean();
                values.iter().zip(probs).map(|(v, p)| p * (v - m) * (v - m)).sum()
            }
        }
    }

    /// Largest absolute value a draw can take, if bounded.
    pub fn bound(&self) -> Option<f64> {
        match self {
            Self::Gaussian { .. } => None,
            Self::TruncatedGaussian { bound, .. } => Some(*bound),
            Self::Bernoulli { lo, hi, .. } | Self::Uniform { lo, hi } => Some(lo.abs().max(hi.abs())),
            Self::Discrete { values, .. } => Some(values.iter().fold(0.0f64, |m, v| m.max(v.abs()))),
        }
    }

    /// One draw. Truncated Gaussians resample until the draw lands inside the
    /// window; they are never clipped.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Gaussian { mean, std_dev } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + std_dev * z
            }
            Self::TruncatedGaussian { mean, std_dev, bound } => loop {
                let z: f64 = StandardNormal.sample(rng);
                let x = mean + std_dev * z;
                if x.abs() <= *bound {
                    break x;
                }
            },
            Self::Bernoulli { p, lo, hi } => {
                if rng.random::<f64>() < *p {
                    *hi
                } else {
                    *lo
                }
            }
            Self::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            Self::Discrete { values, probs } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (v, p) in values.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return *v;
                    }
                }
                // rounding left u above the last partial sum
                let last = probs.iter().rposition(|p| *p > 0.0).unwrap_or(values.len() - 1);
                values[last]
            }
        }
    }
}

/// A fixed set of `k >= 2` arms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditInstance {
    arms: Vec<RewardDistribution>,
}

impl BanditInstance {
    pub fn new(arms: Vec<RewardDistribution>) -> Result<Self> {
        if arms.len() < 2 {
            return Err(Error::InvalidInstance(format!("need at least 2 arms, got {}", arms.len())));
        }
        for (i, arm) in arms.iter().enumerate() {
            arm.validate().map_err(|e| Error::InvalidInstance(format!("arm {i}: {e}")))?;
        }
        Ok(Self { arms })
    }

    /// Two centred Gaussian arms with standard deviations 1 and 2.
    pub fn toy2() -> Self {
        Self::centred_gaussians(&[1.0, 2.0])
    }

    /// Ten centred Gaussian arms; standard deviation 2 everywhere except 1 on the last arm.
    pub fn toy10() -> Self {
        let mut sd = [2.0; 10];
        sd[9] = 1.0;
        Self::centred_gaussians(&sd)
    }

    fn centred_gaussians(std_devs: &[f64]) -> Self {
        let arms = std_devs
            .iter()
            .map(|&std_dev| RewardDistribution::Gaussian { mean: 0.0, std_dev })
            .collect();
        Self { arms }
    }

    /// Ten Gaussian arms with means drawn from N(4, 1) and variances from U[1, 5].
    /// Nothing keeps the two smallest variances apart.
    pub fn random_hard<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let arms = (0..10)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                let mean = 4.0 + z;
                let variance = 1.0 + 4.0 * rng.random::<f64>();
                RewardDistribution::Gaussian { mean, std_dev: variance.sqrt() }
            })
            .collect();
        Self { arms }
    }

    pub fn k(&self) -> usize {
        self.arms.len()
    }

    pub fn arms(&self) -> &[RewardDistribution] {
        &self.arms
    }

    pub fn arm(&self, a: usize) -> &RewardDistribution {
        &self.arms[a]
    }

    pub fn true_means(&self) -> Vec<f64> {
        self.arms.iter().map(RewardDistribution::mean).collect()
    }

    pub fn true_variances(&self) -> Vec<f64> {
        self.arms.iter().map(RewardDistribution::variance).collect()
    }

    /// Per-arm risk `q_a = λσ·σ_a² + λμ·μ_a`.
    pub fn risks(&self, weights: &RiskWeights) -> Vec<f64> {
        self.arms.iter().map(|arm| weights.risk(arm.mean(), arm.variance())).collect()
    }

    /// Index of the smallest risk; the lowest index wins ties.
    pub fn optimal_arm(&self, weights: &RiskWeights) -> usize {
        let q = self.risks(weights);
        let mut best = 0;
        for (a, &qa) in q.iter().enumerate().skip(1) {
            if qa < q[best] {
                best = a;
            }
        }
        best
    }

    pub fn sample<R: Rng + ?Sized>(&self, arm: usize, rng: &mut R) -> f64 {
        self.arms[arm].sample(rng)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: BanditInstance = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::new(raw.arms)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }
}

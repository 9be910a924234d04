//! Softmax policy over arm preferences.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SIMPLEX_TOL: f64 = 1e-12;

/// Unconstrained preference vector `H`. Entries are always finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Preferences(Vec<f64>);

impl Preferences {
    pub fn new(h: Vec<f64>) -> Result<Self> {
        if h.is_empty() || h.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidPreferences);
        }
        Ok(Self(h))
    }

    /// All-zero preferences, i.e. the uniform policy.
    pub fn zeros(k: usize) -> Self {
        Self(vec![0.0; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn policy(&self) -> Policy {
        // entries are finite by construction
        Policy(stable_softmax(&self.0))
    }

    pub(crate) fn as_mut_vec(&mut self) -> &mut Vec<f64> {
        &mut self.0
    }
}

/// A probability vector over the arms.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy(Vec<f64>);

impl Policy {
    /// Validates non-negativity and normalisation (within 1e-12).
    pub fn from_probs(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidPolicy("empty".into()));
        }
        if p.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidPolicy("probabilities must be finite and >= 0".into()));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidPolicy(format!("probabilities sum to {total}")));
        }
        Ok(Self(p))
    }

    pub fn uniform(k: usize) -> Self {
        Self(vec![1.0 / k as f64; k])
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn prob(&self, a: usize) -> f64 {
        self.0[a]
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }
}

fn stable_softmax(h: &[f64]) -> Vec<f64> {
    let max = h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = h.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `Π_H(a) = exp(H(a)) / Σ_b exp(H(b))`, evaluated after subtracting `max H`.
pub fn softmax(h: &[f64]) -> Result<Policy> {
    if h.is_empty() || h.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidPreferences);
    }
    Ok(Policy(stable_softmax(h)))
}

/// Inverse-CDF draw from `p`. Consumes exactly one uniform from `rng`.
pub fn sample_arm<R: Rng + ?Sized>(p: &Policy, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (a, &pa) in p.0.iter().enumerate() {
        acc += pa;
        if u < acc {
            return a;
        }
    }
    p.0.iter().rposition(|&pa| pa > 0.0).unwrap_or(p.0.len() - 1)
}

/// Row `a` of the softmax Jacobian: `b ↦ ∂Π(a)/∂H(b) = Π(a)(1{a=b} − Π(b))`.
pub fn jacobian_row(p: &Policy, a: usize) -> Vec<f64> {
    let pa = p.0[a];
    p.0.iter()
        .enumerate()
        .map(|(b, &pb)| pa * (if a == b { 1.0 } else { 0.0 } - pb))
        .collect()
}

/// Step-size schedule `ρ_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearningRate {
    Constant { rate: f64 },
    /// `ρ_t = initial / t^exponent`
    PowerDecay { initial: f64, exponent: f64 },
}

impl LearningRate {
    pub fn constant(rate: f64) -> Result<Self> {
        Self::Constant { rate }.validated()
    }

    pub fn power_decay(initial: f64, exponent: f64) -> Result<Self> {
        Self::PowerDecay { initial, exponent }.validated()
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Constant { rate } if !(rate.is_finite() && rate > 0.0) => {
                Err(Error::InvalidSchedule(format!("rate must be > 0, got {rate}")))
            }
            Self::PowerDecay { initial, exponent } if !(initial.is_finite() && initial > 0.0) || !(exponent.is_finite() && exponent >= 0.0) => {
                Err(Error::InvalidSchedule(format!("need initial > 0 and exponent >= 0, got ({initial}, {exponent})")))
            }
            _ => Ok(()),
        }
    }

    fn validated(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }

    /// Step size at step `t >= 1`.
    pub fn rate(&self, t: u64) -> Result<f64> {
        if t == 0 {
            return Err(Error::InvalidSchedule("steps are numbered from 1".into()));
        }
        Ok(match *self {
            Self::Constant { rate } => rate,
            Self::PowerDecay { initial, exponent } => initial / (t as f64).powf(exponent),
        })
    }
}

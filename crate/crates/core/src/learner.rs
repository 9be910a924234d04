//! Policy-gradient learner over softmax preferences.
//!
//! Each step samples an arm from `Π_{H_t}`, draws a mini-batch of rewards from
//! it, forms a composite reward `R_t`, and moves the preferences *down* the
//! estimated gradient
//!
//! ```text
//! g_t(a) = (R_t − R̄_t)(1{a = A_t} − Π_{H_t}(a)),    H_{t+1} = H_t − ρ_t g_t
//! ```
//!
//! using the baseline `R̄_t` from before this step; the baseline absorbs `R_t`
//! afterwards. Minimising with `λμ < 0` is the usual reward-maximising gradient
//! bandit.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::BanditInstance;
use crate::error::{Error, Result};
use crate::estimators::{batch_stats, composite_reward, paired_variance_reward, Baseline, RiskWeights};
use crate::policy::{sample_arm, LearningRate, Policy, Preferences};

/// Preferences beyond this magnitude abort the run.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Paired-sample variance minimisation: two draws, `R_t = ½(R − R′)²`.
    Variance,
    /// Mini-batch mean-variance objective `λσ·σ̂² + λμ·μ̂`.
    Risk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub algorithm: Algorithm,
    pub k: usize,
    pub weights: RiskWeights,
    pub batch: usize,
    pub schedule: LearningRate,
    pub initial_preferences: Vec<f64>,
}

impl LearnerConfig {
    /// Variance mode: batch 2, weights `(1, 0)`, uniform start.
    pub fn variance(k: usize, schedule: LearningRate) -> Self {
        Self {
            algorithm: Algorithm::Variance,
            k,
            weights: RiskWeights::VARIANCE,
            batch: 2,
            schedule,
            initial_preferences: vec![0.0; k],
        }
    }

    pub fn risk(k: usize, weights: RiskWeights, batch: usize, schedule: LearningRate) -> Result<Self> {
        let cfg = Self {
            algorithm: Algorithm::Risk,
            k,
            weights,
            batch,
            schedule,
            initial_preferences: vec![0.0; k],
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_initial_preferences(mut self, h: Vec<f64>) -> Result<Self> {
        self.initial_preferences = h;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidConfig(format!("need at least 2 arms, got {}", self.k)));
        }
        if self.initial_preferences.len() != self.k {
            return Err(Error::InvalidConfig(format!(
                "initial preferences have length {}, expected {}",
                self.initial_preferences.len(),
                self.k
            )));
        }
        Preferences::new(self.initial_preferences.clone())?;
        self.schedule.validate()?;
        RiskWeights::new(self.weights.lambda_sigma(), self.weights.lambda_mu())?;
        match self.algorithm {
            Algorithm::Variance => {
                if self.batch != 2 {
                    return Err(Error::InvalidConfig("variance mode requires batch=2".into()));
                }
                if self.weights != RiskWeights::VARIANCE {
                    return Err(Error::InvalidConfig("variance mode requires lambda_sigma=1, lambda_mu=0".into()));
                }
            }
            Algorithm::Risk => {
                if self.batch < 2 {
                    return Err(Error::BatchTooSmall);
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerState {
    pub preferences: Preferences,
    pub baseline: Baseline,
    /// Index of the next step, starting at 1.
    pub t: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub chosen_arm: usize,
    pub composite_reward: f64,
    pub gradient: Vec<f64>,
    pub rewards: Vec<f64>,
}

/// `g(a) = (composite − baseline)(1{a = chosen} − p_a)`.
pub fn gradient_estimate(composite: f64, baseline: f64, chosen: usize, p: &Policy) -> Vec<f64> {
    let advantage = composite - baseline;
    p.probs()
        .iter()
        .enumerate()
        .map(|(a, &pa)| advantage * (if a == chosen { 1.0 } else { 0.0 } - pa))
        .collect()
}

/// `Σ_a p_a q_a` with `q_a = λσ·σ_a² + λμ·μ_a`.
pub fn objective_value(p: &Policy, env: &BanditInstance, w: &RiskWeights) -> f64 {
    p.probs().iter().zip(env.risks(w)).map(|(pa, qa)| pa * qa).sum()
}

/// Exact gradient of the objective with respect to the preferences:
/// `∂/∂H(a) = p_a (q_a − Σ_b p_b q_b)`.
pub fn exact_gradient(p: &Policy, env: &BanditInstance, w: &RiskWeights) -> Vec<f64> {
    let q = env.risks(w);
    let mean_q: f64 = p.probs().iter().zip(&q).map(|(pa, qa)| pa * qa).sum();
    p.probs().iter().zip(&q).map(|(pa, qa)| pa * (qa - mean_q)).collect()
}

#[derive(Debug, Clone)]
pub struct Learner {
    config: LearnerConfig,
    state: LearnerState,
}

impl Learner {
    pub fn new(config: LearnerConfig) -> Result<Self> {
        config.validate()?;
        let state = LearnerState {
            preferences: Preferences::new(config.initial_preferences.clone())?,
            baseline: Baseline::new(),
            t: 1,
        };
        Ok(Self { config, state })
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    pub fn state(&self) -> &LearnerState {
        &self.state
    }

    pub fn preferences(&self) -> &[f64] {
        self.state.preferences.as_slice()
    }

    pub fn policy(&self) -> Policy {
        self.state.preferences.policy()
    }

    /// One step of whichever algorithm the config selects.
    pub fn step<R: Rng + ?Sized>(&mut self, env: &BanditInstance, rng: &mut R) -> Result<StepOutcome> {
        match self.config.algorithm {
            Algorithm::Variance => self.step_variance(env, rng),
            Algorithm::Risk => self.step_risk(env, rng),
        }
    }

    /// Variance-minimising step with two draws per step.
    pub fn step_variance<R: Rng + ?Sized>(&mut self, env: &BanditInstance, rng: &mut R) -> Result<StepOutcome> {
        if self.config.algorithm != Algorithm::Variance {
            return Err(Error::InvalidConfig("step_variance needs a variance-mode config".into()));
        }
        self.check_env(env)?;
        let p = self.policy();
        let arm = sample_arm(&p, rng);
        let r = env.sample(arm, rng);
        let r_prime = env.sample(arm, rng);
        let composite = paired_variance_reward(r, r_prime);
        self.apply(arm, composite, vec![r, r_prime], &p)
    }

    /// Mean-variance step on a mini-batch of `batch` draws.
    pub fn step_risk<R: Rng + ?Sized>(&mut self, env: &BanditInstance, rng: &mut R) -> Result<StepOutcome> {
        self.check_env(env)?;
        let p = self.policy();
        let arm = sample_arm(&p, rng);
        let rewards: Vec<f64> = (0..self.config.batch).map(|_| env.sample(arm, rng)).collect();
        let stats = batch_stats(&rewards)?;
        let composite = composite_reward(&stats, &self.config.weights);
        self.apply(arm, composite, rewards, &p)
    }

    fn check_env(&self, env: &BanditInstance) -> Result<()> {
        if env.k() != self.config.k {
            return Err(Error::InvalidConfig(format!(
                "learner has {} arms, instance has {}",
                self.config.k,
                env.k()
            )));
        }
        Ok(())
    }

    fn apply(&mut self, arm: usize, composite: f64, rewards: Vec<f64>, p: &Policy) -> Result<StepOutcome> {
        let t = self.state.t;
        let rate = self.config.schedule.rate(t)?;
        let gradient = gradient_estimate(composite, self.state.baseline.value(), arm, p);

        let mut next = self.state.preferences.clone();
        for (h, g) in next.as_mut_vec().iter_mut().zip(&gradient) {
            *h -= rate * g;
        }
        if let Some((a, &value)) = next
            .as_slice()
            .iter()
            .enumerate()
            .find(|(_, h)| !h.is_finite() || h.abs() > DIVERGENCE_LIMIT)
        {
            return Err(Error::Divergence { step: t, arm: a, value });
        }

        self.state.preferences = next;
        self.state.baseline.update(composite);
        self.state.t += 1;
        Ok(StepOutcome {
            chosen_arm: arm,
            composite_reward: composite,
            gradient,
            rewards,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::RewardDistribution;
    use crate::policy::softmax;
    use crate::rng::{run_stream, seeded};

    fn toy2_learner(rate: f64) -> Learner {
        Learner::new(LearnerConfig::variance(2, LearningRate::constant(rate).unwrap())).unwrap()
    }

    #[test]
    fn gradient_estimate_examples() {
        let p = Policy::uniform(2);
        assert_eq!(gradient_estimate(2.0, 0.0, 0, &p), vec![1.0, -1.0]);
        assert!(gradient_estimate(1.7, 1.7, 1, &p).iter().all(|&g| g == 0.0));
        let p = softmax(&[0.3, -1.2, 2.0, 0.1]).unwrap();
        for chosen in 0..4 {
            let g = gradient_estimate(3.3, -0.8, chosen, &p);
            assert!(g.iter().sum::<f64>().abs() <= 1e-12);
        }
    }

    #[test]
    fn config_validation() {
        let rate = LearningRate::constant(0.1).unwrap();
        let mut cfg = LearnerConfig::variance(2, rate);
        cfg.batch = 5;
        assert_eq!(cfg.validate(), Err(Error::InvalidConfig("variance mode requires batch=2".into())));
        let mut cfg = LearnerConfig::variance(2, rate);
        cfg.weights = RiskWeights::new(1.0, -1.0).unwrap();
        assert!(cfg.validate().is_err());
        assert_eq!(
            LearnerConfig::risk(3, RiskWeights::VARIANCE, 1, rate),
            Err(Error::BatchTooSmall)
        );
        assert!(LearnerConfig::variance(3, rate).with_initial_preferences(vec![0.0; 2]).is_err());
        assert!(LearnerConfig::variance(1, rate).validate().is_err());
    }

    #[test]
    fn point_mass_arms_never_move_preferences() {
        let env = BanditInstance::new(vec![
            RewardDistribution::discrete(vec![1.0], vec![1.0]).unwrap(),
            RewardDistribution::discrete(vec![-2.0], vec![1.0]).unwrap(),
            RewardDistribution::discrete(vec![5.0], vec![1.0]).unwrap(),
        ])
        .unwrap();
        let mut learner = Learner::new(LearnerConfig::variance(3, LearningRate::constant(0.5).unwrap())).unwrap();
        let mut rng = seeded(1);
        for _ in 0..100 {
            let out = learner.step(&env, &mut rng).unwrap();
            assert_eq!(out.composite_reward, 0.0);
            assert!(out.gradient.iter().all(|&g| g == 0.0));
        }
        assert_eq!(learner.state().baseline.value(), 0.0);
        assert_eq!(learner.preferences(), &[0.0, 0.0, 0.0]);
        assert_eq!(learner.state().t, 101);
    }

    #[test]
    fn step_matches_hand_replay() {
        let env = BanditInstance::toy2();
        let mut learner = toy2_learner(0.5);
        let mut rng = seeded(21);
        // warm up so the baseline and preferences are non-trivial
        for _ in 0..5 {
            learner.step(&env, &mut rng).unwrap();
        }
        let before = learner.state().clone();
        let mut replay_rng = rng.clone();
        let out = learner.step(&env, &mut rng).unwrap();

        let p = before.preferences.policy();
        let arm = sample_arm(&p, &mut replay_rng);
        let r = env.sample(arm, &mut replay_rng);
        let r2 = env.sample(arm, &mut replay_rng);
        let composite = 0.5 * (r - r2) * (r - r2);
        let old_baseline = before.baseline.value();
        let h: Vec<f64> = before
            .preferences
            .as_slice()
            .iter()
            .enumerate()
            .map(|(a, h)| h - 0.5 * (composite - old_baseline) * (if a == arm { 1.0 } else { 0.0 } - p.prob(a)))
            .collect();
        let baseline = old_baseline + (composite - old_baseline) / (before.t + 1) as f64;

        assert_eq!(out.chosen_arm, arm);
        assert_eq!(out.rewards, vec![r, r2]);
        assert_eq!(learner.preferences(), h.as_slice());
        assert_eq!(learner.state().baseline.value(), baseline);
        assert_eq!(learner.state().t, before.t + 1);
    }

    #[test]
    fn risk_mode_with_variance_weights_couples_exactly() {
        let env = BanditInstance::toy10();
        let rate = LearningRate::constant(0.05).unwrap();
        let mut var = Learner::new(LearnerConfig::variance(10, rate)).unwrap();
        let mut risk = Learner::new(LearnerConfig::risk(10, RiskWeights::VARIANCE, 2, rate).unwrap()).unwrap();
        let (mut r1, mut r2) = (seeded(4), seeded(4));
        for _ in 0..300 {
            let a = var.step_variance(&env, &mut r1).unwrap();
            let b = risk.step_risk(&env, &mut r2).unwrap();
            assert_eq!(a, b);
        }
        assert_eq!(var.state(), risk.state());
    }

    #[test]
    fn mean_seeking_weights_pick_the_highest_mean() {
        let env = BanditInstance::new(vec![
            RewardDistribution::discrete(vec![0.0], vec![1.0]).unwrap(),
            RewardDistribution::discrete(vec![1.0], vec![1.0]).unwrap(),
        ])
        .unwrap();
        let w = RiskWeights::new(0.0, -1.0).unwrap();
        let cfg = LearnerConfig::risk(2, w, 2, LearningRate::constant(0.1).unwrap()).unwrap();
        let mut hits = 0;
        for run in 0..100 {
            let mut learner = Learner::new(cfg.clone()).unwrap();
            let mut rng = run_stream(3, run);
            for _ in 0..500 {
                let out = learner.step(&env, &mut rng).unwrap();
                assert!(out.gradient.iter().sum::<f64>().abs() <= 1e-12);
            }
            if learner.policy().prob(1) > 0.9 {
                hits += 1;
            }
        }
        assert!(hits >= 95, "{hits}/100 runs converged");
    }

    #[test]
    fn step_variance_rejects_risk_config() {
        let cfg = LearnerConfig::risk(2, RiskWeights::VARIANCE, 3, LearningRate::constant(0.1).unwrap()).unwrap();
        let mut learner = Learner::new(cfg).unwrap();
        assert!(learner.step_variance(&BanditInstance::toy2(), &mut seeded(0)).is_err());
        assert!(learner.step(&BanditInstance::toy10(), &mut seeded(0)).is_err());
    }

    #[test]
    fn huge_steps_are_reported_as_divergence() {
        let env = BanditInstance::new(vec![
            RewardDistribution::uniform(0.0, 1.0).unwrap(),
            RewardDistribution::uniform(0.0, 1.0).unwrap(),
        ])
        .unwrap();
        let mut learner = toy2_learner(1e12);
        let mut rng = seeded(8);
        let err = (0..1000).find_map(|_| learner.step(&env, &mut rng).err());
        assert!(matches!(err, Some(Error::Divergence { .. })), "{err:?}");
        assert!(learner.preferences().iter().all(|h| h.abs() <= DIVERGENCE_LIMIT));
    }

    /// Central finite differences of the objective through softmax.
    fn fd_objective_gradient(h: &[f64], env: &BanditInstance, w: &RiskWeights) -> Vec<f64> {
        let step = 1e-6;
        (0..h.len())
            .map(|b| {
                let mut up = h.to_vec();
                let mut down = h.to_vec();
                up[b] += step;
                down[b] -= step;
                let f = |v: &[f64]| objective_value(&softmax(v).unwrap(), env, w);
                (f(&up) - f(&down)) / (2.0 * step)
            })
            .collect()
    }

    #[test]
    fn exact_gradient_examples() {
        let env = BanditInstance::toy2();
        let g = exact_gradient(&Policy::uniform(2), &env, &RiskWeights::VARIANCE);
        assert_eq!(g, vec![-0.75, 0.75]);
        let fd = fd_objective_gradient(&[0.0, 0.0], &env, &RiskWeights::VARIANCE);
        assert!(g.iter().zip(&fd).all(|(x, y)| (x - y).abs() < 1e-8));

        let mut point = vec![0.0; 10];
        point[0] = 1.0;
        let g = exact_gradient(&Policy::from_probs(point).unwrap(), &BanditInstance::toy10(), &RiskWeights::VARIANCE);
        assert!(g.iter().all(|x| x.abs() <= 1e-12));

        let flat = BanditInstance::new(vec![RewardDistribution::gaussian(0.0, 1.5).unwrap(); 4]).unwrap();
        let g = exact_gradient(&softmax(&[0.1, -2.0, 0.7, 1.0]).unwrap(), &flat, &RiskWeights::VARIANCE);
        assert!(g.iter().all(|x| x.abs() <= 1e-12));
    }

    #[test]
    fn exact_gradient_matches_finite_differences() {
        use rand::Rng;
        let mut rng = seeded(31);
        let w = RiskWeights::new(0.7, -1.3).unwrap();
        for _ in 0..20 {
            let env = BanditInstance::random_hard(&mut rng);
            let h: Vec<f64> = (0..10).map(|_| rng.random_range(-2.0..2.0)).collect();
            let g = exact_gradient(&softmax(&h).unwrap(), &env, &w);
            for (x, y) in g.iter().zip(fd_objective_gradient(&h, &env, &w)) {
                assert!((x - y).abs() < 1e-7, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn objective_examples() {
        let w = RiskWeights::VARIANCE;
        assert_eq!(objective_value(&Policy::uniform(2), &BanditInstance::toy2(), &w), 2.5);
        assert!((objective_value(&Policy::uniform(10), &BanditInstance::toy10(), &w) - 3.7).abs() < 1e-12);
        let mut point = vec![0.0; 10];
        point[9] = 1.0;
        assert_eq!(objective_value(&Policy::from_probs(point).unwrap(), &BanditInstance::toy10(), &w), 1.0);
    }
}

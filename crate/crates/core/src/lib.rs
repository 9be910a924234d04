//! Softmax policy-gradient multi-armed bandits that minimize reward variance,
//! or more generally a mean-variance risk functional `λσ·σ² + λμ·μ`.
//!
//! The crate is organised bottom-up:
//!
//! * [`env`] — reward distributions, bandit instances and the named instance generators;
//! * [`policy`] — softmax policy, arm sampling, softmax derivative and learning rates;
//! * [`estimators`] — paired-sample variance reward, mini-batch statistics, running baseline;
//! * [`learner`] — the policy-gradient learner (variance mode and risk-aware mode) and the
//!   exact gradient of the objective;
//! * [`experiment`] — Monte Carlo harness with regret / optimal-arm curves and CSV output;
//! * [`verify`] — gradient unbiasedness and softmax Jacobian checks.

pub mod env;
pub mod error;
pub mod estimators;
pub mod experiment;
pub mod learner;
pub mod policy;
pub mod rng;
pub mod verify;

pub use env::{BanditInstance, RewardDistribution};
pub use error::{Error, Result};
pub use estimators::{batch_stats, composite_reward, paired_variance_reward, Baseline, BatchStats, RiskWeights};
pub use experiment::{aggregate, reproduce_figure, run_experiment, run_one, AggregateCurves, ExperimentConfig, ExperimentOutcome, Figure, InstanceSpec, RunRecord};
pub use learner::{exact_gradient, gradient_estimate, objective_value, Algorithm, Learner, LearnerConfig, LearnerState, StepOutcome};
pub use policy::{jacobian_row, sample_arm, softmax, LearningRate, Policy, Preferences};

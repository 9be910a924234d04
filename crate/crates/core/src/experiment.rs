//! Monte Carlo harness: many independent runs of one learner configuration,
//! per-step regret and optimal-arm curves with 95% normal confidence bands.
//!
//! Run `i` of an experiment owns the random stream `run_stream(base_seed, i)`;
//! results are collected and summed in run-index order, so output does not
//! depend on the worker count.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::BanditInstance;
use crate::error::{Error, Result};
use crate::learner::{Learner, LearnerConfig};
use crate::policy::LearningRate;
use crate::rng::run_stream;

/// Normal quantile for a two-sided 95% interval.
pub const Z_95: f64 = 1.96;

pub const CSV_HEADER: &str = "t,mean_regret,regret_ci_lo,regret_ci_hi,opt_freq,opt_ci_lo,opt_ci_hi";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstanceSpec {
    Toy2,
    Toy10,
    /// A fresh random instance per run, drawn from the run's own stream.
    RandomHard,
    Explicit(BanditInstance),
}

impl InstanceSpec {
    pub fn k(&self) -> usize {
        match self {
            Self::Toy2 => 2,
            Self::Toy10 | Self::RandomHard => 10,
            Self::Explicit(env) => env.k(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub instance: InstanceSpec,
    pub learner: LearnerConfig,
    pub steps: usize,
    pub runs: usize,
    pub base_seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.runs == 0 {
            return Err(Error::InvalidConfig("steps and runs must both be >= 1".into()));
        }
        self.learner.validate()?;
        if self.learner.k != self.instance.k() {
            return Err(Error::InvalidConfig(format!(
                "learner has {} arms, instance has {}",
                self.learner.k,
                self.instance.k()
            )));
        }
        Ok(())
    }
}

/// Per-step trace of one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub optimal_arm: usize,
    pub chosen_arm: Vec<usize>,
    /// `q_{A_t} − q_{a⋆}` from ground-truth moments.
    pub regret: Vec<f64>,
    pub optimal_chosen: Vec<bool>,
    /// `Π_{H_t}(a⋆)` for the policy that chose `A_t`.
    pub optimal_prob: Vec<f64>,
    /// Policy after the last step.
    pub final_policy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub run_index: usize,
    pub message: String,
}

/// Executes run `run_index` of `config`.
pub fn run_one(config: &ExperimentConfig, run_index: usize) -> Result<RunRecord> {
    config.validate()?;
    if run_index >= config.runs {
        return Err(Error::InvalidConfig(format!("run index {run_index} out of range (runs = {})", config.runs)));
    }
    let mut rng = run_stream(config.base_seed, run_index as u64);
    let env = match &config.instance {
        InstanceSpec::Toy2 => BanditInstance::toy2(),
        InstanceSpec::Toy10 => BanditInstance::toy10(),
        InstanceSpec::RandomHard => BanditInstance::random_hard(&mut rng),
        InstanceSpec::Explicit(env) => env.clone(),
    };
    let weights = config.learner.weights;
    let q = env.risks(&weights);
    let best = env.optimal_arm(&weights);

    let mut learner = Learner::new(config.learner.clone())?;
    let t_max = config.steps;
    let mut record = RunRecord {
        optimal_arm: best,
        chosen_arm: Vec::with_capacity(t_max),
        regret: Vec::with_capacity(t_max),
        optimal_chosen: Vec::with_capacity(t_max),
        optimal_prob: Vec::with_capacity(t_max),
        final_policy: Vec::new(),
    };
    for _ in 0..t_max {
        record.optimal_prob.push(learner.policy().prob(best));
        let out = learner.step(&env, &mut rng)?;
        let a = out.chosen_arm;
        record.chosen_arm.push(a);
        record.regret.push(q[a] - q[best]);
        record.optimal_chosen.push(a == best);
    }
    record.final_policy = learner.policy().probs().to_vec();
    Ok(record)
}

/// All runs, in run-index order. `threads = None` uses rayon's global pool.
pub fn run_all(config: &ExperimentConfig, threads: Option<usize>) -> Result<Vec<Result<RunRecord>>> {
    config.validate()?;
    let work = || (0..config.runs).into_par_iter().map(|i| run_one(config, i)).collect::<Vec<_>>();
    match threads {
        None => Ok(work()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::InvalidConfig(e.to_string()))?;
            Ok(pool.install(work))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateCurves {
    pub runs: usize,
    pub mean_regret: Vec<f64>,
    pub regret_half_width: Vec<f64>,
    pub mean_opt_frequency: Vec<f64>,
    pub opt_half_width: Vec<f64>,
}

/// Mean and `1.96·s/√M` (Bessel `s`) of each column; summed in input order.
fn mean_and_half_width(values: impl Iterator<Item = f64> + Clone, m: usize) -> (f64, f64) {
    let n = m as f64;
    let mean = values.clone().sum::<f64>() / n;
    if m < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.map(|x| (x - mean) * (x - mean)).sum();
    let s = (ss / (n - 1.0)).sqrt();
    (mean, Z_95 * s / n.sqrt())
}

/// Per-step means and confidence half-widths across runs.
pub fn aggregate(records: &[RunRecord]) -> Result<AggregateCurves> {
    let first = records.first().ok_or(Error::EmptyAggregate)?;
    let steps = first.regret.len();
    if records.iter().any(|r| r.regret.len() != steps || r.optimal_chosen.len() != steps) {
        return Err(Error::InvalidConfig("runs have different lengths".into()));
    }
    let m = records.len();
    let mut curves = AggregateCurves {
        runs: m,
        mean_regret: Vec::with_capacity(steps),
        regret_half_width: Vec::with_capacity(steps),
        mean_opt_frequency: Vec::with_capacity(steps),
        opt_half_width: Vec::with_capacity(steps),
    };
    for t in 0..steps {
        let (mean, hw) = mean_and_half_width(records.iter().map(|r| r.regret[t]), m);
        curves.mean_regret.push(mean);
        curves.regret_half_width.push(hw);
        let (freq, hw) = mean_and_half_width(records.iter().map(|r| f64::from(u8::from(r.optimal_chosen[t]))), m);
        curves.mean_opt_frequency.push(freq);
        curves.opt_half_width.push(hw);
    }
    Ok(curves)
}

/// 17 significant digits.
fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

impl AggregateCurves {
    pub fn steps(&self) -> usize {
        self.mean_regret.len()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.steps() * 180);
        out.push_str(CSV_HEADER);
        out.push('\n');
        for i in 0..self.steps() {
            let (r, rh) = (self.mean_regret[i], self.regret_half_width[i]);
            let (f, fh) = (self.mean_opt_frequency[i], self.opt_half_width[i]);
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                i + 1,
                fmt_float(r),
                fmt_float(r - rh),
                fmt_float(r + rh),
                fmt_float(f),
                fmt_float(f - fh),
                fmt_float(f + fh),
            );
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut file = std::fs::File::create(path)?;
        file.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }

    pub fn final_summary(&self) -> Summary {
        let last = self.steps() - 1;
        Summary {
            t: self.steps(),
            mean_regret: self.mean_regret[last],
            regret_ci: self.regret_half_width[last],
            opt_freq: self.mean_opt_frequency[last],
            opt_ci: self.opt_half_width[last],
        }
    }
}

/// Last-step values of the curves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub t: usize,
    pub mean_regret: f64,
    pub regret_ci: f64,
    pub opt_freq: f64,
    pub opt_ci: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub config: ExperimentConfig,
    pub records: Vec<RunRecord>,
    pub failures: Vec<RunFailure>,
    pub curves: AggregateCurves,
}

#[derive(Serialize)]
struct Metadata<'a> {
    name: &'a str,
    completed_runs: usize,
    failed_runs: usize,
    config: &'a ExperimentConfig,
    failures: &'a [RunFailure],
}

impl ExperimentOutcome {
    /// Metadata sidecar: full config, seed and failure count.
    pub fn metadata_toml(&self, name: &str) -> Result<String> {
        let meta = Metadata {
            name,
            completed_runs: self.records.len(),
            failed_runs: self.failures.len(),
            config: &self.config,
            failures: &self.failures,
        };
        toml::to_string(&meta).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Writes `<dir>/<name>.csv` and `<dir>/<name>.meta.toml`.
    pub fn write(&self, dir: impl AsRef<Path>, name: &str) -> Result<(PathBuf, PathBuf)> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let csv = dir.join(format!("{name}.csv"));
        let meta = dir.join(format!("{name}.meta.toml"));
        self.curves.write_csv(&csv)?;
        std::fs::write(&meta, self.metadata_toml(name)?)?;
        Ok((csv, meta))
    }
}

/// Runs every realization, sets diverged runs aside and aggregates the rest.
pub fn run_experiment(config: &ExperimentConfig, threads: Option<usize>) -> Result<ExperimentOutcome> {
    let mut records = Vec::with_capacity(config.runs);
    let mut failures = Vec::new();
    for (run_index, result) in run_all(config, threads)?.into_iter().enumerate() {
        match result {
            Ok(r) => records.push(r),
            Err(e) => failures.push(RunFailure { run_index, message: e.to_string() }),
        }
    }
    let curves = aggregate(&records)?;
    Ok(ExperimentOutcome {
        config: config.clone(),
        records,
        failures,
        curves,
    })
}

/// The three published experiment configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// Two arms, ρ = 0.5, 200 steps.
    Fig1,
    /// Ten arms, ρ = 0.05, 300 steps.
    Fig2,
    /// Random ten-arm instances, ρ = 0.1, 2000 steps.
    Fig3_4,
}

pub const DEFAULT_SEED: u64 = 1;

impl Figure {
    pub const ALL: [Figure; 3] = [Figure::Fig1, Figure::Fig2, Figure::Fig3_4];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Fig1 => "fig1",
            Self::Fig2 => "fig2",
            Self::Fig3_4 => "fig3_4",
        }
    }

    pub fn config(&self, base_seed: u64) -> ExperimentConfig {
        let (instance, rate, steps) = match self {
            Self::Fig1 => (InstanceSpec::Toy2, 0.5, 200),
            Self::Fig2 => (InstanceSpec::Toy10, 0.05, 300),
            Self::Fig3_4 => (InstanceSpec::RandomHard, 0.1, 2000),
        };
        let k = instance.k();
        ExperimentConfig {
            instance,
            learner: LearnerConfig::variance(k, LearningRate::Constant { rate }),
            steps,
            runs: 1000,
            base_seed,
        }
    }

    pub fn run(&self, base_seed: u64, threads: Option<usize>) -> Result<ExperimentOutcome> {
        run_experiment(&self.config(base_seed), threads)
    }
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown figure '{s}' (expected fig1, fig2 or fig3_4)")))
    }
}

/// Runs a figure configuration and writes its CSV and metadata into `out_dir`.
pub fn reproduce_figure(figure: Figure, base_seed: u64, threads: Option<usize>, out_dir: impl AsRef<Path>) -> Result<(ExperimentOutcome, PathBuf)> {
    let outcome = figure.run(base_seed, threads)?;
    let (csv, _) = outcome.write(out_dir, figure.name())?;
    Ok((outcome, csv))
}

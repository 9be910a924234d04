//! `mvbandit` command-line front end.
//!
//! Exit codes: 0 success, 1 verification failure or failed runs, 2 usage error.
//! Summaries go to stdout as `key=value` lines; everything else goes to stderr.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use mvbandit::experiment::{reproduce_figure, run_experiment, ExperimentOutcome, Figure, InstanceSpec, DEFAULT_SEED};
use mvbandit::rng::seeded;
use mvbandit::verify::gradcheck;
use mvbandit::{BanditInstance, ExperimentConfig, LearnerConfig, LearningRate, RiskWeights};

/// Output directory used when `--out` is not given.
const OUT_DIR_ENV: &str = "MVBANDIT_OUT_DIR";

#[derive(Parser)]
#[command(name = "mvbandit", version, about = "Risk-aware softmax policy-gradient bandit simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment and write its curves.
    Run(RunArgs),
    /// Re-run one of the published experiment configurations.
    Reproduce(ReproduceArgs),
    /// Check that the gradient estimate is unbiased and the softmax derivative is right.
    Gradcheck(GradcheckArgs),
    /// Print instance moments and optimal arm; optionally write an instance file.
    Instances(InstancesArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
enum NamedInstance {
    Toy2,
    Toy10,
    #[value(name = "random_hard")]
    RandomHard,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Algo {
    Variance,
    Risk,
}

/// Flags of `run`. A `--config` TOML file may set the same keys (snake_case);
/// flags given on the command line win.
#[derive(Args, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunArgs {
    /// TOML file with the same keys as the flags.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    instance: Option<NamedInstance>,
    /// Explicit instance file (see `instances --emit`).
    #[arg(long, conflicts_with = "instance")]
    instance_file: Option<PathBuf>,
    #[arg(long, value_enum)]
    algo: Option<Algo>,
    #[arg(long, allow_negative_numbers = true)]
    lambda_sigma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    lambda_mu: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    /// Constant learning rate, or the initial rate when `--decay` is set.
    #[arg(long)]
    rho: Option<f64>,
    /// Exponent `α` of `ρ_t = ρ/t^α`.
    #[arg(long)]
    decay: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output file stem.
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct ReproduceArgs {
    #[arg(value_parser = parse_figure)]
    figure: Figure,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Override the realization count (1000 by default).
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Monte Carlo samples per frozen-policy case (at least 10000).
    #[arg(long, default_value_t = 100_000, value_parser = parse_samples)]
    samples: usize,
    #[arg(long, value_enum, default_value = "toy2")]
    instance: GradcheckInstance,
    /// Negate every gradient estimate; the check must then fail.
    #[arg(long, hide = true)]
    corrupt_sign: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum GradcheckInstance {
    Toy2,
    Toy10,
}

#[derive(Args)]
struct InstancesArgs {
    #[arg(long, value_enum)]
    name: Option<NamedInstance>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    lambda_sigma: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    lambda_mu: f64,
    /// Write the instance as a TOML file usable with `run --instance-file`.
    #[arg(long, requires = "name")]
    emit: Option<PathBuf>,
}

fn parse_figure(s: &str) -> Result<Figure, String> {
    s.parse::<Figure>().map_err(|e| e.to_string())
}

fn parse_samples(s: &str) -> Result<usize, String> {
    let n: usize = s.parse().map_err(|e| format!("{e}"))?;
    if n < 10_000 {
        return Err(format!("need at least 10000 samples, got {n}"));
    }
    Ok(n)
}

enum Failure {
    Usage(String),
    Verification(String),
}

impl From<mvbandit::Error> for Failure {
    fn from(e: mvbandit::Error) -> Self {
        match e {
            mvbandit::Error::Io(_) | mvbandit::Error::Divergence { .. } => Failure::Verification(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Reproduce(args) => cmd_reproduce(args),
        Command::Gradcheck(args) => cmd_gradcheck(args),
        Command::Instances(args) => cmd_instances(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn out_dir(flag: Option<PathBuf>, file: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .or(file)
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn load_run_file(path: &Path) -> Result<RunArgs, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn build_run_config(args: &RunArgs, file: &RunArgs) -> Result<ExperimentConfig, Failure> {
    let usage = |m: &str| Failure::Usage(m.to_string());

    let instance = match (args.instance_file.as_ref().or(file.instance_file.as_ref()), args.instance.or(file.instance)) {
        (Some(path), _) if args.instance.is_none() => InstanceSpec::Explicit(BanditInstance::load(path)?),
        (_, Some(NamedInstance::Toy2)) => InstanceSpec::Toy2,
        (_, Some(NamedInstance::Toy10)) => InstanceSpec::Toy10,
        (_, Some(NamedInstance::RandomHard)) => InstanceSpec::RandomHard,
        _ => return Err(usage("an instance is required (--instance or --instance-file)")),
    };
    let k = instance.k();

    let algo = args.algo.or(file.algo).unwrap_or(Algo::Variance);
    let rho = args.rho.or(file.rho).ok_or_else(|| usage("--rho is required"))?;
    let schedule = match args.decay.or(file.decay) {
        Some(alpha) => LearningRate::power_decay(rho, alpha)?,
        None => LearningRate::constant(rho)?,
    };
    let batch = args.batch.or(file.batch);
    let lambda_sigma = args.lambda_sigma.or(file.lambda_sigma);
    let lambda_mu = args.lambda_mu.or(file.lambda_mu);

    let learner = match algo {
        Algo::Variance => {
            if batch.is_some_and(|b| b != 2) {
                return Err(usage("variance mode requires batch=2"));
            }
            if lambda_sigma.is_some_and(|l| l != 1.0) || lambda_mu.is_some_and(|l| l != 0.0) {
                return Err(usage("variance mode requires lambda_sigma=1 and lambda_mu=0"));
            }
            LearnerConfig::variance(k, schedule)
        }
        Algo::Risk => {
            let weights = RiskWeights::new(lambda_sigma.unwrap_or(1.0), lambda_mu.unwrap_or(0.0))?;
            LearnerConfig::risk(k, weights, batch.unwrap_or(2), schedule)?
        }
    };

    let config = ExperimentConfig {
        instance,
        learner,
        steps: args.steps.or(file.steps).ok_or_else(|| usage("--steps is required"))?,
        runs: args.runs.or(file.runs).ok_or_else(|| usage("--runs is required"))?,
        base_seed: args.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
    };
    config.validate()?;
    Ok(config)
}

fn print_summary(outcome: &ExperimentOutcome, csv: &Path) {
    let s = outcome.curves.final_summary();
    println!("t={}", s.t);
    println!("mean_regret={}", s.mean_regret);
    println!("regret_ci={}", s.regret_ci);
    println!("opt_freq={}", s.opt_freq);
    println!("opt_ci={}", s.opt_ci);
    println!("completed_runs={}", outcome.records.len());
    println!("failed_runs={}", outcome.failures.len());
    println!("csv={}", csv.display());
}

fn report_failures(outcome: &ExperimentOutcome) -> CmdResult {
    if outcome.failures.is_empty() {
        return Ok(());
    }
    for f in &outcome.failures {
        eprintln!("run {} failed: {}", f.run_index, f.message);
    }
    Err(Failure::Verification(format!("{} run(s) failed", outcome.failures.len())))
}

fn cmd_run(args: RunArgs) -> CmdResult {
    let file = match &args.config {
        Some(path) => load_run_file(path)?,
        None => RunArgs::default(),
    };
    let config = build_run_config(&args, &file)?;
    let dir = out_dir(args.out.clone(), file.out.clone());
    let name = args.name.clone().or(file.name.clone()).unwrap_or_else(|| "run".to_string());
    let threads = args.threads.or(file.threads);

    eprintln!("running {} realizations of {} steps", config.runs, config.steps);
    let outcome = match run_experiment(&config, threads) {
        Ok(o) => o,
        Err(mvbandit::Error::EmptyAggregate) => {
            return Err(Failure::Verification("every run failed".into()));
        }
        Err(e) => return Err(e.into()),
    };
    let (csv, _) = outcome.write(&dir, &name)?;
    print_summary(&outcome, &csv);
    report_failures(&outcome)
}

fn cmd_reproduce(args: ReproduceArgs) -> CmdResult {
    let dir = out_dir(args.out, None);
    eprintln!("reproducing {}", args.figure.name());
    let (outcome, csv) = match args.runs {
        None => reproduce_figure(args.figure, args.seed, args.threads, &dir)?,
        Some(runs) => {
            let config = ExperimentConfig { runs, ..args.figure.config(args.seed) };
            let outcome = run_experiment(&config, args.threads)?;
            let (csv, _) = outcome.write(&dir, args.figure.name())?;
            (outcome, csv)
        }
    };
    println!("figure={}", args.figure.name());
    print_summary(&outcome, &csv);
    report_failures(&outcome)
}

fn cmd_gradcheck(args: GradcheckArgs) -> CmdResult {
    let env = match args.instance {
        GradcheckInstance::Toy2 => BanditInstance::toy2(),
        GradcheckInstance::Toy10 => BanditInstance::toy10(),
    };
    let report = gradcheck(&env, args.samples, args.corrupt_sign, &mut seeded(args.seed))?;
    println!("cases={}", report.cases);
    println!("samples={}", args.samples);
    println!("max_deviation_se={}", report.max_deviation_se);
    println!("mean_std_error={}", report.mean_std_error);
    println!("jacobian_max_abs_dev={}", report.jacobian_max_abs);
    println!("status={}", if report.passes() { "pass" } else { "fail" });
    if report.passes() {
        Ok(())
    } else {
        Err(Failure::Verification("gradient check failed".into()))
    }
}

fn cmd_instances(args: InstancesArgs) -> CmdResult {
    let weights = RiskWeights::new(args.lambda_sigma, args.lambda_mu)?;
    let names = match args.name {
        Some(n) => vec![n],
        None => vec![NamedInstance::Toy2, NamedInstance::Toy10, NamedInstance::RandomHard],
    };
    for name in names {
        let (label, env) = match name {
            NamedInstance::Toy2 => ("toy2", BanditInstance::toy2()),
            NamedInstance::Toy10 => ("toy10", BanditInstance::toy10()),
            NamedInstance::RandomHard => ("random_hard", BanditInstance::random_hard(&mut seeded(args.seed))),
        };
        println!("name={label}");
        println!("k={}", env.k());
        println!("means={}", join(&env.true_means()));
        println!("variances={}", join(&env.true_variances()));
        println!("optimal_arm={}", env.optimal_arm(&weights));
        if let Some(path) = &args.emit {
            env.save(path)?;
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

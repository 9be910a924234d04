use mvbandit::experiment::{run_experiment, ExperimentConfig, Figure, InstanceSpec};
use mvbandit::rng::{run_stream, seeded};
use mvbandit::verify::check_unbiasedness;
use mvbandit::{objective_value, BanditInstance, Learner, LearnerConfig, LearningRate, RiskWeights};
use rand::Rng;

#[test]
fn unbiased_for_any_baseline_constant() {
    let mut rng = seeded(101);
    for env in [BanditInstance::toy2(), BanditInstance::toy10()] {
        let h: Vec<f64> = (0..env.k()).map(|_| rng.random_range(-1.5..1.5)).collect();
        for w in [RiskWeights::VARIANCE, RiskWeights::new(1.0, -1.0).unwrap()] {
            for baseline in [-10.0, 0.0, 10.0] {
                let r = check_unbiasedness(&env, &h, &w, 2, baseline, 200_000, false, &mut rng).unwrap();
                assert!(r.passes(), "k={} baseline={baseline}: {:.2} SE", env.k(), r.max_deviation_se());
            }
        }
    }
}

#[test]
fn unbiased_with_larger_batches() {
    let env = BanditInstance::toy10();
    let w = RiskWeights::new(0.5, -2.0).unwrap();
    let h: Vec<f64> = (0..10).map(|a| 0.2 * a as f64 - 1.0).collect();
    let r = check_unbiasedness(&env, &h, &w, 5, 1.0, 200_000, false, &mut seeded(7)).unwrap();
    assert!(r.passes(), "{r:?}");
}

#[test]
fn gradient_estimates_sum_to_zero_along_runs() {
    let env = BanditInstance::toy10();
    for run in 0..20 {
        let mut learner = Learner::new(LearnerConfig::variance(10, LearningRate::constant(0.05).unwrap())).unwrap();
        let mut rng = run_stream(9, run);
        for _ in 0..300 {
            let out = learner.step(&env, &mut rng).unwrap();
            assert!(out.gradient.iter().sum::<f64>().abs() <= 1e-12);
        }
    }
}

/// Run-averaged objective on toy2 at ρ = 0.05 does not rise after step 20
/// beyond what the confidence bands allow.
#[test]
fn objective_descends_on_average() {
    let env = BanditInstance::toy2();
    let (runs, steps) = (1000, 200);
    let mut traces = vec![vec![0.0; steps]; runs];
    for (run, trace) in traces.iter_mut().enumerate() {
        let mut learner = Learner::new(LearnerConfig::variance(2, LearningRate::constant(0.05).unwrap())).unwrap();
        let mut rng = run_stream(13, run as u64);
        for slot in trace.iter_mut() {
            learner.step(&env, &mut rng).unwrap();
            *slot = objective_value(&learner.policy(), &env, &RiskWeights::VARIANCE);
        }
    }
    let n = runs as f64;
    let stats: Vec<(f64, f64)> = (0..steps)
        .map(|t| {
            let m = traces.iter().map(|tr| tr[t]).sum::<f64>() / n;
            let s = (traces.iter().map(|tr| (tr[t] - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            (m, 1.96 * s / n.sqrt())
        })
        .collect();
    for s in 20..steps {
        for t in s + 1..steps {
            assert!(stats[t].0 - stats[t].1 <= stats[s].0 + stats[s].1, "objective rose from step {s} to {t}");
        }
    }
    assert!(stats[steps - 1].0 < stats[20].0);
}

#[test]
fn figure_runs_respect_curve_invariants() {
    for figure in Figure::ALL {
        let config = ExperimentConfig { runs: 100, ..figure.config(3) };
        let out = run_experiment(&config, None).unwrap();
        assert!(out.failures.is_empty());
        for rec in &out.records {
            assert!(rec.regret.iter().all(|&r| r >= 0.0));
        }
        let c = &out.curves;
        assert!(c.mean_opt_frequency.iter().all(|f| (0.0..=1.0).contains(f)));
        assert!(c.regret_half_width.iter().chain(&c.opt_half_width).all(|&h| h >= 0.0));
    }
}

#[test]
fn fig1_regret_decreases_after_step_ten() {
    let out = Figure::Fig1.run(1, None).unwrap();
    let c = &out.curves;
    for s in 10..c.steps() {
        for t in s + 1..c.steps() {
            assert!(
                c.mean_regret[t] - c.regret_half_width[t] <= c.mean_regret[s] + c.regret_half_width[s],
                "regret rose from step {s} to {t}"
            );
        }
    }
}

#[test]
fn toy2_learner_concentrates_on_low_variance_arm() {
    let env = BanditInstance::toy2();
    let mut hits = 0;
    for run in 0..1000 {
        let mut learner = Learner::new(LearnerConfig::variance(2, LearningRate::constant(0.5).unwrap())).unwrap();
        let mut rng = run_stream(21, run);
        for _ in 0..200 {
            learner.step(&env, &mut rng).unwrap();
        }
        if learner.policy().prob(0) > 0.9 {
            hits += 1;
        }
    }
    assert!(hits >= 950, "{hits}/1000");
}

#[test]
fn explicit_instance_matches_named_instance() {
    let named = ExperimentConfig {
        instance: InstanceSpec::Toy10,
        learner: LearnerConfig::variance(10, LearningRate::constant(0.05).unwrap()),
        steps: 50,
        runs: 30,
        base_seed: 4,
    };
    let explicit = ExperimentConfig { instance: InstanceSpec::Explicit(BanditInstance::toy10()), ..named.clone() };
    let a = run_experiment(&named, Some(2)).unwrap();
    let b = run_experiment(&explicit, Some(2)).unwrap();
    assert_eq!(a.curves, b.curves);
}

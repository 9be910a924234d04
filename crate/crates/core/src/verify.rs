//! Monte Carlo check that the gradient estimate is unbiased, and a
//! finite-difference check of the softmax derivative.

use rand::Rng;

use crate::env::BanditInstance;
use crate::error::Result;
use crate::estimators::{batch_stats, composite_reward, RiskWeights};
use crate::learner::{exact_gradient, gradient_estimate};
use crate::policy::{jacobian_row, sample_arm, softmax, Preferences};

pub const SE_THRESHOLD: f64 = 4.0;
pub const JACOBIAN_STEP: f64 = 1e-6;
pub const JACOBIAN_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct UnbiasednessReport {
    pub exact: Vec<f64>,
    pub empirical: Vec<f64>,
    pub std_error: Vec<f64>,
}

impl UnbiasednessReport {
    /// Largest componentwise `|empirical − exact| / SE`.
    pub fn max_deviation_se(&self) -> f64 {
        self.exact
            .iter()
            .zip(&self.empirical)
            .zip(&self.std_error)
            .map(|((e, m), se)| {
                let diff = (m - e).abs();
                if *se > 0.0 {
                    diff / se
                } else if diff <= 1e-12 {
                    0.0
                } else {
                    f64::INFINITY
                }
            })
            .fold(0.0, f64::max)
    }

    pub fn passes(&self) -> bool {
        self.max_deviation_se() <= SE_THRESHOLD
    }
}

/// Averages `samples` independent single-step gradient estimates at frozen
/// preferences `h`, with the baseline pinned at `baseline`.
/// `flip_sign` negates every estimate (negative control).
pub fn check_unbiasedness<R: Rng + ?Sized>(
    env: &BanditInstance,
    h: &[f64],
    weights: &RiskWeights,
    batch: usize,
    baseline: f64,
    samples: usize,
    flip_sign: bool,
    rng: &mut R,
) -> Result<UnbiasednessReport> {
    let p = Preferences::new(h.to_vec())?.policy();
    let k = env.k();
    let mut mean = vec![0.0; k];
    let mut m2 = vec![0.0; k];
    let mut rewards = vec![0.0; batch];
    for n in 1..=samples {
        let arm = sample_arm(&p, rng);
        rewards.iter_mut().for_each(|r| *r = env.sample(arm, rng));
        let composite = composite_reward(&batch_stats(&rewards)?, weights);
        let g = gradient_estimate(composite, baseline, arm, &p);
        for a in 0..k {
            let x = if flip_sign { -g[a] } else { g[a] };
            let delta = x - mean[a];
            mean[a] += delta / n as f64;
            m2[a] += delta * (x - mean[a]);
        }
    }
    let n = samples as f64;
    let std_error = m2.iter().map(|s| (s / (n - 1.0)).sqrt() / n.sqrt()).collect();
    Ok(UnbiasednessReport {
        exact: exact_gradient(&p, env, weights),
        empirical: mean,
        std_error,
    })
}

/// Max absolute gap between `jacobian_row` and central differences of softmax
/// over `count` preference vectors drawn uniformly from `[-3, 3]^k`.
pub fn jacobian_max_deviation<R: Rng + ?Sized>(k: usize, count: usize, rng: &mut R) -> Result<f64> {
    let mut worst = 0.0f64;
    for _ in 0..count {
        let h: Vec<f64> = (0..k).map(|_| rng.random_range(-3.0..3.0)).collect();
        let p = softmax(&h)?;
        for b in 0..k {
            let mut up = h.clone();
            let mut down = h.clone();
            up[b] += JACOBIAN_STEP;
            down[b] -= JACOBIAN_STEP;
            let (pu, pd) = (softmax(&up)?, softmax(&down)?);
            for a in 0..k {
                let fd = (pu.prob(a) - pd.prob(a)) / (2.0 * JACOBIAN_STEP);
                worst = worst.max((jacobian_row(&p, a)[b] - fd).abs());
            }
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub cases: usize,
    pub max_deviation_se: f64,
    pub mean_std_error: f64,
    pub jacobian_max_abs: f64,
}

impl GradcheckReport {
    pub fn passes(&self) -> bool {
        self.max_deviation_se <= SE_THRESHOLD && self.jacobian_max_abs <= JACOBIAN_TOLERANCE
    }
}

/// Five random frozen preference vectors × weights {(1,0), (1,−1)} × baselines
/// {−10, 0, 10}, plus the Jacobian check for `k` of `env` and for `k = 2, 10`.
pub fn gradcheck<R: Rng + ?Sized>(env: &BanditInstance, samples: usize, flip_sign: bool, rng: &mut R) -> Result<GradcheckReport> {
    let weights = [RiskWeights::VARIANCE, RiskWeights::new(1.0, -1.0)?];
    let mut max_dev = 0.0f64;
    let mut se_sum = 0.0;
    let mut se_count = 0usize;
    let mut cases = 0;
    for _ in 0..5 {
        let h: Vec<f64> = (0..env.k()).map(|_| rng.random_range(-2.0..2.0)).collect();
        for w in &weights {
            for baseline in [-10.0, 0.0, 10.0] {
                let report = check_unbiasedness(env, &h, w, 2, baseline, samples, flip_sign, rng)?;
                max_dev = max_dev.max(report.max_deviation_se());
                se_sum += report.std_error.iter().sum::<f64>();
                se_count += report.std_error.len();
                cases += 1;
            }
        }
    }
    let mut jac = 0.0f64;
    for k in [2, 10, env.k()] {
        jac = jac.max(jacobian_max_deviation(k, 100, rng)?);
    }
    Ok(GradcheckReport {
        cases,
        max_deviation_se: max_dev,
        mean_std_error: se_sum / se_count as f64,
        jacobian_max_abs: jac,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn toy2_estimate_is_unbiased() {
        let env = BanditInstance::toy2();
        let r = check_unbiasedness(&env, &[0.3, -0.4], &RiskWeights::VARIANCE, 2, 0.0, 50_000, false, &mut seeded(1)).unwrap();
        assert!(r.passes(), "{r:?}");
    }

    #[test]
    fn flipped_sign_is_caught() {
        let env = BanditInstance::toy2();
        let r = check_unbiasedness(&env, &[0.0, 0.0], &RiskWeights::VARIANCE, 2, 0.0, 50_000, true, &mut seeded(1)).unwrap();
        assert!(!r.passes());
        assert!(r.max_deviation_se() > 20.0);
    }

    #[test]
    fn zero_se_components() {
        let r = UnbiasednessReport { exact: vec![0.0, 1.0], empirical: vec![0.0, 1.0], std_error: vec![0.0, 0.0] };
        assert_eq!(r.max_deviation_se(), 0.0);
        let r = UnbiasednessReport { exact: vec![0.0], empirical: vec![0.5], std_error: vec![0.0] };
        assert!(r.max_deviation_se().is_infinite());
    }

    #[test]
    fn jacobian_check_within_tolerance() {
        let d = jacobian_max_deviation(10, 20, &mut seeded(2)).unwrap();
        assert!(d <= JACOBIAN_TOLERANCE, "{d}");
    }

    #[test]
    fn standard_error_scales_with_sample_count() {
        let env = BanditInstance::toy2();
        let small = gradcheck(&env, 10_000, false, &mut seeded(3)).unwrap();
        let large = gradcheck(&env, 100_000, false, &mut seeded(3)).unwrap();
        let ratio = small.mean_std_error / large.mean_std_error;
        assert!((ratio - 10f64.sqrt()).abs() < 0.3, "{ratio}");
        assert!(small.passes() && large.passes(), "{small:?} {large:?}");
    }
}

//! Python bindings for the `mvbandit` crate.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use mvbandit::experiment::{run_experiment, ExperimentConfig, Figure};
use mvbandit::rng::{seeded, Stream};
use mvbandit::{verify, LearnerConfig, LearningRate, Policy, RiskWeights};

fn py_err(e: mvbandit::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn weights(lambda_sigma: f64, lambda_mu: f64) -> PyResult<RiskWeights> {
    RiskWeights::new(lambda_sigma, lambda_mu).map_err(py_err)
}

fn policy(p: Vec<f64>) -> PyResult<Policy> {
    Policy::from_probs(p).map_err(py_err)
}

#[pyclass(name = "BanditInstance", module = "mvbandit", from_py_object)]
#[derive(Clone)]
struct PyBanditInstance {
    inner: mvbandit::BanditInstance,
}

#[pymethods]
impl PyBanditInstance {
    #[staticmethod]
    fn toy2() -> Self {
        Self { inner: mvbandit::BanditInstance::toy2() }
    }

    #[staticmethod]
    fn toy10() -> Self {
        Self { inner: mvbandit::BanditInstance::toy10() }
    }

    #[staticmethod]
    fn random_hard(seed: u64) -> Self {
        Self { inner: mvbandit::BanditInstance::random_hard(&mut seeded(seed)) }
    }

    /// Gaussian arms from parallel lists of means and standard deviations.
    #[staticmethod]
    fn gaussian(means: Vec<f64>, std_devs: Vec<f64>) -> PyResult<Self> {
        if means.len() != std_devs.len() {
            return Err(PyValueError::new_err("means and std_devs differ in length"));
        }
        let arms = means
            .into_iter()
            .zip(std_devs)
            .map(|(m, s)| mvbandit::RewardDistribution::gaussian(m, s))
            .collect::<Result<Vec<_>, _>>()
            .map_err(py_err)?;
        Ok(Self { inner: mvbandit::BanditInstance::new(arms).map_err(py_err)? })
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(Self { inner: mvbandit::BanditInstance::from_toml(text).map_err(py_err)? })
    }

    fn to_toml(&self) -> PyResult<String> {
        self.inner.to_toml().map_err(py_err)
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k()
    }

    fn true_means(&self) -> Vec<f64> {
        self.inner.true_means()
    }

    fn true_variances(&self) -> Vec<f64> {
        self.inner.true_variances()
    }

    #[pyo3(signature = (lambda_sigma=1.0, lambda_mu=0.0))]
    fn optimal_arm(&self, lambda_sigma: f64, lambda_mu: f64) -> PyResult<usize> {
        Ok(self.inner.optimal_arm(&weights(lambda_sigma, lambda_mu)?))
    }

    fn __repr__(&self) -> String {
        format!("BanditInstance(k={})", self.inner.k())
    }
}

/// A learner with its own seeded random stream.
#[pyclass(name = "Learner", module = "mvbandit")]
struct PyLearner {
    inner: mvbandit::Learner,
    rng: Stream,
}

#[pymethods]
impl PyLearner {
    #[new]
    #[pyo3(signature = (k, rho, algo="variance", lambda_sigma=1.0, lambda_mu=0.0, batch=2, decay=None, seed=0))]
    #[allow(clippy::too_many_arguments)]
    fn new(k: usize, rho: f64, algo: &str, lambda_sigma: f64, lambda_mu: f64, batch: usize, decay: Option<f64>, seed: u64) -> PyResult<Self> {
        let schedule = match decay {
            Some(alpha) => LearningRate::power_decay(rho, alpha),
            None => LearningRate::constant(rho),
        }
        .map_err(py_err)?;
        let config = match algo {
            "variance" => {
                let cfg = LearnerConfig { batch, weights: weights(lambda_sigma, lambda_mu)?, ..LearnerConfig::variance(k, schedule) };
                cfg.validate().map_err(py_err)?;
                cfg
            }
            "risk" => LearnerConfig::risk(k, weights(lambda_sigma, lambda_mu)?, batch, schedule).map_err(py_err)?,
            other => return Err(PyValueError::new_err(format!("unknown algo '{other}'"))),
        };
        Ok(Self {
            inner: mvbandit::Learner::new(config).map_err(py_err)?,
            rng: seeded(seed),
        })
    }

    /// One learning step; returns the chosen arm, composite reward, gradient estimate and raw draws.
    fn step<'py>(&mut self, py: Python<'py>, instance: &PyBanditInstance) -> PyResult<Bound<'py, PyDict>> {
        let out = self.inner.step(&instance.inner, &mut self.rng).map_err(py_err)?;
        let d = PyDict::new(py);
        d.set_item("chosen_arm", out.chosen_arm)?;
        d.set_item("composite_reward", out.composite_reward)?;
        d.set_item("gradient", out.gradient)?;
        d.set_item("rewards", out.rewards)?;
        Ok(d)
    }

    #[getter]
    fn preferences(&self) -> Vec<f64> {
        self.inner.preferences().to_vec()
    }

    #[getter]
    fn policy(&self) -> Vec<f64> {
        self.inner.policy().probs().to_vec()
    }

    #[getter]
    fn baseline(&self) -> f64 {
        self.inner.state().baseline.value()
    }

    #[getter]
    fn t(&self) -> u64 {
        self.inner.state().t
    }
}

#[pyfunction]
fn softmax(h: Vec<f64>) -> PyResult<Vec<f64>> {
    Ok(mvbandit::softmax(&h).map_err(py_err)?.probs().to_vec())
}

#[pyfunction]
fn jacobian_row(p: Vec<f64>, a: usize) -> PyResult<Vec<f64>> {
    let p = policy(p)?;
    if a >= p.k() {
        return Err(PyValueError::new_err("arm index out of range"));
    }
    Ok(mvbandit::jacobian_row(&p, a))
}

#[pyfunction]
fn paired_variance_reward(r: f64, r_prime: f64) -> f64 {
    mvbandit::paired_variance_reward(r, r_prime)
}

/// `(mean, Bessel variance)` of a batch of at least two rewards.
#[pyfunction]
fn batch_stats(rewards: Vec<f64>) -> PyResult<(f64, f64)> {
    let s = mvbandit::batch_stats(&rewards).map_err(py_err)?;
    Ok((s.mean, s.variance))
}

#[pyfunction]
fn composite_reward(mean: f64, variance: f64, lambda_sigma: f64, lambda_mu: f64) -> PyResult<f64> {
    let stats = mvbandit::BatchStats { mean, variance };
    Ok(mvbandit::composite_reward(&stats, &weights(lambda_sigma, lambda_mu)?))
}

#[pyfunction]
#[pyo3(signature = (p, instance, lambda_sigma=1.0, lambda_mu=0.0))]
fn exact_gradient(p: Vec<f64>, instance: &PyBanditInstance, lambda_sigma: f64, lambda_mu: f64) -> PyResult<Vec<f64>> {
    Ok(mvbandit::exact_gradient(&policy(p)?, &instance.inner, &weights(lambda_sigma, lambda_mu)?))
}

#[pyfunction]
#[pyo3(signature = (p, instance, lambda_sigma=1.0, lambda_mu=0.0))]
fn objective_value(p: Vec<f64>, instance: &PyBanditInstance, lambda_sigma: f64, lambda_mu: f64) -> PyResult<f64> {
    Ok(mvbandit::objective_value(&policy(p)?, &instance.inner, &weights(lambda_sigma, lambda_mu)?))
}

/// Runs a published figure configuration and returns its curves and CSV text.
#[pyfunction]
#[pyo3(signature = (figure, seed=1, runs=None, threads=None))]
fn reproduce<'py>(py: Python<'py>, figure: &str, seed: u64, runs: Option<usize>, threads: Option<usize>) -> PyResult<Bound<'py, PyDict>> {
    let figure: Figure = figure.parse().map_err(py_err)?;
    let base = figure.config(seed);
    let config = ExperimentConfig { runs: runs.unwrap_or(base.runs), ..base };
    let outcome = py.detach(|| run_experiment(&config, threads)).map_err(py_err)?;
    let c = &outcome.curves;
    let d = PyDict::new(py);
    d.set_item("mean_regret", c.mean_regret.clone())?;
    d.set_item("regret_half_width", c.regret_half_width.clone())?;
    d.set_item("opt_freq", c.mean_opt_frequency.clone())?;
    d.set_item("opt_half_width", c.opt_half_width.clone())?;
    d.set_item("failed_runs", outcome.failures.len())?;
    d.set_item("csv", c.to_csv())?;
    Ok(d)
}

/// Largest deviation (in standard errors) between the averaged gradient
/// estimate and the exact gradient at frozen preferences `h`.
#[pyfunction]
#[pyo3(signature = (instance, h, samples=100_000, lambda_sigma=1.0, lambda_mu=0.0, batch=2, baseline=0.0, seed=1))]
#[allow(clippy::too_many_arguments)]
fn unbiasedness_deviation(
    py: Python<'_>,
    instance: &PyBanditInstance,
    h: Vec<f64>,
    samples: usize,
    lambda_sigma: f64,
    lambda_mu: f64,
    batch: usize,
    baseline: f64,
    seed: u64,
) -> PyResult<f64> {
    if h.len() != instance.inner.k() {
        return Err(PyValueError::new_err("preference length does not match the instance"));
    }
    let w = weights(lambda_sigma, lambda_mu)?;
    let env = instance.inner.clone();
    let report = py
        .detach(move || verify::check_unbiasedness(&env, &h, &w, batch, baseline, samples, false, &mut seeded(seed)))
        .map_err(py_err)?;
    Ok(report.max_deviation_se())
}

#[pymodule]
#[pyo3(name = "mvbandit")]
fn mvbandit_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyBanditInstance>()?;
    m.add_class::<PyLearner>()?;
    m.add_function(wrap_pyfunction!(softmax, m)?)?;
    m.add_function(wrap_pyfunction!(jacobian_row, m)?)?;
    m.add_function(wrap_pyfunction!(paired_variance_reward, m)?)?;
    m.add_function(wrap_pyfunction!(batch_stats, m)?)?;
    m.add_function(wrap_pyfunction!(composite_reward, m)?)?;
    m.add_function(wrap_pyfunction!(exact_gradient, m)?)?;
    m.add_function(wrap_pyfunction!(objective_value, m)?)?;
    m.add_function(wrap_pyfunction!(reproduce, m)?)?;
    m.add_function(wrap_pyfunction!(unbiasedness_deviation, m)?)?;
    Ok(())
}

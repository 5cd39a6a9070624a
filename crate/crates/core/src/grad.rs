//! Gradient machinery: exact parameter-shift gradients, canonical and
//! antithetic evolution-strategy estimators, a finite-difference
//! oracle, and the circuit-execution counter that backs the cost
//! accounting (GRAD `2p`, LL `2pT`, LLES `2(4 + 3 ln p)T`).

use std::f64::consts::FRAC_PI_2;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Counts circuit executions. `total` is incremented once per circuit
/// evaluation; `gradient` tallies the subset spent inside gradient
/// estimators, so the headline cost figures are assertable exactly.
///
/// Increments are atomic; concurrent evaluations may share one counter.
#[derive(Debug, Default)]
pub struct ExecutionCounter {
    total: AtomicU64,
    gradient: AtomicU64,
}

impl ExecutionCounter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Charge one circuit execution.
    pub fn record_execution(&self) {
        self.total.fetch_add(1, Ordering::Relaxed);
    }

    fn add_gradient_executions(&self, n: u64) {
        self.gradient.fetch_add(n, Ordering::Relaxed);
    }

    pub fn total(&self) -> u64 {
        self.total.load(Ordering::Relaxed)
    }

    /// Executions charged by gradient estimators only.
    pub fn gradient_executions(&self) -> u64 {
        self.gradient.load(Ordering::Relaxed)
    }

    /// Reset both tallies; intended between epochs or runs.
    pub fn reset(&self) {
        self.total.store(0, Ordering::Relaxed);
        self.gradient.store(0, Ordering::Relaxed);
    }
}

/// A deterministic cost function of a length-`p` parameter vector.
///
/// The closure is responsible for charging the counter for every
/// circuit it executes (classical stand-in objectives charge nothing).
/// Estimators in this module use the shared counter handle to mark
/// which executions were spent on gradients.
#[derive(Clone)]
pub struct ObjectiveHandle {
    eval: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    p: usize,
    counter: Arc<ExecutionCounter>,
}

impl ObjectiveHandle {
    pub fn new<F>(p: usize, counter: Arc<ExecutionCounter>, eval: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        ObjectiveHandle {
            eval: Arc::new(eval),
            p,
            counter,
        }
    }

    pub fn eval(&self, theta: &[f64]) -> f64 {
        (self.eval)(theta)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn counter(&self) -> &Arc<ExecutionCounter> {
        &self.counter
    }
}

/// Sample count for the ES estimators. `Auto` resolves to
/// `round(4 + 3 ln p)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleCount {
    Auto,
    Fixed(usize),
}

/// Configuration of the Gaussian search distribution `N(theta, sigma^2 I)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EsConfig {
    pub sigma: f64,
    pub n_samples: SampleCount,
    pub seed: u64,
}

impl EsConfig {
    pub fn new(sigma: f64, seed: u64) -> Self {
        EsConfig {
            sigma,
            n_samples: SampleCount::Auto,
            seed,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn resolve_samples(&self, p: usize) -> usize {
        match self.n_samples {
            SampleCount::Auto => es_sample_count(p),
            SampleCount::Fixed(n) => n,
        }
    }
}

/// ES sample count `round(4 + 3 ln p)`, ties away from zero.
pub fn es_sample_count(p: usize) -> usize {
    assert!(p >= 1, "sample count needs p >= 1");
    (4.0 + 3.0 * (p as f64).ln()).round() as usize
}

/// Exact gradient via the parameter shift rule:
/// `g_k = (C(theta_k + pi/2) - C(theta_k - pi/2)) / 2`.
///
/// Exact only when every parameter enters the cost through a Pauli
/// rotation `exp(-i (theta/2) P)` measured linearly; charges exactly
/// `2p` evaluations.
pub fn parameter_shift_grad(obj: &ObjectiveHandle, theta: &[f64]) -> Vec<f64> {
    let before = obj.counter().total();
    let mut shifted = theta.to_vec();
    let grad = (0..theta.len())
        .map(|k| {
            shifted[k] = theta[k] + FRAC_PI_2;
            let plus = obj.eval(&shifted);
            shifted[k] = theta[k] - FRAC_PI_2;
            let minus = obj.eval(&shifted);
            shifted[k] = theta[k];
            0.5 * (plus - minus)
        })
        .collect();
    obj.counter()
        .add_gradient_executions(obj.counter().total() - before);
    grad
}

/// One standard-normal perturbation per sample index, drawn from its
/// own RNG stream so samples are reproducible independently of
/// evaluation order.
fn sample_perturbation(seed: u64, sample_index: u64, p: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sample_index);
    (0..p).map(|_| rng.sample(StandardNormal)).collect()
}

/// Antithetic Gaussian ES estimate:
/// `(1 / 2 lambda sigma^2) sum_k [f(z_k) - f(2 theta - z_k)] (z_k - theta)`
/// with `z_k = theta + sigma eps_k`. Charges `2 lambda` evaluations.
pub fn es_grad_antithetic(obj: &ObjectiveHandle, theta: &[f64], cfg: &EsConfig) -> Vec<f64> {
    assert!(cfg.sigma > 0.0, "ES sigma must be positive");
    let p = theta.len();
    let lambda = cfg.resolve_samples(p);
    let before = obj.counter().total();
    let mut grad = vec![0.0; p];
    let mut plus = theta.to_vec();
    let mut minus = theta.to_vec();
    for k in 0..lambda {
        let eps = sample_perturbation(cfg.seed, k as u64, p);
        for i in 0..p {
            plus[i] = theta[i] + cfg.sigma * eps[i];
            minus[i] = theta[i] - cfg.sigma * eps[i];
        }
        let diff = obj.eval(&plus) - obj.eval(&minus);
        for i in 0..p {
            grad[i] += diff * (plus[i] - theta[i]);
        }
    }
    let scale = 1.0 / (2.0 * lambda as f64 * cfg.sigma * cfg.sigma);
    for g in &mut grad {
        *g *= scale;
    }
    obj.counter()
        .add_gradient_executions(obj.counter().total() - before);
    grad
}

/// Canonical score-function estimate:
/// `(1 / lambda) sum_k f(z_k) (z_k - theta) / sigma^2`.
/// Charges `lambda` evaluations.
pub fn es_grad_canonical(obj: &ObjectiveHandle, theta: &[f64], cfg: &EsConfig) -> Vec<f64> {
    assert!(cfg.sigma > 0.0, "ES sigma must be positive");
    let p = theta.len();
    let lambda = cfg.resolve_samples(p);
    let before = obj.counter().total();
    let mut grad = vec![0.0; p];
    let mut z = theta.to_vec();
    for k in 0..lambda {
        let eps = sample_perturbation(cfg.seed, k as u64, p);
        for i in 0..p {
            z[i] = theta[i] + cfg.sigma * eps[i];
        }
        let f = obj.eval(&z);
        for i in 0..p {
            grad[i] += f * (z[i] - theta[i]);
        }
    }
    let scale = 1.0 / (lambda as f64 * cfg.sigma * cfg.sigma);
    for g in &mut grad {
        *g *= scale;
    }
    obj.counter()
        .add_gradient_executions(obj.counter().total() - before);
    grad
}

/// Central finite differences, the independent verification oracle:
/// `g_k = [f(theta_k + h) - f(theta_k - h)] / 2h`.
pub fn finite_difference_oracle(obj: &ObjectiveHandle, theta: &[f64], h: f64) -> Vec<f64> {
    assert!(h > 0.0, "step size must be positive");
    let mut shifted = theta.to_vec();
    (0..theta.len())
        .map(|k| {
            shifted[k] = theta[k] + h;
            let plus = obj.eval(&shifted);
            shifted[k] = theta[k] - h;
            let minus = obj.eval(&shifted);
            shifted[k] = theta[k];
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

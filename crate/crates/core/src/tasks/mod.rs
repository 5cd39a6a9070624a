//! The experiments: ground-state energy estimation (optionally under
//! correlated amplitude-damping noise), binary classification on
//! synthetic 2-D data, 3-class MNIST classification, and the Bell-state
//! noise sweep. Every experiment runs under GRAD, LL, or LLES and is
//! reproducible bit-for-bit from its configuration and seed.

pub mod mnist;

use std::path::PathBuf;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::circuits::{
    bell_circuit, binary_qnn, evaluate, evaluate_encoded, ground_state_ansatz, mnist_qnn,
    EncodedCircuit,
};
use crate::error::{Error, Result};
use crate::grad::{
    es_grad_antithetic, parameter_shift_grad, EsConfig, ExecutionCounter, ObjectiveHandle,
    SampleCount,
};
use crate::meta::{
    init_params, quantum_grads_for_step, sgd_step, unroll_backward, unroll_forward, GradMode,
    LstmParams, UnrollConfig,
};
use crate::qsim::{KrausChannel, Observable};

/// Optimization method under comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Plain gradient descent with parameter-shift gradients.
    Grad,
    /// LSTM meta-optimizer with parameter-shift quantum gradients.
    Ll,
    /// LSTM meta-optimizer with antithetic-ES quantum gradients.
    Lles,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Grad => "GRAD",
            Method::Ll => "LL",
            Method::Lles => "LLES",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "GRAD" => Ok(Method::Grad),
            "LL" => Ok(Method::Ll),
            "LLES" => Ok(Method::Lles),
            other => Err(Error::Config(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// A labeled feature set.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub split: Split,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

/// Per-epoch log entry, the unit of persistence and plotting.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub epoch: usize,
    pub cost: f64,
    pub accuracy: Option<f64>,
    /// Cumulative circuit executions up to and including this epoch.
    pub circuit_executions: u64,
    pub seed: u64,
    pub method: Method,
    pub lr: f64,
    pub sigma: Option<f64>,
}

/// Ground-state experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundStateTask {
    pub n_qubits: usize,
    pub layers: usize,
    /// 0 disables noise; otherwise the correlated channel is applied
    /// once after the full parameterized circuit.
    pub noise_lambda: f64,
    pub method: Method,
    pub lr: f64,
    pub sigma: Option<f64>,
    pub t_steps: usize,
    pub epochs: usize,
    pub seed: u64,
}

/// Binary-classification experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryTask {
    pub n_qubits: usize,
    pub method: Method,
    pub lr: f64,
    pub sigma: Option<f64>,
    pub t_steps: usize,
    pub epochs: usize,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    /// Mini-batch size for the GRAD update sweep.
    pub batch_size: usize,
}

/// Multiclass MNIST experiment configuration. Data files are the
/// standard IDX pairs; training uses seeded mini-batches.
#[derive(Debug, Clone, PartialEq)]
pub struct MulticlassTask {
    pub train_images: PathBuf,
    pub train_labels: PathBuf,
    pub test_images: PathBuf,
    pub test_labels: PathBuf,
    pub per_class_train: usize,
    pub per_class_test: usize,
    pub method: Method,
    pub lr: f64,
    pub sigma: Option<f64>,
    pub t_steps: usize,
    pub epochs: usize,
    pub seed: u64,
    pub batch_size: usize,
}

/// Classes used by the multiclass experiment.
pub const MNIST_CLASSES: [u8; 3] = [0, 1, 2];

/// Meta-loss weights for the multiclass experiment at T = 2.
pub fn multiclass_weights() -> Vec<f64> {
    vec![1.0 / 11.0, 10.0 / 11.0]
}

/// splitmix64; derives independent seeds for the RNG consumers of a
/// trial (theta init, phi init, per-step ES sampling, data).
fn derive_seed(base: u64, salt: u64) -> u64 {
    let mut z = base ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn initial_theta(p: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..p).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect()
}

/// Small-angle init for the classifiers: keeps the initial model close
/// to the bare encoder so early gradients are not washed out.
fn initial_theta_small(p: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..p).map(|_| rng.random_range(-0.1..0.1)).collect()
}

fn default_hidden_size(p: usize) -> usize {
    (2 * p).min(64)
}

fn validate_method_config(method: Method, sigma: Option<f64>, t_steps: usize) -> Result<()> {
    match method {
        Method::Grad => Ok(()),
        Method::Ll => {
            if t_steps == 0 {
                Err(Error::Config("LL requires T >= 1".into()))
            } else {
                Ok(())
            }
        }
        Method::Lles => match sigma {
            Some(s) if s > 0.0 => {
                if t_steps == 0 {
                    Err(Error::Config("LLES requires T >= 1".into()))
                } else {
                    Ok(())
                }
            }
            _ => Err(Error::Config("LLES requires sigma > 0".into())),
        },
    }
}

/// Shared meta-training loop for LL and LLES. `quantum_grad` supplies
/// `dC/d theta` at a traced step given a fresh ES seed (ignored by the
/// parameter-shift path).
struct MetaTrainer {
    params: LstmParams,
    cfg: UnrollConfig,
    theta0: Vec<f64>,
    y0: f64,
    seed: u64,
}

impl MetaTrainer {
    fn new(
        obj: &ObjectiveHandle,
        method: Method,
        weights: Vec<f64>,
        sigma: Option<f64>,
        t_steps: usize,
        lr: f64,
        seed: u64,
        theta0: Vec<f64>,
    ) -> Result<Self> {
        let p = obj.p();
        let grad_mode = match method {
            Method::Ll => GradMode::ParameterShift,
            Method::Lles => GradMode::EvolutionStrategy,
            Method::Grad => {
                return Err(Error::Config("GRAD has no meta-training loop".into()))
            }
        };
        let cfg = UnrollConfig {
            t_steps,
            weights,
            grad_mode,
            es: EsConfig {
                sigma: sigma.unwrap_or(0.1),
                n_samples: SampleCount::Auto,
                seed: 0,
            },
            lr,
        };
        cfg.validate()?;
        let params = init_params(default_hidden_size(p), p + 1, p, derive_seed(seed, 2));
        let y0 = obj.eval(&theta0);
        Ok(MetaTrainer {
            params,
            cfg,
            theta0,
            y0,
            seed,
        })
    }

    /// One meta-epoch: unroll, collect per-step quantum gradients,
    /// backpropagate, SGD on phi. Returns the last step's cost and
    /// final parameters.
    fn epoch<G>(&mut self, epoch: usize, obj: &ObjectiveHandle, quantum_grad: G) -> Result<(f64, Vec<f64>)>
    where
        G: Fn(&[f64], &UnrollConfig) -> Vec<f64>,
    {
        let (trace, _loss) =
            unroll_forward(&self.params, obj, &self.theta0, &self.cfg, Some(self.y0))?;
        let mut qgrads = Vec::with_capacity(self.cfg.t_steps);
        for (t, step) in trace.steps.iter().enumerate() {
            let mut step_cfg = self.cfg.clone();
            step_cfg.es.seed = derive_seed(
                self.seed,
                1_000 + (epoch * self.cfg.t_steps + t) as u64,
            );
            qgrads.push(quantum_grad(&step.theta, &step_cfg));
        }
        let grads = unroll_backward(&trace, &self.params, &qgrads, &self.cfg)?;
        sgd_step(&mut self.params, &grads, self.cfg.lr);
        let last = trace.steps.last().expect("T >= 1");
        Ok((last.y, last.theta.clone()))
    }
}

/// Run the ground-state experiment for one seed.
pub fn run_ground_state(task: &GroundStateTask) -> Result<Vec<TrialRecord>> {
    validate_method_config(task.method, task.sigma, task.t_steps)?;
    let circuit = Arc::new(ground_state_ansatz(task.n_qubits, task.layers)?);
    let obs = Observable::TensorPauliZ {
        n_qubits: task.n_qubits,
    };
    let noise = if task.noise_lambda > 0.0 {
        Some(KrausChannel::correlated_amplitude_damping(
            task.n_qubits,
            task.noise_lambda,
        )?)
    } else {
        None
    };
    let p = circuit.n_params;
    let counter = Arc::new(ExecutionCounter::new());
    let obj = {
        let circuit = circuit.clone();
        let counter = counter.clone();
        ObjectiveHandle::new(p, counter.clone(), move |theta: &[f64]| {
            evaluate(&circuit, theta, &obs, noise.as_ref(), &counter)
                .expect("valid ground-state evaluation")
        })
    };

    let record = |epoch: usize, cost: f64| TrialRecord {
        epoch,
        cost,
        accuracy: None,
        circuit_executions: counter.total(),
        seed: task.seed,
        method: task.method,
        lr: task.lr,
        sigma: task.sigma,
    };

    let mut records = Vec::with_capacity(task.epochs);
    match task.method {
        Method::Grad => {
            let mut theta = initial_theta(p, derive_seed(task.seed, 1));
            for epoch in 1..=task.epochs {
                let g = parameter_shift_grad(&obj, &theta);
                for (t, gi) in theta.iter_mut().zip(&g) {
                    *t -= task.lr * gi;
                }
                let cost = obj.eval(&theta);
                records.push(record(epoch, cost));
            }
        }
        Method::Ll | Method::Lles => {
            let weights = vec![1.0; task.t_steps];
            let mut trainer = MetaTrainer::new(
                &obj,
                task.method,
                weights,
                task.sigma,
                task.t_steps,
                task.lr,
                task.seed,
                initial_theta(p, derive_seed(task.seed, 1)),
            )?;
            for epoch in 1..=task.epochs {
                let (cost, _) = trainer.epoch(epoch, &obj, |theta, step_cfg| {
                    quantum_grads_for_step(&obj, theta, step_cfg)
                })?;
                records.push(record(epoch, cost));
            }
        }
    }
    Ok(records)
}

/// Two Gaussian clusters (class 0 at (-1,-1), class 1 at (+1,+1),
/// isotropic std 0.5), affinely mapped into `[0, pi]^2` for angle
/// encoding. Counts must be even; classes are exactly balanced.
pub fn generate_binary_dataset(
    n_train: usize,
    n_test: usize,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    for (name, n) in [("n_train", n_train), ("n_test", n_test)] {
        if n < 2 || n % 2 != 0 {
            return Err(Error::Config(format!("{name} must be even and >= 2, got {n}")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |n: usize, split: Split| {
        let mut features = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for class in [0u8, 1] {
            let center = if class == 0 { -1.0 } else { 1.0 };
            for _ in 0..n / 2 {
                let raw: Vec<f64> = (0..2)
                    .map(|_| {
                        let g: f64 = rng.sample(rand_distr::StandardNormal);
                        center + 0.5 * g
                    })
                    .collect();
                // Clamp to +-2.5 (5 sigma around the midpoint), then
                // map linearly onto [0, pi].
                let mapped = raw
                    .iter()
                    .map(|v| (v.clamp(-2.5, 2.5) + 2.5) * std::f64::consts::PI / 5.0)
                    .collect();
                features.push(mapped);
                labels.push(class);
            }
        }
        Dataset {
            features,
            labels,
            split,
        }
    };
    let train = draw(n_train, Split::Train);
    let test = draw(n_test, Split::Test);
    Ok((train, test))
}

/// Threshold prediction rule: label 1 iff `<O> >= 0.5`.
pub fn binary_predict(expectation: f64) -> u8 {
    if expectation >= 0.5 {
        1
    } else {
        0
    }
}

/// Mean squared error of scalar model outputs against binary labels.
pub fn binary_mse(outputs: &[f64], labels: &[u8]) -> f64 {
    let n = outputs.len() as f64;
    outputs
        .iter()
        .zip(labels)
        .map(|(o, &l)| (o - l as f64).powi(2))
        .sum::<f64>()
        / n
}

fn binary_outputs(
    model: &EncodedCircuit,
    theta: &[f64],
    data: &Dataset,
    counter: &ExecutionCounter,
) -> Vec<f64> {
    data.features
        .iter()
        .map(|x| {
            evaluate_encoded(model, theta, x, None, counter)
                .expect("valid binary-QNN evaluation")[0]
        })
        .collect()
}

/// Exact gradient of the batch MSE via the chain rule: per sample,
/// `2 (<O> - y)` times the parameter-shift gradient of `<O>` (the shift
/// rule applies to the expectation, not to the squared composite).
fn binary_mse_shift_grad(
    model: &Arc<EncodedCircuit>,
    theta: &[f64],
    data: &Arc<Dataset>,
    batch: &[usize],
    counter: &Arc<ExecutionCounter>,
) -> Vec<f64> {
    let p = theta.len();
    let mut grad = vec![0.0; p];
    let n = batch.len() as f64;
    for &idx in batch {
        let (x, label) = (&data.features[idx], data.labels[idx]);
        let out = evaluate_encoded(model, theta, x, None, counter)
            .expect("valid binary-QNN evaluation")[0];
        let sample_obj = {
            let model = model.clone();
            let counter = counter.clone();
            let x = x.clone();
            ObjectiveHandle::new(p, counter.clone(), move |t: &[f64]| {
                evaluate_encoded(&model, t, &x, None, &counter)
                    .expect("valid binary-QNN evaluation")[0]
            })
        };
        let g = parameter_shift_grad(&sample_obj, theta);
        let scale = 2.0 * (out - label as f64) / n;
        for (gi, gs) in grad.iter_mut().zip(&g) {
            *gi += scale * gs;
        }
    }
    grad
}

fn binary_accuracy(
    model: &EncodedCircuit,
    theta: &[f64],
    test: &Dataset,
    counter: &ExecutionCounter,
) -> f64 {
    let outputs = binary_outputs(model, theta, test, counter);
    let correct = outputs
        .iter()
        .zip(&test.labels)
        .filter(|(o, &l)| binary_predict(**o) == l)
        .count();
    correct as f64 / test.len() as f64
}

/// Run the binary-classification experiment for one seed.
pub fn run_binary_classification(task: &BinaryTask) -> Result<Vec<TrialRecord>> {
    validate_method_config(task.method, task.sigma, task.t_steps)?;
    let (train, test) = generate_binary_dataset(
        task.n_train,
        task.n_test,
        derive_seed(task.seed, 3),
    )?;
    let model = Arc::new(binary_qnn(task.n_qubits)?);
    let train = Arc::new(train);
    let p = model.body.n_params;
    let counter = Arc::new(ExecutionCounter::new());
    let obj = {
        let model = model.clone();
        let train = train.clone();
        let counter = counter.clone();
        ObjectiveHandle::new(p, counter.clone(), move |theta: &[f64]| {
            let outputs = binary_outputs(&model, theta, &train, &counter);
            binary_mse(&outputs, &train.labels)
        })
    };

    let record = |epoch: usize, cost: f64, accuracy: f64| TrialRecord {
        epoch,
        cost,
        accuracy: Some(accuracy),
        circuit_executions: counter.total(),
        seed: task.seed,
        method: task.method,
        lr: task.lr,
        sigma: task.sigma,
    };

    let all_indices: Vec<usize> = (0..train.len()).collect();
    let mut batch_rng = ChaCha8Rng::seed_from_u64(derive_seed(task.seed, 6));
    let mut records = Vec::with_capacity(task.epochs);
    match task.method {
        Method::Grad => {
            // Seeded mini-batch SGD; one epoch sweeps the train set.
            let mut theta = initial_theta_small(p, derive_seed(task.seed, 1));
            for epoch in 1..=task.epochs {
                let mut order = all_indices.clone();
                order.shuffle(&mut batch_rng);
                for batch in order.chunks(task.batch_size.max(1)) {
                    let g = binary_mse_shift_grad(&model, &theta, &train, batch, &counter);
                    for (t, gi) in theta.iter_mut().zip(&g) {
                        *t -= task.lr * gi;
                    }
                }
                let cost = obj.eval(&theta);
                let acc = binary_accuracy(&model, &theta, &test, &counter);
                records.push(record(epoch, cost, acc));
            }
        }
        Method::Ll | Method::Lles => {
            let weights = vec![1.0; task.t_steps];
            let mut trainer = MetaTrainer::new(
                &obj,
                task.method,
                weights,
                task.sigma,
                task.t_steps,
                task.lr,
                task.seed,
                initial_theta_small(p, derive_seed(task.seed, 1)),
            )?;
            for epoch in 1..=task.epochs {
                let (cost, theta) = trainer.epoch(epoch, &obj, |theta, step_cfg| {
                    match step_cfg.grad_mode {
                        GradMode::ParameterShift => {
                            binary_mse_shift_grad(&model, theta, &train, &all_indices, &counter)
                        }
                        GradMode::EvolutionStrategy => {
                            es_grad_antithetic(&obj, theta, &step_cfg.es)
                        }
                    }
                })?;
                let acc = binary_accuracy(&model, &theta, &test, &counter);
                records.push(record(epoch, cost, acc));
            }
        }
    }
    Ok(records)
}

/// Mean squared error of three-way projector outputs against one-hot
/// labels: `(1/N) sum_l (1/3) sum_p (out_{l,p} - y_{l,p})^2`.
pub fn multiclass_mse(outputs: &[[f64; 3]], onehot: &[[f64; 3]]) -> f64 {
    let n = outputs.len() as f64;
    outputs
        .iter()
        .zip(onehot)
        .map(|(o, y)| {
            o.iter()
                .zip(y)
                .map(|(oi, yi)| (oi - yi).powi(2))
                .sum::<f64>()
                / 3.0
        })
        .sum::<f64>()
        / n
}

/// One-hot encoding of a class id against the fixed class list.
pub fn one_hot(label: u8, classes: &[u8; 3]) -> [f64; 3] {
    let mut y = [0.0; 3];
    if let Some(idx) = classes.iter().position(|&c| c == label) {
        y[idx] = 1.0;
    }
    y
}

fn multiclass_outputs(
    model: &EncodedCircuit,
    theta: &[f64],
    features: &[Vec<f64>],
    counter: &ExecutionCounter,
) -> Vec<[f64; 3]> {
    features
        .iter()
        .map(|x| {
            let v = evaluate_encoded(model, theta, x, None, counter)
                .expect("valid multiclass evaluation");
            [v[0], v[1], v[2]]
        })
        .collect()
}

fn multiclass_batch_cost(
    model: &EncodedCircuit,
    theta: &[f64],
    data: &Dataset,
    batch: &[usize],
    counter: &ExecutionCounter,
) -> f64 {
    let features: Vec<Vec<f64>> = batch.iter().map(|&i| data.features[i].clone()).collect();
    let outputs = multiclass_outputs(model, theta, &features, counter);
    let onehot: Vec<[f64; 3]> = batch
        .iter()
        .map(|&i| one_hot(data.labels[i], &MNIST_CLASSES))
        .collect();
    multiclass_mse(&outputs, &onehot)
}

/// Chain-rule parameter-shift gradient of the multiclass batch cost.
fn multiclass_shift_grad(
    model: &Arc<EncodedCircuit>,
    theta: &[f64],
    data: &Dataset,
    batch: &[usize],
    counter: &Arc<ExecutionCounter>,
) -> Vec<f64> {
    let p = theta.len();
    let mut grad = vec![0.0; p];
    let n = batch.len() as f64;
    for &idx in batch {
        let x = &data.features[idx];
        let y = one_hot(data.labels[idx], &MNIST_CLASSES);
        let out = evaluate_encoded(model, theta, x, None, counter)
            .expect("valid multiclass evaluation");
        for obs_idx in 0..3 {
            let sample_obj = {
                let model = model.clone();
                let counter = counter.clone();
                let x = x.clone();
                ObjectiveHandle::new(p, counter.clone(), move |t: &[f64]| {
                    evaluate_encoded(&model, t, &x, None, &counter)
                        .expect("valid multiclass evaluation")[obs_idx]
                })
            };
            let g = parameter_shift_grad(&sample_obj, theta);
            let scale = 2.0 * (out[obs_idx] - y[obs_idx]) / (3.0 * n);
            for (gi, gs) in grad.iter_mut().zip(&g) {
                *gi += scale * gs;
            }
        }
    }
    grad
}

fn multiclass_accuracy(
    model: &EncodedCircuit,
    theta: &[f64],
    test: &Dataset,
    counter: &ExecutionCounter,
) -> f64 {
    let outputs = multiclass_outputs(model, theta, &test.features, counter);
    let correct = outputs
        .iter()
        .zip(&test.labels)
        .filter(|(o, &l)| {
            let pred = o
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| MNIST_CLASSES[i])
                .unwrap();
            pred == l
        })
        .count();
    correct as f64 / test.len() as f64
}

/// Run the 3-class MNIST experiment for one seed. Training uses seeded
/// mini-batches; for LL/LLES the meta-loss weights are [1/11, 10/11]
/// (T must be 2).
pub fn run_multiclass(task: &MulticlassTask) -> Result<Vec<TrialRecord>> {
    validate_method_config(task.method, task.sigma, task.t_steps)?;
    if task.method != Method::Grad && task.t_steps != 2 {
        return Err(Error::Config(
            "the multiclass meta-loss weights are defined for T = 2".into(),
        ));
    }
    if task.batch_size == 0 {
        return Err(Error::Config("batch size must be >= 1".into()));
    }
    let mut train = mnist::load_mnist_subset(
        &task.train_images,
        &task.train_labels,
        &MNIST_CLASSES,
        task.per_class_train,
        derive_seed(task.seed, 4),
    )?;
    train.split = Split::Train;
    let mut test = mnist::load_mnist_subset(
        &task.test_images,
        &task.test_labels,
        &MNIST_CLASSES,
        task.per_class_test,
        derive_seed(task.seed, 5),
    )?;
    test.split = Split::Test;

    let model = Arc::new(mnist_qnn());
    let p = model.body.n_params;
    let counter = Arc::new(ExecutionCounter::new());

    let record = |epoch: usize, cost: f64, accuracy: f64, counter: &ExecutionCounter| TrialRecord {
        epoch,
        cost,
        accuracy: Some(accuracy),
        circuit_executions: counter.total(),
        seed: task.seed,
        method: task.method,
        lr: task.lr,
        sigma: task.sigma,
    };

    let mut batch_rng = ChaCha8Rng::seed_from_u64(derive_seed(task.seed, 6));
    let mut records = Vec::with_capacity(task.epochs);

    let batches_for_epoch = |rng: &mut ChaCha8Rng| -> Vec<Vec<usize>> {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(rng);
        order.chunks(task.batch_size).map(|c| c.to_vec()).collect()
    };

    match task.method {
        Method::Grad => {
            let mut theta = initial_theta_small(p, derive_seed(task.seed, 1));
            for epoch in 1..=task.epochs {
                let mut epoch_cost = 0.0;
                let batches = batches_for_epoch(&mut batch_rng);
                for batch in &batches {
                    let g = multiclass_shift_grad(&model, &theta, &train, batch, &counter);
                    for (t, gi) in theta.iter_mut().zip(&g) {
                        *t -= task.lr * gi;
                    }
                    epoch_cost += multiclass_batch_cost(&model, &theta, &train, batch, &counter);
                }
                let cost = epoch_cost / batches.len() as f64;
                let acc = multiclass_accuracy(&model, &theta, &test, &counter);
                records.push(record(epoch, cost, acc, &counter));
            }
        }
        Method::Ll | Method::Lles => {
            // The meta-optimizer interacts with a fixed full-batch-like
            // objective per epoch, but each epoch's objective is the
            // cost on that epoch's first shuffled mini-batch; gradients
            // within the unroll use the same batch.
            let first_batch = batches_for_epoch(&mut batch_rng)[0].clone();
            let epoch_obj = |batch: Vec<usize>| {
                let model = model.clone();
                let train = train.clone();
                let counter = counter.clone();
                ObjectiveHandle::new(p, counter.clone(), move |theta: &[f64]| {
                    multiclass_batch_cost(&model, theta, &train, &batch, &counter)
                })
            };
            let obj0 = epoch_obj(first_batch);
            let mut trainer = MetaTrainer::new(
                &obj0,
                task.method,
                multiclass_weights(),
                task.sigma,
                task.t_steps,
                task.lr,
                task.seed,
                initial_theta_small(p, derive_seed(task.seed, 1)),
            )?;
            for epoch in 1..=task.epochs {
                let batch = batches_for_epoch(&mut batch_rng)[0].clone();
                let obj = epoch_obj(batch.clone());
                trainer.y0 = obj.eval(&trainer.theta0);
                let (cost, theta) = trainer.epoch(epoch, &obj, |theta, step_cfg| {
                    match step_cfg.grad_mode {
                        GradMode::ParameterShift => {
                            multiclass_shift_grad(&model, theta, &train, &batch, &counter)
                        }
                        GradMode::EvolutionStrategy => {
                            es_grad_antithetic(&obj, theta, &step_cfg.es)
                        }
                    }
                })?;
                let acc = multiclass_accuracy(&model, &theta, &test, &counter);
                records.push(record(epoch, cost, acc, &counter));
            }
        }
    }
    Ok(records)
}

/// Probabilities of the four Bell-circuit outcomes under the
/// correlated amplitude-damping channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BellProbabilities {
    pub lambda: f64,
    /// P(00), P(01), P(10), P(11).
    pub probs: [f64; 4],
}

/// Prepare the Bell state on the density-matrix backend, apply the
/// channel at each strength, and return the outcome distribution.
/// With `shots = Some((n, seed))` the exact distribution is replaced
/// by empirical frequencies of `n` seeded multinomial draws.
pub fn run_noise_bell(
    lambdas: &[f64],
    shots: Option<(u64, u64)>,
) -> Result<Vec<BellProbabilities>> {
    let circuit = bell_circuit();
    lambdas
        .iter()
        .map(|&lambda| {
            let channel = KrausChannel::correlated_amplitude_damping(2, lambda)?;
            let mut state = crate::qsim::QuantumState::zero_state(
                2,
                crate::qsim::Backend::DensityMatrix,
            )?;
            circuit.apply_to(&mut state, &[])?;
            state.apply_channel(&channel)?;
            let exact = state.probabilities();
            let probs = match shots {
                None => [exact[0], exact[1], exact[2], exact[3]],
                Some((n, seed)) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, lambda.to_bits()));
                    let mut counts = [0u64; 4];
                    for _ in 0..n {
                        let r: f64 = rng.random_range(0.0..1.0);
                        let mut acc = 0.0;
                        let mut outcome = 3;
                        for (k, p) in exact.iter().enumerate() {
                            acc += p;
                            if r < acc {
                                outcome = k;
                                break;
                            }
                        }
                        counts[outcome] += 1;
                    }
                    let mut freq = [0.0; 4];
                    for k in 0..4 {
                        freq[k] = counts[k] as f64 / n as f64;
                    }
                    freq
                }
            };
            Ok(BellProbabilities { lambda, probs })
        })
        .collect()
}

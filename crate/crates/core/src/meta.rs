//! The LSTM meta-optimizer ("learning to learn").
//!
//! An LSTM cell receives `x_t = concat(theta_{t-1}, y_{t-1})` and emits,
//! through a linear head, an additive update `theta_t = theta_{t-1} +
//! W_out h_t + b_out`. The unrolled T-step interaction with the quantum
//! objective yields the weighted meta-loss `L = (1/T) sum_j w_j y_j`,
//! which is differentiated with respect to the LSTM weights by exact
//! backpropagation through time. The gradient of each quantum
//! evaluation `y_t` with respect to `theta_t` is supplied externally
//! (parameter shift for LL, antithetic ES for LLES); the `y` value fed
//! back into the next LSTM input is treated as a constant in the
//! backward pass, which keeps the circuit-execution budget at the
//! advertised `2pT` / `2(4 + 3 ln p)T`.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grad::{es_grad_antithetic, parameter_shift_grad, EsConfig, ObjectiveHandle};

/// LSTM weights `phi`: the four gates (input, forget, candidate,
/// output), each with input- and hidden-side matrices and biases,
/// plus the linear output head mapping `h` to a length-`p` update.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub hidden_size: usize,
    pub input_size: usize,
    pub p: usize,
    pub w_ii: Array2<f64>,
    pub w_hi: Array2<f64>,
    pub b_ii: Array1<f64>,
    pub b_hi: Array1<f64>,
    pub w_if: Array2<f64>,
    pub w_hf: Array2<f64>,
    pub b_if: Array1<f64>,
    pub b_hf: Array1<f64>,
    pub w_ig: Array2<f64>,
    pub w_hg: Array2<f64>,
    pub b_ig: Array1<f64>,
    pub b_hg: Array1<f64>,
    pub w_io: Array2<f64>,
    pub w_ho: Array2<f64>,
    pub b_io: Array1<f64>,
    pub b_ho: Array1<f64>,
    pub w_out: Array2<f64>,
    pub b_out: Array1<f64>,
}

impl LstmParams {
    /// All-zero parameters with the same shapes; used as a gradient
    /// accumulator and as the identity-update LSTM in tests.
    pub fn zeros(hidden_size: usize, input_size: usize, p: usize) -> Self {
        let h = hidden_size;
        let m = input_size;
        LstmParams {
            hidden_size,
            input_size,
            p,
            w_ii: Array2::zeros((h, m)),
            w_hi: Array2::zeros((h, h)),
            b_ii: Array1::zeros(h),
            b_hi: Array1::zeros(h),
            w_if: Array2::zeros((h, m)),
            w_hf: Array2::zeros((h, h)),
            b_if: Array1::zeros(h),
            b_hf: Array1::zeros(h),
            w_ig: Array2::zeros((h, m)),
            w_hg: Array2::zeros((h, h)),
            b_ig: Array1::zeros(h),
            b_hg: Array1::zeros(h),
            w_io: Array2::zeros((h, m)),
            w_ho: Array2::zeros((h, h)),
            b_io: Array1::zeros(h),
            b_ho: Array1::zeros(h),
            w_out: Array2::zeros((p, h)),
            b_out: Array1::zeros(p),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.hidden_size, self.input_size, self.p)
    }

    /// Visit every tensor, in a fixed order shared with
    /// [`for_each_tensor_pair_mut`](Self::for_each_tensor_pair_mut).
    pub fn tensors(&self) -> Vec<&Array2<f64>> {
        vec![
            &self.w_ii, &self.w_hi, &self.w_if, &self.w_hf, &self.w_ig, &self.w_hg,
            &self.w_io, &self.w_ho, &self.w_out,
        ]
    }

    pub fn biases(&self) -> Vec<&Array1<f64>> {
        vec![
            &self.b_ii, &self.b_hi, &self.b_if, &self.b_hf, &self.b_ig, &self.b_hg,
            &self.b_io, &self.b_ho, &self.b_out,
        ]
    }

    /// Flatten every entry into one vector (matrices first, then
    /// biases, in declaration order).
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for t in self.tensors() {
            out.extend(t.iter().copied());
        }
        for b in self.biases() {
            out.extend(b.iter().copied());
        }
        out
    }

    /// Inverse of [`flatten`](Self::flatten).
    pub fn assign_from_flat(&mut self, flat: &[f64]) {
        let mut idx = 0;
        for t in [
            &mut self.w_ii, &mut self.w_hi, &mut self.w_if, &mut self.w_hf,
            &mut self.w_ig, &mut self.w_hg, &mut self.w_io, &mut self.w_ho,
            &mut self.w_out,
        ] {
            for v in t.iter_mut() {
                *v = flat[idx];
                idx += 1;
            }
        }
        for b in [
            &mut self.b_ii, &mut self.b_hi, &mut self.b_if, &mut self.b_hf,
            &mut self.b_ig, &mut self.b_hg, &mut self.b_io, &mut self.b_ho,
            &mut self.b_out,
        ] {
            for v in b.iter_mut() {
                *v = flat[idx];
                idx += 1;
            }
        }
        debug_assert_eq!(idx, flat.len());
    }
}

/// Recurrent carry: hidden state `h` and cell state `C`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Array1<f64>,
    pub c: Array1<f64>,
}

impl LstmState {
    pub fn zeros(hidden_size: usize) -> Self {
        LstmState {
            h: Array1::zeros(hidden_size),
            c: Array1::zeros(hidden_size),
        }
    }
}

/// Per-step activations cached for the backward pass.
#[derive(Debug, Clone)]
pub struct GateActivations {
    pub x: Array1<f64>,
    pub i: Array1<f64>,
    pub f: Array1<f64>,
    pub g: Array1<f64>,
    pub o: Array1<f64>,
    pub c_prev: Array1<f64>,
    pub c: Array1<f64>,
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// One LSTM cell step:
/// `i = sig(W_ii x + b_ii + W_hi h + b_hi)`, `f`, `o` analogous,
/// `g = tanh(W_ig x + b_ig + W_hg h + b_hg)`,
/// `C_t = f (.) C_{t-1} + i (.) g`, `h_t = o (.) tanh(C_t)`.
pub fn lstm_cell_forward(
    params: &LstmParams,
    x: &Array1<f64>,
    state: &LstmState,
) -> Result<(LstmState, GateActivations)> {
    if x.len() != params.input_size {
        return Err(Error::Config(format!(
            "LSTM input has length {}, expected {}",
            x.len(),
            params.input_size
        )));
    }
    let pre_i = params.w_ii.dot(x) + &params.b_ii + params.w_hi.dot(&state.h) + &params.b_hi;
    let pre_f = params.w_if.dot(x) + &params.b_if + params.w_hf.dot(&state.h) + &params.b_hf;
    let pre_g = params.w_ig.dot(x) + &params.b_ig + params.w_hg.dot(&state.h) + &params.b_hg;
    let pre_o = params.w_io.dot(x) + &params.b_io + params.w_ho.dot(&state.h) + &params.b_ho;
    let i = pre_i.mapv(sigmoid);
    let f = pre_f.mapv(sigmoid);
    let g = pre_g.mapv(f64::tanh);
    let o = pre_o.mapv(sigmoid);
    let c = &f * &state.c + &i * &g;
    let h = &o * &c.mapv(f64::tanh);
    let acts = GateActivations {
        x: x.clone(),
        i,
        f,
        g,
        o,
        c_prev: state.c.clone(),
        c: c.clone(),
    };
    Ok((LstmState { h, c }, acts))
}

/// Draw every weight and bias uniformly from
/// `[-1/sqrt(hidden_size), +1/sqrt(hidden_size)]`.
pub fn init_params(hidden_size: usize, input_size: usize, p: usize, seed: u64) -> LstmParams {
    assert!(hidden_size >= 1 && input_size >= 1 && p >= 1);
    let bound = 1.0 / (hidden_size as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = LstmParams::zeros(hidden_size, input_size, p);
    let mut flat = params.flatten();
    for v in &mut flat {
        *v = rng.random_range(-bound..=bound);
    }
    params.assign_from_flat(&flat);
    params
}

/// Which estimator supplies the quantum layer's gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradMode {
    /// LL: exact parameter-shift gradients, `2p` executions per step.
    ParameterShift,
    /// LLES: antithetic ES estimate, `2 lambda` executions per step.
    EvolutionStrategy,
}

/// Configuration of one unrolled interaction loop.
#[derive(Debug, Clone, PartialEq)]
pub struct UnrollConfig {
    /// Number of LSTM/objective interactions T.
    pub t_steps: usize,
    /// Meta-loss weights, one per step.
    pub weights: Vec<f64>,
    pub grad_mode: GradMode,
    pub es: EsConfig,
    /// SGD learning rate for the LSTM weights.
    pub lr: f64,
}

impl UnrollConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_steps == 0 {
            return Err(Error::Config("T must be >= 1".into()));
        }
        if self.weights.len() != self.t_steps {
            return Err(Error::Config(format!(
                "{} meta-loss weights for T = {}",
                self.weights.len(),
                self.t_steps
            )));
        }
        if !self.weights.iter().all(|w| w.is_finite()) {
            return Err(Error::Config("meta-loss weights must be finite".into()));
        }
        if self.lr <= 0.0 {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// One recorded interaction step.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub theta: Vec<f64>,
    pub y: f64,
    pub state: LstmState,
    pub acts: GateActivations,
}

/// The full forward trace needed by the backward pass.
#[derive(Debug, Clone)]
pub struct UnrollTrace {
    pub theta0: Vec<f64>,
    pub y0: f64,
    pub steps: Vec<StepRecord>,
}

/// Run the T-step interaction loop and return the trace plus the
/// meta-loss `L = (1/T) sum_j w_j y_j`.
///
/// `y0` is the objective value at `theta0`; pass a cached value to
/// avoid re-evaluating it every meta-epoch (it only feeds the first
/// LSTM input).
pub fn unroll_forward(
    params: &LstmParams,
    obj: &ObjectiveHandle,
    theta0: &[f64],
    cfg: &UnrollConfig,
    y0: Option<f64>,
) -> Result<(UnrollTrace, f64)> {
    cfg.validate()?;
    let p = theta0.len();
    if p != params.p {
        return Err(Error::ParamCount {
            expected: params.p,
            got: p,
        });
    }
    if params.input_size != p + 1 {
        return Err(Error::Config(format!(
            "LSTM input size {} does not match p + 1 = {}",
            params.input_size,
            p + 1
        )));
    }
    let y0 = y0.unwrap_or_else(|| obj.eval(theta0));
    let mut state = LstmState::zeros(params.hidden_size);
    let mut theta = theta0.to_vec();
    let mut y = y0;
    let mut steps = Vec::with_capacity(cfg.t_steps);
    let mut loss = 0.0;
    for t in 0..cfg.t_steps {
        let mut x = Array1::zeros(p + 1);
        for (xi, ti) in x.iter_mut().zip(&theta) {
            *xi = *ti;
        }
        x[p] = y;
        let (next, acts) = lstm_cell_forward(params, &x, &state)?;
        let delta = params.w_out.dot(&next.h) + &params.b_out;
        for (ti, di) in theta.iter_mut().zip(delta.iter()) {
            *ti += di;
        }
        y = obj.eval(&theta);
        loss += cfg.weights[t] * y;
        steps.push(StepRecord {
            theta: theta.clone(),
            y,
            state: next.clone(),
            acts,
        });
        state = next;
    }
    loss /= cfg.t_steps as f64;
    Ok((
        UnrollTrace {
            theta0: theta0.to_vec(),
            y0,
            steps,
        },
        loss,
    ))
}

/// Exact reverse-mode differentiation of the unrolled meta-loss with
/// respect to the LSTM weights.
///
/// `quantum_grads[t]` is `dC_t/d theta_t` at the traced `theta_t`;
/// gradients flow backward through the theta, `h`, and `C` recurrences,
/// while the `y` value entering the next LSTM input is a constant.
pub fn unroll_backward(
    trace: &UnrollTrace,
    params: &LstmParams,
    quantum_grads: &[Vec<f64>],
    cfg: &UnrollConfig,
) -> Result<LstmParams> {
    cfg.validate()?;
    let t_steps = trace.steps.len();
    if t_steps != cfg.t_steps || quantum_grads.len() != t_steps {
        return Err(Error::Config(format!(
            "trace has {} steps, config T = {}, {} quantum gradients",
            t_steps,
            cfg.t_steps,
            quantum_grads.len()
        )));
    }
    let p = params.p;
    let hidden = params.hidden_size;
    let mut grads = params.zeros_like();

    let mut g_theta_next: Array1<f64> = Array1::zeros(p);
    let mut g_h_next: Array1<f64> = Array1::zeros(hidden);
    let mut g_c_next: Array1<f64> = Array1::zeros(hidden);

    for t in (0..t_steps).rev() {
        let step = &trace.steps[t];
        if quantum_grads[t].len() != p {
            return Err(Error::ParamCount {
                expected: p,
                got: quantum_grads[t].len(),
            });
        }
        let h_prev = if t == 0 {
            Array1::zeros(hidden)
        } else {
            trace.steps[t - 1].state.h.clone()
        };

        // Loss node plus the theta recurrence from step t+1.
        let qg = Array1::from(quantum_grads[t].clone());
        let g_theta = &g_theta_next + &(qg * (cfg.weights[t] / t_steps as f64));

        // theta_t = theta_{t-1} + W_out h_t + b_out.
        let h_t = &step.state.h;
        for r in 0..p {
            for c in 0..hidden {
                grads.w_out[(r, c)] += g_theta[r] * h_t[c];
            }
        }
        grads.b_out = grads.b_out + &g_theta;
        let g_h = params.w_out.t().dot(&g_theta) + &g_h_next;
        let tanh_c = step.acts.c.mapv(f64::tanh);

        // Cell backward.
        let g_o = &g_h * &tanh_c;
        let g_c = &g_c_next + &(&g_h * &step.acts.o * &tanh_c.mapv(|v| 1.0 - v * v));
        let g_f = &g_c * &step.acts.c_prev;
        let g_i = &g_c * &step.acts.g;
        let g_g = &g_c * &step.acts.i;
        let g_c_prev = &g_c * &step.acts.f;

        let g_pre_i = &g_i * &step.acts.i * &step.acts.i.mapv(|v| 1.0 - v);
        let g_pre_f = &g_f * &step.acts.f * &step.acts.f.mapv(|v| 1.0 - v);
        let g_pre_g = &g_g * &step.acts.g.mapv(|v| 1.0 - v * v);
        let g_pre_o = &g_o * &step.acts.o * &step.acts.o.mapv(|v| 1.0 - v);

        let x = &step.acts.x;
        let accumulate =
            |w: &mut Array2<f64>, b_in: &mut Array1<f64>, b_h: &mut Array1<f64>,
             wh: &mut Array2<f64>, g_pre: &Array1<f64>| {
                for r in 0..hidden {
                    for c in 0..x.len() {
                        w[(r, c)] += g_pre[r] * x[c];
                    }
                    for c in 0..hidden {
                        wh[(r, c)] += g_pre[r] * h_prev[c];
                    }
                }
                *b_in = &*b_in + g_pre;
                *b_h = &*b_h + g_pre;
            };
        accumulate(&mut grads.w_ii, &mut grads.b_ii, &mut grads.b_hi, &mut grads.w_hi, &g_pre_i);
        accumulate(&mut grads.w_if, &mut grads.b_if, &mut grads.b_hf, &mut grads.w_hf, &g_pre_f);
        accumulate(&mut grads.w_ig, &mut grads.b_ig, &mut grads.b_hg, &mut grads.w_hg, &g_pre_g);
        accumulate(&mut grads.w_io, &mut grads.b_io, &mut grads.b_ho, &mut grads.w_ho, &g_pre_o);

        let g_x = params.w_ii.t().dot(&g_pre_i)
            + params.w_if.t().dot(&g_pre_f)
            + params.w_ig.t().dot(&g_pre_g)
            + params.w_io.t().dot(&g_pre_o);
        let g_h_prev = params.w_hi.t().dot(&g_pre_i)
            + params.w_hf.t().dot(&g_pre_f)
            + params.w_hg.t().dot(&g_pre_g)
            + params.w_ho.t().dot(&g_pre_o);

        // x_t = concat(theta_{t-1}, y_{t-1}); the y slot is detached.
        let mut g_theta_prev = g_theta;
        for r in 0..p {
            g_theta_prev[r] += g_x[r];
        }
        g_theta_next = g_theta_prev;
        g_h_next = g_h_prev;
        g_c_next = g_c_prev;
    }
    Ok(grads)
}

/// The scalar function whose gradient [`unroll_backward`] computes:
/// the unrolled meta-loss with the LSTM's `y` inputs pinned to the
/// supplied constants (`y_inputs[t]` feeds step `t+1`). At the traced
/// `y` values it coincides with the meta-loss itself; gradient checks
/// difference this function.
pub fn detached_unroll_loss(
    params: &LstmParams,
    obj: &ObjectiveHandle,
    theta0: &[f64],
    cfg: &UnrollConfig,
    y_inputs: &[f64],
) -> Result<f64> {
    cfg.validate()?;
    let p = theta0.len();
    let mut state = LstmState::zeros(params.hidden_size);
    let mut theta = theta0.to_vec();
    let mut loss = 0.0;
    for t in 0..cfg.t_steps {
        let mut x = Array1::zeros(p + 1);
        for (xi, ti) in x.iter_mut().zip(&theta) {
            *xi = *ti;
        }
        x[p] = y_inputs[t];
        let (next, _) = lstm_cell_forward(params, &x, &state)?;
        let delta = params.w_out.dot(&next.h) + &params.b_out;
        for (ti, di) in theta.iter_mut().zip(delta.iter()) {
            *ti += di;
        }
        loss += cfg.weights[t] * obj.eval(&theta);
        state = next;
    }
    Ok(loss / cfg.t_steps as f64)
}

/// Dispatch on the configured gradient mode: parameter shift (LL) or
/// antithetic ES (LLES).
pub fn quantum_grads_for_step(
    obj: &ObjectiveHandle,
    theta_t: &[f64],
    cfg: &UnrollConfig,
) -> Vec<f64> {
    match cfg.grad_mode {
        GradMode::ParameterShift => parameter_shift_grad(obj, theta_t),
        GradMode::EvolutionStrategy => es_grad_antithetic(obj, theta_t, &cfg.es),
    }
}

/// Plain SGD over every LSTM weight: `v <- v - lr * g`.
pub fn sgd_step(params: &mut LstmParams, grads: &LstmParams, lr: f64) {
    let mut flat = params.flatten();
    let gflat = grads.flatten();
    for (v, g) in flat.iter_mut().zip(&gflat) {
        *v -= lr * g;
    }
    params.assign_from_flat(&flat);
}

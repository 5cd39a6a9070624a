//! Builders for the parameterized circuits used by the experiments,
//! plus evaluation of a circuit's expectation value.
//!
//! All ansätze share one layer pattern: a trainable `Ry` on every
//! qubit followed by a CNOT chain `(0,1), (1,2), ...`.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::grad::ExecutionCounter;
use crate::qsim::{
    amplitude_encode, Backend, Gate, KrausChannel, Observable, QuantumState,
};

/// An ordered gate list with `n_params` distinct trainable bindings.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    pub n_qubits: usize,
    pub gates: Vec<Gate>,
    pub n_params: usize,
}

impl Circuit {
    /// Apply every gate to `state` in order.
    pub fn apply_to(&self, state: &mut QuantumState, theta: &[f64]) -> Result<()> {
        if theta.len() != self.n_params {
            return Err(Error::ParamCount {
                expected: self.n_params,
                got: theta.len(),
            });
        }
        for gate in &self.gates {
            state.apply_gate(gate, theta)?;
        }
        Ok(())
    }
}

/// How classical features enter the circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoder {
    /// One fixed `Ry(x_{q mod input_dim})` per qubit, before the body.
    AngleRy,
    /// Features become the initial state's amplitudes.
    Amplitude,
}

/// A data-encoding circuit: encoder, trainable body, and the
/// observables read out after it.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedCircuit {
    pub encoder: Encoder,
    pub body: Circuit,
    pub input_dim: usize,
    pub observables: Vec<Observable>,
}

/// One trainable layer: `Ry(theta)` on each qubit, then the CNOT chain.
fn push_layer(gates: &mut Vec<Gate>, n_qubits: usize, param_offset: usize) {
    for q in 0..n_qubits {
        gates.push(Gate::ry_param(q, param_offset + q));
    }
    for q in 0..n_qubits - 1 {
        gates.push(Gate::Cnot {
            control: q,
            target: q + 1,
        });
    }
}

fn layered_body(n_qubits: usize, layers: usize) -> Circuit {
    let mut gates = Vec::new();
    for l in 0..layers {
        push_layer(&mut gates, n_qubits, l * n_qubits);
    }
    Circuit {
        n_qubits,
        gates,
        n_params: n_qubits * layers,
    }
}

/// Ground-state ansatz: fixed `Ry(pi/2)` on every qubit, then `L`
/// layers of the trainable pattern. `p = n_qubits * L`.
pub fn ground_state_ansatz(n_qubits: usize, layers: usize) -> Result<Circuit> {
    if n_qubits < 2 {
        return Err(Error::Config("ground-state ansatz needs >= 2 qubits".into()));
    }
    if layers < 1 {
        return Err(Error::Config("ground-state ansatz needs >= 1 layer".into()));
    }
    let mut gates: Vec<Gate> = (0..n_qubits).map(|q| Gate::ry_fixed(q, FRAC_PI_2)).collect();
    let body = layered_body(n_qubits, layers);
    gates.extend(body.gates);
    Ok(Circuit {
        n_qubits,
        gates,
        n_params: body.n_params,
    })
}

/// Binary-classification QNN: angle encoder for a 2-feature input,
/// 8 trainable layers, readout `|0><0|` on the last qubit.
pub fn binary_qnn(n_qubits: usize) -> Result<EncodedCircuit> {
    if n_qubits < 2 {
        return Err(Error::Config("binary QNN needs >= 2 qubits".into()));
    }
    Ok(EncodedCircuit {
        encoder: Encoder::AngleRy,
        body: layered_body(n_qubits, 8),
        input_dim: 2,
        observables: vec![Observable::ProjectorZeroOnQubit {
            n_qubits,
            qubit: n_qubits - 1,
        }],
    })
}

/// Multiclass MNIST QNN: amplitude encoder for 784 features on 10
/// qubits, 15 trainable layers (`p = 150`), readout `|0><0|` on the
/// last three qubits.
pub fn mnist_qnn() -> EncodedCircuit {
    let n_qubits = 10;
    EncodedCircuit {
        encoder: Encoder::Amplitude,
        body: layered_body(n_qubits, 15),
        input_dim: 784,
        observables: (7..10)
            .map(|qubit| Observable::ProjectorZeroOnQubit { n_qubits, qubit })
            .collect(),
    }
}

/// Two-qubit Bell-state preparation: `H` on qubit 0, `CNOT(0,1)`.
pub fn bell_circuit() -> Circuit {
    Circuit {
        n_qubits: 2,
        gates: vec![Gate::H { qubit: 0 }, Gate::Cnot { control: 0, target: 1 }],
        n_params: 0,
    }
}

fn run_circuit(
    circuit: &Circuit,
    theta: &[f64],
    initial: Option<QuantumState>,
    noise: Option<&KrausChannel>,
) -> Result<QuantumState> {
    let backend = if noise.is_some() {
        Backend::DensityMatrix
    } else {
        Backend::Statevector
    };
    let mut state = match initial {
        Some(s) => {
            if backend == Backend::DensityMatrix {
                s.to_density_matrix()
            } else {
                s
            }
        }
        None => QuantumState::zero_state(circuit.n_qubits, backend)?,
    };
    circuit.apply_to(&mut state, theta)?;
    if let Some(channel) = noise {
        state.apply_channel(channel)?;
    }
    Ok(state)
}

/// Evaluate `<obs>` for a plain circuit, charging one execution.
///
/// With noise, the run uses the density-matrix backend and applies the
/// channel once after the full circuit.
pub fn evaluate(
    circuit: &Circuit,
    theta: &[f64],
    obs: &Observable,
    noise: Option<&KrausChannel>,
    counter: &ExecutionCounter,
) -> Result<f64> {
    let state = run_circuit(circuit, theta, None, noise)?;
    counter.record_execution();
    state.expectation(obs)
}

/// Evaluate every observable of an encoded circuit for one input,
/// charging one execution.
pub fn evaluate_encoded(
    circuit: &EncodedCircuit,
    theta: &[f64],
    input: &[f64],
    noise: Option<&KrausChannel>,
    counter: &ExecutionCounter,
) -> Result<Vec<f64>> {
    let n = circuit.body.n_qubits;
    let initial = match circuit.encoder {
        Encoder::AngleRy => {
            if input.len() != circuit.input_dim {
                return Err(Error::Config(format!(
                    "encoder expects {} features, got {}",
                    circuit.input_dim,
                    input.len()
                )));
            }
            let mut state = QuantumState::zero_state(n, Backend::Statevector)?;
            for q in 0..n {
                state.apply_gate(&Gate::ry_fixed(q, input[q % input.len()]), &[])?;
            }
            state
        }
        Encoder::Amplitude => {
            if input.len() > circuit.input_dim {
                return Err(Error::Capacity {
                    len: input.len(),
                    n_qubits: n,
                });
            }
            amplitude_encode(input, n)?
        }
    };
    let state = run_circuit(&circuit.body, theta, Some(initial), noise)?;
    counter.record_execution();
    circuit
        .observables
        .iter()
        .map(|obs| state.expectation(obs))
        .collect()
}

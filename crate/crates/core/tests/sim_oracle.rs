//! Cross-checks of the statevector and density-matrix backends against
//! a brute-force dense-matrix simulator built from Kronecker products.

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lles_core::qsim::{
    AngleBinding, Backend, Gate, KrausChannel, Observable, QuantumState,
};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn kron(a: &[Vec<Complex64>], b: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
    let (ra, ca) = (a.len(), a[0].len());
    let (rb, cb) = (b.len(), b[0].len());
    let mut out = vec![vec![c(0.0, 0.0); ca * cb]; ra * rb];
    for i in 0..ra {
        for j in 0..ca {
            for k in 0..rb {
                for l in 0..cb {
                    out[i * rb + k][j * cb + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

fn identity(dim: usize) -> Vec<Vec<Complex64>> {
    let mut m = vec![vec![c(0.0, 0.0); dim]; dim];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = c(1.0, 0.0);
    }
    m
}

fn single_qubit(gate: &Gate, theta: f64) -> Vec<Vec<Complex64>> {
    let half = theta / 2.0;
    match gate {
        Gate::Rx { .. } => vec![
            vec![c(half.cos(), 0.0), c(0.0, -half.sin())],
            vec![c(0.0, -half.sin()), c(half.cos(), 0.0)],
        ],
        Gate::Ry { .. } => vec![
            vec![c(half.cos(), 0.0), c(-half.sin(), 0.0)],
            vec![c(half.sin(), 0.0), c(half.cos(), 0.0)],
        ],
        Gate::Rz { .. } => vec![
            vec![Complex64::from_polar(1.0, -half), c(0.0, 0.0)],
            vec![c(0.0, 0.0), Complex64::from_polar(1.0, half)],
        ],
        Gate::H { .. } => {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            vec![vec![c(s, 0.0), c(s, 0.0)], vec![c(s, 0.0), c(-s, 0.0)]]
        }
        Gate::Cnot { .. } => unreachable!(),
    }
}

/// Full 2^n x 2^n unitary for one gate; qubit 0 is the most
/// significant bit of the basis index.
fn full_matrix(gate: &Gate, theta: f64, n: usize) -> Vec<Vec<Complex64>> {
    match gate {
        Gate::Cnot { control, target } => {
            let dim = 1 << n;
            let mut m = vec![vec![c(0.0, 0.0); dim]; dim];
            for col in 0..dim {
                let cbit = (col >> (n - 1 - control)) & 1;
                let out = if cbit == 1 {
                    col ^ (1 << (n - 1 - target))
                } else {
                    col
                };
                m[out][col] = c(1.0, 0.0);
            }
            m
        }
        other => {
            let qubit = match other {
                Gate::Rx { qubit, .. }
                | Gate::Ry { qubit, .. }
                | Gate::Rz { qubit, .. }
                | Gate::H { qubit } => *qubit,
                Gate::Cnot { .. } => unreachable!(),
            };
            let u = single_qubit(other, theta);
            let left = identity(1 << qubit);
            let right = identity(1 << (n - 1 - qubit));
            kron(&kron(&left, &u), &right)
        }
    }
}

fn mat_vec(m: &[Vec<Complex64>], v: &[Complex64]) -> Vec<Complex64> {
    m.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

fn random_gate(rng: &mut ChaCha8Rng, n: usize) -> (Gate, f64) {
    let theta: f64 = rng.random_range(-std::f64::consts::TAU..std::f64::consts::TAU);
    let qubit = rng.random_range(0..n);
    // CNOT needs two distinct qubits.
    let kinds = if n >= 2 { 5 } else { 4 };
    match rng.random_range(0..kinds) {
        0 => (
            Gate::Rx {
                qubit,
                angle: AngleBinding::Fixed(theta),
            },
            theta,
        ),
        1 => (Gate::ry_fixed(qubit, theta), theta),
        2 => (
            Gate::Rz {
                qubit,
                angle: AngleBinding::Fixed(theta),
            },
            theta,
        ),
        3 => (Gate::H { qubit }, 0.0),
        _ => {
            let control = rng.random_range(0..n);
            let mut target = rng.random_range(0..n);
            while target == control {
                target = rng.random_range(0..n);
            }
            (Gate::Cnot { control, target }, 0.0)
        }
    }
}

#[test]
fn statevector_matches_kronecker_oracle() {
    for n in 1..=3usize {
        for trial in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(n as u64 * 1000 + trial);
            let mut state = QuantumState::zero_state(n, Backend::Statevector).unwrap();
            let mut reference: Vec<Complex64> =
                vec![c(0.0, 0.0); 1 << n];
            reference[0] = c(1.0, 0.0);
            for _ in 0..30 {
                let (gate, theta) = random_gate(&mut rng, n);
                state.apply_gate(&gate, &[]).unwrap();
                reference = mat_vec(&full_matrix(&gate, theta, n), &reference);
            }
            let amps = state.amplitudes().unwrap();
            for (a, r) in amps.iter().zip(&reference) {
                assert!((a - r).norm() < 1e-12, "n={n} trial={trial}: {a} vs {r}");
            }
        }
    }
}

#[test]
fn density_backend_matches_statevector() {
    for n in 1..=3usize {
        for trial in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(77 + n as u64 * 100 + trial);
            let mut sv = QuantumState::zero_state(n, Backend::Statevector).unwrap();
            let mut dm = QuantumState::zero_state(n, Backend::DensityMatrix).unwrap();
            for _ in 0..25 {
                let (gate, _) = random_gate(&mut rng, n);
                sv.apply_gate(&gate, &[]).unwrap();
                dm.apply_gate(&gate, &[]).unwrap();
            }
            for (p, q) in sv.probabilities().iter().zip(dm.probabilities()) {
                assert!((p - q).abs() < 1e-9);
            }
            for obs in [
                Observable::TensorPauliZ { n_qubits: n },
                Observable::ProjectorAllZeros { n_qubits: n },
                Observable::ProjectorZeroOnQubit {
                    n_qubits: n,
                    qubit: n - 1,
                },
            ] {
                let a = sv.expectation(&obs).unwrap();
                let b = dm.expectation(&obs).unwrap();
                assert!((a - b).abs() < 1e-9, "{obs:?}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn norm_is_preserved_over_long_circuits() {
    let n = 4;
    let mut rng = ChaCha8Rng::seed_from_u64(12345);
    let mut state = QuantumState::zero_state(n, Backend::Statevector).unwrap();
    for _ in 0..10_000 {
        let (gate, _) = random_gate(&mut rng, n);
        state.apply_gate(&gate, &[]).unwrap();
    }
    let norm: f64 = state.probabilities().iter().sum();
    assert!((norm - 1.0).abs() < 1e-9, "norm drifted to {norm}");
}

#[test]
fn bell_distribution_closed_form_over_lambda_grid() {
    for step in 0..=20 {
        let lambda = step as f64 / 20.0;
        let mut state = QuantumState::zero_state(2, Backend::DensityMatrix).unwrap();
        state.apply_gate(&Gate::H { qubit: 0 }, &[]).unwrap();
        state
            .apply_gate(&Gate::Cnot { control: 0, target: 1 }, &[])
            .unwrap();
        let channel = KrausChannel::correlated_amplitude_damping(2, lambda).unwrap();
        state.apply_channel(&channel).unwrap();
        let probs = state.probabilities();
        assert!((probs[0] - (0.5 + lambda / 2.0)).abs() < 1e-10);
        assert!(probs[1].abs() < 1e-10);
        assert!(probs[2].abs() < 1e-10);
        assert!((probs[3] - 0.5 * (1.0 - lambda)).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn channel_preserves_trace_on_random_states(
        seed in 0u64..1_000_000,
        lambda in 0.0f64..=1.0,
        n in 1usize..=3,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = QuantumState::zero_state(n, Backend::DensityMatrix).unwrap();
        for _ in 0..15 {
            let (gate, _) = random_gate(&mut rng, n);
            state.apply_gate(&gate, &[]).unwrap();
        }
        let channel = KrausChannel::correlated_amplitude_damping(n, lambda).unwrap();
        state.apply_channel(&channel).unwrap();
        prop_assert!((state.trace() - 1.0).abs() < 1e-10);
        let probs = state.probabilities();
        prop_assert!(probs.iter().all(|&p| p >= -1e-12));
    }

    #[test]
    fn kraus_operators_are_complete(lambda in 0.0f64..=1.0, n in 1usize..=3) {
        let channel = KrausChannel::correlated_amplitude_damping(n, lambda).unwrap();
        let mats = channel.kraus_matrices();
        let dim = 1 << n;
        // Sum_k K_k^dagger K_k == I.
        for i in 0..dim {
            for j in 0..dim {
                let mut acc = c(0.0, 0.0);
                for k in &mats {
                    for r in 0..dim {
                        acc += k[r * dim + i].conj() * k[r * dim + j];
                    }
                }
                let expect = if i == j { 1.0 } else { 0.0 };
                prop_assert!((acc - c(expect, 0.0)).norm() < 1e-12);
            }
        }
    }
}

//! Dense simulation of n-qubit states.
//!
//! Two backends are supported: a pure statevector of `2^n` complex
//! amplitudes, and a `2^n x 2^n` density matrix required for Kraus
//! noise channels. Qubit 0 is the most significant bit of the
//! computational-basis index, so `|10>` on two qubits has index 2.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest supported register. A 14-qubit density matrix is ~4 GB of
/// complex doubles; the experiments in this crate need at most 10.
pub const MAX_QUBITS: usize = 14;

const C_ZERO: Complex64 = Complex64::new(0.0, 0.0);
const C_ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Statevector,
    DensityMatrix,
}

/// A rotation angle that is either fixed at circuit-build time or
/// bound to an index into the trainable parameter vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AngleBinding {
    Fixed(f64),
    Param(usize),
}

impl AngleBinding {
    fn resolve(&self, theta: &[f64]) -> Result<f64> {
        match *self {
            AngleBinding::Fixed(a) => Ok(a),
            AngleBinding::Param(i) => theta.get(i).copied().ok_or(Error::ParamIndex {
                index: i,
                len: theta.len(),
            }),
        }
    }
}

/// Gate set: Pauli rotations with the `exp(-i (theta/2) P)` convention,
/// Hadamard, and CNOT.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    Rx { qubit: usize, angle: AngleBinding },
    Ry { qubit: usize, angle: AngleBinding },
    Rz { qubit: usize, angle: AngleBinding },
    H { qubit: usize },
    Cnot { control: usize, target: usize },
}

impl Gate {
    pub fn ry_fixed(qubit: usize, angle: f64) -> Self {
        Gate::Ry {
            qubit,
            angle: AngleBinding::Fixed(angle),
        }
    }

    pub fn ry_param(qubit: usize, index: usize) -> Self {
        Gate::Ry {
            qubit,
            angle: AngleBinding::Param(index),
        }
    }

    /// The trainable parameter index this gate is bound to, if any.
    pub fn param_index(&self) -> Option<usize> {
        match self {
            Gate::Rx { angle, .. } | Gate::Ry { angle, .. } | Gate::Rz { angle, .. } => {
                match angle {
                    AngleBinding::Param(i) => Some(*i),
                    AngleBinding::Fixed(_) => None,
                }
            }
            _ => None,
        }
    }

    fn check_targets(&self, n_qubits: usize) -> Result<()> {
        let bad = |target| Error::TargetOutOfRange { target, n_qubits };
        match *self {
            Gate::Rx { qubit, .. }
            | Gate::Ry { qubit, .. }
            | Gate::Rz { qubit, .. }
            | Gate::H { qubit } => {
                if qubit >= n_qubits {
                    return Err(bad(qubit));
                }
            }
            Gate::Cnot { control, target } => {
                if control >= n_qubits {
                    return Err(bad(control));
                }
                if target >= n_qubits {
                    return Err(bad(target));
                }
                if control == target {
                    return Err(Error::Config(
                        "CNOT control and target must be distinct".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// 2x2 unitary for a single-qubit gate.
fn single_qubit_matrix(gate: &Gate, theta: &[f64]) -> Result<[[Complex64; 2]; 2]> {
    let m = match gate {
        Gate::Rx { angle, .. } => {
            let half = angle.resolve(theta)? / 2.0;
            let (c, s) = (half.cos(), half.sin());
            [
                [Complex64::new(c, 0.0), Complex64::new(0.0, -s)],
                [Complex64::new(0.0, -s), Complex64::new(c, 0.0)],
            ]
        }
        Gate::Ry { angle, .. } => {
            let half = angle.resolve(theta)? / 2.0;
            let (c, s) = (half.cos(), half.sin());
            [
                [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
                [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
            ]
        }
        Gate::Rz { angle, .. } => {
            let half = angle.resolve(theta)? / 2.0;
            [
                [Complex64::from_polar(1.0, -half), C_ZERO],
                [C_ZERO, Complex64::from_polar(1.0, half)],
            ]
        }
        Gate::H { .. } => {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            [
                [Complex64::new(s, 0.0), Complex64::new(s, 0.0)],
                [Complex64::new(s, 0.0), Complex64::new(-s, 0.0)],
            ]
        }
        Gate::Cnot { .. } => unreachable!("CNOT has no 2x2 matrix"),
    };
    Ok(m)
}

/// Observables used by the experiments. All are diagonal in the
/// computational basis, so expectations never materialize a `2^n x 2^n`
/// operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Observable {
    /// `Z (x) Z (x) ... (x) Z` over all qubits; eigenvalues are the
    /// basis-state parities.
    TensorPauliZ { n_qubits: usize },
    /// `|0><0|` on a single qubit.
    ProjectorZeroOnQubit { n_qubits: usize, qubit: usize },
    /// `|0...0><0...0|`.
    ProjectorAllZeros { n_qubits: usize },
}

impl Observable {
    pub fn n_qubits(&self) -> usize {
        match *self {
            Observable::TensorPauliZ { n_qubits }
            | Observable::ProjectorZeroOnQubit { n_qubits, .. }
            | Observable::ProjectorAllZeros { n_qubits } => n_qubits,
        }
    }

    /// Diagonal entry of the operator at a basis index.
    pub fn diagonal(&self, index: usize) -> f64 {
        match *self {
            Observable::TensorPauliZ { .. } => {
                if index.count_ones() % 2 == 0 {
                    1.0
                } else {
                    -1.0
                }
            }
            Observable::ProjectorZeroOnQubit { n_qubits, qubit } => {
                if (index >> (n_qubits - 1 - qubit)) & 1 == 0 {
                    1.0
                } else {
                    0.0
                }
            }
            Observable::ProjectorAllZeros { .. } => {
                if index == 0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    CorrelatedAmplitudeDamping,
}

/// A Kraus channel acting on the density-matrix backend.
///
/// The correlated amplitude-damping channel decays the all-ones state
/// jointly to the all-zeros state: `K1 = sqrt(lambda) |0...0><1...1|`
/// and `K0 = I - (1 - sqrt(1 - lambda)) |1...1><1...1|`. On the Bell
/// state this yields `P(00) = 0.5 + lambda/2` and
/// `P(11) = 0.5 (1 - lambda)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrausChannel {
    pub kind: ChannelKind,
    pub lambda: f64,
    pub n_qubits: usize,
}

impl KrausChannel {
    pub fn correlated_amplitude_damping(n_qubits: usize, lambda: f64) -> Result<Self> {
        check_qubit_count(n_qubits)?;
        if !(0.0..=1.0).contains(&lambda) || !lambda.is_finite() {
            return Err(Error::NoiseStrength(lambda));
        }
        Ok(KrausChannel {
            kind: ChannelKind::CorrelatedAmplitudeDamping,
            lambda,
            n_qubits,
        })
    }

    /// Dense Kraus operators (row-major `d x d` each), for verification
    /// against the structured in-place application.
    pub fn kraus_matrices(&self) -> Vec<Vec<Complex64>> {
        let d = 1usize << self.n_qubits;
        let mut k0 = vec![C_ZERO; d * d];
        for i in 0..d {
            k0[i * d + i] = C_ONE;
        }
        k0[(d - 1) * d + (d - 1)] = Complex64::new((1.0 - self.lambda).sqrt(), 0.0);
        let mut k1 = vec![C_ZERO; d * d];
        k1[d - 1] = Complex64::new(self.lambda.sqrt(), 0.0); // entry (0, d-1)
        vec![k0, k1]
    }
}

fn check_qubit_count(n_qubits: usize) -> Result<()> {
    if (1..=MAX_QUBITS).contains(&n_qubits) {
        Ok(())
    } else {
        Err(Error::QubitCount(n_qubits))
    }
}

#[derive(Debug, Clone)]
enum StateData {
    Statevector(Vec<Complex64>),
    /// Row-major `d x d` matrix.
    DensityMatrix(Vec<Complex64>),
}

/// A dense n-qubit state. Gate and channel application mutate in place
/// behind `&mut self`; clone first if the prior state is still needed.
#[derive(Debug, Clone)]
pub struct QuantumState {
    n_qubits: usize,
    data: StateData,
}

impl QuantumState {
    /// `|0...0>` on the chosen backend.
    pub fn zero_state(n_qubits: usize, backend: Backend) -> Result<Self> {
        check_qubit_count(n_qubits)?;
        let dim = 1usize << n_qubits;
        let data = match backend {
            Backend::Statevector => {
                let mut a = vec![C_ZERO; dim];
                a[0] = C_ONE;
                StateData::Statevector(a)
            }
            Backend::DensityMatrix => {
                let mut m = vec![C_ZERO; dim * dim];
                m[0] = C_ONE;
                StateData::DensityMatrix(m)
            }
        };
        Ok(QuantumState { n_qubits, data })
    }

    /// Build a statevector from explicit amplitudes (must have length
    /// `2^n` and unit norm within 1e-10).
    pub fn from_amplitudes(n_qubits: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        check_qubit_count(n_qubits)?;
        let dim = 1usize << n_qubits;
        if amplitudes.len() != dim {
            return Err(Error::Capacity {
                len: amplitudes.len(),
                n_qubits,
            });
        }
        let norm2: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm2 - 1.0).abs() > 1e-10 {
            return Err(Error::Config(format!(
                "amplitudes are not normalized: |psi|^2 = {norm2}"
            )));
        }
        Ok(QuantumState {
            n_qubits,
            data: StateData::Statevector(amplitudes),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1usize << self.n_qubits
    }

    pub fn backend(&self) -> Backend {
        match self.data {
            StateData::Statevector(_) => Backend::Statevector,
            StateData::DensityMatrix(_) => Backend::DensityMatrix,
        }
    }

    pub fn amplitudes(&self) -> Option<&[Complex64]> {
        match &self.data {
            StateData::Statevector(a) => Some(a),
            StateData::DensityMatrix(_) => None,
        }
    }

    pub fn density(&self) -> Option<&[Complex64]> {
        match &self.data {
            StateData::Statevector(_) => None,
            StateData::DensityMatrix(m) => Some(m),
        }
    }

    /// Promote a statevector to `|psi><psi|`; a density matrix is
    /// returned unchanged.
    pub fn to_density_matrix(&self) -> QuantumState {
        match &self.data {
            StateData::DensityMatrix(_) => self.clone(),
            StateData::Statevector(a) => {
                let d = a.len();
                let mut m = vec![C_ZERO; d * d];
                for r in 0..d {
                    for c in 0..d {
                        m[r * d + c] = a[r] * a[c].conj();
                    }
                }
                QuantumState {
                    n_qubits: self.n_qubits,
                    data: StateData::DensityMatrix(m),
                }
            }
        }
    }

    /// Apply one gate; `theta` resolves any bound parameter.
    pub fn apply_gate(&mut self, gate: &Gate, theta: &[f64]) -> Result<()> {
        gate.check_targets(self.n_qubits)?;
        let n = self.n_qubits;
        match gate {
            Gate::Cnot { control, target } => {
                let cmask = 1usize << (n - 1 - control);
                let tmask = 1usize << (n - 1 - target);
                match &mut self.data {
                    StateData::Statevector(a) => cnot_vec(a, cmask, tmask),
                    StateData::DensityMatrix(m) => cnot_dm(m, cmask, tmask),
                }
            }
            _ => {
                let u = single_qubit_matrix(gate, theta)?;
                let qubit = match gate {
                    Gate::Rx { qubit, .. }
                    | Gate::Ry { qubit, .. }
                    | Gate::Rz { qubit, .. }
                    | Gate::H { qubit } => *qubit,
                    Gate::Cnot { .. } => unreachable!(),
                };
                let stride = 1usize << (n - 1 - qubit);
                match &mut self.data {
                    StateData::Statevector(a) => apply_1q_vec(a, stride, &u),
                    StateData::DensityMatrix(m) => apply_1q_dm(m, stride, &u),
                }
            }
        }
        Ok(())
    }

    /// Apply a Kraus channel; requires the density-matrix backend.
    pub fn apply_channel(&mut self, channel: &KrausChannel) -> Result<()> {
        if channel.n_qubits != self.n_qubits {
            return Err(Error::ShapeMismatch {
                state: self.n_qubits,
                observable: channel.n_qubits,
            });
        }
        let rho = match &mut self.data {
            StateData::Statevector(_) => {
                return Err(Error::BackendMismatch {
                    required: Backend::DensityMatrix,
                })
            }
            StateData::DensityMatrix(m) => m,
        };
        match channel.kind {
            ChannelKind::CorrelatedAmplitudeDamping => {
                // K0 scales the last row and column by sqrt(1-lambda)
                // (the corner by 1-lambda); K1 moves lambda of the
                // all-ones population onto |0...0><0...0|.
                let d = 1usize << channel.n_qubits;
                let e = d - 1;
                let survive = (1.0 - channel.lambda).sqrt();
                let decayed = channel.lambda * rho[e * d + e].re;
                for c in 0..d {
                    rho[e * d + c] *= survive;
                }
                for r in 0..d {
                    rho[r * d + e] *= survive;
                }
                rho[0] += Complex64::new(decayed, 0.0);
            }
        }
        Ok(())
    }

    /// `<H>`: `<psi|H|psi>` or `Tr[H rho]`. All supported observables
    /// are diagonal, so this is a weighted sum of probabilities.
    pub fn expectation(&self, obs: &Observable) -> Result<f64> {
        if obs.n_qubits() != self.n_qubits {
            return Err(Error::ShapeMismatch {
                state: self.n_qubits,
                observable: obs.n_qubits(),
            });
        }
        let value = self
            .probabilities()
            .iter()
            .enumerate()
            .map(|(i, p)| obs.diagonal(i) * p)
            .sum();
        Ok(value)
    }

    /// Computational-basis outcome probabilities (`|a_i|^2` or `rho_ii`).
    pub fn probabilities(&self) -> Vec<f64> {
        match &self.data {
            StateData::Statevector(a) => a.iter().map(|a| a.norm_sqr()).collect(),
            StateData::DensityMatrix(m) => {
                let d = 1usize << self.n_qubits;
                (0..d).map(|i| m[i * d + i].re).collect()
            }
        }
    }

    /// Squared norm (statevector) or trace (density matrix).
    pub fn trace(&self) -> f64 {
        self.probabilities().iter().sum()
    }
}

/// Embed a real vector as state amplitudes: zero-pad to `2^n`, then
/// L2-normalize.
pub fn amplitude_encode(x: &[f64], n_qubits: usize) -> Result<QuantumState> {
    check_qubit_count(n_qubits)?;
    let dim = 1usize << n_qubits;
    if x.len() > dim {
        return Err(Error::Capacity {
            len: x.len(),
            n_qubits,
        });
    }
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::ZeroVector);
    }
    let mut amps = vec![C_ZERO; dim];
    for (a, v) in amps.iter_mut().zip(x) {
        *a = Complex64::new(v / norm, 0.0);
    }
    Ok(QuantumState {
        n_qubits,
        data: StateData::Statevector(amps),
    })
}

fn apply_1q_vec(amps: &mut [Complex64], stride: usize, u: &[[Complex64; 2]; 2]) {
    let dim = amps.len();
    let mut base = 0;
    while base < dim {
        for i in base..base + stride {
            let a0 = amps[i];
            let a1 = amps[i + stride];
            amps[i] = u[0][0] * a0 + u[0][1] * a1;
            amps[i + stride] = u[1][0] * a0 + u[1][1] * a1;
        }
        base += 2 * stride;
    }
}

fn cnot_vec(amps: &mut [Complex64], cmask: usize, tmask: usize) {
    for i in 0..amps.len() {
        if i & cmask != 0 && i & tmask == 0 {
            amps.swap(i, i | tmask);
        }
    }
}

/// `rho -> U rho U^dag` for a single-qubit `U`: apply `U` along the row
/// index of every column, then `U^dag` along the column index of every
/// row.
fn apply_1q_dm(rho: &mut [Complex64], stride: usize, u: &[[Complex64; 2]; 2]) {
    let d = (rho.len() as f64).sqrt() as usize;
    // Left: rows.
    let mut base = 0;
    while base < d {
        for r in base..base + stride {
            for c in 0..d {
                let i0 = r * d + c;
                let i1 = (r + stride) * d + c;
                let a0 = rho[i0];
                let a1 = rho[i1];
                rho[i0] = u[0][0] * a0 + u[0][1] * a1;
                rho[i1] = u[1][0] * a0 + u[1][1] * a1;
            }
        }
        base += 2 * stride;
    }
    // Right: columns, with conjugated entries.
    let mut base = 0;
    while base < d {
        for c in base..base + stride {
            for r in 0..d {
                let i0 = r * d + c;
                let i1 = r * d + c + stride;
                let a0 = rho[i0];
                let a1 = rho[i1];
                rho[i0] = u[0][0].conj() * a0 + u[0][1].conj() * a1;
                rho[i1] = u[1][0].conj() * a0 + u[1][1].conj() * a1;
            }
        }
        base += 2 * stride;
    }
}

fn cnot_dm(rho: &mut [Complex64], cmask: usize, tmask: usize) {
    let d = (rho.len() as f64).sqrt() as usize;
    let flip = |i: usize| if i & cmask != 0 { i ^ tmask } else { i };
    for r in 0..d {
        if r & cmask != 0 && r & tmask == 0 {
            let r2 = r | tmask;
            for c in 0..d {
                rho.swap(r * d + c, r2 * d + c);
            }
        }
    }
    for c in 0..d {
        if c & cmask != 0 && c & tmask == 0 {
            let c2 = flip(c);
            for r in 0..d {
                rho.swap(r * d + c, r * d + c2);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, PI};

    fn bell_state() -> QuantumState {
        let mut s = QuantumState::zero_state(2, Backend::Statevector).unwrap();
        s.apply_gate(&Gate::H { qubit: 0 }, &[]).unwrap();
        s.apply_gate(&Gate::Cnot { control: 0, target: 1 }, &[]).unwrap();
        s
    }

    #[test]
    fn zero_state_definitions() {
        let s = QuantumState::zero_state(1, Backend::Statevector).unwrap();
        assert_eq!(s.amplitudes().unwrap(), &[C_ONE, C_ZERO]);

        let s = QuantumState::zero_state(2, Backend::Statevector).unwrap();
        assert_eq!(s.amplitudes().unwrap()[0], C_ONE);
        assert!(s.amplitudes().unwrap()[1..].iter().all(|a| *a == C_ZERO));

        let s = QuantumState::zero_state(2, Backend::DensityMatrix).unwrap();
        let m = s.density().unwrap();
        assert_eq!(m[0], C_ONE);
        assert!(m[1..].iter().all(|a| *a == C_ZERO));
    }

    #[test]
    fn zero_state_rejects_bad_counts() {
        assert!(matches!(
            QuantumState::zero_state(0, Backend::Statevector),
            Err(Error::QubitCount(0))
        ));
        assert!(QuantumState::zero_state(15, Backend::Statevector).is_err());
    }

    #[test]
    fn ry_half_pi_makes_plus_state() {
        let mut s = QuantumState::zero_state(1, Backend::Statevector).unwrap();
        s.apply_gate(&Gate::ry_fixed(0, FRAC_PI_2), &[]).unwrap();
        let a = s.amplitudes().unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(a[0].re, r, epsilon = 1e-12);
        assert_abs_diff_eq!(a[1].re, r, epsilon = 1e-12);
    }

    #[test]
    fn cnot_truth_table() {
        // |10> -> |11>; qubit 0 is the MSB, so |10> has index 2.
        let mut s = QuantumState::zero_state(2, Backend::Statevector).unwrap();
        s.apply_gate(&Gate::ry_fixed(0, PI), &[]).unwrap();
        s.apply_gate(&Gate::Cnot { control: 0, target: 1 }, &[]).unwrap();
        let p = s.probabilities();
        assert_abs_diff_eq!(p[3], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn h_cnot_prepares_bell_state() {
        let p = bell_state().probabilities();
        assert_abs_diff_eq!(p[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p[2], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p[3], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn gate_target_out_of_range() {
        let mut s = QuantumState::zero_state(2, Backend::Statevector).unwrap();
        assert!(s.apply_gate(&Gate::H { qubit: 2 }, &[]).is_err());
        assert!(s
            .apply_gate(&Gate::Cnot { control: 1, target: 1 }, &[])
            .is_err());
    }

    #[test]
    fn unbound_param_is_an_error() {
        let mut s = QuantumState::zero_state(1, Backend::Statevector).unwrap();
        assert!(matches!(
            s.apply_gate(&Gate::ry_param(0, 3), &[0.1]),
            Err(Error::ParamIndex { index: 3, len: 1 })
        ));
    }

    #[test]
    fn expectation_z_eigenstates() {
        let s = QuantumState::zero_state(1, Backend::Statevector).unwrap();
        let z = Observable::TensorPauliZ { n_qubits: 1 };
        assert_abs_diff_eq!(s.expectation(&z).unwrap(), 1.0, epsilon = 1e-12);

        // |01> has odd parity.
        let mut s = QuantumState::zero_state(2, Backend::Statevector).unwrap();
        s.apply_gate(&Gate::ry_fixed(1, PI), &[]).unwrap();
        let zz = Observable::TensorPauliZ { n_qubits: 2 };
        assert_abs_diff_eq!(s.expectation(&zz).unwrap(), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn expectation_after_rotation_is_cos_theta() {
        let mut s = QuantumState::zero_state(1, Backend::Statevector).unwrap();
        s.apply_gate(&Gate::ry_fixed(0, FRAC_PI_3), &[]).unwrap();
        let z = Observable::TensorPauliZ { n_qubits: 1 };
        assert_abs_diff_eq!(s.expectation(&z).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn expectation_dimension_mismatch() {
        let s = QuantumState::zero_state(2, Backend::Statevector).unwrap();
        let z = Observable::TensorPauliZ { n_qubits: 3 };
        assert!(s.expectation(&z).is_err());
    }

    #[test]
    fn probabilities_of_diagonal_density_matrix() {
        let mut s = bell_state().to_density_matrix();
        let ch = KrausChannel::correlated_amplitude_damping(2, 0.2).unwrap();
        s.apply_channel(&ch).unwrap();
        let p = s.probabilities();
        assert_abs_diff_eq!(p[0], 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(p[3], 0.4, epsilon = 1e-12);
    }

    #[test]
    fn channel_preserves_bell_state_at_lambda_zero() {
        let mut s = bell_state().to_density_matrix();
        let ch = KrausChannel::correlated_amplitude_damping(2, 0.0).unwrap();
        s.apply_channel(&ch).unwrap();
        let p = s.probabilities();
        assert_abs_diff_eq!(p[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p[3], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn channel_full_decay() {
        let mut s = bell_state().to_density_matrix();
        let ch = KrausChannel::correlated_amplitude_damping(2, 1.0).unwrap();
        s.apply_channel(&ch).unwrap();
        let p = s.probabilities();
        assert_abs_diff_eq!(p[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p[3], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn channel_rejects_statevector_backend() {
        let mut s = bell_state();
        let ch = KrausChannel::correlated_amplitude_damping(2, 0.5).unwrap();
        assert!(matches!(
            s.apply_channel(&ch),
            Err(Error::BackendMismatch { .. })
        ));
    }

    #[test]
    fn channel_rejects_bad_lambda() {
        assert!(KrausChannel::correlated_amplitude_damping(2, -0.1).is_err());
        assert!(KrausChannel::correlated_amplitude_damping(2, 1.1).is_err());
    }

    #[test]
    fn kraus_completeness() {
        for lambda in [0.0, 0.3, 0.7, 1.0] {
            let ch = KrausChannel::correlated_amplitude_damping(3, lambda).unwrap();
            let ks = ch.kraus_matrices();
            let d = 8;
            // sum_k K^dag K elementwise.
            let mut sum = vec![C_ZERO; d * d];
            for k in &ks {
                for r in 0..d {
                    for c in 0..d {
                        let mut acc = C_ZERO;
                        for m in 0..d {
                            acc += k[m * d + r].conj() * k[m * d + c];
                        }
                        sum[r * d + c] += acc;
                    }
                }
            }
            for r in 0..d {
                for c in 0..d {
                    let expect = if r == c { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(sum[r * d + c].re, expect, epsilon = 1e-10);
                    assert_abs_diff_eq!(sum[r * d + c].im, 0.0, epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn amplitude_encode_basics() {
        let s = amplitude_encode(&[1.0, 0.0, 0.0, 0.0], 2).unwrap();
        assert_eq!(s.amplitudes().unwrap()[0], C_ONE);

        let s = amplitude_encode(&[3.0, 4.0], 1).unwrap();
        let a = s.amplitudes().unwrap();
        assert_abs_diff_eq!(a[0].re, 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(a[1].re, 0.8, epsilon = 1e-12);
    }

    #[test]
    fn amplitude_encode_pads_and_normalizes() {
        let x = vec![1.0; 784];
        let s = amplitude_encode(&x, 10).unwrap();
        let a = s.amplitudes().unwrap();
        for i in 0..784 {
            assert_abs_diff_eq!(a[i].re, 1.0 / 28.0, epsilon = 1e-12);
        }
        for i in 784..1024 {
            assert_eq!(a[i], C_ZERO);
        }
        assert_abs_diff_eq!(s.trace(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn amplitude_encode_errors() {
        assert!(matches!(
            amplitude_encode(&[0.0, 0.0], 1),
            Err(Error::ZeroVector)
        ));
        assert!(matches!(
            amplitude_encode(&[1.0, 2.0, 3.0], 1),
            Err(Error::Capacity { .. })
        ));
    }
}

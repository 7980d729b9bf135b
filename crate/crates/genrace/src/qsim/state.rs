//! Statevector representation and in-place gate kernels.

use num_complex::Complex64;

use super::QsimError;

/// Supported gate set: parameterized rotations, the two-qubit `XX` coupling
/// `exp(-i theta/2 X (x) X)`, and the fixed entanglers CNOT and CZ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Gate {
    Rx { qubit: usize, angle: f64 },
    Ry { qubit: usize, angle: f64 },
    Rz { qubit: usize, angle: f64 },
    Xx { a: usize, b: usize, angle: f64 },
    Cnot { control: usize, target: usize },
    Cz { a: usize, b: usize },
}

/// A pure `n`-qubit state as `2^n` complex amplitudes.
///
/// Basis index bit `i` is qubit `i`; index `w` corresponds to the bitstring
/// whose packed word is `w`. Gates preserve the norm to within rounding.
#[derive(Clone, Debug)]
pub struct Statevector {
    amps: Vec<Complex64>,
    n_qubits: usize,
}

impl Statevector {
    /// `|0...0>` on `n_qubits`.
    pub fn zero_state(n_qubits: usize) -> Result<Self, QsimError> {
        if n_qubits == 0 || n_qubits > super::SIMULATION_CAP {
            return Err(QsimError::SimulationCapExceeded {
                n_qubits,
                cap: super::SIMULATION_CAP,
            });
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(Self { amps, n_qubits })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Born-rule probability of basis state `index`.
    pub fn probability(&self, index: u64) -> f64 {
        self.amps[index as usize].norm_sqr()
    }

    /// Full Born-rule probability table over all `2^n` outcomes.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    fn check_qubit(&self, qubit: usize) -> Result<(), QsimError> {
        if qubit >= self.n_qubits {
            return Err(QsimError::QubitOutOfRange {
                qubit,
                n_qubits: self.n_qubits,
            });
        }
        Ok(())
    }

    /// Applies the 2x2 unitary `[[u00, u01], [u10, u11]]` on one qubit.
    fn apply_single(&mut self, qubit: usize, u: [Complex64; 4]) {
        let stride = 1usize << qubit;
        let dim = self.amps.len();
        let mut base = 0;
        while base < dim {
            for low in base..base + stride {
                let high = low + stride;
                let a0 = self.amps[low];
                let a1 = self.amps[high];
                self.amps[low] = u[0] * a0 + u[1] * a1;
                self.amps[high] = u[2] * a0 + u[3] * a1;
            }
            base += stride << 1;
        }
    }

    fn apply_rx(&mut self, qubit: usize, angle: f64) {
        let (s, c) = (angle / 2.0).sin_cos();
        let m_is = Complex64::new(0.0, -s);
        self.apply_single(
            qubit,
            [
                Complex64::new(c, 0.0),
                m_is,
                m_is,
                Complex64::new(c, 0.0),
            ],
        );
    }

    fn apply_ry(&mut self, qubit: usize, angle: f64) {
        let (s, c) = (angle / 2.0).sin_cos();
        self.apply_single(
            qubit,
            [
                Complex64::new(c, 0.0),
                Complex64::new(-s, 0.0),
                Complex64::new(s, 0.0),
                Complex64::new(c, 0.0),
            ],
        );
    }

    fn apply_rz(&mut self, qubit: usize, angle: f64) {
        let phase0 = Complex64::from_polar(1.0, -angle / 2.0);
        let phase1 = Complex64::from_polar(1.0, angle / 2.0);
        let stride = 1usize << qubit;
        let dim = self.amps.len();
        let mut base = 0;
        while base < dim {
            for low in base..base + stride {
                self.amps[low] *= phase0;
                self.amps[low + stride] *= phase1;
            }
            base += stride << 1;
        }
    }

    /// `exp(-i angle/2 X(x)X)`: couples `|00> <-> |11>` and `|01> <-> |10>`.
    fn apply_xx(&mut self, a: usize, b: usize, angle: f64) {
        let (s, c) = (angle / 2.0).sin_cos();
        let cos = Complex64::new(c, 0.0);
        let m_is = Complex64::new(0.0, -s);
        let mask_a = 1usize << a;
        let mask_b = 1usize << b;
        for index in 0..self.amps.len() {
            if index & (mask_a | mask_b) != 0 {
                continue;
            }
            let i00 = index;
            let i01 = index | mask_a;
            let i10 = index | mask_b;
            let i11 = index | mask_a | mask_b;
            let (a00, a01, a10, a11) =
                (self.amps[i00], self.amps[i01], self.amps[i10], self.amps[i11]);
            self.amps[i00] = cos * a00 + m_is * a11;
            self.amps[i11] = m_is * a00 + cos * a11;
            self.amps[i01] = cos * a01 + m_is * a10;
            self.amps[i10] = m_is * a01 + cos * a10;
        }
    }

    fn apply_cnot(&mut self, control: usize, target: usize) {
        let mask_c = 1usize << control;
        let mask_t = 1usize << target;
        for index in 0..self.amps.len() {
            // Visit each swap pair once, from its target-0 side.
            if index & mask_c != 0 && index & mask_t == 0 {
                self.amps.swap(index, index | mask_t);
            }
        }
    }

    fn apply_cz(&mut self, a: usize, b: usize) {
        let mask = (1usize << a) | (1usize << b);
        for index in 0..self.amps.len() {
            if index & mask == mask {
                self.amps[index] = -self.amps[index];
            }
        }
    }
}

/// Applies one gate in place, validating qubit indices.
pub fn apply_gate(state: &mut Statevector, gate: &Gate) -> Result<(), QsimError> {
    match *gate {
        Gate::Rx { qubit, angle } => {
            state.check_qubit(qubit)?;
            state.apply_rx(qubit, angle);
        }
        Gate::Ry { qubit, angle } => {
            state.check_qubit(qubit)?;
            state.apply_ry(qubit, angle);
        }
        Gate::Rz { qubit, angle } => {
            state.check_qubit(qubit)?;
            state.apply_rz(qubit, angle);
        }
        Gate::Xx { a, b, angle } => {
            state.check_qubit(a)?;
            state.check_qubit(b)?;
            if a == b {
                return Err(QsimError::DuplicateQubit(a));
            }
            state.apply_xx(a, b, angle);
        }
        Gate::Cnot { control, target } => {
            state.check_qubit(control)?;
            state.check_qubit(target)?;
            if control == target {
                return Err(QsimError::DuplicateQubit(control));
            }
            state.apply_cnot(control, target);
        }
        Gate::Cz { a, b } => {
            state.check_qubit(a)?;
            state.check_qubit(b)?;
            if a == b {
                return Err(QsimError::DuplicateQubit(a));
            }
            state.apply_cz(a, b);
        }
    }
    Ok(())
}

//! Layered line-topology circuit layout for the Born machine.

use std::str::FromStr;

use super::state::Gate;
use super::QsimError;

/// Qubit connectivity of the entangling layers. Only the 1D chain is
/// implemented; the all-to-all tag is reserved.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Topology {
    Line,
}

impl FromStr for Topology {
    type Err = QsimError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "line" => Ok(Topology::Line),
            other => Err(QsimError::UnsupportedTopology(other.to_string())),
        }
    }
}

impl std::fmt::Display for Topology {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Topology::Line => write!(f, "line"),
        }
    }
}

/// One placed gate with the index of the angle that drives it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PlannedGate {
    Rx { qubit: usize, param: usize },
    Rz { qubit: usize, param: usize },
    Xx { a: usize, b: usize, param: usize },
}

/// The circuit layout: alternating blocks of single-qubit rotations and
/// nearest-neighbor `XX` couplers.
///
/// Odd blocks (1-based) place `Rx` and `Rz` on every qubit; even blocks
/// place a parameterized `XX` on each adjacent pair. `n_layers` counts
/// blocks. Each parameter index in `0..parameter_count()` is used exactly
/// once.
#[derive(Clone, Debug, PartialEq)]
pub struct CircuitAnsatz {
    n_qubits: usize,
    n_layers: usize,
    topology: Topology,
    plan: Vec<PlannedGate>,
}

impl CircuitAnsatz {
    pub fn line(n_qubits: usize, n_layers: usize) -> Result<Self, QsimError> {
        if n_qubits == 0 || n_layers == 0 {
            return Err(QsimError::EmptyAnsatz);
        }
        let mut plan = Vec::new();
        let mut param = 0usize;
        for layer in 1..=n_layers {
            if layer % 2 == 1 {
                for qubit in 0..n_qubits {
                    plan.push(PlannedGate::Rx { qubit, param });
                    param += 1;
                    plan.push(PlannedGate::Rz { qubit, param });
                    param += 1;
                }
            } else {
                for a in 0..n_qubits.saturating_sub(1) {
                    plan.push(PlannedGate::Xx { a, b: a + 1, param });
                    param += 1;
                }
            }
        }
        Ok(Self {
            n_qubits,
            n_layers,
            topology: Topology::Line,
            plan,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_layers(&self) -> usize {
        self.n_layers
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn plan(&self) -> &[PlannedGate] {
        &self.plan
    }

    /// Number of angles the plan consumes; a pure function of
    /// `(n_qubits, n_layers)`.
    pub fn parameter_count(&self) -> usize {
        let rotation_layers = self.n_layers.div_ceil(2);
        let entangling_layers = self.n_layers / 2;
        rotation_layers * 2 * self.n_qubits + entangling_layers * (self.n_qubits - 1)
    }

    /// Binds angles to the plan, producing concrete gates.
    pub fn bind<'a>(
        &'a self,
        theta: &'a [f64],
    ) -> Result<impl Iterator<Item = Gate> + 'a, QsimError> {
        if theta.len() != self.parameter_count() {
            return Err(QsimError::ParameterCountMismatch {
                expected: self.parameter_count(),
                got: theta.len(),
            });
        }
        Ok(self.plan.iter().map(move |&planned| match planned {
            PlannedGate::Rx { qubit, param } => Gate::Rx {
                qubit,
                angle: theta[param],
            },
            PlannedGate::Rz { qubit, param } => Gate::Rz {
                qubit,
                angle: theta[param],
            },
            PlannedGate::Xx { a, b, param } => Gate::Xx {
                a,
                b,
                angle: theta[param],
            },
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn parameter_count_formula() {
        // Rotation blocks contribute 2 n_qubits angles, entangling blocks
        // n_qubits - 1.
        let ansatz = CircuitAnsatz::line(20, 8).unwrap();
        assert_eq!(ansatz.parameter_count(), 4 * 40 + 4 * 19); // 236
        assert_eq!(ansatz.plan().len(), 4 * 40 + 4 * 19);
        let one_layer = CircuitAnsatz::line(4, 1).unwrap();
        assert_eq!(one_layer.parameter_count(), 8);
        let two_layers = CircuitAnsatz::line(4, 2).unwrap();
        assert_eq!(two_layers.parameter_count(), 11);
    }

    #[test]
    fn every_parameter_used_exactly_once() {
        let ansatz = CircuitAnsatz::line(6, 5).unwrap();
        let mut used = HashSet::new();
        for gate in ansatz.plan() {
            let param = match *gate {
                PlannedGate::Rx { param, .. }
                | PlannedGate::Rz { param, .. }
                | PlannedGate::Xx { param, .. } => param,
            };
            assert!(used.insert(param), "parameter {param} reused");
        }
        assert_eq!(used.len(), ansatz.parameter_count());
        assert_eq!(*used.iter().max().unwrap(), ansatz.parameter_count() - 1);
    }

    #[test]
    fn entanglers_touch_only_adjacent_pairs() {
        let ansatz = CircuitAnsatz::line(8, 6).unwrap();
        for gate in ansatz.plan() {
            if let PlannedGate::Xx { a, b, .. } = *gate {
                assert_eq!(b, a + 1);
            }
        }
    }

    #[test]
    fn bind_rejects_wrong_arity() {
        let ansatz = CircuitAnsatz::line(3, 2).unwrap();
        assert!(matches!(
            ansatz.bind(&[0.0; 3]),
            Err(QsimError::ParameterCountMismatch { expected: 8, got: 3 })
        ));
    }

    #[test]
    fn all_to_all_is_reserved() {
        assert!(matches!(
            "all-to-all".parse::<Topology>(),
            Err(QsimError::UnsupportedTopology(_))
        ));
        assert_eq!("line".parse::<Topology>().unwrap(), Topology::Line);
    }

    #[test]
    fn single_qubit_line_has_no_entanglers() {
        let ansatz = CircuitAnsatz::line(1, 2).unwrap();
        assert_eq!(ansatz.parameter_count(), 2);
        assert!(ansatz
            .plan()
            .iter()
            .all(|g| !matches!(g, PlannedGate::Xx { .. })));
    }
}

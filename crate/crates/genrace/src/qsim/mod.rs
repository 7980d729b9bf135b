//! Statevector simulator and the quantum circuit Born machine runner.
//!
//! [`Statevector`] applies gates in place with stride-based amplitude
//! kernels. [`CircuitAnsatz`] lays out the line-topology parameterized
//! circuit, and [`QcbmModel`] wires both to the CMA-ES optimizer: samples
//! follow the Born rule of the circuit's output state, and training
//! minimizes the KL divergence between the reweighted training distribution
//! and the exact circuit distribution.

mod ansatz;
mod qcbm;
mod state;

pub use ansatz::{CircuitAnsatz, PlannedGate, Topology};
pub use qcbm::{train_qcbm, QcbmConfig, QcbmModel};
pub use state::{apply_gate, Gate, Statevector};

use thiserror::Error;

/// Default cap on simulated qubit counts (statevector memory doubles per qubit).
pub const SIMULATION_CAP: usize = 24;

#[derive(Debug, Error)]
pub enum QsimError {
    #[error("qubit index {qubit} out of range for {n_qubits} qubits")]
    QubitOutOfRange { qubit: usize, n_qubits: usize },
    #[error("two-qubit gate needs distinct qubits, got {0} twice")]
    DuplicateQubit(usize),
    #[error("{n_qubits} qubits exceed the simulation cap {cap}")]
    SimulationCapExceeded { n_qubits: usize, cap: usize },
    #[error("ansatz needs at least one qubit and one layer")]
    EmptyAnsatz,
    #[error("topology {0:?} is reserved but not implemented")]
    UnsupportedTopology(String),
    #[error("parameter count mismatch: ansatz has {expected}, got {got}")]
    ParameterCountMismatch { expected: usize, got: usize },
    #[error("checkpoint: {0}")]
    MalformedCheckpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

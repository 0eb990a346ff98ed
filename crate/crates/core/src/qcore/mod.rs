//! Dense statevector engine: matrices, axis Paulis, rotations, gates and
//! projective measurements over labelled qubits.

mod gates;
mod state;

pub use gates::{pauli_axis_matrix, rotation, Mat2, PauliAxis};
pub use state::{
    bits_to_index, fidelity_up_to_phase, index_to_bits, Basis, MeasurementRecord, QuantumState,
    StateExport,
};

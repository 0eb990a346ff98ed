//! Simulation and analysis of controlled remote implementation of operations
//! (CRIO) over graph-state channels.
//!
//! The crate is organised bottom-up:
//!
//! * [`qcore`]: dense statevector engine over labelled qubits.
//! * [`graphstate`]: graphs, CZ-circuit graph states, the CRIO graph family.
//! * [`stator`]: symbolic stators, extraction from states, eigenoperator checks.
//! * [`protocol`]: the LOCC protocol with parties, messages and branch enumeration.
//! * [`gm`]: geometric measure of entanglement by multi-start coordinate ascent.
//! * [`povm`]: control-power analysis of two-outcome rank-one POVM attacks.

pub mod error;
pub mod gm;
pub mod graphstate;
pub mod povm;
pub mod protocol;
pub mod qcore;
pub mod stator;

pub use error::{Error, Result};
pub use gm::{gm_optimize, GmMode, GmOptions, GmResult, ProductAnsatz};
pub use graphstate::{build_graph_state, crio_graph, CrioTopology, Graph};
pub use povm::{BranchCoefficients, PovmParams, RealizedOperation};
pub use protocol::{OutcomeMode, ProtocolConfig, ProtocolResult};
pub use qcore::{fidelity_up_to_phase, rotation, Basis, Mat2, PauliAxis, QuantumState};
pub use stator::{OperatorWord, Stator};

pub use num_complex::Complex64 as C64;

/// Tolerance for exact algebraic identities.
pub const ALGEBRA_TOL: f64 = 1e-12;

/// Tolerance for quantities accumulated through multi-gate pipelines.
pub const PIPELINE_TOL: f64 = 1e-10;

/// Crate version embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

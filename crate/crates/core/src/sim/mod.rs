//! Dense statevector simulation.
//!
//! States are immutable from the outside: [`apply`] returns a new
//! [`StateVector`]. Multi-controlled gates act directly on the matching
//! amplitude pairs, without decomposition into elementary gates.

mod circuit;
mod gate;
mod state;

pub use circuit::{apply, Circuit, CircuitOp, Control};
pub use gate::{Unitary2, UNITARY_TOLERANCE};
pub use state::{ShotCounts, StateVector, DEFAULT_MAX_QUBITS, NORM_TOLERANCE};

//! State preparation and stabilizer-code classification on a dense
//! statevector simulator.
//!
//! * [`sim`]: statevectors, circuits, sampling.
//! * [`encode`]: exact amplitude encoding of real vectors.
//! * [`rasa`]: recursive approximate encoding with truncated fusion steps.
//! * [`qnn`]: stabilizer-based perceptron and two-layer network.
//! * [`optimize`]: derivative-free minimizers and the training loop.
//! * [`data`]: digits CSV, PGM images, PCA export and fidelity metrics.

pub mod data;
pub mod encode;
pub mod error;
pub mod optimize;
pub mod qnn;
pub mod rasa;
pub mod sim;

pub use error::{Error, Result};

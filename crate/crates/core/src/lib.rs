//! Optimizers for variational quantum algorithms on a self-contained
//! dense simulator.
//!
//! The crate provides three ways to train the rotation angles of a
//! parameterized quantum circuit:
//!
//! - `GRAD`: plain gradient descent with parameter-shift gradients,
//! - `LL`: an LSTM meta-optimizer that proposes parameter updates,
//!   trained by backpropagation through the unrolled interaction loop,
//! - `LLES`: the same meta-optimizer, but with the quantum layer's
//!   gradient estimated by an antithetic Gaussian evolution strategy,
//!   cutting circuit executions from `2pT` to `2(4 + 3 ln p)T` per
//!   meta-epoch.
//!
//! Modules map onto the layers of the problem: [`qsim`] simulates
//! states, [`circuits`] builds the ansätze, [`grad`] estimates
//! gradients and counts circuit executions, [`meta`] implements the
//! LSTM optimizer, and [`tasks`] wires everything into runnable
//! experiments.

pub mod circuits;
pub mod error;
pub mod grad;
pub mod meta;
pub mod qsim;
pub mod tasks;

pub use error::{Error, Result};

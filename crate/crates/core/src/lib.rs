//! Relaxed variable splitting for the one-hidden-layer no-overlap ReLU
//! network, with oracles and checkers for its convergence behaviour.

// NaN must fail validation, so `!(x > 0.0)` is deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod certify;
pub mod cli;
pub mod empirical;
pub mod error;
pub mod optim;
pub mod penalty;
pub mod population;
pub mod rng;
pub mod vector;

pub use error::{Error, Result};
pub use penalty::{Penalty, PenaltyKind};
pub use population::ProblemSpec;
pub use rng::Rng;
pub use vector::RealVector;

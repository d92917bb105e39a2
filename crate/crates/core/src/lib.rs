//! Traveling kinks of weakly coupled pendulum lattices, computed by a
//! projected fixed-point iteration around the uncoupled heteroclinic.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // negated comparisons also reject NaN

pub mod error;
pub mod grid;
pub mod harness;
pub mod kernel;
pub mod kink;
pub mod lattice;
pub mod linalg;
pub mod linear_ops;
pub mod lyapunov;
pub mod nonlinearity;

pub use error::{Error, Result};
pub use grid::{Grid, GridFunction, NormKind};
pub use kernel::{KernelConfig, KernelSpec};
pub use nonlinearity::NonlinearitySpec;

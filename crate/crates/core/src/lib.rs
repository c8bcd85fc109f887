// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bubbles;
pub mod error;
pub mod green;
pub mod io;
pub mod kernel;
mod linalg;
pub mod mesh;
pub mod pipeline;
pub mod quadrature;
pub mod reduced;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};

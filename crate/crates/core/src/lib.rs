//! Numerics for infinite-time blow-up of the critical heat equation
//! u_t = Δu + |u|^{4/(n-2)}u: bubble profiles, heat potentials, reduction
//! constants, parameter dynamics and a radial solver.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fd;
pub mod acceptance;
pub mod commands;
pub mod dynamics;
pub mod green;
pub mod heatpot;
pub mod pipeline;
pub mod profiles;
pub mod quadrature;
pub mod report;
pub mod simulate;
pub mod util;

pub use error::{Error, Result};

/// Largest supported dimension; bounds stack buffers in hot loops.
pub const MAX_DIM: usize = 16;

//! Numerical laboratory for interpolation and sampling sequences in the
//! mixed-norm Bergman spaces `A(p,q)` of the unit disc.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod funcspace;
pub mod hyperbolic;
pub mod interp;
pub mod quadrature;
pub mod sampling;
pub mod seqlab;
pub mod verify;

pub use error::{Error, Result};

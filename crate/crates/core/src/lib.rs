// Negated float comparisons (`!(x > 0.0)`) are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod numerics;
pub mod theta;
pub mod wbz;
pub mod circle_cs;
pub mod fock_bargmann;
pub mod observables;
pub mod torus_cs;
pub mod compat;
pub mod cli;

pub use error::{Error, Result};

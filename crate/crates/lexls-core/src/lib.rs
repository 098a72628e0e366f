//! Lexicographic (prioritized) nonlinear least squares.
//!
//! A stack of priority levels is solved by repeated linearization. Each
//! linearized problem is handled by a per-level ADMM that works in the
//! nullspace of the constraints already fixed by higher levels. Dynamics
//! constraints from Euler integration get a banded nullspace basis built
//! stage by stage.

#![cfg_attr(not(feature = "std"), no_std)]
// index loops mirror the matrix formulas; `!(x > 0.0)` also rejects NaN
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord, clippy::manual_is_multiple_of)]

extern crate alloc;

mod error;
pub mod math;

pub mod admm;
pub mod hierarchy;
pub mod numerics;
pub mod problems;
pub mod shlsp;
pub mod turnback;

pub use error::Error;

//! Robust PI passivity-based control for input-affine plants whose
//! storage function is only partially known.
//!
//! The crate is `no_std` (with `alloc`). It covers plant modelling,
//! separable storage functions, the robust and ideal PI laws, a
//! fixed-step simulator with a Lyapunov/passivity auditor, the
//! radiative-convective thermal model, port-Hamiltonian plants, and
//! an assumption checker.

#![no_std]
// Negated float comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
#[macro_use]
extern crate std;

pub mod error;
pub mod linalg;
pub mod model;
pub mod sampling;
pub mod storage;
pub mod controller;
pub mod sim;
pub mod thermal;
pub mod ph;
pub mod verify;
pub mod instances;

pub use error::{Error, Result};

pub type Vector = nalgebra::DVector<f64>;
pub type Matrix = nalgebra::DMatrix<f64>;

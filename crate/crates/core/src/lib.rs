//! Means of functions of marginal order statistics.
//!
//! Given an i.i.d. sample of `d`-dimensional rows, each column is sorted
//! independently and a function `phi` is averaged over the rows of
//! marginal order statistics. This crate computes that statistic, its
//! almost-sure limit, the limiting variance (by graded quadrature and by an
//! exact finite-n double sum), the per-observation linearization terms, and
//! seeded Monte Carlo harnesses that check the limit theorems.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and
//! thread pools live in the `margquant` companion crate.

#![no_std]
#![warn(clippy::all)]
#![allow(
    clippy::many_single_char_names,
    clippy::needless_range_loop,
    clippy::excessive_precision,
    clippy::neg_cmp_op_on_partial_ord
)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod asymptotics;
pub mod calculus;
pub mod error;
pub mod exec;
pub mod expr;
pub mod functions;
pub mod gof;
pub mod model;
pub mod quadrature;
pub mod rng;
pub mod simulate;
pub mod special;
pub mod stat;

pub use error::{Error, Result};
pub use model::{
    CopulaSet, CopulaSpec, EmpiricalMargin, FunctionSpec, MarginalModel, Provenance, SampleBatch,
};

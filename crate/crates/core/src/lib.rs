//! Monte Carlo laboratory for backward stochastic Volterra integral equations
//! whose generators may anticipate the Brownian future.

// `!(x > 0.0)` is used deliberately so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::type_complexity)]

pub mod catalog;
pub mod cli;
pub mod constants;
pub mod error;
pub mod fbsde;
pub mod generator;
pub mod par;
pub mod path_dependent;
pub mod regression;
pub mod solver;
pub mod stochastic;

pub use error::{BsvieError, Result};

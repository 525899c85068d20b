//! Density and Lorenz-curve dynamics for one-dimensional Fokker-Planck
//! equations, with closed-form oracles and a yard-sale agent simulator.

// `!(x > 0.0)` is the house idiom for rejecting NaN along with the bound.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agents;
pub mod analytic;
pub mod error;
pub mod fpe;
pub mod harness;
pub mod lorenz_core;
pub mod lorenz_solver;

pub use error::{Error, Result};

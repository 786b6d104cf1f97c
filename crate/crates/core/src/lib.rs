//! Quantum walks, their Dirac continuum limit, and the relativistic
//! Ornstein-Uhlenbeck process with its diffusion metric.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod dirac;
pub mod error;
pub mod fick;
pub mod io;
pub mod kernels;
pub mod qwalk;
pub mod roup;
pub mod verify;

pub use error::{Error, Result};

//! Separated learning and control for a known model paired with an unknown
//! actual system.
//!
//! The controller observes the model, filters the joint information state
//! over (model state, actual state), solves a penalized dynamic program
//! offline, and instantiates the resulting strategy with statistics of the
//! actual system learned online from parallel runs.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::large_enum_variant)]
pub mod distribution;
pub mod enumerate;
pub mod error;
pub mod filter;
pub mod harness;
pub mod learner;
pub mod problem;
pub mod scenarios;
pub mod solver;

pub mod cli;

pub use distribution::{tv_distance, Distribution, Gaussian1D};
pub use error::{Error, ErrorClass, Result};
pub use problem::{Plant, Scenario};

/// Version string embedded in every artifact.
pub const TOOL_VERSION: &str = concat!("sepctl ", env!("CARGO_PKG_VERSION"));

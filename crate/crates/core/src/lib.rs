//! Construct-and-refine solving for hard-constrained vehicle routing.

pub mod bench;
pub mod cli;
pub mod error;
pub mod feaseval;
pub mod instances;
pub mod nn;
pub mod policy;
pub mod rng;
pub mod tourops;
pub mod trainer;

pub use error::{Error, Result};

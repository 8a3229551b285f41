//! Experiment harness for `crtwalk`: configs, the exact-formula suite, the
//! trend experiments and result emission.

pub mod config;
pub mod coupling;
pub mod error;
pub mod formulas;
pub mod report;
pub mod trends;

pub use error::{HarnessError, Result};

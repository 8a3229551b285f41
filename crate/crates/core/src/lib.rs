//! Simple random walks on random ordered trees, their projections onto
//! reduced subtrees spanned by sampled vertices, and Brownian motion on the
//! limiting metric trees.
//!
//! The crate is organised bottom-up:
//!
//! * [`excursion`] holds excursion functions with O(1) range-minimum queries.
//! * [`discrete_tree`] covers ordered trees, their search-depth encoding,
//!   conditioned Galton-Watson sampling and reduced subtrees.
//! * [`metric_tree`] builds finite metric trees from an excursion and a set
//!   of times, together with projections, measures and the 4-tuple distance.
//! * [`embedding`] places trees sequentially in `l1` and compares clouds.
//! * [`walk`] simulates walks, decomposes projected paths into jumps and
//!   computes local times and the additive functional built from them.
//! * [`diffusion`] approximates Brownian motion on a metric tree by a grid
//!   chain and computes traces onto subtrees.
//! * [`oracles`] solves finite Markov chains exactly for validation.

pub mod diffusion;
pub mod discrete_tree;
pub mod embedding;
pub mod error;
pub mod excursion;
pub mod io;
pub mod metric_tree;
pub mod oracles;
pub mod rng;
pub mod stats;
pub mod walk;

pub use error::{Error, Result};

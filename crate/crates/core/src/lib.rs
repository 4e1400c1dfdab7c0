//! Label aligned graph semantic parsing.
//!
//! A sentence of `n` tokens is mapped to a complete graph over `layers * n`
//! slots. Each slot gets a node label and each ordered slot pair an edge
//! label; removing `null` labels yields the meaning representation.

pub mod align;
pub mod cfq;
pub mod cogs;
pub mod encoder;
pub mod error;
pub mod graph;
pub mod harness;
pub mod heads;
pub mod model;
pub mod rng;
pub mod tensor;

pub use error::{LagrError, Result};

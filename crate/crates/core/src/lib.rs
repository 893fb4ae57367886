//! Adaptive relation tuning: build instruction data from relation
//! annotations, score model outputs by uncertainty, and pick which pool
//! samples to train on next.

pub mod adaptive;
pub mod balanced;
pub mod config;
pub mod error;
pub mod instruction;
pub mod jsonl;
pub mod metrics;
pub mod mock;
pub mod model;
pub mod pipeline;
pub mod scoring;
pub mod seed;

pub use error::{Error, Result};

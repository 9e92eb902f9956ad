//! flora-forge: turns a short instruction-tuning corpus into a
//! long-context one by deterministic concatenation under seven
//! augmentation strategies and a token-length distribution rule, with
//! built-in statistical reporting and a reconstruction verifier.

pub mod assemble;
pub mod classify;
pub mod corpus;
pub mod error;
pub mod lengths;
pub mod pack;
pub mod pipeline;
pub mod report;
pub mod templates;
pub mod tokenize;
pub mod types;

pub use error::{FloraError, Result};

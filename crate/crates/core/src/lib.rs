//! Refactoring-aware semantic interference analysis for three-way merges.
//!
//! The pipeline has two phases. A lightweight def-use analysis over the
//! merged program reports potential interferences between the left and right
//! branches ([`detect`]). Each report is then checked against refactoring
//! evidence for both branches ([`refdetect`]); reports whose branch-side
//! edits are all behavior-preserving refactorings are discarded
//! ([`filter`]). An execution-based [`oracle`] and the statistics in
//! [`evalkit`] measure how well the two phases agree with ground truth.

pub mod detect;
pub mod diff;
pub mod error;
pub mod evalkit;
pub mod filter;
pub mod linemap;
pub mod minilang;
pub mod oracle;
pub mod pipeline;
pub mod refdetect;
pub mod scenario;
pub mod synth;

pub use error::{Error, Result};

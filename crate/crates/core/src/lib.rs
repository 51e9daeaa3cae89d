//! Hierarchical human evaluation of NLP system inputs and outputs.
//!
//! - [`tree`]: evaluation metrics as decision trees with early termination.
//! - [`campaign`]: two-phase campaigns, randomized assignment, the
//!   traversal state machine and its append-only journal.
//! - [`scoring`]: composite outcomes, funnels, difficulty, per-evaluator
//!   summaries and time savings, all computed from a journal.
//! - [`stats`]: 2x2 chi-square association test and agreement coefficients.
//! - [`report`]: canonical JSON and text renderings of scoring results.
//! - [`simulate`]: synthetic evaluators for exercising campaigns.
//! - [`store`]: campaign directories on disk.
//! - [`casestudy`]: a deterministic reconstruction of a published
//!   question-answering evaluation, and a checker against its numbers.

// errors carry ids and paths for the operator; they are built on failure paths only
#![allow(clippy::result_large_err)]

pub mod campaign;
pub mod casestudy;
pub mod report;
pub mod scoring;
pub mod simulate;
pub mod stats;
pub mod store;
#[cfg(any(test, feature = "testkit"))]
pub mod testkit;
pub mod tree;

pub use campaign::{Campaign, Engine, Item, JudgmentRecord};
pub use tree::{CompositeOutcome, Label, MetricTree, Target};

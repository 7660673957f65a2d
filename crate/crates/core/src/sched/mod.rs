//! Two-phase controller.
//!
//! During the learning phase a seeded sample of mini-batches is fed through
//! the access logger, which is then frozen into a [`HotSet`](crate::eal::HotSet).
//! At runtime every working set of `W` mini-batches is classified and
//! reformed into popular batches (all lookups hot, GPU-resident) and mixed
//! batches, whose embeddings are gathered from CPU and GPU memory while the
//! popular batches execute.

mod classify;
mod gather;
mod learn;
mod reform;
mod runtime;
mod update;

use thiserror::Error;

use crate::eal::EalError;

pub use classify::{classify_input, Popularity};
pub use gather::{
    plan_gather, reduce, GatherPlan, GatherSummary, Instruction, MemoryLayout, Opcode, RowSource,
    SeededRows,
};
pub use learn::{run_learning, select_batches, LearnConfig, LearnStats};
pub use reform::{reform, ClassifiedWorkingSet};
pub use runtime::{
    schedule, schedule_with_hot, BatchWork, HotlineRun, RuntimeConfig, ScheduledWorkingSet,
};
pub use update::{route_updates, UpdatePlan};

#[derive(Debug, Error, PartialEq)]
pub enum SchedError {
    #[error("invalid learning config: {0}")]
    InvalidConfig(String),
    #[error("no mini-batches to learn from")]
    EmptyStream,
    #[error("table {0} is not in the memory layout")]
    UnknownTable(u32),
    #[error("row length {got} does not match {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("{rows} rows but {weights} weights")]
    WeightCount { rows: usize, weights: usize },
    #[error("cannot reduce an empty bag")]
    EmptyBag,
    #[error(transparent)]
    Eal(#[from] EalError),
}

//! Trace-driven model of a popularity-aware heterogeneous training pipeline
//! for recommendation models.
//!
//! The crate follows the data path of the pipeline:
//!
//! * [`trace`]: training inputs, synthetic Zipf traces, trace files and skew
//!   statistics.
//! * [`eal`]: the embedding access logger. A Feistel randomizer, a
//!   set-associative SRRIP tracker of hot indices, an exact LFU oracle and
//!   a multi-bank queue model.
//! * [`sched`]: the two-phase controller. Learning, input classification,
//!   working-set reformation, gather planning and update routing.
//! * [`pipeline`]: the cost model and timeline simulation, together with the
//!   hybrid CPU-GPU and GPU-only baselines.
//!
//! The `book/` directory at the repository root walks through each stage;
//! its Rust snippets are compiled and run as doctests of this crate.

pub mod eal;
pub mod pipeline;
pub mod sched;
pub mod seed;
pub mod trace;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/traces.md")]
    mod traces {}
    #[doc = include_str!("../../../book/src/logger.md")]
    mod logger {}
    #[doc = include_str!("../../../book/src/scheduling.md")]
    mod scheduling {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

//! Embedding access logger.
//!
//! The logger learns hot embedding indices from the access stream. Each
//! `(table, row)` access is packed into a 64-bit key and scattered by a
//! [`FeistelKeys`] permutation; the permuted key selects a set in a
//! set-associative tracker managed by SRRIP replacement ([`EalState`]). After
//! the learning window the tracker is frozen into a [`HotSet`].
//!
//! [`lfu_oracle`] and [`oracle_hot`] provide the exact-count reference the
//! tracker is judged against, and [`bank_throughput_sim`] models the
//! multi-banked request queue in front of the tracker.

mod banks;
mod feistel;
mod hotset;
mod oracle;
mod srrip;

use thiserror::Error;

pub use banks::bank_throughput_sim;
pub use feistel::{feistel_invert, feistel_permute, invert_bits, permute_bits, FeistelKeys};
pub use hotset::HotSet;
pub use oracle::{capture_rate, lfu_oracle, oracle_hot, AccessCounts, OracleSelection};
pub use srrip::{
    key_of, pack_key, unpack_key, AccessOutcome, AccessResult, Decay, EalConfig, EalEntry,
    EalState, EalStats,
};

#[derive(Debug, Error, PartialEq)]
pub enum EalError {
    #[error("invalid logger config: {0}")]
    InvalidConfig(String),
    #[error("logger is frozen; use contains() for lookups")]
    Frozen,
    #[error("access (table {table}, row {row}) exceeds the 16/48-bit key packing range")]
    PackingRange { table: u32, row: u64 },
    #[error("oracle hot set is empty")]
    EmptyOracle,
    #[error("oracle selection: {0}")]
    Selection(String),
    #[error("access trace is empty")]
    EmptyTrace,
}

//! Training-input data model, synthetic trace generation, trace files and
//! skew statistics.

mod io;
mod preset;
mod skew;
mod zipf;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{load_trace, write_trace, TraceFormat, TraceReader, TraceWriter};
pub use preset::Workload;
pub use skew::{analyze_skew, CoveragePoint, SkewReport, TableHistogram};
pub use zipf::{gen_zipf_trace, ZipfTrace};

/// Bytes per embedding element.
pub const ELEMENT_BYTES: u64 = 4;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("invalid table spec: {0}")]
    InvalidTable(String),
    #[error("zipf exponent for table {table} must be finite and > 0, got {s}")]
    InvalidZipf { table: u32, s: f64 },
    #[error("expected {expected} zipf exponents, got {got}")]
    ZipfArity { expected: usize, got: usize },
    #[error("table list is empty")]
    NoTables,
    #[error("num_inputs must be >= 1")]
    NoInputs,
    #[error("batch size must be >= 1")]
    ZeroBatch,
    #[error("trace is empty")]
    EmptyTrace,
    #[error("record {record}: {msg}")]
    Malformed { record: u64, msg: String },
    #[error("record {record}: row {row} out of range for table {table} ({rows} rows)")]
    RowOutOfRange {
        record: u64,
        table: u32,
        row: u64,
        rows: u64,
    },
    #[error("record {record}: unknown table {table}")]
    UnknownTable { record: u64, table: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One embedding table of the model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSpec {
    #[serde(rename = "id")]
    pub table_id: u32,
    #[serde(rename = "rows")]
    pub num_rows: u64,
    #[serde(rename = "dim")]
    pub embedding_dim: u32,
    #[serde(rename = "pool")]
    pub pooling_factor: u32,
}

impl TableSpec {
    pub fn new(table_id: u32, num_rows: u64, embedding_dim: u32, pooling_factor: u32) -> Self {
        TableSpec {
            table_id,
            num_rows,
            embedding_dim,
            pooling_factor,
        }
    }

    /// Size of one row in bytes.
    pub fn row_bytes(&self) -> u64 {
        self.embedding_dim as u64 * ELEMENT_BYTES
    }

    pub fn table_bytes(&self) -> u64 {
        self.num_rows * self.row_bytes()
    }
}

/// Checks per-table invariants and id uniqueness.
pub fn validate_tables(tables: &[TableSpec]) -> Result<(), TraceError> {
    if tables.is_empty() {
        return Err(TraceError::NoTables);
    }
    let mut seen = HashSet::new();
    for t in tables {
        if t.num_rows == 0 || t.embedding_dim == 0 || t.pooling_factor == 0 {
            return Err(TraceError::InvalidTable(format!(
                "table {} needs rows, dim and pool >= 1",
                t.table_id
            )));
        }
        if !seen.insert(t.table_id) {
            return Err(TraceError::InvalidTable(format!(
                "duplicate table id {}",
                t.table_id
            )));
        }
    }
    Ok(())
}

/// Tables sorted by id, the order accesses are grouped in.
pub fn sorted_tables(tables: &[TableSpec]) -> Vec<TableSpec> {
    let mut out = tables.to_vec();
    out.sort_by_key(|t| t.table_id);
    out
}

/// A single embedding lookup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SparseAccess {
    pub table_id: u32,
    pub row_index: u64,
}

impl SparseAccess {
    pub fn new(table_id: u32, row_index: u64) -> Self {
        SparseAccess {
            table_id,
            row_index,
        }
    }
}

/// One training sample's sparse lookups, grouped by ascending table id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingInput {
    pub input_id: u64,
    pub accesses: Vec<SparseAccess>,
}

impl TrainingInput {
    /// Accesses of a single table, in lookup order.
    pub fn table_accesses(&self, table_id: u32) -> impl Iterator<Item = &SparseAccess> {
        self.accesses.iter().filter(move |a| a.table_id == table_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MiniBatch {
    pub batch_id: u64,
    pub inputs: Vec<TrainingInput>,
    pub nominal_size: usize,
}

impl MiniBatch {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn num_accesses(&self) -> usize {
        self.inputs.iter().map(|i| i.accesses.len()).sum()
    }
}

/// Groups consecutive inputs into mini-batches of `batch_size`.
///
/// The final batch may be partial. Batch ids count up from zero.
pub fn batch<I>(inputs: I, batch_size: usize) -> Result<Batches<I::IntoIter>, TraceError>
where
    I: IntoIterator<Item = TrainingInput>,
{
    if batch_size == 0 {
        return Err(TraceError::ZeroBatch);
    }
    Ok(Batches {
        inner: inputs.into_iter(),
        batch_size,
        next_id: 0,
    })
}

pub struct Batches<I> {
    inner: I,
    batch_size: usize,
    next_id: u64,
}

impl<I: Iterator<Item = TrainingInput>> Iterator for Batches<I> {
    type Item = MiniBatch;

    fn next(&mut self) -> Option<MiniBatch> {
        let inputs: Vec<_> = self.inner.by_ref().take(self.batch_size).collect();
        if inputs.is_empty() {
            return None;
        }
        let batch = MiniBatch {
            batch_id: self.next_id,
            inputs,
            nominal_size: self.batch_size,
        };
        self.next_id += 1;
        Some(batch)
    }
}

use serde::{Deserialize, Serialize};

use super::TableSpec;

/// A set of tables with one Zipf exponent per table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Workload {
    pub tables: Vec<TableSpec>,
    pub zipf_s: Vec<f64>,
}

impl Workload {
    /// Eight tables of 16-wide rows, one lookup each. Large tables are
    /// steeper, small ones nearly fully hot. About 90% of inputs touch only
    /// the 65,536 most accessed rows (4 MiB).
    pub fn tuned() -> Self {
        let rows = [500_000, 100_000, 100_000, 20_000, 5_000, 1_000, 100, 10];
        Workload {
            tables: rows
                .iter()
                .enumerate()
                .map(|(i, &r)| TableSpec::new(i as u32, r, 16, 1))
                .collect(),
            zipf_s: vec![1.2, 1.2, 1.2, 1.1, 1.05, 1.05, 1.05, 1.05],
        }
    }

    /// Twenty-six tables of 64-wide rows, one lookup each, `s = 1.05`.
    pub fn embedding_heavy(rows_per_table: u64) -> Self {
        Workload {
            tables: (0..26)
                .map(|i| TableSpec::new(i, rows_per_table, 64, 1))
                .collect(),
            zipf_s: vec![1.05; 26],
        }
    }

    /// Bytes of all tables.
    pub fn model_bytes(&self) -> u64 {
        self.tables.iter().map(TableSpec::table_bytes).sum()
    }
}

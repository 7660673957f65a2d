use std::collections::HashMap;
use std::io::{self, Write};

use serde::Serialize;

use super::{SparseAccess, TableSpec, TraceError, TrainingInput};

/// Access counts of one table's rows, hottest first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableHistogram {
    pub table_id: u32,
    /// `(row_index, count)` sorted by count descending, then row ascending.
    pub rows: Vec<(u64, u64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoveragePoint {
    pub hot_bytes: u64,
    /// Rows selected for this capacity.
    pub hot_rows: u64,
    /// Share of all accesses landing in the selected rows.
    pub access_fraction: f64,
    /// Share of inputs whose every access lands in the selected rows.
    pub input_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkewReport {
    pub histograms: Vec<TableHistogram>,
    pub coverage_curve: Vec<CoveragePoint>,
    pub total_accesses: u64,
    pub total_inputs: u64,
}

impl SkewReport {
    pub fn write_coverage_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "hot_bytes,hot_rows,access_fraction,input_fraction")?;
        for p in &self.coverage_curve {
            writeln!(
                out,
                "{},{},{:.9},{:.9}",
                p.hot_bytes, p.hot_rows, p.access_fraction, p.input_fraction
            )?;
        }
        Ok(())
    }

    /// Per-row access frequencies, one line per accessed row.
    pub fn write_histogram_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "table_id,rank,row_index,count")?;
        for h in &self.histograms {
            for (rank, (row, count)) in h.rows.iter().enumerate() {
                writeln!(out, "{},{},{},{}", h.table_id, rank, row, count)?;
            }
        }
        Ok(())
    }
}

/// Frequency histogram and hot-capacity coverage curve of a trace.
///
/// For each capacity the hot rows are the exact frequency top-K (ties go to
/// the lower `(table_id, row_index)`), taken in rank order while their bytes
/// fit in the capacity.
pub fn analyze_skew(
    inputs: &[TrainingInput],
    tables: &[TableSpec],
    capacity_grid: &[u64],
) -> Result<SkewReport, TraceError> {
    if inputs.is_empty() {
        return Err(TraceError::EmptyTrace);
    }
    let row_bytes: HashMap<u32, u64> = tables.iter().map(|t| (t.table_id, t.row_bytes())).collect();

    let mut counts: HashMap<SparseAccess, u64> = HashMap::new();
    let mut total_accesses = 0u64;
    for input in inputs {
        for a in &input.accesses {
            *counts.entry(*a).or_default() += 1;
            total_accesses += 1;
        }
    }

    let mut ranked: Vec<(SparseAccess, u64)> = counts.into_iter().collect();
    ranked.sort_unstable_by(|(a, ca), (b, cb)| cb.cmp(ca).then(a.cmp(b)));
    let rank_of: HashMap<SparseAccess, usize> = ranked
        .iter()
        .enumerate()
        .map(|(i, (a, _))| (*a, i))
        .collect();

    // Prefix sums over the ranking: bytes and accesses of the top-i rows.
    let mut prefix_bytes = Vec::with_capacity(ranked.len() + 1);
    let mut prefix_hits = Vec::with_capacity(ranked.len() + 1);
    prefix_bytes.push(0u64);
    prefix_hits.push(0u64);
    for (a, c) in &ranked {
        let bytes = row_bytes
            .get(&a.table_id)
            .copied()
            .ok_or(TraceError::UnknownTable {
                record: 0,
                table: a.table_id,
            })?;
        prefix_bytes.push(prefix_bytes.last().unwrap() + bytes);
        prefix_hits.push(prefix_hits.last().unwrap() + c);
    }

    // An input is all-hot at K rows iff its worst rank is below K.
    // `needed[k]` counts inputs needing exactly k rows.
    let mut needed = vec![0u64; ranked.len() + 1];
    for input in inputs {
        let k = input
            .accesses
            .iter()
            .map(|a| rank_of[a] + 1)
            .max()
            .unwrap_or(0);
        needed[k] += 1;
    }
    let mut covered_inputs = needed;
    for k in 1..covered_inputs.len() {
        covered_inputs[k] += covered_inputs[k - 1];
    }

    let total_inputs = inputs.len() as u64;
    let coverage_curve = capacity_grid
        .iter()
        .map(|&cap| {
            let k = prefix_bytes.partition_point(|&b| b <= cap) - 1;
            CoveragePoint {
                hot_bytes: cap,
                hot_rows: k as u64,
                access_fraction: ratio(prefix_hits[k], total_accesses),
                input_fraction: ratio(covered_inputs[k], total_inputs),
            }
        })
        .collect();

    let mut by_table: HashMap<u32, Vec<(u64, u64)>> = HashMap::new();
    for (a, c) in &ranked {
        by_table
            .entry(a.table_id)
            .or_default()
            .push((a.row_index, *c));
    }
    let mut histograms: Vec<TableHistogram> = by_table
        .into_iter()
        .map(|(table_id, rows)| TableHistogram { table_id, rows })
        .collect();
    histograms.sort_by_key(|h| h.table_id);

    Ok(SkewReport {
        histograms,
        coverage_curve,
        total_accesses,
        total_inputs,
    })
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{validate_tables, SparseAccess, TableSpec, TraceError, TrainingInput};
use crate::seed;

/// Inverse-CDF sampler over one table's popularity ranks.
struct TableSampler {
    table_id: u32,
    pooling: u32,
    cdf: Vec<f64>,
    /// `rank_to_row[r]` is the row holding popularity rank `r` (0 = hottest).
    rank_to_row: Vec<u64>,
    rng: ChaCha8Rng,
}

impl TableSampler {
    fn new(table: &TableSpec, s: f64, stream_seed: u64) -> Self {
        let n = table.num_rows as usize;
        let mut cdf = Vec::with_capacity(n);
        let mut acc = 0.0f64;
        for rank in 1..=n {
            acc += (rank as f64).powf(-s);
            cdf.push(acc);
        }
        let total = acc;
        for c in &mut cdf {
            *c /= total;
        }

        let mut rank_to_row: Vec<u64> = (0..table.num_rows).collect();
        let mut perm_rng = seed::rng(seed::split(stream_seed, 0));
        rank_to_row.shuffle(&mut perm_rng);

        TableSampler {
            table_id: table.table_id,
            pooling: table.pooling_factor,
            cdf,
            rank_to_row,
            rng: seed::rng(seed::split(stream_seed, 1)),
        }
    }

    fn draw(&mut self) -> u64 {
        let u: f64 = self.rng.random();
        let rank = self
            .cdf
            .partition_point(|&c| c <= u)
            .min(self.cdf.len() - 1);
        self.rank_to_row[rank]
    }
}

/// Deterministic stream of Zipf-distributed training inputs.
pub struct ZipfTrace {
    samplers: Vec<TableSampler>,
    next_id: u64,
    remaining: u64,
}

impl ZipfTrace {
    /// Row that holds popularity rank `rank` (0-based) in `table_id`.
    pub fn row_of_rank(&self, table_id: u32, rank: usize) -> Option<u64> {
        self.samplers
            .iter()
            .find(|s| s.table_id == table_id)
            .and_then(|s| s.rank_to_row.get(rank).copied())
    }
}

impl Iterator for ZipfTrace {
    type Item = TrainingInput;

    fn next(&mut self) -> Option<TrainingInput> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let width: usize = self.samplers.iter().map(|s| s.pooling as usize).sum();
        let mut accesses = Vec::with_capacity(width);
        for sampler in &mut self.samplers {
            for _ in 0..sampler.pooling {
                let row = sampler.draw();
                accesses.push(SparseAccess::new(sampler.table_id, row));
            }
        }
        let input = TrainingInput {
            input_id: self.next_id,
            accesses,
        };
        self.next_id += 1;
        Some(input)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.remaining as usize, Some(self.remaining as usize))
    }
}

/// Generates `num_inputs` inputs whose per-table row popularity follows a
/// Zipf law with exponent `zipf_s[i]` for the i-th table (in the order given).
///
/// Popularity ranks are scattered over the row space by a seeded
/// permutation, so the hottest row of a table is not row 0. Each table draws
/// from its own stream split off the root `seed`.
pub fn gen_zipf_trace(
    tables: &[TableSpec],
    num_inputs: u64,
    zipf_s: &[f64],
    seed: u64,
) -> Result<ZipfTrace, TraceError> {
    validate_tables(tables)?;
    if num_inputs == 0 {
        return Err(TraceError::NoInputs);
    }
    if zipf_s.len() != tables.len() {
        return Err(TraceError::ZipfArity {
            expected: tables.len(),
            got: zipf_s.len(),
        });
    }
    for (t, &s) in tables.iter().zip(zipf_s) {
        if !s.is_finite() || s <= 0.0 {
            return Err(TraceError::InvalidZipf {
                table: t.table_id,
                s,
            });
        }
    }

    let base = seed::derive(seed, seed::TRACE);
    let mut paired: Vec<(TableSpec, f64)> =
        tables.iter().cloned().zip(zipf_s.iter().copied()).collect();
    paired.sort_by_key(|(t, _)| t.table_id);
    let samplers = paired
        .iter()
        .map(|(t, s)| TableSampler::new(t, *s, seed::split(base, t.table_id as u64)))
        .collect();

    Ok(ZipfTrace {
        samplers,
        next_id: 0,
        remaining: num_inputs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn degenerate_exponent_concentrates_on_rank_one() {
        let tables = [TableSpec::new(0, 4, 4, 1)];
        let trace = gen_zipf_trace(&tables, 100, &[50.0], 9).unwrap();
        let hottest = trace.row_of_rank(0, 0).unwrap();
        let hits = trace.filter(|i| i.accesses[0].row_index == hottest).count();
        assert!(hits >= 99, "{hits}");
    }

    #[test]
    fn deterministic_per_seed() {
        let tables = [TableSpec::new(0, 1000, 4, 2), TableSpec::new(1, 50, 8, 1)];
        let a: Vec<_> = gen_zipf_trace(&tables, 200, &[1.05, 0.8], 3)
            .unwrap()
            .collect();
        let b: Vec<_> = gen_zipf_trace(&tables, 200, &[1.05, 0.8], 3)
            .unwrap()
            .collect();
        assert_eq!(a, b);
        let c = gen_zipf_trace(&tables, 1, &[1.05, 0.8], 4).unwrap();
        let d = gen_zipf_trace(&tables, 1, &[1.05, 0.8], 3).unwrap();
        let perm_c: Vec<_> = (0..1000).map(|r| c.row_of_rank(0, r).unwrap()).collect();
        let perm_d: Vec<_> = (0..1000).map(|r| d.row_of_rank(0, r).unwrap()).collect();
        assert_ne!(perm_c, perm_d);
    }

    #[test]
    fn grouped_by_ascending_table() {
        let tables = [TableSpec::new(5, 10, 4, 2), TableSpec::new(2, 10, 4, 3)];
        let input = gen_zipf_trace(&tables, 1, &[1.0, 1.0], 0)
            .unwrap()
            .next()
            .unwrap();
        let ids: Vec<_> = input.accesses.iter().map(|a| a.table_id).collect();
        assert_eq!(ids, vec![2, 2, 2, 5, 5]);
    }

    #[test]
    fn rejects_bad_parameters() {
        let tables = [TableSpec::new(0, 10, 4, 1)];
        assert!(matches!(
            gen_zipf_trace(&tables, 10, &[0.0], 0),
            Err(TraceError::InvalidZipf { .. })
        ));
        assert!(matches!(
            gen_zipf_trace(&tables, 10, &[-1.0], 0),
            Err(TraceError::InvalidZipf { .. })
        ));
        assert!(matches!(
            gen_zipf_trace(&tables, 10, &[f64::NAN], 0),
            Err(TraceError::InvalidZipf { .. })
        ));
        assert!(matches!(
            gen_zipf_trace(&[], 10, &[], 0),
            Err(TraceError::NoTables)
        ));
    }

    #[test]
    fn hot_rows_not_lowest_indices() {
        let tables = [TableSpec::new(0, 10_000, 4, 1)];
        let trace = gen_zipf_trace(&tables, 1, &[1.05], 11).unwrap();
        let top: Vec<_> = (0..10).map(|r| trace.row_of_rank(0, r).unwrap()).collect();
        assert_ne!(top, (0..10).collect::<Vec<u64>>());
    }

    #[test]
    fn top_rows_dominate_median() {
        // 100k rows, 2M lookups: the rank-1 row should dwarf the median rank.
        let tables = [TableSpec::new(0, 100_000, 4, 1)];
        let trace = gen_zipf_trace(&tables, 2_000_000, &[1.05], 5).unwrap();
        let first = trace.row_of_rank(0, 0).unwrap();
        let mut counts: HashMap<u64, u64> = HashMap::new();
        for input in trace {
            *counts.entry(input.accesses[0].row_index).or_default() += 1;
        }
        let mut sorted: Vec<u64> = counts.values().copied().collect();
        sorted.sort_unstable_by(|a, b| b.cmp(a));
        assert_eq!(sorted[0], counts[&first]);
        let median = sorted[sorted.len() / 2].max(1);
        assert!(sorted[0] > 100 * median, "{} vs {}", sorted[0], median);
    }
}

use std::collections::HashMap;

use super::{EalError, HotSet};
use crate::trace::{SparseAccess, TableSpec, TrainingInput};

/// Exact per-index access counts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AccessCounts {
    pub counts: HashMap<SparseAccess, u64>,
    pub total: u64,
}

impl AccessCounts {
    pub fn record(&mut self, access: SparseAccess) {
        *self.counts.entry(access).or_default() += 1;
        self.total += 1;
    }

    pub fn get(&self, access: &SparseAccess) -> u64 {
        self.counts.get(access).copied().unwrap_or(0)
    }
}

/// How [`oracle_hot`] picks members.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleSelection {
    /// The `k` most accessed indices; ties go to the lower `(table, row)`.
    TopK(usize),
    /// Indices accessed at least once per `one_in` accesses of the trace.
    Threshold { one_in: u64 },
}

impl OracleSelection {
    /// Default popularity threshold: one access in every 100,000.
    pub const DEFAULT_THRESHOLD: OracleSelection = OracleSelection::Threshold { one_in: 100_000 };

    /// Builds a selection from optional CLI-style arguments; exactly one
    /// must be given.
    pub fn from_options(top_k: Option<usize>, one_in: Option<u64>) -> Result<Self, EalError> {
        match (top_k, one_in) {
            (Some(k), None) => Ok(OracleSelection::TopK(k)),
            (None, Some(n)) if n > 0 => Ok(OracleSelection::Threshold { one_in: n }),
            (None, Some(_)) => Err(EalError::Selection("threshold must be > 0".into())),
            (Some(_), Some(_)) => Err(EalError::Selection(
                "give either a capacity or a threshold, not both".into(),
            )),
            (None, None) => Err(EalError::Selection("give a capacity or a threshold".into())),
        }
    }
}

/// Counts every access of the trace exactly.
pub fn lfu_oracle<'a, I>(inputs: I) -> Result<AccessCounts, EalError>
where
    I: IntoIterator<Item = &'a TrainingInput>,
{
    let mut counts = AccessCounts::default();
    for input in inputs {
        for a in &input.accesses {
            counts.record(*a);
        }
    }
    if counts.total == 0 {
        return Err(EalError::EmptyTrace);
    }
    Ok(counts)
}

/// Hot set selected from exact counts. Its capacity is the bytes its members
/// occupy.
pub fn oracle_hot(
    counts: &AccessCounts,
    selection: OracleSelection,
    tables: &[TableSpec],
) -> Result<HotSet, EalError> {
    if counts.total == 0 {
        return Err(EalError::EmptyTrace);
    }
    let members: Vec<SparseAccess> = match selection {
        OracleSelection::TopK(k) => {
            let mut ranked: Vec<(&SparseAccess, &u64)> = counts.counts.iter().collect();
            let by_rank = |(a, ca): &(&SparseAccess, &u64), (b, cb): &(&SparseAccess, &u64)| {
                cb.cmp(ca).then(a.cmp(b))
            };
            if k < ranked.len() {
                ranked.select_nth_unstable_by(k, by_rank);
                ranked.truncate(k);
            }
            ranked.into_iter().map(|(a, _)| *a).collect()
        }
        OracleSelection::Threshold { one_in } => counts
            .counts
            .iter()
            .filter(|(_, &c)| c as u128 * one_in as u128 >= counts.total as u128)
            .map(|(a, _)| *a)
            .collect(),
    };
    let mut hot = HotSet::new(members, 0);
    let bytes = hot.bytes_used(tables);
    hot = HotSet::new(hot.sorted(), bytes);
    Ok(hot)
}

/// Share of the oracle's members the tracker also holds.
pub fn capture_rate(tracker_hot: &HotSet, oracle_hot: &HotSet) -> Result<f64, EalError> {
    if oracle_hot.is_empty() {
        return Err(EalError::EmptyOracle);
    }
    Ok(tracker_hot.intersection_len(oracle_hot) as f64 / oracle_hot.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(rows: &[u64]) -> Vec<TrainingInput> {
        rows.iter()
            .enumerate()
            .map(|(i, &r)| TrainingInput {
                input_id: i as u64,
                accesses: vec![SparseAccess::new(0, r)],
            })
            .collect()
    }

    #[test]
    fn top_one() {
        let counts = lfu_oracle(&trace(&[7, 7, 3])).unwrap();
        let hot = oracle_hot(&counts, OracleSelection::TopK(1), &[]).unwrap();
        assert_eq!(hot.sorted(), vec![SparseAccess::new(0, 7)]);
    }

    #[test]
    fn threshold_on_200k_accesses() {
        // 200,000 accesses: the one-in-100,000 threshold is a count of 2.
        let mut rows: Vec<u64> = (0..199_997).map(|i| 1000 + i).collect();
        rows.extend([1, 1, 2]);
        let counts = lfu_oracle(&trace(&rows)).unwrap();
        assert_eq!(counts.total, 200_000);
        let hot = oracle_hot(&counts, OracleSelection::DEFAULT_THRESHOLD, &[]).unwrap();
        assert_eq!(hot.sorted(), vec![SparseAccess::new(0, 1)]);
    }

    #[test]
    fn selection_modes_exclusive() {
        assert!(OracleSelection::from_options(Some(1), Some(10)).is_err());
        assert!(OracleSelection::from_options(None, None).is_err());
        assert_eq!(
            OracleSelection::from_options(Some(3), None),
            Ok(OracleSelection::TopK(3))
        );
    }

    #[test]
    fn capture_extremes() {
        let a = HotSet::new([SparseAccess::new(0, 1), SparseAccess::new(0, 2)], 0);
        let b = HotSet::new([SparseAccess::new(0, 3)], 0);
        assert_eq!(capture_rate(&a, &a).unwrap(), 1.0);
        assert_eq!(capture_rate(&a, &b).unwrap(), 0.0);
        assert_eq!(
            capture_rate(&a, &HotSet::default()),
            Err(EalError::EmptyOracle)
        );
    }

    #[test]
    fn empty_trace() {
        assert_eq!(lfu_oracle(&[]), Err(EalError::EmptyTrace));
    }
}

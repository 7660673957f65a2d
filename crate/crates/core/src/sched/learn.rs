use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::SchedError;
use crate::eal::{capture_rate, lfu_oracle, oracle_hot, EalState, HotSet, OracleSelection};
use crate::seed;
use crate::trace::{MiniBatch, TableSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnConfig {
    /// Share of the learning window's mini-batches fed to the logger.
    pub sample_fraction: f64,
    /// Re-learn after this many working sets; `None` learns once.
    pub recalibration_period: Option<usize>,
    pub seed: u64,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            sample_fraction: 0.05,
            recalibration_period: None,
            seed: 0,
        }
    }
}

impl LearnConfig {
    pub fn validate(&self) -> Result<(), SchedError> {
        if !(self.sample_fraction > 0.0 && self.sample_fraction <= 1.0) {
            return Err(SchedError::InvalidConfig(format!(
                "sample_fraction {} outside (0, 1]",
                self.sample_fraction
            )));
        }
        if self.recalibration_period == Some(0) {
            return Err(SchedError::InvalidConfig(
                "recalibration_period must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Number of batches sampled out of `n`: `ceil(fraction * n)`.
    pub fn sample_count(&self, n: usize) -> usize {
        let x = self.sample_fraction * n as f64;
        // 0.05 * 20 is 1.0000000000000002 in binary; don't round that up to 2.
        let k = if (x - x.round()).abs() < 1e-9 {
            x.round()
        } else {
            x.ceil()
        };
        (k as usize).clamp(1, n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LearnStats {
    pub window_batches: usize,
    pub sampled_batches: usize,
    pub sampled_accesses: u64,
    pub hot_entries: usize,
    /// Capture of the one-in-100,000 threshold hot set of the whole window;
    /// `None` when that set is empty.
    pub coverage_vs_oracle: Option<f64>,
}

/// Indices (ascending) of the batches sampled from a window of `n`.
pub fn select_batches(n: usize, cfg: &LearnConfig) -> Vec<usize> {
    if n == 0 {
        return Vec::new();
    }
    let k = cfg.sample_count(n);
    let mut rng = seed::rng(seed::derive(cfg.seed, seed::LEARN));
    let mut picked = index::sample(&mut rng, n, k).into_vec();
    picked.sort_unstable();
    picked
}

/// Learns the hot set from a seeded sample of whole mini-batches.
///
/// Selected batches are replayed through the logger in arrival order, after
/// which the logger is frozen.
pub fn run_learning(
    batches: &[MiniBatch],
    eal: &mut EalState,
    cfg: &LearnConfig,
    tables: &[TableSpec],
) -> Result<(HotSet, LearnStats), SchedError> {
    cfg.validate()?;
    if batches.is_empty() {
        return Err(SchedError::EmptyStream);
    }
    let picked = select_batches(batches.len(), cfg);
    let mut sampled_accesses = 0;
    for &i in &picked {
        for input in &batches[i].inputs {
            for a in &input.accesses {
                eal.observe(*a)?;
                sampled_accesses += 1;
            }
        }
    }
    let hot = eal.freeze(tables);

    let coverage_vs_oracle = match lfu_oracle(batches.iter().flat_map(|b| &b.inputs)) {
        Ok(counts) => {
            let oracle = oracle_hot(&counts, OracleSelection::DEFAULT_THRESHOLD, tables)?;
            capture_rate(&hot, &oracle).ok()
        }
        Err(_) => None,
    };

    let stats = LearnStats {
        window_batches: batches.len(),
        sampled_batches: picked.len(),
        sampled_accesses,
        hot_entries: hot.len(),
        coverage_vs_oracle,
    };
    Ok((hot, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eal::EalConfig;
    use crate::trace::{batch, gen_zipf_trace};

    fn batches() -> (Vec<TableSpec>, Vec<MiniBatch>) {
        let tables = vec![TableSpec::new(0, 500, 4, 2)];
        let inputs = gen_zipf_trace(&tables, 400, &[1.1], 2).unwrap();
        (tables, batch(inputs, 8).unwrap().collect())
    }

    fn eal() -> EalState {
        EalState::new(EalConfig {
            num_blocks: 64,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn sample_count_rounding() {
        let cfg = LearnConfig::default();
        assert_eq!(cfg.sample_count(20), 1);
        assert_eq!(cfg.sample_count(21), 2);
        assert_eq!(cfg.sample_count(1), 1);
        let full = LearnConfig {
            sample_fraction: 1.0,
            ..Default::default()
        };
        assert_eq!(full.sample_count(7), 7);
    }

    #[test]
    fn full_sampling_matches_full_replay() {
        let (tables, batches) = batches();
        let cfg = LearnConfig {
            sample_fraction: 1.0,
            ..Default::default()
        };
        let mut learned = eal();
        let (hot, stats) = run_learning(&batches, &mut learned, &cfg, &tables).unwrap();
        assert_eq!(stats.sampled_batches, batches.len());

        let mut replay = eal();
        for b in &batches {
            for i in &b.inputs {
                for a in &i.accesses {
                    replay.observe(*a).unwrap();
                }
            }
        }
        assert_eq!(replay.freeze(&tables), hot);
    }

    #[test]
    fn deterministic_for_seed() {
        let (tables, batches) = batches();
        let cfg = LearnConfig {
            sample_fraction: 0.2,
            seed: 5,
            ..Default::default()
        };
        let (a, _) = run_learning(&batches, &mut eal(), &cfg, &tables).unwrap();
        let (b, _) = run_learning(&batches, &mut eal(), &cfg, &tables).unwrap();
        assert_eq!(a, b);
        assert_eq!(select_batches(50, &cfg).len(), 10);
    }

    #[test]
    fn rejects_bad_config_and_empty_stream() {
        let (tables, batches) = batches();
        let bad = LearnConfig {
            sample_fraction: 0.0,
            ..Default::default()
        };
        assert!(run_learning(&batches, &mut eal(), &bad, &tables).is_err());
        assert_eq!(
            run_learning(&[], &mut eal(), &LearnConfig::default(), &tables).unwrap_err(),
            SchedError::EmptyStream
        );
    }
}

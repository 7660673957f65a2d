use std::collections::HashSet;

use super::report::{ChannelBytes, IterationReport, SimReport, ThroughputReport};
use super::{CostModel, PipelineError};
use crate::trace::{MiniBatch, TableSpec};

struct BatchStats {
    inputs: usize,
    accesses: u64,
    row_bytes: u64,
    pooled_bytes: u64,
    distinct_bytes: u64,
}

fn batch_stats(b: &MiniBatch, tables: &[TableSpec]) -> BatchStats {
    let row_bytes = |t: u32| {
        tables
            .iter()
            .find(|s| s.table_id == t)
            .map_or(0, TableSpec::row_bytes)
    };
    let mut bytes = 0;
    let mut distinct = HashSet::new();
    for a in b.inputs.iter().flat_map(|i| &i.accesses) {
        bytes += row_bytes(a.table_id);
        distinct.insert(*a);
    }
    let per_input: u64 = tables.iter().map(TableSpec::row_bytes).sum();
    BatchStats {
        inputs: b.len(),
        accesses: b.num_accesses() as u64,
        row_bytes: bytes,
        pooled_bytes: b.len() as u64 * per_input,
        distinct_bytes: distinct.iter().map(|a| row_bytes(a.table_id)).sum(),
    }
}

/// Fewest GPUs whose memory holds the model.
pub fn min_gpus(model_bytes: u64, hbm_capacity_bytes: f64) -> usize {
    ((model_bytes as f64 / hbm_capacity_bytes).ceil() as usize).max(1)
}

struct Step {
    load: f64,
    gather: f64,
    transfer: f64,
    compute: f64,
    update: f64,
    bytes: ChannelBytes,
}

fn serialize(
    mode: &'static str,
    num_gpus: usize,
    steps: impl Iterator<Item = Step>,
    iterations: usize,
) -> SimReport {
    let mut report = ThroughputReport::new(mode, num_gpus, iterations);
    let mut timeline = Vec::with_capacity(iterations);
    for (i, s) in steps.enumerate() {
        let total = s.load + s.gather + s.transfer + s.compute + s.update;
        report.breakdown.data_load += s.load;
        report.breakdown.embedding_gather += s.gather;
        report.breakdown.transfer += s.transfer;
        report.breakdown.gpu_compute += s.compute;
        report.breakdown.update += s.update;
        report.total_time += total;
        report.bytes.add(&s.bytes);
        timeline.push(IterationReport {
            working_set_id: i,
            replication_time: 0.0,
            load_time: s.load,
            popular_exec_time: 0.0,
            gather_time: s.gather + s.transfer,
            stall_time: 0.0,
            mixed_exec_time: s.compute + s.update,
            total_time: total,
            bytes: s.bytes,
        });
    }
    SimReport {
        throughput: report.finish(),
        iterations: timeline,
    }
}

/// Embeddings gathered and updated on the CPU, dense layers on the GPU, with
/// no overlap between stages.
pub fn simulate_hybrid_baseline(
    batches: &[MiniBatch],
    tables: &[TableSpec],
    cost: &CostModel,
) -> Result<SimReport, PipelineError> {
    cost.validate()?;
    if batches.is_empty() {
        return Err(PipelineError::EmptyStream);
    }
    let steps = batches.iter().map(|b| {
        let s = batch_stats(b, tables);
        let load_bytes = cost.load_bytes(s.inputs, s.accesses);
        Step {
            load: cost.load_time(s.inputs, s.accesses),
            gather: s.row_bytes as f64 / cost.cpu_dram_bw
                + s.accesses as f64 * cost.dma_fixed_latency,
            transfer: s.pooled_bytes as f64 / cost.pcie_bw,
            compute: cost.gpu_compute.time(s.inputs),
            update: s.distinct_bytes as f64 / cost.cpu_dram_bw,
            bytes: ChannelBytes {
                cpu_dram: load_bytes + s.row_bytes + s.distinct_bytes,
                pcie: load_bytes + s.pooled_bytes,
                hbm: 0,
                inter_gpu: 0,
            },
        }
    });
    Ok(serialize("hybrid", 1, steps, batches.len()))
}

/// Embeddings sharded across `cost.num_gpus` GPU memories, with one
/// all-to-all exchange of pooled vectors (forward and backward) per batch.
///
/// Fails with [`PipelineError::OutOfMemory`] when the model does not fit.
pub fn simulate_gpu_only(
    model_bytes: u64,
    batches: &[MiniBatch],
    tables: &[TableSpec],
    cost: &CostModel,
) -> Result<SimReport, PipelineError> {
    cost.validate()?;
    let needed = min_gpus(model_bytes, cost.gpu_hbm_capacity_bytes);
    let g = cost.num_gpus;
    if g < needed {
        return Err(PipelineError::OutOfMemory {
            model_bytes,
            min_gpus: needed,
            num_gpus: g,
        });
    }
    if batches.is_empty() {
        return Err(PipelineError::EmptyStream);
    }
    let steps = batches.iter().map(|b| {
        let s = batch_stats(b, tables);
        let load_bytes = cost.load_bytes(s.inputs, s.accesses);
        let exchange = (2 * s.pooled_bytes) as f64 * (g - 1) as f64 / g as f64;
        Step {
            load: cost.load_time(s.inputs, s.accesses),
            gather: s.row_bytes as f64 / cost.hbm_bw,
            transfer: exchange / cost.inter_gpu_bw,
            compute: cost.gpu_compute.time(s.inputs),
            update: s.distinct_bytes as f64 / cost.hbm_bw,
            bytes: ChannelBytes {
                cpu_dram: load_bytes,
                pcie: load_bytes,
                hbm: s.row_bytes + s.distinct_bytes,
                inter_gpu: exchange as u64,
            },
        }
    });
    let mut report = serialize("gpu_only", g, steps, batches.len());
    report.throughput.min_gpus = Some(needed);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{SparseAccess, TrainingInput};

    fn tables() -> Vec<TableSpec> {
        vec![TableSpec::new(0, 100, 16, 2), TableSpec::new(1, 10, 8, 1)]
    }

    fn batches(with_accesses: bool) -> Vec<MiniBatch> {
        let inputs = (0..8)
            .map(|i| TrainingInput {
                input_id: i,
                accesses: if with_accesses {
                    vec![
                        SparseAccess::new(0, i),
                        SparseAccess::new(0, i + 1),
                        SparseAccess::new(1, 0),
                    ]
                } else {
                    vec![]
                },
            })
            .collect();
        vec![MiniBatch {
            batch_id: 0,
            inputs,
            nominal_size: 8,
        }]
    }

    fn no_load() -> CostModel {
        CostModel {
            dense_bytes_per_input: 0,
            index_bytes: 0,
            ..Default::default()
        }
    }

    #[test]
    fn min_gpus_examples() {
        assert_eq!(min_gpus(63_000_000_000, 16e9), 4);
        assert_eq!(min_gpus(2_000_000_000, 16e9), 1);
        assert_eq!(min_gpus(0, 16e9), 1);
    }

    #[test]
    fn oom_below_min_gpus() {
        let cost = CostModel {
            num_gpus: 3,
            ..Default::default()
        };
        let err = simulate_gpu_only(63_000_000_000, &batches(true), &tables(), &cost).unwrap_err();
        assert_eq!(
            err,
            PipelineError::OutOfMemory {
                model_bytes: 63_000_000_000,
                min_gpus: 4,
                num_gpus: 3
            }
        );
        let cost = CostModel {
            num_gpus: 4,
            ..Default::default()
        };
        let r = simulate_gpu_only(63_000_000_000, &batches(true), &tables(), &cost).unwrap();
        assert_eq!(r.throughput.min_gpus, Some(4));
    }

    #[test]
    fn single_gpu_has_no_exchange() {
        let r = simulate_gpu_only(1000, &batches(true), &tables(), &CostModel::default()).unwrap();
        assert_eq!(r.throughput.breakdown.transfer, 0.0);
        assert_eq!(r.throughput.bytes.inter_gpu, 0);
    }

    #[test]
    fn hybrid_without_accesses_is_pure_compute() {
        let cost = no_load();
        let r = simulate_hybrid_baseline(&batches(false), &[], &cost).unwrap();
        assert_eq!(r.throughput.total_time, cost.gpu_compute.time(8));
    }

    #[test]
    fn hybrid_terms() {
        let cost = no_load();
        let r = simulate_hybrid_baseline(&batches(true), &tables(), &cost).unwrap();
        let b = r.throughput.breakdown;
        // 16 lookups of 64 B and 8 of 32 B
        let bytes = (16 * 64 + 8 * 32) as f64;
        assert!((b.embedding_gather - (bytes / 2.7e9 + 24e-6)).abs() < 1e-15);
        assert!((b.transfer - 8.0 * 96.0 / 15.75e9).abs() < 1e-18);
        // distinct rows: table 0 rows 0..=8, table 1 row 0
        assert!((b.update - (9.0 * 64.0 + 32.0) / 2.7e9).abs() < 1e-18);
    }

    #[test]
    fn faster_pcie_is_faster() {
        let slow =
            simulate_hybrid_baseline(&batches(true), &tables(), &CostModel::default()).unwrap();
        let fast = simulate_hybrid_baseline(
            &batches(true),
            &tables(),
            &CostModel {
                pcie_bw: 31.5e9,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(fast.throughput.total_time < slow.throughput.total_time);
    }
}

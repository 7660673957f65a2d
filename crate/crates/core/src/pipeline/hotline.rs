use super::report::{ChannelBytes, IterationReport, SimReport, ThroughputReport};
use super::{CostModel, PipelineError};
use crate::sched::{BatchWork, GatherSummary, HotlineRun};

fn update_time(b: &BatchWork, cost: &CostModel, num_gpus: usize) -> f64 {
    b.update_cpu_bytes as f64 / cost.cpu_stream_bw()
        + b.update_gpu_bytes as f64 / num_gpus as f64 / cost.hbm_bw
}

/// Gather duration without and with the transfer of pooled vectors.
fn gather_time(g: &GatherSummary, cost: &CostModel) -> (f64, f64) {
    let gather = g.bytes_from_cpu as f64 / cost.cpu_stream_bw()
        + g.dma_reads as f64 * cost.dma_fixed_latency
        + g.bytes_from_gpu as f64 / cost.hbm_bw
        + g.gpu_reads as f64 * cost.gpu_rd_fixed_latency
        + cost.accel_time(g.dma_reads + g.gpu_reads);
    let transfer = g.pooled_bytes as f64 / cost.pcie_bw;
    (gather, transfer)
}

/// Replays a Hotline schedule.
///
/// Per working set: the hot-set broadcast (after a freeze) and the input load
/// come first. Then popular batches run back to back on the GPUs while the
/// accelerator gathers the mixed batches one after another; mixed batch `k`
/// starts at `max(GPU free, end of gather k)`. Working sets do not overlap.
/// The GPU count of the schedule is used; `cost.num_gpus` is ignored.
pub fn simulate_hotline(run: &HotlineRun, cost: &CostModel) -> Result<SimReport, PipelineError> {
    cost.validate()?;
    if run.working_sets.is_empty() {
        return Err(PipelineError::EmptyStream);
    }
    let gpus = run.num_gpus.max(1);
    let iterations = run.working_sets.iter().map(|w| w.source_batches).sum();
    let mut report = ThroughputReport::new("hotline", gpus, iterations);
    report.popular_fraction = Some(run.popular_fraction());
    let mut timeline = Vec::with_capacity(run.working_sets.len());

    for ws in &run.working_sets {
        let mut bytes = ChannelBytes::default();
        let replicated = ws.replicated_bytes.unwrap_or(0) * gpus as u64;
        let replication_time = replicated as f64 / cost.pcie_bw;
        bytes.pcie += replicated;

        let accesses: u64 = ws.popular.iter().chain(&ws.mixed).map(|b| b.accesses).sum();
        let load_bytes = cost.load_bytes(ws.total_inputs, accesses);
        let load_time = cost.load_time(ws.total_inputs, accesses);
        bytes.cpu_dram += load_bytes;
        bytes.pcie += load_bytes;

        let start = replication_time + load_time;
        let mut gpu_free = start;
        let mut popular_exec_time = 0.0;
        for b in &ws.popular {
            let compute = cost.gpu_compute.time(b.inputs);
            let update = update_time(b, cost, gpus);
            popular_exec_time += compute + update;
            report.breakdown.gpu_compute += compute;
            report.breakdown.update += update;
            gpu_free += compute + update;
            bytes.hbm += b.update_gpu_bytes;
        }

        let mut gather_end = start;
        let mut gather_total = 0.0;
        let mut stall_time = 0.0;
        let mut mixed_exec_time = 0.0;
        for b in &ws.mixed {
            let g = b.gather.as_ref().ok_or(PipelineError::PlanMismatch {
                working_set: ws.index,
                batch_id: b.batch_id,
            })?;
            let (gather, transfer) = gather_time(g, cost);
            gather_end += gather + transfer;
            gather_total += gather + transfer;
            report.breakdown.embedding_gather += gather;
            report.breakdown.transfer += transfer;
            bytes.cpu_dram += g.bytes_from_cpu + b.update_cpu_bytes;
            bytes.pcie += g.bytes_from_cpu + g.pooled_bytes + b.update_cpu_bytes;
            bytes.hbm += g.bytes_from_gpu + b.update_gpu_bytes;

            if gather_end > gpu_free {
                stall_time += gather_end - gpu_free;
                gpu_free = gather_end;
            }
            let compute = cost.gpu_compute.time(b.inputs);
            let update = update_time(b, cost, gpus);
            mixed_exec_time += compute + update;
            report.breakdown.gpu_compute += compute;
            report.breakdown.update += update;
            gpu_free += compute + update;
        }

        report.breakdown.data_load += load_time;
        report.breakdown.transfer += replication_time;
        report.stall_time += stall_time;
        report.total_time += gpu_free;
        report.bytes.add(&bytes);
        timeline.push(IterationReport {
            working_set_id: ws.index,
            replication_time,
            load_time,
            popular_exec_time,
            gather_time: gather_total,
            stall_time,
            mixed_exec_time,
            total_time: gpu_free,
            bytes,
        });
    }

    Ok(SimReport {
        throughput: report.finish(),
        iterations: timeline,
    })
}

//! Cost model and timeline simulation.
//!
//! A Hotline schedule is replayed working set by working set: inputs are
//! loaded, popular batches run back to back on the GPUs while the
//! accelerator gathers the embeddings of the mixed batches, and each mixed
//! batch starts once both the GPUs and its gather are done. The hybrid
//! CPU-GPU and GPU-only model-parallel baselines are simulated on the same
//! mini-batch stream for comparison.

mod baseline;
mod hotline;
mod report;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use baseline::{min_gpus, simulate_gpu_only, simulate_hybrid_baseline};
pub use hotline::simulate_hotline;
pub use report::{
    breakdown, write_breakdown_csv, write_iterations_csv, Breakdown, ChannelBytes, IterationReport,
    SimReport, ThroughputReport,
};

#[derive(Debug, Error, PartialEq)]
pub enum PipelineError {
    #[error("invalid cost model: {0}")]
    InvalidCost(String),
    #[error("mixed batch {batch_id} in working set {working_set} has no gather plan")]
    PlanMismatch { working_set: usize, batch_id: u64 },
    #[error("model of {model_bytes} bytes needs {min_gpus} GPUs, got {num_gpus} (out of memory)")]
    OutOfMemory {
        model_bytes: u64,
        min_gpus: usize,
        num_gpus: usize,
    },
    #[error("no mini-batches to simulate")]
    EmptyStream,
}

/// Affine GPU step time `c0 + c1 * batch_size`, forward, backward and
/// optimizer included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpuCompute {
    pub c0: f64,
    pub c1: f64,
}

impl GpuCompute {
    pub fn time(&self, batch_size: usize) -> f64 {
        self.c0 + self.c1 * batch_size as f64
    }
}

impl Default for GpuCompute {
    fn default() -> Self {
        GpuCompute { c0: 2e-3, c1: 6e-6 }
    }
}

/// Bandwidths in bytes/s, latencies in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostModel {
    pub pcie_bw: f64,
    pub cpu_dram_bw: f64,
    pub hbm_bw: f64,
    pub inter_gpu_bw: f64,
    pub dma_fixed_latency: f64,
    pub gpu_rd_fixed_latency: f64,
    pub accel_clock_hz: f64,
    pub lookup_engines: u32,
    pub gpu_compute: GpuCompute,
    /// Dense features plus label of one input, loaded with its sparse
    /// indices.
    pub dense_bytes_per_input: u64,
    /// Bytes per sparse index in the input stream.
    pub index_bytes: u64,
    pub num_gpus: usize,
    pub gpu_hbm_capacity_bytes: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            pcie_bw: 15.75e9,
            cpu_dram_bw: 2.7e9,
            hbm_bw: 900e9,
            inter_gpu_bw: 150e9,
            dma_fixed_latency: 1.0e-6,
            gpu_rd_fixed_latency: 2.0e-6,
            accel_clock_hz: 350e6,
            lookup_engines: 64,
            gpu_compute: GpuCompute::default(),
            dense_bytes_per_input: 52,
            index_bytes: 8,
            num_gpus: 1,
            gpu_hbm_capacity_bytes: 16e9,
        }
    }
}

impl CostModel {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let rates = [
            ("pcie_bw", self.pcie_bw),
            ("cpu_dram_bw", self.cpu_dram_bw),
            ("hbm_bw", self.hbm_bw),
            ("inter_gpu_bw", self.inter_gpu_bw),
            ("accel_clock_hz", self.accel_clock_hz),
            ("gpu_hbm_capacity_bytes", self.gpu_hbm_capacity_bytes),
        ];
        for (name, v) in rates {
            if !(v > 0.0 && v.is_finite()) {
                return Err(PipelineError::InvalidCost(format!(
                    "{name} must be > 0, got {v}"
                )));
            }
        }
        let non_negative = [
            ("dma_fixed_latency", self.dma_fixed_latency),
            ("gpu_rd_fixed_latency", self.gpu_rd_fixed_latency),
            ("gpu_compute.c0", self.gpu_compute.c0),
            ("gpu_compute.c1", self.gpu_compute.c1),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(PipelineError::InvalidCost(format!(
                    "{name} must be >= 0, got {v}"
                )));
            }
        }
        if self.lookup_engines == 0 {
            return Err(PipelineError::InvalidCost(
                "lookup_engines must be >= 1".into(),
            ));
        }
        if self.num_gpus == 0 {
            return Err(PipelineError::InvalidCost("num_gpus must be >= 1".into()));
        }
        Ok(())
    }

    /// Bandwidth of a DMA stream from CPU memory to the device side.
    pub fn cpu_stream_bw(&self) -> f64 {
        self.pcie_bw.min(self.cpu_dram_bw)
    }

    /// Time to load `inputs` inputs carrying `accesses` sparse indices.
    pub fn load_time(&self, inputs: usize, accesses: u64) -> f64 {
        self.load_bytes(inputs, accesses) as f64 / self.cpu_stream_bw()
    }

    pub fn load_bytes(&self, inputs: usize, accesses: u64) -> u64 {
        inputs as u64 * self.dense_bytes_per_input + accesses * self.index_bytes
    }

    /// Accelerator processing time for `accesses` lookups.
    pub fn accel_time(&self, accesses: u64) -> f64 {
        accesses as f64 / self.lookup_engines as f64 / self.accel_clock_hz
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        CostModel::default().validate().unwrap();
        assert_eq!(CostModel::default().cpu_stream_bw(), 2.7e9);
    }

    #[test]
    fn rejects_bad_rates() {
        let bad = CostModel {
            pcie_bw: 0.0,
            ..Default::default()
        };
        assert!(matches!(bad.validate(), Err(PipelineError::InvalidCost(_))));
        let bad = CostModel {
            gpu_compute: GpuCompute { c0: -1.0, c1: 0.0 },
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn compute_is_affine() {
        let g = GpuCompute { c0: 1.0, c1: 0.5 };
        assert_eq!(g.time(0), 1.0);
        assert_eq!(g.time(4), 3.0);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<CostModel>(r#"{"pcie": 1}"#).is_err());
        let c: CostModel = serde_json::from_str(r#"{"num_gpus": 4}"#).unwrap();
        assert_eq!(c.num_gpus, 4);
        assert_eq!(c.hbm_bw, 900e9);
    }
}

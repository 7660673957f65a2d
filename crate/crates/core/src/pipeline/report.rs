use std::io::{self, Write};

use serde::Serialize;

/// Busy time per category, in seconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Breakdown {
    pub data_load: f64,
    pub embedding_gather: f64,
    pub transfer: f64,
    pub gpu_compute: f64,
    pub update: f64,
}

impl Breakdown {
    pub const CATEGORIES: [&'static str; 5] = [
        "data_load",
        "embedding_gather",
        "cpu_gpu_transfer",
        "gpu_compute",
        "update",
    ];

    pub fn values(&self) -> [f64; 5] {
        [
            self.data_load,
            self.embedding_gather,
            self.transfer,
            self.gpu_compute,
            self.update,
        ]
    }

    pub fn total(&self) -> f64 {
        self.values().iter().sum()
    }

    /// Shares of the total busy time. All zero when nothing is busy.
    pub fn fractions(&self) -> [f64; 5] {
        let total = self.total();
        if total <= 0.0 {
            return [0.0; 5];
        }
        self.values().map(|v| v / total)
    }
}

/// Bytes moved per channel.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ChannelBytes {
    pub cpu_dram: u64,
    pub pcie: u64,
    pub hbm: u64,
    pub inter_gpu: u64,
}

impl ChannelBytes {
    pub(crate) fn add(&mut self, other: &ChannelBytes) {
        self.cpu_dram += other.cpu_dram;
        self.pcie += other.pcie;
        self.hbm += other.hbm;
        self.inter_gpu += other.inter_gpu;
    }
}

/// Timeline of one working set (Hotline) or one mini-batch (baselines).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationReport {
    pub working_set_id: usize,
    pub replication_time: f64,
    pub load_time: f64,
    pub popular_exec_time: f64,
    pub gather_time: f64,
    pub stall_time: f64,
    pub mixed_exec_time: f64,
    pub total_time: f64,
    pub bytes: ChannelBytes,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThroughputReport {
    pub mode: &'static str,
    pub num_gpus: usize,
    /// One pass over the simulated stream.
    pub total_time: f64,
    pub epochs_per_hour: f64,
    /// Source mini-batches in the stream.
    pub iterations: usize,
    pub mean_iteration_time: f64,
    pub stall_time: f64,
    pub stall_fraction: f64,
    pub breakdown: Breakdown,
    pub bytes: ChannelBytes,
    pub min_gpus: Option<usize>,
    pub popular_fraction: Option<f64>,
}

impl ThroughputReport {
    pub(crate) fn new(mode: &'static str, num_gpus: usize, iterations: usize) -> Self {
        ThroughputReport {
            mode,
            num_gpus,
            total_time: 0.0,
            epochs_per_hour: 0.0,
            iterations,
            mean_iteration_time: 0.0,
            stall_time: 0.0,
            stall_fraction: 0.0,
            breakdown: Breakdown::default(),
            bytes: ChannelBytes::default(),
            min_gpus: None,
            popular_fraction: None,
        }
    }

    pub(crate) fn finish(mut self) -> Self {
        if self.total_time > 0.0 {
            self.epochs_per_hour = 3600.0 / self.total_time;
            self.stall_fraction = self.stall_time / self.total_time;
        }
        if self.iterations > 0 {
            self.mean_iteration_time = self.total_time / self.iterations as f64;
        }
        self
    }
}

/// A throughput report with its per-iteration timeline.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub throughput: ThroughputReport,
    pub iterations: Vec<IterationReport>,
}

impl SimReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Category percentages, summing to 100 unless nothing was busy.
pub fn breakdown(report: &ThroughputReport) -> Vec<(&'static str, f64)> {
    Breakdown::CATEGORIES
        .into_iter()
        .zip(report.breakdown.fractions().map(|f| f * 100.0))
        .collect()
}

/// `category,seconds,percent` rows.
pub fn write_breakdown_csv<W: Write>(report: &ThroughputReport, mut out: W) -> io::Result<()> {
    writeln!(out, "category,seconds,percent")?;
    let seconds = report.breakdown.values();
    for ((name, pct), s) in breakdown(report).into_iter().zip(seconds) {
        writeln!(out, "{name},{s},{pct}")?;
    }
    Ok(())
}

/// `working_set_id,popular_exec,gather,stall,total` rows.
pub fn write_iterations_csv<W: Write>(
    iterations: &[IterationReport],
    mut out: W,
) -> io::Result<()> {
    writeln!(out, "working_set_id,popular_exec,gather,stall,total")?;
    for it in iterations {
        writeln!(
            out,
            "{},{},{},{},{}",
            it.working_set_id, it.popular_exec_time, it.gather_time, it.stall_time, it.total_time
        )?;
    }
    Ok(())
}

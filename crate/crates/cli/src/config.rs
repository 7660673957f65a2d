//! Run configuration.
//!
//! One JSON document; every field is optional and unknown keys are
//! rejected. Command-line flags override the file.
//!
//! ```json
//! {
//!   "seed": 7,
//!   "trace": { "source": "generate", "num_inputs": 262144 },
//!   "tables": [ { "id": 0, "rows": 100000, "dim": 16, "pool": 1 } ],
//!   "zipf_s": [ 1.1 ],
//!   "eal": { "num_blocks": 65536 },
//!   "learn": { "sample_fraction": 0.05 },
//!   "batch_size": 4096,
//!   "working_set": 4,
//!   "cost": { "num_gpus": 1 }
//! }
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use hotline_core::eal::{Decay, EalConfig};
use hotline_core::pipeline::CostModel;
use hotline_core::sched::{LearnConfig, RuntimeConfig};
use hotline_core::trace::{validate_tables, TableSpec, TraceFormat, Workload};
use serde::{Deserialize, Serialize};

use crate::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Generate,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceConfig {
    pub source: Source,
    /// Inputs to generate.
    pub num_inputs: u64,
    /// Trace file, for `"source": "file"`.
    pub path: Option<PathBuf>,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig {
            source: Source::Generate,
            num_inputs: 262_144,
            path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Root seed. Generation, Feistel keys and batch sampling all derive
    /// from it; the `seed` fields of `eal` and `learn` are overwritten.
    pub seed: u64,
    pub trace: TraceConfig,
    pub tables: Vec<TableSpec>,
    pub zipf_s: Vec<f64>,
    pub eal: EalConfig,
    pub learn: LearnConfig,
    pub batch_size: usize,
    pub working_set: usize,
    pub learn_window_batches: Option<usize>,
    pub decay: Decay,
    pub cost: CostModel,
    /// Model size for the GPU-only baseline; defaults to the table bytes.
    pub model_bytes: Option<u64>,
    /// Hot capacities (bytes) for `analyze`; defaults to fractions of the
    /// logger capacity.
    pub capacity_grid: Option<Vec<u64>>,
    /// Iterations of the bank queue model in `sweep banks-queue`.
    pub bank_iterations: usize,
    pub out: PathBuf,
    /// `tsv` or `bin`.
    pub format: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        let w = Workload::tuned();
        RunConfig {
            seed: 0,
            trace: TraceConfig::default(),
            tables: w.tables,
            zipf_s: w.zipf_s,
            eal: EalConfig {
                num_blocks: 65_536,
                ..Default::default()
            },
            learn: LearnConfig::default(),
            batch_size: 4096,
            working_set: 4,
            learn_window_batches: None,
            decay: Decay::ResetRrpv,
            cost: CostModel::default(),
            model_bytes: None,
            capacity_grid: None,
            bank_iterations: 2000,
            out: PathBuf::from("out"),
            format: "tsv".into(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        let cfg = serde_json::from_str(&text)
            .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    /// Checks every section and pushes the root seed into them.
    pub fn finalize(mut self) -> anyhow::Result<Self> {
        self.eal.seed = self.seed;
        self.learn.seed = self.seed;
        validate_tables(&self.tables).context("tables")?;
        if self.zipf_s.len() != self.tables.len() {
            return Err(ConfigError(format!(
                "{} zipf exponents for {} tables",
                self.zipf_s.len(),
                self.tables.len()
            ))
            .into());
        }
        if let Some(s) = self.zipf_s.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(ConfigError(format!("zipf exponent {s} must be finite and > 0")).into());
        }
        self.eal.validate()?;
        self.learn.validate()?;
        self.runtime().validate()?;
        self.cost.validate()?;
        if self.batch_size == 0 {
            return Err(ConfigError("batch_size must be >= 1".into()).into());
        }
        if self.trace.source == Source::File && self.trace.path.is_none() {
            return Err(ConfigError("trace.path is required for a file source".into()).into());
        }
        if self.bank_iterations == 0 {
            return Err(ConfigError("bank_iterations must be >= 1".into()).into());
        }
        self.trace_format()?;
        Ok(self)
    }

    pub fn trace_format(&self) -> anyhow::Result<TraceFormat> {
        self.format
            .parse()
            .map_err(|e| ConfigError(format!("format: {e}")).into())
    }

    pub fn runtime(&self) -> RuntimeConfig {
        RuntimeConfig {
            working_set: self.working_set,
            num_gpus: self.cost.num_gpus,
            learn: self.learn.clone(),
            learn_window_batches: self.learn_window_batches,
            decay: self.decay,
        }
    }

    pub fn capacity_grid(&self) -> Vec<u64> {
        if let Some(grid) = &self.capacity_grid {
            return grid.clone();
        }
        let row = self
            .tables
            .iter()
            .map(TableSpec::row_bytes)
            .max()
            .unwrap_or(0);
        let full = self.eal.num_blocks as u64 * row;
        [16, 8, 4, 2, 1].iter().map(|d| full / d).collect()
    }
}

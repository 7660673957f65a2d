use serde::{Deserialize, Serialize};

use super::gather::{plan_gather, GatherSummary, MemoryLayout};
use super::learn::{run_learning, LearnConfig, LearnStats};
use super::reform::reform;
use super::update::route_updates;
use super::SchedError;
use crate::eal::{Decay, EalState, HotSet};
use crate::trace::{MiniBatch, TableSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuntimeConfig {
    /// Mini-batches per working set (`W`).
    pub working_set: usize,
    pub num_gpus: usize,
    pub learn: LearnConfig,
    /// Batches in the first learning window; `None` uses the whole stream.
    pub learn_window_batches: Option<usize>,
    pub decay: Decay,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        RuntimeConfig {
            working_set: 4,
            num_gpus: 1,
            learn: LearnConfig::default(),
            learn_window_batches: None,
            decay: Decay::ResetRrpv,
        }
    }
}

impl RuntimeConfig {
    pub fn validate(&self) -> Result<(), SchedError> {
        if self.working_set == 0 {
            return Err(SchedError::InvalidConfig("working_set must be >= 1".into()));
        }
        if self.num_gpus == 0 {
            return Err(SchedError::InvalidConfig("num_gpus must be >= 1".into()));
        }
        if self.learn_window_batches == Some(0) {
            return Err(SchedError::InvalidConfig(
                "learn_window_batches must be >= 1".into(),
            ));
        }
        self.learn.validate()
    }
}

/// Work of one dispatched batch, as seen by the cost model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchWork {
    pub batch_id: u64,
    pub inputs: usize,
    pub accesses: u64,
    /// Gather of a mixed batch; `None` for popular batches.
    pub gather: Option<GatherSummary>,
    pub update_cpu_rows: usize,
    pub update_cpu_bytes: u64,
    pub update_gpu_rows: usize,
    pub update_gpu_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduledWorkingSet {
    pub index: usize,
    /// Mini-batches in the working set before reformation.
    pub source_batches: usize,
    pub popular: Vec<BatchWork>,
    pub mixed: Vec<BatchWork>,
    pub popular_inputs: usize,
    pub total_inputs: usize,
    /// Hot-set bytes broadcast to the GPUs before this working set, if the
    /// logger was (re)frozen just before it.
    pub replicated_bytes: Option<u64>,
}

/// A full schedule of a mini-batch stream.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HotlineRun {
    pub batch_size: usize,
    pub working_set: usize,
    pub num_gpus: usize,
    pub learn: Vec<LearnStats>,
    pub working_sets: Vec<ScheduledWorkingSet>,
    #[serde(skip)]
    pub final_hot: HotSet,
}

impl HotlineRun {
    pub fn popular_fraction(&self) -> f64 {
        let (p, t) = self.working_sets.iter().fold((0, 0), |(p, t), ws| {
            (p + ws.popular_inputs, t + ws.total_inputs)
        });
        if t == 0 {
            0.0
        } else {
            p as f64 / t as f64
        }
    }
}

fn batch_work(
    batch: &MiniBatch,
    hot: &HotSet,
    layout: &MemoryLayout,
    mixed: bool,
) -> Result<BatchWork, SchedError> {
    let gather = if mixed {
        Some(plan_gather(batch, hot, layout, None)?.summary(batch.len()))
    } else {
        None
    };
    let update = route_updates(batch, hot, layout)?;
    Ok(BatchWork {
        batch_id: batch.batch_id,
        inputs: batch.len(),
        accesses: batch.num_accesses() as u64,
        gather,
        update_cpu_rows: update.cpu_rows.len(),
        update_cpu_bytes: update.cpu_bytes,
        update_gpu_rows: update.gpu_rows.len(),
        update_gpu_bytes: update.gpu_bytes,
    })
}

/// Learns a hot set, then classifies and reforms the stream working set by
/// working set.
///
/// With a recalibration period of `k`, the logger is unfrozen (with
/// `cfg.decay`) after every `k` working sets, re-learns from a sample of the
/// batches of those working sets and is frozen again.
pub fn schedule(
    batches: &[MiniBatch],
    tables: &[TableSpec],
    eal: &mut EalState,
    batch_size: usize,
    cfg: &RuntimeConfig,
) -> Result<HotlineRun, SchedError> {
    cfg.validate()?;
    if batches.is_empty() {
        return Err(SchedError::EmptyStream);
    }
    let window = cfg
        .learn_window_batches
        .unwrap_or(batches.len())
        .min(batches.len());
    let (hot, stats) = run_learning(&batches[..window], eal, &cfg.learn, tables)?;
    run_working_sets(
        batches,
        tables,
        hot,
        Some(eal),
        vec![stats],
        batch_size,
        cfg,
    )
}

/// Classifies and reforms the stream against a given hot set, without
/// learning or recalibration.
pub fn schedule_with_hot(
    batches: &[MiniBatch],
    tables: &[TableSpec],
    hot: HotSet,
    batch_size: usize,
    cfg: &RuntimeConfig,
) -> Result<HotlineRun, SchedError> {
    cfg.validate()?;
    if batches.is_empty() {
        return Err(SchedError::EmptyStream);
    }
    run_working_sets(batches, tables, hot, None, Vec::new(), batch_size, cfg)
}

fn run_working_sets(
    batches: &[MiniBatch],
    tables: &[TableSpec],
    mut hot: HotSet,
    mut eal: Option<&mut EalState>,
    mut learn: Vec<LearnStats>,
    batch_size: usize,
    cfg: &RuntimeConfig,
) -> Result<HotlineRun, SchedError> {
    let layout = MemoryLayout::new(tables, cfg.num_gpus);
    let mut replicate = Some(hot.bytes_used(tables));
    let mut working_sets = Vec::new();
    let chunks: Vec<&[MiniBatch]> = batches.chunks(cfg.working_set).collect();
    for (index, ws) in chunks.iter().enumerate() {
        let classified = reform(ws, &hot, batch_size);
        let popular = classified
            .popular_batches
            .iter()
            .map(|b| batch_work(b, &hot, &layout, false))
            .collect::<Result<Vec<_>, _>>()?;
        let mixed = classified
            .mixed_batches
            .iter()
            .map(|b| batch_work(b, &hot, &layout, true))
            .collect::<Result<Vec<_>, _>>()?;
        working_sets.push(ScheduledWorkingSet {
            index,
            source_batches: ws.len(),
            popular,
            mixed,
            popular_inputs: classified.popular_inputs(),
            total_inputs: classified.num_inputs(),
            replicated_bytes: replicate.take(),
        });

        let (Some(k), Some(eal)) = (cfg.learn.recalibration_period, eal.as_deref_mut()) else {
            continue;
        };
        if (index + 1) % k == 0 && index + 1 < chunks.len() {
            let start = (index + 1 - k) * cfg.working_set;
            let end = (index + 1) * cfg.working_set;
            eal.unfreeze_for_recalibration(cfg.decay);
            let (new_hot, stats) = run_learning(&batches[start..end], eal, &cfg.learn, tables)?;
            log::debug!(
                "recalibrated after working set {index}: {} hot rows",
                new_hot.len()
            );
            hot = new_hot;
            learn.push(stats);
            replicate = Some(hot.bytes_used(tables));
        }
    }

    Ok(HotlineRun {
        batch_size,
        working_set: cfg.working_set,
        num_gpus: cfg.num_gpus,
        learn,
        working_sets,
        final_hot: hot,
    })
}

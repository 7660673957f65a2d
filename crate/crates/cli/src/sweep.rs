use std::path::Path;

use anyhow::Context;
use clap::ValueEnum;
use hotline_core::eal::{
    bank_throughput_sim, capture_rate, key_of, lfu_oracle, oracle_hot, EalConfig, EalState, HotSet,
    OracleSelection,
};
use hotline_core::pipeline::{simulate_hotline, simulate_hybrid_baseline};
use hotline_core::sched::{classify_input, run_learning, schedule, Popularity};
use hotline_core::trace::TrainingInput;
use rayon::prelude::*;

use crate::commands::{load, Trace};
use crate::config::RunConfig;
use crate::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Dimension {
    BanksQueue,
    LoggerSize,
    WorkingSet,
    MinibatchSize,
}

impl Dimension {
    fn name(self) -> &'static str {
        match self {
            Dimension::BanksQueue => "banks_queue",
            Dimension::LoggerSize => "logger_size",
            Dimension::WorkingSet => "working_set",
            Dimension::MinibatchSize => "minibatch_size",
        }
    }

    fn default_grid(self) -> Vec<u64> {
        match self {
            Dimension::BanksQueue => vec![],
            Dimension::LoggerSize => vec![4096, 8192, 16384, 32768, 65536, 131072],
            Dimension::WorkingSet => vec![1, 2, 4, 8],
            Dimension::MinibatchSize => vec![1024, 2048, 4096, 8192],
        }
    }
}

fn popular_fraction(inputs: &[TrainingInput], hot: &HotSet) -> f64 {
    let popular = inputs
        .iter()
        .filter(|i| classify_input(i, hot) == Popularity::Popular)
        .count();
    popular as f64 / inputs.len() as f64
}

fn banks_queue(
    cfg: &RunConfig,
    trace: &Trace,
    banks: &[usize],
    queues: &[usize],
) -> anyhow::Result<String> {
    let keys = cfg.eal.feistel_keys();
    let stream = trace
        .inputs
        .iter()
        .flat_map(|i| &i.accesses)
        .map(|a| key_of(*a, &keys))
        .collect::<Result<Vec<u64>, _>>()?;
    let points: Vec<(usize, usize)> = queues
        .iter()
        .flat_map(|&m| banks.iter().map(move |&n| (m, n)))
        .collect();
    let rows: Vec<String> = points
        .par_iter()
        .map(|&(m, n)| {
            let issued = bank_throughput_sim(stream.iter().copied(), n, m, cfg.bank_iterations);
            format!("{m},{n},{issued}")
        })
        .collect();
    Ok(format!(
        "queue_size,banks,issues_per_iteration\n{}\n",
        rows.join("\n")
    ))
}

fn logger_size(cfg: &RunConfig, trace: &Trace, grid: &[u64]) -> anyhow::Result<String> {
    let batches = trace.batches(cfg.batch_size)?;
    let counts = lfu_oracle(&trace.inputs)?;
    let row_bytes = trace
        .tables
        .iter()
        .map(|t| t.row_bytes())
        .max()
        .unwrap_or(0);
    let rows = grid
        .par_iter()
        .map(|&blocks| -> anyhow::Result<String> {
            let mut eal = EalState::new(EalConfig {
                num_blocks: blocks as usize,
                ..cfg.eal.clone()
            })?;
            let (hot, _) = run_learning(&batches, &mut eal, &cfg.learn, &trace.tables)?;
            let oracle = oracle_hot(
                &counts,
                OracleSelection::TopK(blocks as usize),
                &trace.tables,
            )?;
            Ok(format!(
                "{blocks},{},{},{},{},{}",
                blocks * row_bytes,
                hot.len(),
                popular_fraction(&trace.inputs, &hot),
                popular_fraction(&trace.inputs, &oracle),
                capture_rate(&hot, &oracle)?
            ))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok(format!(
        "num_blocks,capacity_bytes,hot_rows,input_fraction,oracle_input_fraction,capture_rate\n{}\n",
        rows.join("\n")
    ))
}

fn working_set(cfg: &RunConfig, trace: &Trace, grid: &[u64]) -> anyhow::Result<String> {
    let batches = trace.batches(cfg.batch_size)?;
    let rows = grid
        .par_iter()
        .map(|&w| -> anyhow::Result<String> {
            let runtime = hotline_core::sched::RuntimeConfig {
                working_set: w as usize,
                ..cfg.runtime()
            };
            let mut eal = EalState::new(cfg.eal.clone())?;
            let run = schedule(&batches, &trace.tables, &mut eal, cfg.batch_size, &runtime)?;
            let t = simulate_hotline(&run, &cfg.cost)?.throughput;
            Ok(format!(
                "{w},{},{},{},{}",
                run.popular_fraction(),
                t.mean_iteration_time,
                t.stall_fraction,
                t.epochs_per_hour
            ))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok(format!(
        "working_set,popular_fraction,mean_iteration_time,stall_fraction,epochs_per_hour\n{}\n",
        rows.join("\n")
    ))
}

fn minibatch_size(cfg: &RunConfig, trace: &Trace, grid: &[u64]) -> anyhow::Result<String> {
    let rows = grid
        .par_iter()
        .map(|&b| -> anyhow::Result<String> {
            let b = b as usize;
            let batches = trace.batches(b)?;
            let mut eal = EalState::new(cfg.eal.clone())?;
            let run = schedule(&batches, &trace.tables, &mut eal, b, &cfg.runtime())?;
            let hotline = simulate_hotline(&run, &cfg.cost)?.throughput;
            let hybrid = simulate_hybrid_baseline(&batches, &trace.tables, &cfg.cost)?.throughput;
            Ok(format!(
                "{b},{},{},{},{}",
                run.popular_fraction(),
                hotline.mean_iteration_time,
                hybrid.mean_iteration_time,
                hybrid.total_time / hotline.total_time
            ))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok(format!(
        "batch_size,popular_fraction,hotline_mean_iteration_time,hybrid_mean_iteration_time,speedup\n{}\n",
        rows.join("\n")
    ))
}

pub fn run(
    cfg: &RunConfig,
    dimension: Dimension,
    trace: Option<&Path>,
    grid: Option<Vec<u64>>,
    banks: Option<Vec<usize>>,
    queues: Option<Vec<usize>>,
) -> anyhow::Result<()> {
    let grid = grid.unwrap_or_else(|| dimension.default_grid());
    if dimension != Dimension::BanksQueue && (grid.is_empty() || grid.contains(&0)) {
        return Err(ConfigError("sweep grid must be non-empty and positive".into()).into());
    }
    let banks = banks.unwrap_or_else(|| vec![1, 2, 4, 8, 16, 32, 64, 128]);
    let queues = queues.unwrap_or_else(|| vec![32, 64, 128, 256, 512]);
    if dimension == Dimension::BanksQueue
        && (banks.is_empty() || queues.is_empty() || banks.contains(&0) || queues.contains(&0))
    {
        return Err(ConfigError("banks and queues must be non-empty and positive".into()).into());
    }

    let trace = load(cfg, trace)?;
    let csv = match dimension {
        Dimension::BanksQueue => banks_queue(cfg, &trace, &banks, &queues)?,
        Dimension::LoggerSize => logger_size(cfg, &trace, &grid)?,
        Dimension::WorkingSet => working_set(cfg, &trace, &grid)?,
        Dimension::MinibatchSize => minibatch_size(cfg, &trace, &grid)?,
    };
    std::fs::create_dir_all(&cfg.out)?;
    let path = cfg.out.join(format!("sweep_{}.csv", dimension.name()));
    std::fs::write(&path, &csv).with_context(|| format!("writing {}", path.display()))?;
    println!(
        "wrote {} points to {}",
        csv.lines().count() - 1,
        path.display()
    );
    print!("{csv}");
    Ok(())
}

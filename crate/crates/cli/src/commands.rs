use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use hotline_core::eal::{EalState, HotSet};
use hotline_core::pipeline::{
    breakdown, simulate_gpu_only, simulate_hotline, simulate_hybrid_baseline, write_breakdown_csv,
    write_iterations_csv, SimReport,
};
use hotline_core::sched::{run_learning, schedule, schedule_with_hot};
use hotline_core::trace::{
    analyze_skew, batch, gen_zipf_trace, load_trace, write_trace, MiniBatch, TableSpec,
    TraceFormat, TrainingInput,
};
use serde::Serialize;

use crate::config::{RunConfig, Source};
use crate::{ConfigError, Mode};

/// Tables and inputs of the run, from `--trace`, the configured file or the
/// generator.
pub struct Trace {
    pub tables: Vec<TableSpec>,
    pub inputs: Vec<TrainingInput>,
}

impl Trace {
    pub fn batches(&self, batch_size: usize) -> anyhow::Result<Vec<MiniBatch>> {
        Ok(batch(self.inputs.iter().cloned(), batch_size)?.collect())
    }

    pub fn model_bytes(&self) -> u64 {
        self.tables.iter().map(TableSpec::table_bytes).sum()
    }
}

fn format_of(path: &Path, fallback: TraceFormat) -> TraceFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some("bin") => TraceFormat::Bin,
        Some("tsv") => TraceFormat::Tsv,
        _ => fallback,
    }
}

pub fn load(cfg: &RunConfig, trace: Option<&Path>) -> anyhow::Result<Trace> {
    let path = trace.or(match cfg.trace.source {
        Source::File => cfg.trace.path.as_deref(),
        Source::Generate => None,
    });
    let Some(path) = path else {
        let inputs = gen_zipf_trace(&cfg.tables, cfg.trace.num_inputs, &cfg.zipf_s, cfg.seed)?;
        return Ok(Trace {
            tables: cfg.tables.clone(),
            inputs: inputs.collect(),
        });
    };
    if !path.is_file() {
        return Err(ConfigError(format!("trace {} does not exist", path.display())).into());
    }
    let (tables, reader) = load_trace(path, format_of(path, cfg.trace_format()?))?;
    let inputs = reader
        .collect::<Result<Vec<_>, _>>()
        .with_context(|| format!("reading {}", path.display()))?;
    if inputs.is_empty() {
        return Err(ConfigError(format!("trace {} has no inputs", path.display())).into());
    }
    Ok(Trace { tables, inputs })
}

fn out_dir(cfg: &RunConfig) -> anyhow::Result<&Path> {
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    Ok(&cfg.out)
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn gen(cfg: &RunConfig) -> anyhow::Result<()> {
    let format = cfg.trace_format()?;
    let inputs = gen_zipf_trace(&cfg.tables, cfg.trace.num_inputs, &cfg.zipf_s, cfg.seed)?;
    let path: PathBuf = out_dir(cfg)?.join(format!("trace.{}", format.extension()));
    let n = write_trace(&path, format, &cfg.tables, inputs)?;
    println!("wrote {n} records to {}", path.display());
    Ok(())
}

pub fn analyze(
    cfg: &RunConfig,
    trace: Option<&Path>,
    capacity: Option<Vec<u64>>,
) -> anyhow::Result<()> {
    let trace = load(cfg, trace)?;
    let grid = capacity.unwrap_or_else(|| cfg.capacity_grid());
    let report = analyze_skew(&trace.inputs, &trace.tables, &grid)?;
    let dir = out_dir(cfg)?;
    let mut out = create(&dir.join("coverage.csv"))?;
    report.write_coverage_csv(&mut out)?;
    out.flush()?;
    let mut out = create(&dir.join("histogram.csv"))?;
    report.write_histogram_csv(&mut out)?;
    out.flush()?;
    println!(
        "{} inputs, {} accesses",
        report.total_inputs, report.total_accesses
    );
    for p in &report.coverage_curve {
        println!(
            "hot capacity {} B ({} rows): {:.4} of accesses, {:.4} of inputs all-hot",
            p.hot_bytes, p.hot_rows, p.access_fraction, p.input_fraction
        );
    }
    Ok(())
}

pub fn learn(cfg: &RunConfig, trace: Option<&Path>) -> anyhow::Result<()> {
    let trace = load(cfg, trace)?;
    let batches = trace.batches(cfg.batch_size)?;
    let mut eal = EalState::new(cfg.eal.clone())?;
    let (hot, stats) = run_learning(&batches, &mut eal, &cfg.learn, &trace.tables)?;
    let dir = out_dir(cfg)?;
    write_text(&dir.join("hotset.json"), &(hot.to_json() + "\n"))?;
    write_json(&dir.join("learn_stats.json"), &stats)?;
    println!(
        "sampled {} of {} batches, {} hot rows ({} bytes)",
        stats.sampled_batches,
        stats.window_batches,
        hot.len(),
        hot.bytes_used(&trace.tables)
    );
    match stats.coverage_vs_oracle {
        Some(c) => println!("capture rate vs oracle: {c:.4}"),
        None => println!("capture rate vs oracle: n/a (empty oracle)"),
    }
    Ok(())
}

/// Runs one mode on a loaded trace.
pub fn simulate_trace(
    cfg: &RunConfig,
    trace: &Trace,
    mode: Mode,
    hot: Option<HotSet>,
) -> anyhow::Result<SimReport> {
    let batches = trace.batches(cfg.batch_size)?;
    let report = match mode {
        Mode::Hotline => {
            let run = match hot {
                Some(hot) => {
                    schedule_with_hot(&batches, &trace.tables, hot, cfg.batch_size, &cfg.runtime())?
                }
                None => {
                    let mut eal = EalState::new(cfg.eal.clone())?;
                    schedule(
                        &batches,
                        &trace.tables,
                        &mut eal,
                        cfg.batch_size,
                        &cfg.runtime(),
                    )?
                }
            };
            simulate_hotline(&run, &cfg.cost)?
        }
        Mode::Hybrid => simulate_hybrid_baseline(&batches, &trace.tables, &cfg.cost)?,
        Mode::GpuOnly => {
            let model = cfg.model_bytes.unwrap_or_else(|| trace.model_bytes());
            simulate_gpu_only(model, &batches, &trace.tables, &cfg.cost)?
        }
    };
    Ok(report)
}

pub fn simulate(
    cfg: &RunConfig,
    trace: Option<&Path>,
    mode: Mode,
    hotset: Option<&Path>,
) -> anyhow::Result<()> {
    let hot = match hotset {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
            Some(
                HotSet::from_json(&text)
                    .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?,
            )
        }
        None => None,
    };
    let trace = load(cfg, trace)?;
    let report = simulate_trace(cfg, &trace, mode, hot)?;
    let dir = out_dir(cfg)?;
    let name = mode.name();
    write_text(
        &dir.join(format!("{name}_report.json")),
        &(report.to_json() + "\n"),
    )?;
    let mut out = create(&dir.join(format!("{name}_iterations.csv")))?;
    write_iterations_csv(&report.iterations, &mut out)?;
    out.flush()?;
    let mut out = create(&dir.join(format!("{name}_breakdown.csv")))?;
    write_breakdown_csv(&report.throughput, &mut out)?;
    out.flush()?;

    let t = &report.throughput;
    println!("mode {name}: {} GPU(s)", t.num_gpus);
    if let Some(p) = t.popular_fraction {
        println!("popular inputs: {p:.4}");
    }
    if let Some(m) = t.min_gpus {
        println!("min GPUs: {m}");
    }
    println!("epoch time: {:.6} s", t.total_time);
    println!("epochs/hour: {:.3}", t.epochs_per_hour);
    println!("mean iteration time: {:.6} s", t.mean_iteration_time);
    println!("stall fraction: {:.4}", t.stall_fraction);
    for (category, pct) in breakdown(t) {
        println!("  {category}: {pct:.2}%");
    }
    Ok(())
}

const MODES: [&str; 3] = ["hotline", "hybrid", "gpu_only"];

/// Collects `<mode>_report.json` files of the output directory into
/// `summary.csv`.
pub fn report(cfg: &RunConfig) -> anyhow::Result<()> {
    let dir = &cfg.out;
    let mut rows = Vec::new();
    for mode in MODES {
        let path = dir.join(format!("{mode}_report.json"));
        if !path.is_file() {
            continue;
        }
        let text =
            fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        let t = &value["throughput"];
        let num = |v: &serde_json::Value| v.as_f64().unwrap_or(f64::NAN);
        let bd = &t["breakdown"];
        let parts = [
            num(&bd["data_load"]),
            num(&bd["embedding_gather"]),
            num(&bd["transfer"]),
            num(&bd["gpu_compute"]),
            num(&bd["update"]),
        ];
        let busy: f64 = parts.iter().sum();
        let pct: Vec<String> = parts
            .iter()
            .map(|p| {
                if busy > 0.0 {
                    (p / busy * 100.0).to_string()
                } else {
                    "0".into()
                }
            })
            .collect();
        rows.push(format!(
            "{mode},{},{},{},{},{}",
            num(&t["total_time"]),
            num(&t["epochs_per_hour"]),
            num(&t["mean_iteration_time"]),
            num(&t["stall_fraction"]),
            pct.join(",")
        ));
    }
    if rows.is_empty() {
        return Err(ConfigError(format!("no simulation reports in {}", dir.display())).into());
    }
    let mut text = String::from(
        "mode,total_time,epochs_per_hour,mean_iteration_time,stall_fraction,\
         data_load_pct,embedding_gather_pct,cpu_gpu_transfer_pct,gpu_compute_pct,update_pct\n",
    );
    for r in &rows {
        text.push_str(r);
        text.push('\n');
    }
    write_text(&dir.join("summary.csv"), &text)?;
    print!("{text}");
    Ok(())
}

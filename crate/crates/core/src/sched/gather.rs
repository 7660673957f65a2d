//! Gather planning for mixed mini-batches.
//!
//! For every input and table the plan fetches each looked-up row, cold rows
//! by DMA from CPU memory and hot rows from a GPU replica, and pools them into
//! one vector. Instructions follow the accelerator ISA:
//!
//! | opcode   | operand 1              | operand 2            |
//! |----------|------------------------|----------------------|
//! | `dma_rd` | CPU address            | bytes                |
//! | `dma_wr` | CPU address            | bytes                |
//! | `v_add`  | fetch sequence number  | vector buffer slot   |
//! | `v_mul`  | fetch sequence number  | vector buffer slot   |
//! | `s_wr`   | address register index | table base address   |
//! | `gpu_rd` | GPU device id          | packed `(table,row)` |

use std::collections::HashMap;
use std::fmt;
use std::io::{self, Write};

use serde::Serialize;

use super::SchedError;
use crate::eal::{pack_key, HotSet};
use crate::seed;
use crate::trace::{MiniBatch, SparseAccess, TableSpec};

const CPU_BASE: u64 = 0x1_0000_0000;
const GPU_HOT_BASE: u64 = 0x80_0000_0000;
const PAGE: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Opcode {
    DmaRd,
    DmaWr,
    VAdd,
    VMul,
    SWr,
    GpuRd,
}

impl fmt::Display for Opcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Opcode::DmaRd => "dma_rd",
            Opcode::DmaWr => "dma_wr",
            Opcode::VAdd => "v_add",
            Opcode::VMul => "v_mul",
            Opcode::SWr => "s_wr",
            Opcode::GpuRd => "gpu_rd",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Instruction {
    pub opcode: Opcode,
    pub op1: u64,
    pub op2: u64,
}

impl Instruction {
    pub fn new(opcode: Opcode, op1: u64, op2: u64) -> Self {
        Instruction { opcode, op1, op2 }
    }
}

/// Where each table lives.
///
/// Tables are laid out back to back in CPU memory, each region page aligned.
/// Hot rows are replicated on every GPU.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryLayout {
    tables: Vec<TableSpec>,
    cpu_base: HashMap<u32, u64>,
    gpu_hot_base: Vec<u64>,
}

impl MemoryLayout {
    pub fn new(tables: &[TableSpec], num_gpus: usize) -> Self {
        let mut sorted = tables.to_vec();
        sorted.sort_by_key(|t| t.table_id);
        let mut cpu_base = HashMap::new();
        let mut next = CPU_BASE;
        for t in &sorted {
            cpu_base.insert(t.table_id, next);
            next += t.table_bytes().div_ceil(PAGE) * PAGE;
        }
        let gpu_hot_base = (0..num_gpus.max(1) as u64)
            .map(|g| GPU_HOT_BASE * (g + 1))
            .collect();
        MemoryLayout {
            tables: sorted,
            cpu_base,
            gpu_hot_base,
        }
    }

    pub fn tables(&self) -> &[TableSpec] {
        &self.tables
    }

    pub fn num_gpus(&self) -> usize {
        self.gpu_hot_base.len()
    }

    pub fn cpu_base(&self, table_id: u32) -> Option<u64> {
        self.cpu_base.get(&table_id).copied()
    }

    pub fn gpu_hot_base(&self, gpu: usize) -> Option<u64> {
        self.gpu_hot_base.get(gpu).copied()
    }

    pub fn table(&self, table_id: u32) -> Result<&TableSpec, SchedError> {
        self.tables
            .iter()
            .find(|t| t.table_id == table_id)
            .ok_or(SchedError::UnknownTable(table_id))
    }

    /// CPU address of a row: `base + row * dim * 4`.
    pub fn cpu_addr(&self, access: SparseAccess) -> Result<u64, SchedError> {
        let t = self.table(access.table_id)?;
        let base = self.cpu_base[&access.table_id];
        Ok(base + access.row_index * t.row_bytes())
    }
}

/// Source of embedding row values.
pub trait RowSource {
    fn fill_row(&self, table_id: u32, row: u64, out: &mut [f32]);
}

/// Deterministic pseudorandom rows in `[-1, 1)`, a pure function of
/// `(seed, table, row, element)`.
#[derive(Debug, Clone, Copy)]
pub struct SeededRows {
    seed: u64,
}

impl SeededRows {
    pub fn new(root_seed: u64) -> Self {
        SeededRows {
            seed: seed::derive(root_seed, seed::ROWS),
        }
    }
}

impl RowSource for SeededRows {
    fn fill_row(&self, table_id: u32, row: u64, out: &mut [f32]) {
        let row_seed = seed::split(seed::split(self.seed, table_id as u64), row);
        for (j, v) in out.iter_mut().enumerate() {
            let bits = seed::split(row_seed, j as u64) >> 40;
            *v = bits as f32 / (1u64 << 23) as f32 - 1.0;
        }
    }
}

/// Pools rows into one vector, left to right.
///
/// Unweighted: `r0 + r1 + ...`. Weighted: `w0*r0 + w1*r1 + ...`.
pub fn reduce<R: AsRef<[f32]>>(
    rows: &[R],
    weights: Option<&[f32]>,
) -> Result<Vec<f32>, SchedError> {
    let first = rows.first().ok_or(SchedError::EmptyBag)?.as_ref();
    let dim = first.len();
    if let Some(w) = weights {
        if w.len() != rows.len() {
            return Err(SchedError::WeightCount {
                rows: rows.len(),
                weights: w.len(),
            });
        }
    }
    let weight = |i: usize| weights.map(|w| w[i]);
    let mut acc: Vec<f32> = match weight(0) {
        Some(w) => first.iter().map(|x| w * x).collect(),
        None => first.to_vec(),
    };
    for (i, row) in rows.iter().enumerate().skip(1) {
        let row = row.as_ref();
        if row.len() != dim {
            return Err(SchedError::DimMismatch {
                expected: dim,
                got: row.len(),
            });
        }
        match weight(i) {
            Some(w) => acc.iter_mut().zip(row).for_each(|(a, x)| *a += w * x),
            None => acc.iter_mut().zip(row).for_each(|(a, x)| *a += x),
        }
    }
    Ok(acc)
}

/// Memory operations and pooled vectors for one mini-batch.
#[derive(Debug, Clone, PartialEq)]
pub struct GatherPlan {
    pub batch_id: u64,
    pub instructions: Vec<Instruction>,
    /// One vector per `(input, table)`, inputs in batch order and tables by
    /// ascending id. Empty when the plan was built without a row source.
    pub pooled_vectors: Vec<Vec<f32>>,
    pub bytes_from_cpu: u64,
    pub bytes_from_gpu: u64,
    pub gpu_read_counts: Vec<u64>,
    pub dma_reads: u64,
    pub gpu_reads: u64,
    /// Bytes of pooled vectors shipped to the GPUs.
    pub pooled_bytes: u64,
    pub total_accesses: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GatherSummary {
    pub batch_id: u64,
    pub inputs: usize,
    pub instructions: usize,
    pub dma_reads: u64,
    pub gpu_reads: u64,
    pub bytes_from_cpu: u64,
    pub bytes_from_gpu: u64,
    pub pooled_bytes: u64,
    pub gpu_read_counts: Vec<u64>,
}

impl GatherPlan {
    pub fn summary(&self, inputs: usize) -> GatherSummary {
        GatherSummary {
            batch_id: self.batch_id,
            inputs,
            instructions: self.instructions.len(),
            dma_reads: self.dma_reads,
            gpu_reads: self.gpu_reads,
            bytes_from_cpu: self.bytes_from_cpu,
            bytes_from_gpu: self.bytes_from_gpu,
            pooled_bytes: self.pooled_bytes,
            gpu_read_counts: self.gpu_read_counts.clone(),
        }
    }

    /// Instruction trace as `seq,opcode,op1,op2` CSV.
    pub fn write_instructions_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "seq,opcode,op1,op2")?;
        for (seq, ins) in self.instructions.iter().enumerate() {
            writeln!(out, "{},{},{},{}", seq, ins.opcode, ins.op1, ins.op2)?;
        }
        Ok(())
    }
}

/// Plans the gather of one batch.
///
/// Each cold lookup becomes a `dma_rd` of one row; each hot lookup a
/// `gpu_rd`, GPUs taken round-robin within the batch. Every fetched row is
/// followed by a `v_add` into its `(input, table)` buffer slot. With a row
/// source the pooled vectors are computed with [`reduce`] in lookup order.
pub fn plan_gather(
    batch: &MiniBatch,
    hot: &HotSet,
    layout: &MemoryLayout,
    store: Option<&dyn RowSource>,
) -> Result<GatherPlan, SchedError> {
    let tables = layout.tables();
    let num_gpus = layout.num_gpus();
    let mut instructions = Vec::with_capacity(tables.len() + 2 * batch.num_accesses());
    for (reg, t) in tables.iter().enumerate() {
        instructions.push(Instruction::new(
            Opcode::SWr,
            reg as u64,
            layout.cpu_base(t.table_id).unwrap(),
        ));
    }
    for input in &batch.inputs {
        for a in &input.accesses {
            layout.table(a.table_id)?;
        }
    }

    let mut plan = GatherPlan {
        batch_id: batch.batch_id,
        instructions: Vec::new(),
        pooled_vectors: Vec::new(),
        bytes_from_cpu: 0,
        bytes_from_gpu: 0,
        gpu_read_counts: vec![0; num_gpus],
        dma_reads: 0,
        gpu_reads: 0,
        pooled_bytes: 0,
        total_accesses: 0,
    };
    let mut next_gpu = 0usize;
    let mut rows: Vec<Vec<f32>> = Vec::new();

    for (input_pos, input) in batch.inputs.iter().enumerate() {
        for (table_pos, t) in tables.iter().enumerate() {
            let slot = (input_pos * tables.len() + table_pos) as u64;
            let row_bytes = t.row_bytes();
            rows.clear();
            for a in input.table_accesses(t.table_id) {
                let fetch_seq = instructions.len() as u64;
                if hot.contains(a) {
                    let key = pack_key(*a)?;
                    instructions.push(Instruction::new(Opcode::GpuRd, next_gpu as u64, key));
                    plan.gpu_read_counts[next_gpu] += 1;
                    next_gpu = (next_gpu + 1) % num_gpus;
                    plan.gpu_reads += 1;
                    plan.bytes_from_gpu += row_bytes;
                } else {
                    instructions.push(Instruction::new(
                        Opcode::DmaRd,
                        layout.cpu_addr(*a)?,
                        row_bytes,
                    ));
                    plan.dma_reads += 1;
                    plan.bytes_from_cpu += row_bytes;
                }
                instructions.push(Instruction::new(Opcode::VAdd, fetch_seq, slot));
                plan.total_accesses += 1;
                if let Some(store) = store {
                    let mut row = vec![0.0f32; t.embedding_dim as usize];
                    store.fill_row(a.table_id, a.row_index, &mut row);
                    rows.push(row);
                }
            }
            plan.pooled_bytes += row_bytes;
            if store.is_some() {
                let pooled = if rows.is_empty() {
                    vec![0.0; t.embedding_dim as usize]
                } else {
                    reduce(&rows, None)?
                };
                plan.pooled_vectors.push(pooled);
            }
        }
    }
    plan.instructions = instructions;
    Ok(plan)
}

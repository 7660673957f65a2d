use std::collections::BTreeSet;

use super::gather::{Instruction, MemoryLayout, Opcode};
use super::SchedError;
use crate::eal::HotSet;
use crate::trace::{MiniBatch, SparseAccess};

/// Where the gradient updates of one batch go.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdatePlan {
    /// Distinct cold rows, written back to CPU memory.
    pub cpu_rows: Vec<SparseAccess>,
    /// Distinct hot rows, updated in every GPU replica.
    pub gpu_rows: Vec<SparseAccess>,
    pub num_gpus: usize,
    /// One `dma_wr` per cold row.
    pub instructions: Vec<Instruction>,
    pub cpu_bytes: u64,
    /// Bytes written across all replicas.
    pub gpu_bytes: u64,
}

impl UpdatePlan {
    pub fn gpu_row_writes(&self) -> usize {
        self.gpu_rows.len() * self.num_gpus
    }
}

/// Routes each distinct row touched by `batch` to CPU or GPU memory.
pub fn route_updates(
    batch: &MiniBatch,
    hot: &HotSet,
    layout: &MemoryLayout,
) -> Result<UpdatePlan, SchedError> {
    let touched: BTreeSet<SparseAccess> = batch
        .inputs
        .iter()
        .flat_map(|i| i.accesses.iter().copied())
        .collect();
    let num_gpus = layout.num_gpus();
    let mut plan = UpdatePlan {
        cpu_rows: Vec::new(),
        gpu_rows: Vec::new(),
        num_gpus,
        instructions: Vec::new(),
        cpu_bytes: 0,
        gpu_bytes: 0,
    };
    for a in touched {
        let row_bytes = layout.table(a.table_id)?.row_bytes();
        if hot.contains(&a) {
            plan.gpu_rows.push(a);
            plan.gpu_bytes += row_bytes * num_gpus as u64;
        } else {
            plan.instructions.push(Instruction::new(
                Opcode::DmaWr,
                layout.cpu_addr(a)?,
                row_bytes,
            ));
            plan.cpu_rows.push(a);
            plan.cpu_bytes += row_bytes;
        }
    }
    Ok(plan)
}

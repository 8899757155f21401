//! A0: compaction by removing one instruction at a time.
//!
//! Every admissible instruction is tried in program order: it is removed
//! tentatively, the program is fault-simulated, and the removal is kept
//! only if the detected-fault count does not drop. One fault simulation
//! per trial.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::asm::Program;
use crate::cfg::{AdmissibleRegion, BasicBlock};
use crate::compactor::{halting_trace, CompactionError, CompactionResult};
use crate::faultsim::{FaultSimError, FaultSimulator, SimOptions};
use crate::netlist::Netlist;

/// `p` without the instructions in `removed`. Labels on removed
/// instructions are dropped; callers only remove instructions that no
/// branch targets.
fn without(p: &Program, removed: &BTreeSet<usize>) -> Result<Program, CompactionError> {
    let mut new_index = Vec::with_capacity(p.len());
    let mut instructions = Vec::with_capacity(p.len());
    for (i, ins) in p.instructions.iter().enumerate() {
        if removed.contains(&i) {
            new_index.push(None);
        } else {
            new_index.push(Some(instructions.len()));
            instructions.push(ins.clone());
        }
    }
    let labels: BTreeMap<String, usize> = p
        .labels
        .iter()
        .filter_map(|(name, &i)| new_index[i].map(|j| (name.clone(), j)))
        .collect();
    Ok(Program::from_parts(
        p.name.clone(),
        p.word_width,
        instructions,
        labels,
    )?)
}

/// Runs A0 over the admissible instructions of `p`.
pub fn compact_a0(
    p: &Program,
    n: &Netlist,
    region: &AdmissibleRegion,
    bbs: &[BasicBlock],
    opts: &SimOptions,
    sim: &dyn FaultSimulator,
) -> Result<CompactionResult, CompactionError> {
    let faults = n.enumerate_faults();
    if faults.is_empty() {
        return Err(CompactionError::NoFaults);
    }
    let original_duration = halting_trace(p, n, opts)?.duration();
    let mut baseline = sim.simulate_all(p, n, &faults, opts)?.detected_count();
    let mut removed = BTreeSet::new();
    let mut trials = 0u32;
    for i in region.instruction_indices(bbs) {
        removed.insert(i);
        let trial = without(p, &removed)?;
        trials += 1;
        let detected = match sim.simulate_all(&trial, n, &faults, opts) {
            Ok(r) => Some(r.detected_count()),
            Err(FaultSimError::GoldenDidNotHalt(_)) => None,
            Err(e) => return Err(e.into()),
        };
        match detected {
            Some(d) if d >= baseline => baseline = d,
            _ => {
                removed.remove(&i);
            }
        }
    }
    let compacted = without(p, &removed)?;
    let compacted_duration = halting_trace(&compacted, n, opts)?.duration();
    let removed_block_ids = bbs
        .iter()
        .filter(|bb| (bb.start..=bb.end).all(|i| removed.contains(&i)))
        .map(|bb| bb.id)
        .collect();
    Ok(CompactionResult {
        original_size: p.len(),
        compacted_size: compacted.len(),
        original_duration,
        compacted_duration,
        compacted,
        removed_block_ids,
        fault_sim_invocations: trials,
    })
}

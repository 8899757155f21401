//! Compaction of software-based self-test programs from a single fault
//! simulation.
//!
//! A test program is traced on a small processor model whose execute unit
//! is a gate-level netlist. One stuck-at fault simulation, observed at the
//! memory bus, records the cycle where each fault is first detected. Those
//! cycles are mapped back to the instructions executing in them, and every
//! removable basic block that contains none of these instructions is
//! dropped.
//!
//! Modules, in pipeline order:
//!
//! - [`asm`]: micro-ISA assembly parser and emitter
//! - [`cfg`]: basic blocks and the admissible (removable) region
//! - [`netlist`]: gate-level execute unit, evaluation and fault universe
//! - [`iss`]: cycle-by-cycle execution producing the trace
//! - [`faultsim`]: bus-observed stuck-at fault simulation
//! - [`compactor`]: instruction labeling, block reduction, verification
//! - [`baseline`]: one-instruction-at-a-time removal for comparison
//! - [`tpgen`]: seeded test-program generators

#![no_std]

extern crate alloc;

pub mod asm;
pub mod baseline;
pub mod cfg;
pub mod compactor;
pub mod faultsim;
pub mod iss;
pub mod netlist;
pub mod tpgen;

pub use asm::{emit_program, parse_program, Instruction, Op, Program};
pub use cfg::{find_admissible_region, partition_basic_blocks, AdmissibleRegion, BasicBlock};
pub use compactor::{
    compact, label_instructions, reduce_program, verify, CompactionReport, CompactionResult,
};
pub use faultsim::{
    fault_coverage, FaultSimReport, FaultSimulator, SerialSimulator, SimMode, SimOptions,
};
pub use netlist::{build_reference_alu, load_netlist, Fault, Netlist};

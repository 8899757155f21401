//! Compaction by basic-block removal driven by a single fault simulation.
//!
//! Pipeline: partition into blocks and find the admissible region, trace the
//! fault-free run, fault-simulate once, tag every instruction that executes
//! on a cycle where some fault is first detected as essential, drop every
//! admissible block without an essential instruction, and reassemble. A
//! separate fault simulation of the result feeds the report.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::asm::{AsmError, Program};
use crate::cfg::{find_admissible_region, partition_basic_blocks, AdmissibleRegion, BasicBlock};
use crate::faultsim::{fault_coverage, FaultSimError, FaultSimReport, FaultSimulator, SimOptions};
use crate::iss::{self, IssError, TraceReport};
use crate::netlist::Netlist;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Essential,
    NotEssential,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledProgram {
    pub program: Program,
    /// One tag per instruction index.
    pub labels: Vec<Label>,
}

impl LabeledProgram {
    pub fn is_essential(&self, index: usize) -> bool {
        self.labels[index] == Label::Essential
    }

    pub fn essential_indices(&self) -> BTreeSet<usize> {
        (0..self.labels.len())
            .filter(|&i| self.is_essential(i))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CompactionError {
    #[error(transparent)]
    FaultSim(#[from] FaultSimError),
    #[error(transparent)]
    Iss(#[from] IssError),
    #[error(transparent)]
    Asm(#[from] AsmError),
    #[error("inconsistent trace: cycle {cc} executes `{traced}` but pc {pc} holds `{expected}`")]
    InconsistentTrace {
        cc: u64,
        pc: usize,
        traced: String,
        expected: String,
    },
    #[error("detection at cycle {0} lies outside the trace")]
    DetectionOutsideTrace(u64),
    #[error("fault-free run of `{0}` did not halt")]
    NotHalting(String),
    #[error("internal error: block {0} selected for removal is a branch target")]
    RemovedBranchTarget(usize),
    #[error("fault universe is empty")]
    NoFaults,
}

/// Tags as essential every instruction that executes on a cycle with at
/// least one first detection.
pub fn label_instructions(
    p: &Program,
    trace: &TraceReport,
    fsr: &FaultSimReport,
) -> Result<LabeledProgram, CompactionError> {
    let mut labels = vec![Label::NotEssential; p.len()];
    for (&cc, &count) in &fsr.per_cycle {
        if count == 0 {
            continue;
        }
        let rec = trace
            .at_cycle(cc)
            .ok_or(CompactionError::DetectionOutsideTrace(cc))?;
        let expected = p
            .instructions
            .get(rec.pc)
            .map(|i| i.op.to_string())
            .unwrap_or_default();
        if rec.di != expected {
            return Err(CompactionError::InconsistentTrace {
                cc,
                pc: rec.pc,
                traced: rec.di.clone(),
                expected,
            });
        }
        labels[rec.pc] = Label::Essential;
    }
    Ok(LabeledProgram {
        program: p.clone(),
        labels,
    })
}

/// Drops every admissible block without an essential instruction.
/// Returns the reduced program and the removed block ids.
pub fn reduce_program(
    lp: &LabeledProgram,
    region: &AdmissibleRegion,
    bbs: &[BasicBlock],
) -> Result<(Program, BTreeSet<usize>), CompactionError> {
    let p = &lp.program;
    let mut removed = BTreeSet::new();
    for bb in bbs {
        if region.contains(bb.id) && !(bb.start..=bb.end).any(|i| lp.is_essential(i)) {
            if bb.is_branch_target {
                return Err(CompactionError::RemovedBranchTarget(bb.id));
            }
            removed.insert(bb.id);
        }
    }
    let mut new_index = vec![None; p.len()];
    let mut instructions = Vec::with_capacity(p.len());
    for bb in bbs.iter().filter(|bb| !removed.contains(&bb.id)) {
        let range = bb.start..=bb.end;
        for (slot, ins) in new_index[range.clone()]
            .iter_mut()
            .zip(&p.instructions[range])
        {
            *slot = Some(instructions.len());
            instructions.push(ins.clone());
        }
    }
    let labels: BTreeMap<String, usize> = p
        .labels
        .iter()
        .filter_map(|(name, &i)| new_index[i].map(|j| (name.clone(), j)))
        .collect();
    let reduced = Program::from_parts(p.name.clone(), p.word_width, instructions, labels)?;
    Ok((reduced, removed))
}

/// Outcome of one compaction algorithm.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompactionResult {
    pub compacted: Program,
    pub removed_block_ids: BTreeSet<usize>,
    pub original_size: usize,
    pub compacted_size: usize,
    pub original_duration: u64,
    pub compacted_duration: u64,
    /// Full-program fault simulations the algorithm needed.
    pub fault_sim_invocations: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Proposed,
    A0,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Proposed => "proposed",
            Algorithm::A0 => "a0",
        }
    }
}

/// `100 * (1 - compacted / original)`; zero for an empty original.
pub fn reduction_pct(original: u64, compacted: u64) -> f64 {
    if original == 0 {
        return 0.0;
    }
    100.0 * (1.0 - compacted as f64 / original as f64)
}

/// Two decimals with an explicit sign, `0.00` when it rounds to zero.
pub fn format_signed_pct(v: f64) -> String {
    let s = format!("{v:.2}");
    match s.as_str() {
        "-0.00" | "0.00" => "0.00".to_string(),
        _ if v > 0.0 => format!("+{s}"),
        _ => s,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompactionReport {
    pub program_name: String,
    pub algorithm: Algorithm,
    pub original_size: usize,
    pub compacted_size: usize,
    pub original_duration: u64,
    pub compacted_duration: u64,
    pub total_faults: usize,
    pub detected_original: usize,
    pub detected_compacted: usize,
    pub removed_blocks: usize,
    pub size_reduction_pct: f64,
    pub duration_reduction_pct: f64,
    pub fc_original_pct: f64,
    pub fc_compacted_pct: f64,
    pub diff_fc_pct: f64,
    pub fault_sim_invocations: u32,
    pub compaction_time_seconds: f64,
}

/// Raw measurements a report is derived from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawMetrics {
    pub program_name: String,
    pub algorithm: Algorithm,
    pub original_size: usize,
    pub compacted_size: usize,
    pub original_duration: u64,
    pub compacted_duration: u64,
    pub total_faults: usize,
    pub detected_original: usize,
    pub detected_compacted: usize,
    pub removed_blocks: usize,
    pub fault_sim_invocations: u32,
}

impl CompactionReport {
    pub fn from_raw(
        raw: RawMetrics,
        compaction_time_seconds: f64,
    ) -> Result<CompactionReport, CompactionError> {
        if raw.total_faults == 0 {
            return Err(CompactionError::NoFaults);
        }
        let fc = |d: usize| 100.0 * d as f64 / raw.total_faults as f64;
        let fc_original_pct = fc(raw.detected_original);
        let fc_compacted_pct = fc(raw.detected_compacted);
        Ok(CompactionReport {
            size_reduction_pct: reduction_pct(raw.original_size as u64, raw.compacted_size as u64),
            duration_reduction_pct: reduction_pct(raw.original_duration, raw.compacted_duration),
            fc_original_pct,
            fc_compacted_pct,
            diff_fc_pct: fc_compacted_pct - fc_original_pct,
            program_name: raw.program_name,
            algorithm: raw.algorithm,
            original_size: raw.original_size,
            compacted_size: raw.compacted_size,
            original_duration: raw.original_duration,
            compacted_duration: raw.compacted_duration,
            total_faults: raw.total_faults,
            detected_original: raw.detected_original,
            detected_compacted: raw.detected_compacted,
            removed_blocks: raw.removed_blocks,
            fault_sim_invocations: raw.fault_sim_invocations,
            compaction_time_seconds,
        })
    }

    /// Recomputes every derived field from the raw ones.
    pub fn check_consistency(&self) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() < 1e-9;
        let t = self.total_faults as f64;
        t > 0.0
            && close(
                self.size_reduction_pct,
                reduction_pct(self.original_size as u64, self.compacted_size as u64),
            )
            && close(
                self.duration_reduction_pct,
                reduction_pct(self.original_duration, self.compacted_duration),
            )
            && close(
                self.fc_original_pct,
                100.0 * self.detected_original as f64 / t,
            )
            && close(
                self.fc_compacted_pct,
                100.0 * self.detected_compacted as f64 / t,
            )
            && close(
                self.diff_fc_pct,
                self.fc_compacted_pct - self.fc_original_pct,
            )
    }

    pub fn diff_fc_text(&self) -> String {
        format_signed_pct(self.diff_fc_pct)
    }
}

/// Fault-free run that must halt.
pub(crate) fn halting_trace(
    p: &Program,
    n: &Netlist,
    opts: &SimOptions,
) -> Result<TraceReport, CompactionError> {
    let trace = iss::run(p, n, None, opts.max_cycles)?;
    if !trace.halted() {
        return Err(CompactionError::NotHalting(p.name.clone()));
    }
    Ok(trace)
}

/// Everything one compaction run produced.
#[derive(Debug, Clone)]
pub struct Compaction {
    pub result: CompactionResult,
    pub report: CompactionReport,
    pub original_fsr: FaultSimReport,
    pub compacted_fsr: FaultSimReport,
    pub labeled: LabeledProgram,
    pub trace: TraceReport,
}

/// Runs the proposed method, then verifies the result.
pub fn compact(
    p: &Program,
    n: &Netlist,
    opts: &SimOptions,
    sim: &dyn FaultSimulator,
) -> Result<Compaction, CompactionError> {
    compact_with_clock(p, n, opts, sim, &|| 0.0)
}

/// As [`compact`], timing the compaction phase with `clock` (seconds).
pub fn compact_with_clock(
    p: &Program,
    n: &Netlist,
    opts: &SimOptions,
    sim: &dyn FaultSimulator,
    clock: &dyn Fn() -> f64,
) -> Result<Compaction, CompactionError> {
    let faults = n.enumerate_faults();
    if faults.is_empty() {
        return Err(CompactionError::NoFaults);
    }
    let start = clock();
    let bbs = partition_basic_blocks(p);
    let region = find_admissible_region(p, &bbs);
    let trace = halting_trace(p, n, opts)?;
    let mut fsr = sim.simulate_all(p, n, &faults, opts)?;
    let invocations = 1;
    fsr.fault_sim_invocations = invocations;
    let labeled = label_instructions(p, &trace, &fsr)?;
    let (compacted, removed) = reduce_program(&labeled, &region, &bbs)?;
    let elapsed = clock() - start;

    let compacted_trace = halting_trace(&compacted, n, opts)?;
    let compacted_fsr = sim.simulate_all(&compacted, n, &faults, opts)?;
    let result = CompactionResult {
        original_size: p.len(),
        compacted_size: compacted.len(),
        original_duration: trace.duration(),
        compacted_duration: compacted_trace.duration(),
        compacted,
        removed_block_ids: removed,
        fault_sim_invocations: invocations,
    };
    let report = CompactionReport::from_raw(
        RawMetrics {
            program_name: p.name.clone(),
            algorithm: Algorithm::Proposed,
            original_size: result.original_size,
            compacted_size: result.compacted_size,
            original_duration: result.original_duration,
            compacted_duration: result.compacted_duration,
            total_faults: faults.len(),
            detected_original: fsr.detected_count(),
            detected_compacted: compacted_fsr.detected_count(),
            removed_blocks: result.removed_block_ids.len(),
            fault_sim_invocations: invocations,
        },
        elapsed,
    )?;
    Ok(Compaction {
        result,
        report,
        original_fsr: fsr,
        compacted_fsr,
        labeled,
        trace,
    })
}

/// Fault-simulates both programs and compares them.
pub fn verify(
    original: &Program,
    compacted: &Program,
    n: &Netlist,
    opts: &SimOptions,
    sim: &dyn FaultSimulator,
) -> Result<CompactionReport, CompactionError> {
    let faults = n.enumerate_faults();
    let t_orig = halting_trace(original, n, opts)?;
    let t_comp = halting_trace(compacted, n, opts)?;
    let f_orig = sim.simulate_all(original, n, &faults, opts)?;
    let f_comp = sim.simulate_all(compacted, n, &faults, opts)?;
    fault_coverage(&f_orig)?;
    CompactionReport::from_raw(
        RawMetrics {
            program_name: original.name.clone(),
            algorithm: Algorithm::Proposed,
            original_size: original.len(),
            compacted_size: compacted.len(),
            original_duration: t_orig.duration(),
            compacted_duration: t_comp.duration(),
            total_faults: faults.len(),
            detected_original: f_orig.detected_count(),
            detected_compacted: f_comp.detected_count(),
            removed_blocks: 0,
            fault_sim_invocations: 0,
        },
        0.0,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::{emit_program, parse_program};
    use crate::faultsim::{simulate_all, SerialSimulator};
    use crate::netlist::{build_reference_alu, load_netlist};

    fn and1() -> Netlist {
        load_netlist("input a0 b0\noutput r0\ngate g1 AND r0 a0 b0").unwrap()
    }

    const AND_PROG: &str = "li r1,1\nli r2,1\nunit r3,r1,r2\nsw r3,0(r0)\nhalt";

    #[test]
    fn single_and_labeling() {
        let n = and1();
        let p = parse_program(AND_PROG, "t", 8).unwrap();
        let trace = iss::run(&p, &n, None, 100).unwrap();
        let fsr = simulate_all(&p, &n, &n.enumerate_faults(), &SimOptions::default()).unwrap();
        let lp = label_instructions(&p, &trace, &fsr).unwrap();
        assert_eq!(lp.essential_indices(), [3].into_iter().collect());
    }

    #[test]
    fn no_detections_no_essentials() {
        let p = parse_program(AND_PROG, "t", 8).unwrap();
        let trace = iss::run(&p, &and1(), None, 100).unwrap();
        let lp = label_instructions(&p, &trace, &FaultSimReport::default()).unwrap();
        assert!(lp.essential_indices().is_empty());
    }

    #[test]
    fn repeated_cycles_on_one_pc_tag_once() {
        let p = parse_program(
            "li r1, 1\nloop: sw r1, 0(r0)\nsub r1, r1, r1\nbne r1, r0, loop\nhalt",
            "t",
            8,
        )
        .unwrap();
        let trace = iss::run(&p, &build_reference_alu(8).unwrap(), None, 100).unwrap();
        let fsr = FaultSimReport::from_outcomes([
            (0, crate::faultsim::FaultOutcome::Detected { cc: 2 }),
            (1, crate::faultsim::FaultOutcome::Detected { cc: 2 }),
        ]);
        let lp = label_instructions(&p, &trace, &fsr).unwrap();
        assert_eq!(lp.essential_indices(), [1].into_iter().collect());
    }

    #[test]
    fn mismatched_trace_is_an_error() {
        let p = parse_program(AND_PROG, "t", 8).unwrap();
        let mut trace = iss::run(&p, &and1(), None, 100).unwrap();
        trace.records[3].di = "nop".into();
        let fsr =
            FaultSimReport::from_outcomes([(0, crate::faultsim::FaultOutcome::Detected { cc: 4 })]);
        assert!(matches!(
            label_instructions(&p, &trace, &fsr),
            Err(CompactionError::InconsistentTrace { cc: 4, pc: 3, .. })
        ));
        let far = FaultSimReport::from_outcomes([(
            0,
            crate::faultsim::FaultOutcome::Detected { cc: 99 },
        )]);
        assert_eq!(
            label_instructions(&p, &trace, &far),
            Err(CompactionError::DetectionOutsideTrace(99))
        );
    }

    #[test]
    fn all_blocks_dropped_leaves_framing() {
        let p = parse_program(
            "li r1, 0\nb1:\nli r2, 3\nb2:\nli r3, 4\ndone:\nhalt",
            "t",
            8,
        )
        .unwrap();
        let bbs = partition_basic_blocks(&p);
        let region = find_admissible_region(&p, &bbs);
        let lp = LabeledProgram {
            program: p.clone(),
            labels: vec![Label::NotEssential; p.len()],
        };
        let (reduced, removed) = reduce_program(&lp, &region, &bbs).unwrap();
        assert_eq!(removed, [1, 2].into_iter().collect());
        assert_eq!(emit_program(&reduced), "    li r1, 0\ndone:\n    halt\n");
    }

    #[test]
    fn one_essential_keeps_whole_block() {
        let p = parse_program(
            "li r1, 0\nb1:\nli r2, 3\nsw r2, 0(r0)\nb2:\nli r3, 4\nhalt",
            "t",
            8,
        )
        .unwrap();
        let bbs = partition_basic_blocks(&p);
        let region = find_admissible_region(&p, &bbs);
        let mut labels = vec![Label::NotEssential; p.len()];
        labels[2] = Label::Essential;
        let lp = LabeledProgram {
            program: p.clone(),
            labels,
        };
        let (reduced, removed) = reduce_program(&lp, &region, &bbs).unwrap();
        assert!(removed.is_empty());
        assert_eq!(reduced.instructions[1..3], p.instructions[1..3]);
        assert_eq!(reduced.resolve("b1"), Some(1));
    }

    #[test]
    fn duplicate_block_removed_and_detections_kept() {
        let n = and1();
        let p = parse_program(
            "li r1, 0\nb1:\nli r1,1\nli r2,1\nunit r3,r1,r2\nsw r3,0(r0)\n\
             b2:\nli r1,1\nli r2,1\nunit r3,r1,r2\nsw r3,1(r0)\ndone:\nhalt",
            "dup",
            8,
        )
        .unwrap();
        let c = compact(&p, &n, &SimOptions::default(), &SerialSimulator).unwrap();
        assert_eq!(c.result.removed_block_ids, [2].into_iter().collect());
        assert_eq!(c.result.fault_sim_invocations, 1);
        assert_eq!(
            c.original_fsr.detected_set(),
            c.compacted_fsr.detected_set()
        );
        assert!(c.report.check_consistency());
        assert_eq!(c.report.diff_fc_text(), "0.00");
    }

    #[test]
    fn nothing_admissible_is_identity() {
        let n = and1();
        let p = parse_program(AND_PROG, "t", 8).unwrap();
        let c = compact(&p, &n, &SimOptions::default(), &SerialSimulator).unwrap();
        assert_eq!(c.result.compacted, p);
        assert_eq!(c.report.size_reduction_pct, 0.0);
        assert_eq!(c.report.duration_reduction_pct, 0.0);
        assert_eq!(c.report.diff_fc_text(), "0.00");
        let v = verify(&p, &p, &n, &SimOptions::default(), &SerialSimulator).unwrap();
        assert_eq!(v.diff_fc_pct, 0.0);
    }

    #[test]
    fn report_arithmetic() {
        assert!((reduction_pct(206_306, 12_581) - 93.90).abs() < 0.01);
        assert!((reduction_pct(439_954, 21_660) - 95.08).abs() < 0.01);
        assert!((reduction_pct(5_780, 3_864) - 33.15).abs() < 0.01);
        assert_eq!(format_signed_pct(-0.0712), "-0.07");
        assert_eq!(format_signed_pct(0.08), "+0.08");
        assert_eq!(format_signed_pct(-0.001), "0.00");
    }

    #[test]
    fn non_halting_program_is_rejected() {
        let n = build_reference_alu(8).unwrap();
        let p = parse_program("loop: j loop", "t", 8).unwrap();
        let opts = SimOptions {
            max_cycles: 50,
            ..SimOptions::default()
        };
        assert!(matches!(
            compact(&p, &n, &opts, &SerialSimulator),
            Err(CompactionError::NotHalting(_))
        ));
    }
}

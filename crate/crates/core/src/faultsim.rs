//! Stuck-at fault simulation observed at the memory bus.
//!
//! A fault is detected at the first clock cycle where the faulty machine's
//! bus activity (presence of an event, address, data or direction) differs
//! from the fault-free run; it is then dropped. Only the cycles of the
//! fault-free run are observed.
//!
//! Each fault is simulated in two phases. While the faulty machine is in
//! the same architectural state as the golden one, its execute-unit inputs
//! are the golden patterns, so the first cycle where the fault changes the
//! unit's outputs can be found with a bit-parallel scan over the recorded
//! patterns (64 per pass). From that cycle the faulty machine is stepped
//! instruction by instruction until the bus diverges, the observation
//! window closes, or its registers match the golden run again, in which
//! case the scan resumes.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use crate::asm::{Program, NUM_REGS};
use crate::iss::{
    BusEvent, Executable, FlatMemory, IssError, MachineState, Memory, Termination, TraceRecord,
    TraceReport,
};
use crate::netlist::{Evaluator, Fault, Netlist};

/// Where faults are observed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum SimMode {
    /// Memory bus, the architectural observation point.
    #[default]
    Bus,
    /// Execute-unit outputs. Approximate: ignores whether the error ever
    /// reaches the bus.
    UnitOutput,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimOptions {
    pub max_cycles: u64,
    pub mode: SimMode,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            max_cycles: 1_000_000,
            mode: SimMode::Bus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FaultOutcome {
    Detected {
        cc: u64,
    },
    /// The faulty machine halted without any bus difference.
    UndetectedAtHalt,
    /// The observation window closed before the faulty machine halted.
    UndetectedAtLimit,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FaultSimError {
    #[error(transparent)]
    Iss(#[from] IssError),
    #[error("fault-free run did not halt ({0:?})")]
    GoldenDidNotHalt(Termination),
    #[error("fault universe is empty")]
    NoFaults,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FaultSimReport {
    pub total_faults: usize,
    /// Fault id to first-detection clock cycle.
    pub detections: BTreeMap<usize, u64>,
    /// Undetected faults whose machine had not halted when observation ended.
    pub undetected_at_limit: BTreeSet<usize>,
    /// Clock cycle to number of faults first detected there.
    pub per_cycle: BTreeMap<u64, usize>,
    /// Full-program fault simulations performed in the enclosing workflow.
    pub fault_sim_invocations: u32,
}

impl FaultSimReport {
    pub fn from_outcomes(
        outcomes: impl IntoIterator<Item = (usize, FaultOutcome)>,
    ) -> FaultSimReport {
        let mut r = FaultSimReport::default();
        for (id, outcome) in outcomes {
            r.total_faults += 1;
            match outcome {
                FaultOutcome::Detected { cc } => {
                    r.detections.insert(id, cc);
                    *r.per_cycle.entry(cc).or_insert(0) += 1;
                }
                FaultOutcome::UndetectedAtLimit => {
                    r.undetected_at_limit.insert(id);
                }
                FaultOutcome::UndetectedAtHalt => {}
            }
        }
        r
    }

    pub fn detected_count(&self) -> usize {
        self.detections.len()
    }

    pub fn detected_set(&self) -> BTreeSet<usize> {
        self.detections.keys().copied().collect()
    }

    /// Checks that `per_cycle` is exactly the histogram of `detections`.
    pub fn is_consistent(&self) -> bool {
        let mut hist = BTreeMap::new();
        for &cc in self.detections.values() {
            *hist.entry(cc).or_insert(0usize) += 1;
        }
        hist == self.per_cycle && self.per_cycle.values().sum::<usize>() == self.detections.len()
    }
}

/// Detected faults as a percentage of all simulated faults.
pub fn fault_coverage(r: &FaultSimReport) -> Result<f64, FaultSimError> {
    if r.total_faults == 0 {
        return Err(FaultSimError::NoFaults);
    }
    Ok(100.0 * r.detections.len() as f64 / r.total_faults as f64)
}

/// Runs one full-program fault simulation.
pub trait FaultSimulator {
    fn simulate_all(
        &self,
        p: &Program,
        n: &Netlist,
        faults: &[Fault],
        opts: &SimOptions,
    ) -> Result<FaultSimReport, FaultSimError>;
}

/// Single-threaded simulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct SerialSimulator;

impl FaultSimulator for SerialSimulator {
    fn simulate_all(
        &self,
        p: &Program,
        n: &Netlist,
        faults: &[Fault],
        opts: &SimOptions,
    ) -> Result<FaultSimReport, FaultSimError> {
        let golden = GoldenRun::new(p, n, opts)?;
        let mut scratch = golden.scratch();
        let outcomes = faults
            .iter()
            .map(|f| (f.id, golden.simulate_fault(f, &mut scratch)))
            .collect::<Vec<_>>();
        let mut report = FaultSimReport::from_outcomes(outcomes);
        report.fault_sim_invocations = 1;
        Ok(report)
    }
}

/// Free function form of [`SerialSimulator::simulate_all`].
pub fn simulate_all(
    p: &Program,
    n: &Netlist,
    faults: &[Fault],
    opts: &SimOptions,
) -> Result<FaultSimReport, FaultSimError> {
    SerialSimulator.simulate_all(p, n, faults, opts)
}

/// Recorded execute-unit patterns, 64 lanes per batch.
#[derive(Debug, Clone)]
struct Batch {
    /// One word per netlist input.
    inputs: Vec<u64>,
    /// Fault-free value of each output net.
    outputs: Vec<u64>,
    lanes: u32,
}

/// Memory as seen by a faulty machine that has not diverged on the bus:
/// identical to the golden memory at the same cycle. Stores are dropped
/// because a differing store is a detection and ends the simulation.
struct GoldenMemoryView<'g> {
    writes: &'g BTreeMap<u16, Vec<(usize, u32)>>,
    cycle: usize,
}

impl Memory for GoldenMemoryView<'_> {
    fn load(&mut self, addr: u16) -> u32 {
        let Some(history) = self.writes.get(&addr) else {
            return 0;
        };
        let idx = history.partition_point(|&(c, _)| c < self.cycle);
        if idx == 0 {
            0
        } else {
            history[idx - 1].1
        }
    }

    fn store(&mut self, _addr: u16, _data: u32) {}
}

/// Per-thread scratch buffers.
#[derive(Debug, Clone)]
pub struct Scratch<'n> {
    nets: Vec<u64>,
    eval: Evaluator<'n>,
}

/// The fault-free run and everything derived from it that faulty runs
/// compare against. Immutable and shareable across threads.
#[derive(Debug, Clone)]
pub struct GoldenRun<'a> {
    exe: Executable<'a>,
    netlist: &'a Netlist,
    mode: SimMode,
    trace: TraceReport,
    /// Cycle index of every execute-unit operation.
    alu_cycles: Vec<usize>,
    /// Registers before every execute-unit operation.
    snapshots: Vec<[u32; NUM_REGS]>,
    /// For each cycle index, the execute-unit operation index there.
    alu_at_cycle: Vec<Option<usize>>,
    batches: Vec<Batch>,
    writes: BTreeMap<u16, Vec<(usize, u32)>>,
}

impl<'a> GoldenRun<'a> {
    pub fn new(
        p: &'a Program,
        n: &'a Netlist,
        opts: &SimOptions,
    ) -> Result<GoldenRun<'a>, FaultSimError> {
        if opts.max_cycles == 0 {
            return Err(IssError::ZeroCycleLimit.into());
        }
        let exe = Executable::new(p, n)?;
        let mut state = MachineState::reset();
        let mut mem = FlatMemory::default();
        let mut eval = Evaluator::new(n);
        let mut records = Vec::new();
        let mut alu_cycles = Vec::new();
        let mut snapshots = Vec::new();
        let mut alu_at_cycle = Vec::new();
        let mut writes: BTreeMap<u16, Vec<(usize, u32)>> = BTreeMap::new();
        let mut terminated = Termination::CycleLimit;
        for cc in 1..=opts.max_cycles {
            if state.pc >= exe.len() {
                terminated = Termination::RanOffEnd;
                break;
            }
            let cycle = records.len();
            let regs_before = state.regs;
            let step = exe.step(&mut state, &mut mem, &mut eval, None);
            if step.pattern.is_some() {
                alu_at_cycle.push(Some(alu_cycles.len()));
                alu_cycles.push(cycle);
                snapshots.push(regs_before);
            } else {
                alu_at_cycle.push(None);
            }
            if let Some(BusEvent {
                addr,
                data,
                is_write: true,
            }) = step.bus
            {
                writes.entry(addr).or_default().push((cycle, data));
            }
            records.push(TraceRecord {
                cc,
                pc: step.pc,
                di: p.instructions[step.pc].op.to_string(),
                pattern: step.pattern,
                bus_event: step.bus,
            });
            if step.halted {
                terminated = Termination::Halt;
                break;
            }
        }
        if terminated != Termination::Halt {
            return Err(FaultSimError::GoldenDidNotHalt(terminated));
        }
        let trace = TraceReport {
            program_name: p.name.clone(),
            records,
            terminated,
        };
        let batches = pack_batches(n, &trace, &alu_cycles);
        Ok(GoldenRun {
            exe,
            netlist: n,
            mode: opts.mode,
            trace,
            alu_cycles,
            snapshots,
            alu_at_cycle,
            batches,
            writes,
        })
    }

    pub fn trace(&self) -> &TraceReport {
        &self.trace
    }

    pub fn into_trace(self) -> TraceReport {
        self.trace
    }

    pub fn scratch(&self) -> Scratch<'a> {
        Scratch {
            nets: vec![0; self.netlist.net_count()],
            eval: Evaluator::new(self.netlist),
        }
    }

    fn bus(&self, cycle: usize) -> Option<BusEvent> {
        self.trace.records[cycle].bus_event
    }

    /// First execute-unit operation, at or after index `from`, whose
    /// outputs change under `fault` when fed the golden pattern.
    fn first_activation(&self, fault: &Fault, from: usize, nets: &mut Vec<u64>) -> Option<usize> {
        let outputs = self.netlist.outputs();
        let mut batch_idx = from / 64;
        let mut skip = (from % 64) as u32;
        while let Some(batch) = self.batches.get(batch_idx) {
            self.netlist.eval_words(&batch.inputs, Some(fault), nets);
            let mut diff = 0u64;
            for (&(_, net), &good) in outputs.iter().zip(&batch.outputs) {
                diff |= nets[net] ^ good;
            }
            let valid = if batch.lanes == 64 {
                !0
            } else {
                (1u64 << batch.lanes) - 1
            };
            diff &= valid & (!0u64 << skip);
            if diff != 0 {
                return Some(batch_idx * 64 + diff.trailing_zeros() as usize);
            }
            batch_idx += 1;
            skip = 0;
        }
        None
    }

    /// Simulates one fault against the golden run.
    pub fn simulate_fault(&self, fault: &Fault, scratch: &mut Scratch<'_>) -> FaultOutcome {
        let window = self.trace.records.len();
        let mut from = 0;
        loop {
            let Some(k) = self.first_activation(fault, from, &mut scratch.nets) else {
                // Never perturbs the machine from here on.
                return FaultOutcome::UndetectedAtHalt;
            };
            let start = self.alu_cycles[k];
            if self.mode == SimMode::UnitOutput {
                return FaultOutcome::Detected {
                    cc: start as u64 + 1,
                };
            }
            let mut state = MachineState {
                regs: self.snapshots[k],
                pc: self.trace.records[start].pc,
            };
            let mut cycle = start;
            let resync = loop {
                if cycle >= window {
                    return FaultOutcome::UndetectedAtLimit;
                }
                if cycle > start {
                    if let Some(j) = self.alu_at_cycle[cycle] {
                        if state.pc == self.trace.records[cycle].pc
                            && state.regs == self.snapshots[j]
                        {
                            break j;
                        }
                    }
                }
                if state.pc >= self.exe.len() {
                    // Fell off the end: no further bus activity.
                    return self.detect_after(cycle);
                }
                let mut mem = GoldenMemoryView {
                    writes: &self.writes,
                    cycle,
                };
                let step = self
                    .exe
                    .step(&mut state, &mut mem, &mut scratch.eval, Some(fault));
                if step.bus != self.bus(cycle) {
                    return FaultOutcome::Detected {
                        cc: cycle as u64 + 1,
                    };
                }
                cycle += 1;
                if step.halted {
                    return self.detect_after(cycle);
                }
            };
            from = resync;
        }
    }

    /// Outcome for a faulty machine that goes silent from cycle index
    /// `cycle` on: detected at the next golden bus event, if any.
    fn detect_after(&self, cycle: usize) -> FaultOutcome {
        match (cycle..self.trace.records.len()).find(|&c| self.bus(c).is_some()) {
            Some(c) => FaultOutcome::Detected { cc: c as u64 + 1 },
            None => FaultOutcome::UndetectedAtHalt,
        }
    }
}

fn pack_batches(n: &Netlist, trace: &TraceReport, alu_cycles: &[usize]) -> Vec<Batch> {
    let num_inputs = n.inputs().len();
    let mut nets = Vec::new();
    alu_cycles
        .chunks(64)
        .map(|chunk| {
            let mut inputs = vec![0u64; num_inputs];
            for (lane, &cycle) in chunk.iter().enumerate() {
                let pattern = trace.records[cycle]
                    .pattern
                    .expect("ALU cycle has a pattern");
                for (i, word) in inputs.iter_mut().enumerate() {
                    *word |= ((pattern >> i) & 1) << lane;
                }
            }
            n.eval_words(&inputs, None, &mut nets);
            let outputs = n.outputs().iter().map(|&(_, net)| nets[net]).collect();
            Batch {
                inputs,
                outputs,
                lanes: chunk.len() as u32,
            }
        })
        .collect()
}

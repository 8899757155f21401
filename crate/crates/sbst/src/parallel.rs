//! Multi-threaded fault simulation.
//!
//! The fault-free run is computed once and shared read-only. Workers pull
//! fixed-size chunks of the fault list from a shared counter and return
//! per-fault outcomes, which are merged in fault-list order, so the report
//! does not depend on the worker count or on scheduling.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::thread;

use sbst_core::faultsim::{
    FaultOutcome, FaultSimError, FaultSimReport, FaultSimulator, GoldenRun, SimOptions,
};
use sbst_core::{Fault, Netlist, Program};

const CHUNK: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParallelSimulator {
    pub workers: usize,
}

impl ParallelSimulator {
    pub fn new(workers: usize) -> ParallelSimulator {
        ParallelSimulator {
            workers: workers.max(1),
        }
    }

    /// One worker per available core.
    pub fn available() -> ParallelSimulator {
        ParallelSimulator::new(thread::available_parallelism().map_or(1, |n| n.get()))
    }
}

impl FaultSimulator for ParallelSimulator {
    fn simulate_all(
        &self,
        p: &Program,
        n: &Netlist,
        faults: &[Fault],
        opts: &SimOptions,
    ) -> Result<FaultSimReport, FaultSimError> {
        let golden = GoldenRun::new(p, n, opts)?;
        let mut outcomes: Vec<Option<FaultOutcome>> = vec![None; faults.len()];
        let next = AtomicUsize::new(0);
        let workers = self.workers.min(faults.len().div_ceil(CHUNK)).max(1);
        let parts: Vec<Vec<(usize, FaultOutcome)>> = thread::scope(|s| {
            let handles: Vec<_> = (0..workers)
                .map(|_| {
                    s.spawn(|| {
                        let mut scratch = golden.scratch();
                        let mut out = Vec::new();
                        loop {
                            let start = next.fetch_add(CHUNK, Ordering::Relaxed);
                            if start >= faults.len() {
                                break out;
                            }
                            for (i, f) in faults.iter().enumerate().skip(start).take(CHUNK) {
                                out.push((i, golden.simulate_fault(f, &mut scratch)));
                            }
                        }
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("fault-simulation worker panicked"))
                .collect()
        });
        for (i, o) in parts.into_iter().flatten() {
            outcomes[i] = Some(o);
        }
        let merged = faults
            .iter()
            .zip(outcomes)
            .map(|(f, o)| (f.id, o.expect("every fault simulated")));
        let mut report = FaultSimReport::from_outcomes(merged.collect::<Vec<_>>());
        report.fault_sim_invocations = 1;
        Ok(report)
    }
}

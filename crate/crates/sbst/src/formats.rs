//! On-disk formats: trace and block CSV, fault-simulation reports (JSON and
//! CSV) and compaction reports (JSON and aligned text).

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use sbst_core::cfg::{AdmissibleRegion, BasicBlock};
use sbst_core::compactor::{format_signed_pct, CompactionReport};
use sbst_core::iss::TraceReport;
use sbst_core::{FaultSimReport, Netlist};

fn csv_string(write: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    write(&mut w).expect("writing CSV to memory");
    String::from_utf8(w.into_inner().expect("flushing CSV to memory")).expect("CSV is UTF-8")
}

/// Columns `cc,pc,di,pattern,bus_addr,bus_data,bus_we`; absent values are
/// empty. Patterns are hexadecimal, one bit per netlist input in port order.
pub fn trace_csv(t: &TraceReport) -> String {
    csv_string(|w| {
        w.write_record([
            "cc", "pc", "di", "pattern", "bus_addr", "bus_data", "bus_we",
        ])?;
        for r in &t.records {
            let pattern = r.pattern.map(|p| format!("{p:#x}")).unwrap_or_default();
            let (addr, data, we) = match r.bus_event {
                Some(e) => (
                    e.addr.to_string(),
                    e.data.to_string(),
                    u8::from(e.is_write).to_string(),
                ),
                None => Default::default(),
            };
            w.write_record([
                &r.cc.to_string(),
                &r.pc.to_string(),
                &r.di,
                &pattern,
                &addr,
                &data,
                &we,
            ])?;
        }
        Ok(())
    })
}

/// Columns `block_id,start,end,admissible`.
pub fn cfg_csv(bbs: &[BasicBlock], region: &AdmissibleRegion) -> String {
    csv_string(|w| {
        w.write_record(["block_id", "start", "end", "admissible"])?;
        for bb in bbs {
            w.write_record([
                bb.id.to_string(),
                bb.start.to_string(),
                bb.end.to_string(),
                u8::from(region.contains(bb.id)).to_string(),
            ])?;
        }
        Ok(())
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionJson {
    pub fault_id: usize,
    pub site: String,
    pub polarity: String,
    pub cc: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleCountJson {
    pub cc: u64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FsrJson {
    pub total_faults: usize,
    pub detections: Vec<DetectionJson>,
    pub per_cycle: Vec<CycleCountJson>,
    pub undetected_at_limit: Vec<usize>,
    pub fault_sim_invocations: u32,
}

impl FsrJson {
    pub fn new(r: &FaultSimReport, n: &Netlist) -> FsrJson {
        let faults = n.enumerate_faults();
        FsrJson {
            total_faults: r.total_faults,
            detections: r
                .detections
                .iter()
                .map(|(&id, &cc)| DetectionJson {
                    fault_id: id,
                    site: n.fault_site(&faults[id]),
                    polarity: faults[id].polarity.to_string(),
                    cc,
                })
                .collect(),
            per_cycle: r
                .per_cycle
                .iter()
                .map(|(&cc, &count)| CycleCountJson { cc, count })
                .collect(),
            undetected_at_limit: r.undetected_at_limit.iter().copied().collect(),
            fault_sim_invocations: r.fault_sim_invocations,
        }
    }
}

pub fn fsr_json(r: &FaultSimReport, n: &Netlist) -> String {
    let mut s = serde_json::to_string_pretty(&FsrJson::new(r, n)).expect("serializable");
    s.push('\n');
    s
}

/// Columns `fault_id,site,polarity,detect_cc`, one row per fault; the
/// cycle is empty for undetected faults.
pub fn fsr_csv(r: &FaultSimReport, n: &Netlist) -> String {
    csv_string(|w| {
        w.write_record(["fault_id", "site", "polarity", "detect_cc"])?;
        for f in n.enumerate_faults() {
            let cc = r
                .detections
                .get(&f.id)
                .map(u64::to_string)
                .unwrap_or_default();
            w.write_record([
                f.id.to_string(),
                n.fault_site(&f),
                f.polarity.to_string(),
                cc,
            ])?;
        }
        Ok(())
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgramMetrics {
    pub size_instr: usize,
    pub duration_cc: u64,
    pub detected_faults: usize,
    pub fc_pct: f64,
}

/// Values that vary between otherwise identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub compaction_time_seconds: f64,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportJson {
    pub program: String,
    pub algorithm: String,
    pub total_faults: usize,
    pub original: ProgramMetrics,
    pub compacted: ProgramMetrics,
    pub removed_blocks: usize,
    pub size_reduction_pct: f64,
    pub duration_reduction_pct: f64,
    pub diff_fc_pct: f64,
    pub fault_sim_invocations: u32,
    pub metadata: Metadata,
}

impl ReportJson {
    pub fn new(r: &CompactionReport, workers: usize) -> ReportJson {
        ReportJson {
            program: r.program_name.clone(),
            algorithm: r.algorithm.name().to_string(),
            total_faults: r.total_faults,
            original: ProgramMetrics {
                size_instr: r.original_size,
                duration_cc: r.original_duration,
                detected_faults: r.detected_original,
                fc_pct: r.fc_original_pct,
            },
            compacted: ProgramMetrics {
                size_instr: r.compacted_size,
                duration_cc: r.compacted_duration,
                detected_faults: r.detected_compacted,
                fc_pct: r.fc_compacted_pct,
            },
            removed_blocks: r.removed_blocks,
            size_reduction_pct: r.size_reduction_pct,
            duration_reduction_pct: r.duration_reduction_pct,
            diff_fc_pct: r.diff_fc_pct,
            fault_sim_invocations: r.fault_sim_invocations,
            metadata: Metadata {
                compaction_time_seconds: r.compaction_time_seconds,
                workers,
            },
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("serializable");
        s.push('\n');
        s
    }

    /// The report with run-dependent metadata cleared, for comparisons.
    pub fn without_metadata(&self) -> ReportJson {
        ReportJson {
            metadata: Metadata {
                compaction_time_seconds: 0.0,
                workers: 0,
            },
            ..self.clone()
        }
    }
}

fn format_time(seconds: f64) -> String {
    if seconds < 60.0 {
        format!("{seconds:.3} s")
    } else {
        format!("{:.2} min", seconds / 60.0)
    }
}

/// Aligned table with one row per report.
pub fn report_table(reports: &[ReportJson]) -> String {
    let header = [
        "Program",
        "Algorithm",
        "Size instr",
        "Size %",
        "Duration cc",
        "Duration %",
        "FC orig %",
        "FC comp %",
        "Diff FC %",
        "Fault sims",
        "Compaction time",
    ];
    let rows: Vec<[String; 11]> = reports
        .iter()
        .map(|r| {
            [
                r.program.clone(),
                r.algorithm.clone(),
                format!("{} -> {}", r.original.size_instr, r.compacted.size_instr),
                format!("{:.2}", r.size_reduction_pct),
                format!("{} -> {}", r.original.duration_cc, r.compacted.duration_cc),
                format!("{:.2}", r.duration_reduction_pct),
                format!("{:.2}", r.original.fc_pct),
                format!("{:.2}", r.compacted.fc_pct),
                format_signed_pct(r.diff_fc_pct),
                r.fault_sim_invocations.to_string(),
                format_time(r.metadata.compaction_time_seconds),
            ]
        })
        .collect();
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let line = |cells: &mut dyn Iterator<Item = &str>, out: &mut String| {
        let parts: Vec<String> = cells
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, &w))| {
                if i < 2 {
                    format!("{c:<w$}")
                } else {
                    format!("{c:>w$}")
                }
            })
            .collect();
        let _ = writeln!(out, "{}", parts.join(" | ").trim_end());
    };
    line(&mut header.iter().copied(), &mut out);
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    let _ = writeln!(out, "{}", rule.join("-|-"));
    for row in &rows {
        line(&mut row.iter().map(String::as_str), &mut out);
    }
    out
}

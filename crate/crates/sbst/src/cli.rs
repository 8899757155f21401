//! Command-line front end.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sbst_core::asm::{AsmError, DEFAULT_WORD_WIDTH};
use sbst_core::baseline::compact_a0;
use sbst_core::compactor::{
    compact_with_clock, verify, Algorithm, CompactionError, CompactionReport, RawMetrics,
};
use sbst_core::faultsim::{fault_coverage, FaultSimError, FaultSimulator, SimMode, SimOptions};
use sbst_core::iss::{self, IssError};
use sbst_core::netlist::NetlistError;
use sbst_core::tpgen::{generate, BlockSize, GenConfig, GenMode, TpgenError};
use sbst_core::{
    build_reference_alu, emit_program, find_admissible_region, load_netlist, parse_program,
    partition_basic_blocks, Netlist, Program,
};

use crate::formats::{cfg_csv, fsr_csv, fsr_json, report_table, trace_csv, ReportJson};
use crate::parallel::ParallelSimulator;

/// Exit status for malformed command lines.
pub const EXIT_USAGE: i32 = 1;
/// Exit status for failures in the inputs themselves.
pub const EXIT_DOMAIN: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "sbst",
    version,
    about = "Compact self-test programs from a single fault simulation"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Data word width in bits.
    #[arg(long, default_value_t = DEFAULT_WORD_WIDTH)]
    width: u32,
    /// Cycle limit for every run.
    #[arg(long, default_value_t = 1_000_000, value_parser = clap::value_parser!(u64).range(1..))]
    max_cycles: u64,
}

#[derive(Debug, Args)]
struct OutDir {
    /// Directory for written artifacts.
    #[arg(long = "out", env = "SBST_OUT_DIR", default_value = ".")]
    dir: PathBuf,
}

#[derive(Debug, Args)]
struct SimArgs {
    /// Netlist file, or `alu:<width>` for the built-in reference ALU.
    #[arg(long)]
    netlist: Option<String>,
    /// Fault observation point.
    #[arg(long, value_enum, default_value_t = ModeArg::Bus)]
    mode: ModeArg,
    /// Fault-simulation worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Bus,
    UnitOutput,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AlgoArg {
    Proposed,
    A0,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GenModeArg {
    RandomBb,
    Atpg,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a program and write it back in canonical form.
    Assemble {
        program: PathBuf,
        /// Also write the basic blocks with their admissibility.
        #[arg(long)]
        dump_cfg: bool,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        out: OutDir,
    },
    /// Run the fault-free program and write its cycle trace.
    Trace {
        program: PathBuf,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        out: OutDir,
    },
    /// Fault-simulate a program and write the detection report.
    Faultsim {
        program: PathBuf,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        out: OutDir,
    },
    /// Generate a seeded test program.
    Generate {
        #[arg(long, value_enum, default_value_t = GenModeArg::RandomBb)]
        mode: GenModeArg,
        /// Number of blocks (random-bb).
        #[arg(long, default_value_t = 100)]
        blocks: usize,
        /// Block size `k` or inclusive range `lo:hi` (random-bb).
        #[arg(long, default_value = "3:6", value_parser = parse_size)]
        size: BlockSize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Let block operands come from earlier blocks.
        #[arg(long)]
        dependent: bool,
        /// Random patterns to sample (atpg).
        #[arg(long, default_value_t = 4096)]
        budget: u64,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Netlist file, or `alu:<width>`.
        #[arg(long)]
        netlist: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Compact a program and verify the result.
    Compact {
        program: PathBuf,
        #[arg(long, value_enum, default_value_t = AlgoArg::Proposed)]
        algo: AlgoArg,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        out: OutDir,
    },
    /// Compare an original and a compacted program.
    Verify {
        original: PathBuf,
        compacted: PathBuf,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        out: OutDir,
    },
    /// Render stored JSON reports as a text table.
    Report {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
    },
}

fn parse_size(s: &str) -> Result<BlockSize, String> {
    let num = |t: &str| t.trim().parse::<u32>().map_err(|e| format!("`{t}`: {e}"));
    match s.split_once(':') {
        Some((lo, hi)) => Ok(BlockSize::Range(num(lo)?, num(hi)?)),
        None => Ok(BlockSize::Fixed(num(s)?)),
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Asm { path: PathBuf, source: AsmError },
    #[error("netlist {path}: {source}")]
    Netlist { path: String, source: NetlistError },
    #[error(transparent)]
    Iss(#[from] IssError),
    #[error(transparent)]
    FaultSim(#[from] FaultSimError),
    #[error(transparent)]
    Compaction(#[from] CompactionError),
    #[error(transparent)]
    Tpgen(#[from] TpgenError),
    #[error("program `{0}` did not halt within the cycle limit")]
    NotHalting(String),
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    fs::write(path, contents).map_err(io)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "program".into(), |s| s.to_string_lossy().into_owned())
}

fn load_program(path: &Path, width: u32) -> Result<Program, CliError> {
    parse_program(&read(path)?, &stem(path), width).map_err(|source| CliError::Asm {
        path: path.to_path_buf(),
        source,
    })
}

fn netlist_from_arg(arg: Option<&str>, width: u32) -> Result<Netlist, CliError> {
    let arg = arg.map_or_else(|| format!("alu:{width}"), str::to_string);
    let built = match arg.strip_prefix("alu:") {
        Some(w) => match w.parse::<u32>() {
            Ok(w) => build_reference_alu(w),
            Err(_) => Err(NetlistError::Syntax {
                line: 0,
                message: format!("`{arg}`: expected alu:<width>"),
            }),
        },
        None => load_netlist(&read(Path::new(&arg))?),
    };
    built.map_err(|source| CliError::Netlist { path: arg, source })
}

fn simulator(workers: usize) -> ParallelSimulator {
    if workers == 0 {
        ParallelSimulator::available()
    } else {
        ParallelSimulator::new(workers)
    }
}

impl SimArgs {
    fn options(&self, common: &Common) -> SimOptions {
        SimOptions {
            max_cycles: common.max_cycles,
            mode: match self.mode {
                ModeArg::Bus => SimMode::Bus,
                ModeArg::UnitOutput => SimMode::UnitOutput,
            },
        }
    }
}

/// Writes the JSON and text forms of a compaction report.
fn write_report(
    dir: &Path,
    report: &CompactionReport,
    workers: usize,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let json = ReportJson::new(report, workers);
    write(&dir.join("report.json"), &json.to_json())?;
    let table = report_table(std::slice::from_ref(&json));
    write(&dir.join("report.txt"), &table)?;
    let _ = out.write_all(table.as_bytes());
    Ok(())
}

fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Assemble {
            program,
            dump_cfg,
            common,
            out: OutDir { dir },
        } => {
            let p = load_program(&program, common.width)?;
            let name = stem(&program);
            write(&dir.join(format!("{name}.asm.s")), &emit_program(&p))?;
            let bbs = partition_basic_blocks(&p);
            let region = find_admissible_region(&p, &bbs);
            if dump_cfg {
                write(
                    &dir.join(format!("{name}.cfg.csv")),
                    &cfg_csv(&bbs, &region),
                )?;
            }
            let _ = writeln!(
                out,
                "{name}: {} instructions, {} blocks, admissible {:.2}%",
                p.len(),
                bbs.len(),
                region.percentage(&p, &bbs)
            );
        }
        Command::Trace {
            program,
            sim,
            common,
            out: OutDir { dir },
        } => {
            let p = load_program(&program, common.width)?;
            let n = netlist_from_arg(sim.netlist.as_deref(), common.width)?;
            let t = iss::run(&p, &n, None, common.max_cycles)?;
            write(
                &dir.join(format!("{}.trace.csv", stem(&program))),
                &trace_csv(&t),
            )?;
            let _ = writeln!(
                out,
                "{}: {} cycles, {:?}",
                p.name,
                t.duration(),
                t.terminated
            );
            if !t.halted() {
                return Err(CliError::NotHalting(p.name));
            }
        }
        Command::Faultsim {
            program,
            sim,
            common,
            out: OutDir { dir },
        } => {
            let p = load_program(&program, common.width)?;
            let n = netlist_from_arg(sim.netlist.as_deref(), common.width)?;
            let faults = n.enumerate_faults();
            let r = simulator(sim.workers).simulate_all(&p, &n, &faults, &sim.options(&common))?;
            let name = stem(&program);
            write(&dir.join(format!("{name}.fsr.json")), &fsr_json(&r, &n))?;
            write(&dir.join(format!("{name}.fsr.csv")), &fsr_csv(&r, &n))?;
            let fc = fault_coverage(&r)?;
            let _ = writeln!(
                out,
                "{name}: {} of {} faults detected, FC {fc:.2}%",
                r.detected_count(),
                r.total_faults
            );
        }
        Command::Generate {
            mode,
            blocks,
            size,
            seed,
            dependent,
            budget,
            out: path,
            netlist,
            common,
        } => {
            let n = netlist_from_arg(netlist.as_deref(), common.width)?;
            let cfg = GenConfig {
                mode: match mode {
                    GenModeArg::RandomBb => GenMode::RandomBlocks,
                    GenModeArg::Atpg => GenMode::Atpg,
                },
                n_blocks: blocks,
                block_size: size,
                seed,
                word_width: common.width,
                independent: !dependent,
                sample_budget: budget,
            };
            let text = emit_program(&generate(&cfg, &n)?);
            match path {
                Some(path) => write(&path, &text)?,
                None => {
                    let _ = out.write_all(text.as_bytes());
                }
            }
        }
        Command::Compact {
            program,
            algo,
            sim,
            common,
            out: OutDir { dir },
        } => {
            let p = load_program(&program, common.width)?;
            let n = netlist_from_arg(sim.netlist.as_deref(), common.width)?;
            let opts = sim.options(&common);
            let simulator = simulator(sim.workers);
            let (compacted, report) = match algo {
                AlgoArg::Proposed => {
                    let t0 = Instant::now();
                    let c = compact_with_clock(&p, &n, &opts, &simulator, &|| {
                        t0.elapsed().as_secs_f64()
                    })?;
                    (c.result.compacted, c.report)
                }
                AlgoArg::A0 => {
                    let bbs = partition_basic_blocks(&p);
                    let region = find_admissible_region(&p, &bbs);
                    let t0 = Instant::now();
                    let r = compact_a0(&p, &n, &region, &bbs, &opts, &simulator)?;
                    let elapsed = t0.elapsed().as_secs_f64();
                    let faults = n.enumerate_faults();
                    let before = simulator.simulate_all(&p, &n, &faults, &opts)?;
                    let after = simulator.simulate_all(&r.compacted, &n, &faults, &opts)?;
                    let report = CompactionReport::from_raw(
                        RawMetrics {
                            program_name: p.name.clone(),
                            algorithm: Algorithm::A0,
                            original_size: r.original_size,
                            compacted_size: r.compacted_size,
                            original_duration: r.original_duration,
                            compacted_duration: r.compacted_duration,
                            total_faults: faults.len(),
                            detected_original: before.detected_count(),
                            detected_compacted: after.detected_count(),
                            removed_blocks: r.removed_block_ids.len(),
                            fault_sim_invocations: r.fault_sim_invocations,
                        },
                        elapsed,
                    )?;
                    (r.compacted, report)
                }
            };
            write(
                &dir.join(format!("{}.compact.s", stem(&program))),
                &emit_program(&compacted),
            )?;
            write_report(&dir, &report, simulator.workers, out)?;
        }
        Command::Verify {
            original,
            compacted,
            sim,
            common,
            out: OutDir { dir },
        } => {
            let p = load_program(&original, common.width)?;
            let c = load_program(&compacted, common.width)?;
            let n = netlist_from_arg(sim.netlist.as_deref(), common.width)?;
            let simulator = simulator(sim.workers);
            let report = verify(&p, &c, &n, &sim.options(&common), &simulator)?;
            write_report(&dir, &report, simulator.workers, out)?;
        }
        Command::Report { reports } => {
            let mut parsed = Vec::new();
            for path in &reports {
                let json: ReportJson =
                    serde_json::from_str(&read(path)?).map_err(|source| CliError::Json {
                        path: path.clone(),
                        source,
                    })?;
                parsed.push(json);
            }
            let _ = out.write_all(report_table(&parsed).as_bytes());
        }
    }
    Ok(())
}

/// Runs the command line `args` (program name first), writing normal output
/// to `out` and diagnostics to `err`. Returns the process exit status.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    0
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    EXIT_USAGE
                }
            };
        }
    };
    match run(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_DOMAIN
        }
    }
}

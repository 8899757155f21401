//! End-to-end runs of the command line on the fixture corpus.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use sbst::cli::{run_cli, EXIT_DOMAIN, EXIT_USAGE};
use sbst::formats::{FsrJson, ReportJson};
use sbst_core::{build_reference_alu, parse_program};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn write_alu8(dir: &Path) -> PathBuf {
    let path = dir.join("alu8.nl");
    fs::write(&path, build_reference_alu(8).unwrap().to_nl_text()).unwrap();
    path
}

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("sbst").chain(args.iter().copied());
    let code = run_cli(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn compact_writes_program_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let nl = write_alu8(dir.path());
    let out = dir.path().join("out");
    let prog = fixture("loop_prologue.s");
    let (code, stdout, stderr) = run(&["compact", s(&prog), "--netlist", s(&nl), "--out", s(&out)]);
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.contains("loop_prologue"));
    let compacted = fs::read_to_string(out.join("loop_prologue.compact.s")).unwrap();
    let reparsed = parse_program(&compacted, "c", 8).unwrap();
    let report: ReportJson =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report.fault_sim_invocations, 1);
    assert_eq!(report.algorithm, "proposed");
    assert_eq!(report.compacted.size_instr, reparsed.len());
    assert!(fs::read_to_string(out.join("report.txt"))
        .unwrap()
        .starts_with("Program"));
}

#[test]
fn a0_reports_one_simulation_per_admissible_instruction() {
    let dir = tempfile::tempdir().unwrap();
    let prog = fixture("memory_chain.s");
    let (code, _, stderr) = run(&["compact", s(&prog), "--algo", "a0", "--out", s(dir.path())]);
    assert_eq!(code, 0, "{stderr}");
    let report: ReportJson =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report.algorithm, "a0");
    // The fixture's admissible blocks c1..c4 hold 16 instructions.
    assert_eq!(report.fault_sim_invocations, 16);
}

#[test]
fn faultsim_writes_json_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let nl = write_alu8(dir.path());
    let prog = fixture("diamond.s");
    let (code, stdout, _) = run(&[
        "faultsim",
        s(&prog),
        "--netlist",
        s(&nl),
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code, 0);
    assert!(stdout.contains("FC"));
    let json: FsrJson =
        serde_json::from_str(&fs::read_to_string(dir.path().join("diamond.fsr.json")).unwrap())
            .unwrap();
    let csv = fs::read_to_string(dir.path().join("diamond.fsr.csv")).unwrap();
    assert_eq!(csv.lines().count(), json.total_faults + 1);
    assert_eq!(
        json.per_cycle.iter().map(|c| c.count).sum::<usize>(),
        json.detections.len()
    );
}

#[test]
fn trace_and_assemble_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let prog = fixture("nested_loops.s");
    let (code, _, _) = run(&["trace", s(&prog), "--out", s(dir.path())]);
    assert_eq!(code, 0);
    let trace = fs::read_to_string(dir.path().join("nested_loops.trace.csv")).unwrap();
    assert_eq!(
        trace.lines().next().unwrap(),
        "cc,pc,di,pattern,bus_addr,bus_data,bus_we"
    );
    let (code, _, _) = run(&["assemble", s(&prog), "--dump-cfg", "--out", s(dir.path())]);
    assert_eq!(code, 0);
    let cfg = fs::read_to_string(dir.path().join("nested_loops.cfg.csv")).unwrap();
    assert_eq!(cfg.lines().next().unwrap(), "block_id,start,end,admissible");
    let canonical = fs::read_to_string(dir.path().join("nested_loops.asm.s")).unwrap();
    let original = parse_program(&fs::read_to_string(&prog).unwrap(), "p", 8).unwrap();
    assert_eq!(parse_program(&canonical, "p", 8).unwrap(), original);
}

#[test]
fn generate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.s");
    let b = dir.path().join("b.s");
    for path in [&a, &b] {
        let (code, _, _) = run(&[
            "generate",
            "--blocks",
            "30",
            "--size",
            "3:8",
            "--seed",
            "9",
            "--out",
            s(path),
        ]);
        assert_eq!(code, 0);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let (code, stdout, _) = run(&[
        "generate", "--mode", "atpg", "--width", "4", "--budget", "300",
    ]);
    assert_eq!(code, 0);
    assert!(stdout.trim_end().ends_with("halt"));
}

#[test]
fn verify_and_report_regenerate_tables() {
    let dir = tempfile::tempdir().unwrap();
    let prog = fixture("diamond.s");
    let out = dir.path();
    assert_eq!(run(&["compact", s(&prog), "--out", s(out)]).0, 0);
    let first = fs::read_to_string(out.join("report.txt")).unwrap();
    let (code, table, _) = run(&["report", s(&out.join("report.json"))]);
    assert_eq!(code, 0);
    assert_eq!(table, first);
    let vdir = out.join("verify");
    let compacted = out.join("diamond.compact.s");
    assert_eq!(
        run(&["verify", s(&prog), s(&compacted), "--out", s(&vdir)]).0,
        0
    );
    let v: ReportJson =
        serde_json::from_str(&fs::read_to_string(vdir.join("report.json")).unwrap()).unwrap();
    let c: ReportJson =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(v.compacted, c.compacted);
    assert_eq!(v.diff_fc_pct, c.diff_fc_pct);
}

#[test]
fn usage_and_domain_errors() {
    let (code, _, err) = run(&["compact", "--no-such-flag"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("Usage"));
    assert_eq!(run(&["frobnicate"]).0, EXIT_USAGE);
    assert_eq!(run(&["--help"]).0, 0);

    let dir = tempfile::tempdir().unwrap();
    let spin = dir.path().join("spin.s");
    fs::write(&spin, "top:\n    j top\n").unwrap();
    let (code, _, err) = run(&[
        "compact",
        s(&spin),
        "--max-cycles",
        "100",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code, EXIT_DOMAIN);
    assert!(err.starts_with("error:"));

    let bad = dir.path().join("bad.nl");
    fs::write(&bad, "input a0 b0\noutput r0\ngate g1 AND r0 a0 x\n").unwrap();
    let prog = fixture("diamond.s");
    assert_eq!(
        run(&["faultsim", s(&prog), "--netlist", s(&bad)]).0,
        EXIT_DOMAIN
    );
    assert_eq!(run(&["trace", "/nonexistent/p.s"]).0, EXIT_DOMAIN);
}

#[test]
fn binary_exit_codes_and_env_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_sbst");
    let status = Command::new(bin).arg("bogus").output().unwrap();
    assert_eq!(status.status.code(), Some(EXIT_USAGE));
    assert!(!status.stderr.is_empty());
    let status = Command::new(bin)
        .args(["faultsim", s(&fixture("memory_chain.s"))])
        .env("SBST_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(0));
    assert!(dir.path().join("memory_chain.fsr.csv").exists());
}

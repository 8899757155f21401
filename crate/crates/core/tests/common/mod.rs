//! Shared test helpers: random circuit and program builders plus
//! brute-force reference computations that avoid the optimized paths.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use sbst_core::asm::{parse_program, Program};
use sbst_core::cfg::{find_admissible_region, partition_basic_blocks};
use sbst_core::faultsim::{FaultOutcome, FaultSimReport};
use sbst_core::iss::{self, Termination};
use sbst_core::netlist::{Netlist, Pin, Polarity};
use sbst_core::tpgen::SplitMix64;

/// Recursive evaluation by net name over a textual gate list, with faults
/// applied as a circuit rewrite rather than pin forcing.
#[derive(Clone)]
pub struct Reference {
    drivers: BTreeMap<String, (String, Vec<String>, String)>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

impl Reference {
    pub fn new(text: &str) -> Reference {
        let mut r = Reference {
            drivers: BTreeMap::new(),
            inputs: vec![],
            outputs: vec![],
        };
        for line in text.lines() {
            let line = line.split('#').next().unwrap();
            let f: Vec<&str> = line.split_whitespace().collect();
            match f.first() {
                Some(&"input") => r.inputs.extend(f[1..].iter().map(|s| s.to_string())),
                Some(&"output") => r.outputs.extend(f[1..].iter().map(|s| s.to_string())),
                Some(&"gate") => {
                    r.drivers.insert(
                        f[3].to_string(),
                        (
                            f[2].to_string(),
                            f[4..].iter().map(|s| s.to_string()).collect(),
                            f[1].to_string(),
                        ),
                    );
                }
                _ => {}
            }
        }
        r
    }

    /// Copy of the circuit with the faulted connection tied to a constant.
    pub fn with_fault(&self, gate_name: &str, pin: Pin, pol: Polarity) -> Reference {
        let konst = match pol {
            Polarity::Sa0 => "CONST0",
            Polarity::Sa1 => "CONST1",
        };
        let mut drivers = self.drivers.clone();
        let net = drivers
            .iter()
            .find(|(_, d)| d.2 == gate_name)
            .map(|(n, _)| n.clone())
            .unwrap();
        match pin {
            Pin::Output => {
                drivers.insert(net, ("BUF".into(), vec![konst.into()], gate_name.into()));
            }
            Pin::Input(i) => {
                drivers.get_mut(&net).unwrap().1[i as usize] = konst.into();
            }
        }
        Reference {
            drivers,
            inputs: self.inputs.clone(),
            outputs: self.outputs.clone(),
        }
    }

    fn net(&self, name: &str, assign: &BTreeMap<String, bool>) -> bool {
        match name {
            "CONST0" => return false,
            "CONST1" => return true,
            _ => {}
        }
        if let Some(&v) = assign.get(name) {
            return v;
        }
        let (kind, ins, _) = &self.drivers[name];
        let v: Vec<bool> = ins.iter().map(|i| self.net(i, assign)).collect();
        match kind.as_str() {
            "AND" => v[0] && v[1],
            "OR" => v[0] || v[1],
            "NAND" => !(v[0] && v[1]),
            "NOR" => !(v[0] || v[1]),
            "XOR" => v[0] != v[1],
            "XNOR" => v[0] == v[1],
            "NOT" => !v[0],
            "BUF" => v[0],
            k => panic!("{k}"),
        }
    }

    /// Outputs for input assignment `pattern` (bit i drives input i).
    pub fn eval(&self, pattern: u64) -> Vec<bool> {
        let assign: BTreeMap<String, bool> = self
            .inputs
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), pattern >> i & 1 == 1))
            .collect();
        self.outputs.iter().map(|o| self.net(o, &assign)).collect()
    }
}

pub const FULL_ADDER: &str = "\
# a0 + b0 + a1 (carry in) -> r0 sum, r1 carry out
width 2
input a0 b0 a1
output r0 r1
gate x1 XOR p a0 b0
gate x2 XOR r0 p a1
gate c1 AND g a0 b0
gate c2 AND t p a1
gate c3 OR r1 g t
";

pub fn single_gate_netlists() -> Vec<String> {
    ["AND", "OR", "NAND", "NOR", "XOR", "XNOR"]
        .iter()
        .map(|k| format!("input a0 b0\noutput r0\ngate g1 {k} r0 a0 b0\n"))
        .chain(
            ["NOT", "BUF"]
                .iter()
                .map(|k| format!("input a0\noutput r0\ngate g1 {k} r0 a0\n")),
        )
        .collect()
}

/// Random unit-mode netlist with `width` operand bits per side and
/// exactly `gates` gates; the last `width` gates drive the outputs.
pub fn random_unit_netlist(seed: u64, width: u32, gates: usize) -> String {
    assert!(gates >= width as usize);
    let mut rng = SplitMix64::new(seed);
    let mut nets: Vec<String> = (0..width).map(|i| format!("a{i}")).collect();
    nets.extend((0..width).map(|i| format!("b{i}")));
    let mut text = format!("width {width}\ninput {}\noutput ", nets.join(" "));
    text.push_str(
        &(0..width)
            .map(|i| format!("r{i}"))
            .collect::<Vec<_>>()
            .join(" "),
    );
    text.push('\n');
    let kinds = ["AND", "OR", "NAND", "NOR", "XOR", "XNOR", "NOT", "BUF"];
    let first_output = gates - width as usize;
    for g in 0..gates {
        let out = if g >= first_output {
            format!("r{}", g - first_output)
        } else {
            format!("n{g}")
        };
        let kind = kinds[rng.below(kinds.len() as u64) as usize];
        let mut pick = || nets[rng.below(nets.len() as u64) as usize].clone();
        let ins = if matches!(kind, "NOT" | "BUF") {
            pick()
        } else {
            format!("{} {}", pick(), pick())
        };
        writeln!(text, "gate g{g} {kind} {out} {ins}").unwrap();
        nets.push(out);
    }
    text
}

/// Random halting-by-construction-in-the-golden-case program over the unit
/// instruction, at most `max_len` instructions. Mixes straight-line code,
/// data-dependent forward skips, a run-twice loop, loads and stores with
/// register-based addresses.
pub fn random_unit_program(seed: u64, max_len: usize) -> String {
    let mut rng = SplitMix64::new(seed);
    let mut lines: Vec<String> = Vec::new();
    let mut label = 0;
    let reg = |rng: &mut SplitMix64| 1 + rng.below(12);
    let src = |rng: &mut SplitMix64| rng.below(13);
    for r in 1..=4 {
        lines.push(format!("li r{r}, {}", rng.below(256)));
    }
    let straight = |rng: &mut SplitMix64, out: &mut Vec<String>| {
        let n = 1 + rng.below(4);
        for _ in 0..n {
            let line = match rng.below(7) {
                0 => format!("li r{}, {}", reg(rng), rng.below(256)),
                1 | 2 => format!("unit r{}, r{}, r{}", reg(rng), src(rng), src(rng)),
                3 => format!("sw r{}, {}(r0)", src(rng), rng.below(8)),
                4 => format!("sw r{}, 0(r{})", src(rng), src(rng)),
                5 => format!("lw r{}, {}(r0)", reg(rng), rng.below(8)),
                _ => "nop".to_string(),
            };
            out.push(line);
        }
    };
    while lines.len() + 8 < max_len {
        match rng.below(4) {
            0 | 1 => {
                lines.push(format!("b{label}:"));
                label += 1;
                straight(&mut rng, &mut lines);
            }
            2 => {
                let l = label;
                label += 1;
                lines.push(format!("beq r{}, r{}, s{l}", src(&mut rng), src(&mut rng)));
                straight(&mut rng, &mut lines);
                lines.push(format!("s{l}:"));
            }
            _ => {
                let l = label;
                label += 1;
                lines.push("li r15, 0".into());
                lines.push(format!("t{l}:"));
                straight(&mut rng, &mut lines);
                lines.push(format!("bne r15, r0, u{l}"));
                lines.push("li r15, 1".into());
                lines.push(format!("j t{l}"));
                lines.push(format!("u{l}:"));
            }
        }
    }
    lines.push("halt".into());
    let code: Vec<&String> = lines.iter().filter(|l| !l.ends_with(':')).collect();
    assert!(code.len() <= max_len + 4, "{}", code.len());
    lines.join("\n")
}

/// Fault simulation with no shortcuts: every fault re-runs the whole
/// program from reset and the traces are compared cycle by cycle.
pub fn brute_force_fsr(p: &Program, n: &Netlist, max_cycles: u64) -> FaultSimReport {
    let golden = iss::run(p, n, None, max_cycles).unwrap();
    assert_eq!(golden.terminated, Termination::Halt);
    let window = golden.records.len() as u64;
    let outcomes = n.enumerate_faults().into_iter().map(|f| {
        let faulty = iss::run(p, n, Some(&f), window).unwrap();
        let first = (0..golden.records.len()).find(|&i| {
            let g = golden.records[i].bus_event;
            let b = faulty.records.get(i).and_then(|r| r.bus_event);
            g != b
        });
        let outcome = match first {
            Some(i) => FaultOutcome::Detected { cc: i as u64 + 1 },
            None if faulty.terminated == Termination::CycleLimit => FaultOutcome::UndetectedAtLimit,
            None => FaultOutcome::UndetectedAtHalt,
        };
        (f.id, outcome)
    });
    let mut r = FaultSimReport::from_outcomes(outcomes.collect::<Vec<_>>());
    r.fault_sim_invocations = 1;
    r
}

/// Program presenting every input combination of a unit-mode netlist once,
/// each in its own `li; li; unit; sw` block after a one-instruction prologue.
pub fn exhaustive_pattern_program(n: &Netlist) -> Program {
    let width = n.width();
    let ins: Vec<String> = n.input_names().map(str::to_string).collect();
    let mut text = String::from("li r1, 0\n");
    for pattern in 0..(1u64 << ins.len()) {
        let (mut a, mut b) = (0u32, 0u32);
        for (i, name) in ins.iter().enumerate() {
            let bit = (pattern >> i & 1) as u32;
            let idx: u32 = name[1..].parse().unwrap();
            match &name[..1] {
                "a" => a |= bit << idx,
                "b" => b |= bit << idx,
                other => panic!("{other}"),
            }
        }
        writeln!(
            text,
            "p{pattern}:\nli r1, {a}\nli r2, {b}\nunit r3, r1, r2\nsw r3, {pattern}(r0)"
        )
        .unwrap();
    }
    text.push_str("done:\nhalt\n");
    parse_program(&text, "exhaustive", width.max(1)).unwrap()
}

/// Fault id to first input pattern (in counting order) whose outputs
/// differ from the fault-free circuit.
pub fn truth_table_detections(text: &str, n: &Netlist) -> BTreeMap<usize, u64> {
    let reference = Reference::new(text);
    let k = reference.inputs.len();
    let mut out = BTreeMap::new();
    for f in n.enumerate_faults() {
        let faulty = reference.with_fault(&n.gates()[f.gate].name, f.pin, f.polarity);
        if let Some(p) = (0..(1u64 << k)).find(|&p| reference.eval(p) != faulty.eval(p)) {
            out.insert(f.id, p);
        }
    }
    out
}

/// Expected reduced program computed directly from per-fault faulty traces.
pub fn brute_force_reduction(
    p: &Program,
    n: &Netlist,
    max_cycles: u64,
) -> (Program, BTreeSet<usize>) {
    let golden = iss::run(p, n, None, max_cycles).unwrap();
    let fsr = brute_force_fsr(p, n, max_cycles);
    let essential: BTreeSet<usize> = fsr
        .detections
        .values()
        .map(|&cc| golden.records[cc as usize - 1].pc)
        .collect();
    let bbs = partition_basic_blocks(p);
    let region = find_admissible_region(p, &bbs);
    let mut keep = vec![true; p.len()];
    let mut removed = BTreeSet::new();
    for bb in &bbs {
        if region.contains(bb.id) && !(bb.start..=bb.end).any(|i| essential.contains(&i)) {
            removed.insert(bb.id);
            keep[bb.start..=bb.end].iter_mut().for_each(|k| *k = false);
        }
    }
    // Rebuild the source text keeping labels of surviving instructions.
    let by_index = p.labels_by_index();
    let mut text = String::new();
    for (i, ins) in p.instructions.iter().enumerate() {
        if keep[i] {
            for l in &by_index[i] {
                writeln!(text, "{l}:").unwrap();
            }
            writeln!(text, "{}", ins.op).unwrap();
        }
    }
    (
        parse_program(&text, &p.name, p.word_width).unwrap(),
        removed,
    )
}

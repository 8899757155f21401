//! The line-based `.nl` netlist format.
//!
//! ```text
//! # comment
//! width 8
//! input op0 op1 op2 a0 a1 ... b0 b1 ...
//! output r0 r1 ...
//! gate <name> <KIND> <out> <in1> [<in2>]
//! ```
//!
//! Gates may appear in any order. Without a `width` line the width is
//! inferred from the highest bus index.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use super::{Gate, GateKind, NetId, Netlist, NetlistError, PortBit, MAX_WIDTH, OP_BITS};

enum PortName {
    In(PortBit),
    Out(u8),
}

fn bus_index(name: &str, prefix: &str) -> Option<u8> {
    let digits = name.strip_prefix(prefix)?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

fn classify(name: &str) -> Option<PortName> {
    if let Some(i) = bus_index(name, "op") {
        return Some(PortName::In(PortBit::Op(i)));
    }
    if let Some(i) = bus_index(name, "a") {
        return Some(PortName::In(PortBit::A(i)));
    }
    if let Some(i) = bus_index(name, "b") {
        return Some(PortName::In(PortBit::B(i)));
    }
    bus_index(name, "r").map(PortName::Out)
}

struct GateLine {
    name: String,
    kind: GateKind,
    output: String,
    inputs: Vec<String>,
}

/// Parses and validates a netlist in the `.nl` format.
pub fn load_netlist(text: &str) -> Result<Netlist, NetlistError> {
    let mut width: Option<u32> = None;
    let mut input_names: Vec<String> = Vec::new();
    let mut output_names: Vec<String> = Vec::new();
    let mut gate_lines: Vec<GateLine> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("");
        let mut words = body.split_whitespace();
        let Some(keyword) = words.next() else {
            continue;
        };
        let syntax = |message: String| NetlistError::Syntax { line, message };
        match keyword {
            "width" => {
                let w = words
                    .next()
                    .and_then(|w| w.parse::<u32>().ok())
                    .ok_or_else(|| syntax("`width` expects a positive integer".into()))?;
                if words.next().is_some() {
                    return Err(syntax("trailing tokens after `width`".into()));
                }
                if w == 0 || w > MAX_WIDTH {
                    return Err(NetlistError::Width(w));
                }
                width = Some(w);
            }
            "input" => input_names.extend(words.map(str::to_string)),
            "output" => output_names.extend(words.map(str::to_string)),
            "gate" => {
                let fields: Vec<&str> = words.collect();
                if fields.len() < 3 {
                    return Err(syntax(
                        "`gate` expects <name> <KIND> <out> <in1> [<in2>]".into(),
                    ));
                }
                let kind = GateKind::from_name(fields[1]).ok_or_else(|| {
                    NetlistError::UnknownGateKind {
                        line,
                        kind: fields[1].to_string(),
                    }
                })?;
                let inputs: Vec<String> = fields[3..].iter().map(|s| s.to_string()).collect();
                if inputs.len() != kind.fanin() {
                    return Err(NetlistError::Fanin {
                        line,
                        gate: fields[0].to_string(),
                        kind,
                        expected: kind.fanin(),
                        found: inputs.len(),
                    });
                }
                if gate_lines.iter().any(|g| g.name == fields[0]) {
                    return Err(NetlistError::DuplicateGate {
                        line,
                        gate: fields[0].to_string(),
                    });
                }
                gate_lines.push(GateLine {
                    name: fields[0].to_string(),
                    kind,
                    output: fields[2].to_string(),
                    inputs,
                });
            }
            other => return Err(syntax(format!("unknown statement `{other}`"))),
        }
    }

    // Port classification and width.
    let mut inputs = Vec::with_capacity(input_names.len());
    let mut max_index = 0u32;
    for name in &input_names {
        match classify(name) {
            Some(PortName::In(bit)) => {
                if let PortBit::A(i) | PortBit::B(i) = bit {
                    max_index = max_index.max(i as u32);
                }
                inputs.push(bit);
            }
            _ => {
                return Err(NetlistError::PortWidth {
                    port: name.clone(),
                    width: width.unwrap_or(0),
                })
            }
        }
    }
    let mut out_bits = Vec::with_capacity(output_names.len());
    for name in &output_names {
        match classify(name) {
            Some(PortName::Out(i)) => {
                max_index = max_index.max(i as u32);
                out_bits.push(i);
            }
            _ => {
                return Err(NetlistError::PortWidth {
                    port: name.clone(),
                    width: width.unwrap_or(0),
                })
            }
        }
    }
    let width = match width {
        Some(w) => w,
        None => (max_index + 1).min(MAX_WIDTH + 1),
    };
    if width > MAX_WIDTH {
        return Err(NetlistError::Width(width));
    }
    let fits = |bit: &PortBit| match *bit {
        PortBit::Op(i) => (i as u32) < OP_BITS,
        PortBit::A(i) | PortBit::B(i) => (i as u32) < width,
    };
    for (bit, name) in inputs.iter().zip(&input_names) {
        if !fits(bit) {
            return Err(NetlistError::PortWidth {
                port: name.clone(),
                width,
            });
        }
    }
    for (&bit, name) in out_bits.iter().zip(&output_names) {
        if bit as u32 >= width {
            return Err(NetlistError::PortWidth {
                port: name.clone(),
                width,
            });
        }
    }

    // Net numbering: inputs, then one net per gate output.
    let mut nets: BTreeMap<&str, NetId> = BTreeMap::new();
    let mut net_names: Vec<String> = Vec::with_capacity(input_names.len() + gate_lines.len());
    for name in &input_names {
        if nets.insert(name.as_str(), net_names.len()).is_some() {
            return Err(NetlistError::MultipleDrivers { net: name.clone() });
        }
        net_names.push(name.clone());
    }
    for g in &gate_lines {
        if nets.insert(g.output.as_str(), net_names.len()).is_some() {
            return Err(NetlistError::MultipleDrivers {
                net: g.output.clone(),
            });
        }
        net_names.push(g.output.clone());
    }
    let mut gates = Vec::with_capacity(gate_lines.len());
    for g in &gate_lines {
        let mut ins = Vec::with_capacity(g.inputs.len());
        for name in &g.inputs {
            let net = *nets
                .get(name.as_str())
                .ok_or_else(|| NetlistError::UndrivenNet { net: name.clone() })?;
            ins.push(net);
        }
        gates.push(Gate {
            name: g.name.clone(),
            kind: g.kind,
            output: nets[g.output.as_str()],
            inputs: ins,
        });
    }
    let mut outputs = Vec::with_capacity(output_names.len());
    for (name, &bit) in output_names.iter().zip(&out_bits) {
        if outputs.iter().any(|&(b, _)| b == bit) {
            return Err(NetlistError::MultipleDrivers { net: name.clone() });
        }
        match nets.get(name.as_str()) {
            Some(&net) if net >= input_names.len() => outputs.push((bit, net)),
            _ => return Err(NetlistError::UndrivenNet { net: name.clone() }),
        }
    }
    Netlist::new(width, net_names, inputs, outputs, gates)
}

impl Netlist {
    /// Serializes to the `.nl` format; `load_netlist` reads it back.
    pub fn to_nl_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "width {}", self.width);
        out.push_str("input");
        for name in self.input_names() {
            out.push(' ');
            out.push_str(name);
        }
        out.push_str("\noutput");
        for name in self.output_names() {
            out.push(' ');
            out.push_str(name);
        }
        out.push('\n');
        for g in &self.gates {
            let _ = write!(
                out,
                "gate {} {} {}",
                g.name, g.kind, self.net_names[g.output]
            );
            for &i in &g.inputs {
                let _ = write!(out, " {}", self.net_names[i]);
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::build_reference_alu;
    use alloc::vec;

    #[test]
    fn minimal_netlist() {
        let n = load_netlist("input a0 b0\noutput r0\ngate g1 AND r0 a0 b0").unwrap();
        assert_eq!(n.gates().len(), 1);
        assert_eq!(n.width(), 1);
        assert!(n.is_unit_mode());
    }

    #[test]
    fn gate_order_is_free() {
        let n =
            load_netlist("input a0 b0\noutput r0\ngate g1 BUF r0 g2out\ngate g2 XOR g2out a0 b0\n")
                .unwrap();
        let order: Vec<&str> = n.topological_gates().map(|g| g.name.as_str()).collect();
        assert_eq!(order, vec!["g2", "g1"]);
        assert_eq!(n.evaluate(&[true, false], None).unwrap(), vec![true]);
        // fault ids still follow declaration order
        assert_eq!(n.gates()[0].name, "g1");
    }

    #[test]
    fn self_reference_is_a_cycle() {
        let err = load_netlist("input a0 b0\noutput r0\ngate g1 AND r0 a0 r0").unwrap_err();
        assert_eq!(err, NetlistError::Cycle { gate: "g1".into() });
    }

    #[test]
    fn longer_cycle() {
        let err = load_netlist(
            "input a0\noutput r0\ngate x AND p a0 q\ngate y BUF q p\ngate z BUF r0 p\n",
        )
        .unwrap_err();
        assert!(matches!(err, NetlistError::Cycle { .. }));
    }

    #[test]
    fn error_paths() {
        assert!(matches!(
            load_netlist("input a0\noutput r0\ngate g FROB r0 a0").unwrap_err(),
            NetlistError::UnknownGateKind { line: 3, .. }
        ));
        assert_eq!(
            load_netlist("input a0\noutput r0\ngate g AND r0 a0 zz").unwrap_err(),
            NetlistError::UndrivenNet { net: "zz".into() }
        );
        assert_eq!(
            load_netlist("input a0\noutput r0 r1\ngate g BUF r0 a0").unwrap_err(),
            NetlistError::UndrivenNet { net: "r1".into() }
        );
        assert!(matches!(
            load_netlist("input a0\noutput r0\ngate g NOT r0 a0 a0").unwrap_err(),
            NetlistError::Fanin {
                expected: 1,
                found: 2,
                ..
            }
        ));
        assert!(matches!(
            load_netlist("width 2\ninput a0 a5\noutput r0\ngate g BUF r0 a0").unwrap_err(),
            NetlistError::PortWidth { .. }
        ));
        assert!(matches!(
            load_netlist("input op3 a0\noutput r0\ngate g BUF r0 a0").unwrap_err(),
            NetlistError::PortWidth { .. }
        ));
        assert!(matches!(
            load_netlist("input x\noutput r0\ngate g BUF r0 x").unwrap_err(),
            NetlistError::PortWidth { .. }
        ));
        assert!(matches!(
            load_netlist("input a0\noutput r0\ngate g BUF r0 a0\ngate h BUF r0 a0").unwrap_err(),
            NetlistError::MultipleDrivers { .. }
        ));
        assert!(matches!(
            load_netlist("input a0\noutput r0\ngate g BUF r0 a0\ngate g BUF t a0").unwrap_err(),
            NetlistError::DuplicateGate { line: 4, .. }
        ));
        assert_eq!(
            load_netlist("width 17\n").unwrap_err(),
            NetlistError::Width(17)
        );
    }

    #[test]
    fn text_round_trip() {
        let alu = build_reference_alu(4).unwrap();
        let again = load_netlist(&alu.to_nl_text()).unwrap();
        assert_eq!(again, alu);
    }
}

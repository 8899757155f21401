//! Netlist evaluation checked against independent models: an arithmetic
//! ALU model and a name-based recursive gate evaluator that injects faults
//! by rewriting the circuit rather than forcing pins.

mod common;

use common::{single_gate_netlists, Reference, FULL_ADDER};
use proptest::prelude::*;
use sbst_core::netlist::{build_reference_alu, load_netlist, Evaluator, Fault, Netlist};

fn alu_model(op: u8, a: u32, b: u32, width: u32) -> u32 {
    let mask = if width == 32 {
        u32::MAX
    } else {
        (1 << width) - 1
    };
    let sext = |v: u32| -> i64 {
        let v = v as i64;
        if v >> (width - 1) & 1 == 1 {
            v - (1i64 << width)
        } else {
            v
        }
    };
    let sh = b % width;
    let r = match op {
        0 => a.wrapping_add(b),
        1 => a.wrapping_sub(b),
        2 => a & b,
        3 => a | b,
        4 => a ^ b,
        5 => a << sh,
        6 => a >> sh,
        7 => (sext(a) < sext(b)) as u32,
        _ => unreachable!(),
    };
    r & mask
}

struct Rng(u64);
impl Rng {
    fn next(&mut self) -> u64 {
        // xorshift64*, test-only sampling
        self.0 ^= self.0 >> 12;
        self.0 ^= self.0 << 25;
        self.0 ^= self.0 >> 27;
        self.0.wrapping_mul(0x2545F4914F6CDD1D)
    }
}

#[test]
fn alu_examples() {
    let n = build_reference_alu(4).unwrap();
    let mut ev = Evaluator::new(&n);
    assert_eq!(ev.apply(4, 0b0101, 0b0011, None), 0b0110);
    assert_eq!(ev.apply(0, 0b1111, 0b0001, None), 0b0000);
}

#[test]
fn alu8_matches_arithmetic_model_exhaustively() {
    let n = build_reference_alu(8).unwrap();
    let mut ev = Evaluator::new(&n);
    for op in 0..8u8 {
        for a in 0..256u32 {
            for b in 0..256u32 {
                assert_eq!(
                    ev.apply(op, a, b, None),
                    alu_model(op, a, b, 8),
                    "op={op} a={a} b={b}"
                );
            }
        }
    }
}

#[test]
fn alu_other_widths_match_model_on_samples() {
    let mut rng = Rng(0x5eed);
    for width in 1..=16u32 {
        let n = build_reference_alu(width).unwrap();
        let mut ev = Evaluator::new(&n);
        let mask = (1u32 << width) - 1;
        let samples = if width == 16 || width == 5 {
            10_000
        } else {
            1_000
        };
        for op in 0..8u8 {
            for _ in 0..samples {
                let a = rng.next() as u32 & mask;
                let b = rng.next() as u32 & mask;
                assert_eq!(
                    ev.apply(op, a, b, None),
                    alu_model(op, a, b, width),
                    "width={width} op={op} a={a} b={b}"
                );
            }
        }
    }
}

#[test]
fn alu_width_bounds() {
    assert!(build_reference_alu(0).is_err());
    assert!(build_reference_alu(17).is_err());
}

#[test]
fn alu_uses_only_primitive_gates_and_fault_count_recounts() {
    let n = build_reference_alu(8).unwrap();
    // Recount from the serialized gate list, independent of fault_count().
    let text = n.to_nl_text();
    let mut recount = 0;
    for line in text.lines().filter(|l| l.starts_with("gate ")) {
        let fields: Vec<&str> = line.split_whitespace().collect();
        let fanin = fields.len() - 4;
        assert!(matches!(fanin, 1 | 2));
        recount += (fanin + 1) * 2;
    }
    assert_eq!(n.enumerate_faults().len(), recount);
    assert!(recount > 1_000 && recount < 10_000, "{recount}");
}

#[test]
fn full_adder_truth_table() {
    let n = load_netlist(FULL_ADDER).unwrap();
    assert_eq!(n.gates().len(), 5);
    for bits in 0..8u32 {
        let (x, y, c) = (bits & 1, bits >> 1 & 1, bits >> 2 & 1);
        let total = x + y + c;
        let out = n.evaluate(&[x == 1, y == 1, c == 1], None).unwrap();
        assert_eq!(out, vec![total & 1 == 1, total >> 1 == 1], "{x}{y}{c}");
    }
}

fn check_against_reference(text: &str) {
    let n = load_netlist(text).unwrap();
    let reference = Reference::new(text);
    let inputs = n.inputs().len();
    for fault in n.enumerate_faults() {
        let faulty_ref =
            reference.with_fault(&n.gates()[fault.gate].name, fault.pin, fault.polarity);
        for pattern in 0..(1u64 << inputs) {
            let bits: Vec<bool> = (0..inputs).map(|i| pattern >> i & 1 == 1).collect();
            let good = n.evaluate(&bits, None).unwrap();
            let bad = n.evaluate(&bits, Some(&fault)).unwrap();
            assert_eq!(good, reference.eval(pattern));
            assert_eq!(
                bad,
                faulty_ref.eval(pattern),
                "{fault:?} pattern {pattern:b}"
            );
            assert_eq!(
                good != bad,
                reference.eval(pattern) != faulty_ref.eval(pattern)
            );
        }
    }
}

#[test]
fn fault_effects_match_rewritten_circuits_on_small_netlists() {
    for text in single_gate_netlists() {
        check_against_reference(&text);
    }
    check_against_reference(FULL_ADDER);
    // 12-gate mixed circuit with reconvergent fanout.
    check_against_reference(
        "input a0 a1 b0 b1\noutput r0 r1\n\
         gate g1 NAND n1 a0 b0\ngate g2 NOR n2 a1 b1\ngate g3 XNOR n3 n1 n2\n\
         gate g4 NOT n4 a0\ngate g5 AND n5 n4 b1\ngate g6 OR n6 n5 n3\n\
         gate g7 XOR n7 n6 a1\ngate g8 BUF n8 n1\ngate g9 AND n9 n8 n7\n\
         gate g10 OR n10 n9 n2\ngate g11 NOT r0 n10\ngate g12 XOR r1 n10 n6\n",
    );
}

fn full_adder() -> Netlist {
    load_netlist(FULL_ADDER).unwrap()
}

proptest! {
    #[test]
    fn evaluation_is_pure(pattern in 0u32..8, fault_idx in 0usize..30) {
        let n = full_adder();
        let faults = n.enumerate_faults();
        let f: Option<&Fault> = faults.get(fault_idx);
        let bits: Vec<bool> = (0..3).map(|i| pattern >> i & 1 == 1).collect();
        prop_assert_eq!(n.evaluate(&bits, f).unwrap(), n.evaluate(&bits, f).unwrap());
    }

    #[test]
    fn word_lanes_are_independent(a in any::<u64>(), b in any::<u64>(), c in any::<u64>()) {
        let n = full_adder();
        let mut nets = Vec::new();
        n.eval_words(&[a, b, c], None, &mut nets);
        for lane in [0u32, 17, 63] {
            let bits = [a >> lane & 1 == 1, b >> lane & 1 == 1, c >> lane & 1 == 1];
            let scalar = n.evaluate(&bits, None).unwrap();
            let word = n.unpack_output(&nets, lane);
            prop_assert_eq!(word & 1 == 1, scalar[0]);
            prop_assert_eq!(word >> 1 & 1 == 1, scalar[1]);
        }
    }
}

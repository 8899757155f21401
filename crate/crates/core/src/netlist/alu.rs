//! Reference execute unit: an 8-function ALU built from primitive gates.
//!
//! Opcodes: 0 ADD, 1 SUB, 2 AND, 3 OR, 4 XOR, 5 SLL, 6 SRL, 7 SLT (signed).
//! Shift amounts are `b mod width`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{Gate, GateKind, NetId, Netlist, NetlistError, PortBit, MAX_WIDTH, OP_BITS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sig {
    Const(bool),
    Net(NetId),
}

const ZERO: Sig = Sig::Const(false);

/// Gate emitter with constant folding, so operations against constant
/// operands do not leave redundant logic behind.
struct Builder {
    net_names: Vec<String>,
    gates: Vec<Gate>,
    inverted: BTreeMap<NetId, NetId>,
}

impl Builder {
    fn gate(&mut self, kind: GateKind, inputs: Vec<NetId>) -> NetId {
        let net = self.net_names.len();
        let idx = self.gates.len();
        self.net_names.push(format!("n{idx}"));
        self.gates.push(Gate {
            name: format!("g{idx}"),
            kind,
            output: net,
            inputs,
        });
        net
    }

    fn not(&mut self, x: Sig) -> Sig {
        match x {
            Sig::Const(v) => Sig::Const(!v),
            Sig::Net(n) => {
                if let Some(&m) = self.inverted.get(&n) {
                    return Sig::Net(m);
                }
                let m = self.gate(GateKind::Not, vec![n]);
                self.inverted.insert(n, m);
                self.inverted.insert(m, n);
                Sig::Net(m)
            }
        }
    }

    fn binary(&mut self, kind: GateKind, x: Sig, y: Sig) -> Sig {
        match (kind, x, y) {
            (GateKind::And, Sig::Const(false), _) | (GateKind::And, _, Sig::Const(false)) => ZERO,
            (GateKind::And, Sig::Const(true), s) | (GateKind::And, s, Sig::Const(true)) => s,
            (GateKind::Or, Sig::Const(true), _) | (GateKind::Or, _, Sig::Const(true)) => {
                Sig::Const(true)
            }
            (GateKind::Or, Sig::Const(false), s) | (GateKind::Or, s, Sig::Const(false)) => s,
            (GateKind::Xor, Sig::Const(false), s) | (GateKind::Xor, s, Sig::Const(false)) => s,
            (GateKind::Xor, Sig::Const(true), s) | (GateKind::Xor, s, Sig::Const(true)) => {
                self.not(s)
            }
            (_, Sig::Net(a), Sig::Net(b)) => Sig::Net(self.gate(kind, vec![a, b])),
            _ => unreachable!("only AND/OR/XOR are emitted"),
        }
    }

    fn and(&mut self, x: Sig, y: Sig) -> Sig {
        self.binary(GateKind::And, x, y)
    }

    fn or(&mut self, x: Sig, y: Sig) -> Sig {
        self.binary(GateKind::Or, x, y)
    }

    fn xor(&mut self, x: Sig, y: Sig) -> Sig {
        self.binary(GateKind::Xor, x, y)
    }

    /// `sel ? if_one : if_zero`
    fn mux(&mut self, sel: Sig, if_one: Sig, if_zero: Sig) -> Sig {
        if if_one == if_zero {
            return if_one;
        }
        let t = self.and(sel, if_one);
        let nsel = self.not(sel);
        let f = self.and(nsel, if_zero);
        self.or(t, f)
    }

    /// Ripple-carry `x + y + carry_in`; returns (sum bits, carry out of
    /// each position).
    fn add(&mut self, x: &[Sig], y: &[Sig], carry_in: Sig) -> (Vec<Sig>, Vec<Sig>) {
        let mut carry = carry_in;
        let mut sum = Vec::with_capacity(x.len());
        let mut carries = Vec::with_capacity(x.len());
        for (&xi, &yi) in x.iter().zip(y) {
            let p = self.xor(xi, yi);
            sum.push(self.xor(p, carry));
            let g = self.and(xi, yi);
            let t = self.and(p, carry);
            carry = self.or(g, t);
            carries.push(carry);
        }
        (sum, carries)
    }

    fn or_all(&mut self, terms: &[Sig]) -> Sig {
        terms.iter().fold(ZERO, |acc, &t| self.or(acc, t))
    }
}

/// `b mod width` as `ceil(log2(width))` bits.
fn shift_amount(bld: &mut Builder, b: &[Sig], width: usize) -> Vec<Sig> {
    let bits = usize::BITS as usize - (width - 1).leading_zeros() as usize;
    if width.is_power_of_two() {
        return b[..bits].to_vec();
    }
    // Restoring division by the constant `width`, keeping the remainder.
    let not_width: Vec<Sig> = (0..=bits)
        .map(|j| Sig::Const((width >> j) & 1 == 0))
        .collect();
    let mut rem = vec![ZERO; bits];
    for &bi in b.iter().rev() {
        let mut shifted = Vec::with_capacity(bits + 1);
        shifted.push(bi);
        shifted.extend_from_slice(&rem);
        let (diff, carries) = bld.add(&shifted, &not_width, Sig::Const(true));
        let fits = carries[bits];
        rem = (0..bits)
            .map(|j| bld.mux(fits, diff[j], shifted[j]))
            .collect();
    }
    rem
}

fn barrel_shift(bld: &mut Builder, value: &[Sig], amount: &[Sig], left: bool) -> Vec<Sig> {
    let w = value.len() as isize;
    let mut cur = value.to_vec();
    for (j, &s) in amount.iter().enumerate() {
        let dist = 1isize << j;
        cur = (0..w)
            .map(|i| {
                let src = if left { i - dist } else { i + dist };
                let moved = if (0..w).contains(&src) {
                    cur[src as usize]
                } else {
                    ZERO
                };
                bld.mux(s, moved, cur[i as usize])
            })
            .collect();
    }
    cur
}

/// Builds the reference ALU with ports `op[2:0]`, `a[w-1:0]`, `b[w-1:0]`
/// and `r[w-1:0]`.
pub fn build_reference_alu(width: u32) -> Result<Netlist, NetlistError> {
    if width == 0 || width > MAX_WIDTH {
        return Err(NetlistError::Width(width));
    }
    let w = width as usize;
    let mut inputs = Vec::new();
    let mut net_names = Vec::new();
    for i in 0..OP_BITS as u8 {
        inputs.push(PortBit::Op(i));
        net_names.push(format!("op{i}"));
    }
    for i in 0..width as u8 {
        inputs.push(PortBit::A(i));
        net_names.push(format!("a{i}"));
    }
    for i in 0..width as u8 {
        inputs.push(PortBit::B(i));
        net_names.push(format!("b{i}"));
    }
    let mut bld = Builder {
        net_names,
        gates: Vec::new(),
        inverted: BTreeMap::new(),
    };
    let op: Vec<Sig> = (0..3).map(Sig::Net).collect();
    let a: Vec<Sig> = (0..w).map(|i| Sig::Net(3 + i)).collect();
    let b: Vec<Sig> = (0..w).map(|i| Sig::Net(3 + w + i)).collect();

    // Opcode decode.
    let nop: Vec<Sig> = op.iter().map(|&o| bld.not(o)).collect();
    let sel: Vec<Sig> = (0..8)
        .map(|code| {
            let lit = |i: usize| if code >> i & 1 == 1 { op[i] } else { nop[i] };
            let low = bld.and(lit(0), lit(1));
            bld.and(low, lit(2))
        })
        .collect();

    // Adder/subtractor shared by ADD, SUB and SLT.
    let subtract = bld.or(sel[1], sel[7]);
    let b_eff: Vec<Sig> = b.iter().map(|&bi| bld.xor(bi, subtract)).collect();
    let (sum, carries) = bld.add(&a, &b_eff, subtract);
    let carry_into_msb = if w >= 2 { carries[w - 2] } else { subtract };
    let overflow = bld.xor(carries[w - 1], carry_into_msb);
    let less = bld.xor(sum[w - 1], overflow);

    let and_bits: Vec<Sig> = (0..w).map(|i| bld.and(a[i], b[i])).collect();
    let or_bits: Vec<Sig> = (0..w).map(|i| bld.or(a[i], b[i])).collect();
    let xor_bits: Vec<Sig> = (0..w).map(|i| bld.xor(a[i], b[i])).collect();

    let amount = shift_amount(&mut bld, &b, w);
    let sll = barrel_shift(&mut bld, &a, &amount, true);
    let srl = barrel_shift(&mut bld, &a, &amount, false);

    let arith = bld.or(sel[0], sel[1]);
    let mut result = Vec::with_capacity(w);
    for i in 0..w {
        let mut terms = vec![
            bld.and(arith, sum[i]),
            bld.and(sel[2], and_bits[i]),
            bld.and(sel[3], or_bits[i]),
            bld.and(sel[4], xor_bits[i]),
            bld.and(sel[5], sll[i]),
            bld.and(sel[6], srl[i]),
        ];
        if i == 0 {
            terms.push(bld.and(sel[7], less));
        }
        result.push(bld.or_all(&terms));
    }

    // Every output port is a dedicated gate output named r<i>.
    let num_inputs = inputs.len();
    let mut outputs = Vec::with_capacity(w);
    let mut claimed = vec![false; bld.net_names.len()];
    for (i, sig) in result.into_iter().enumerate() {
        let net = match sig {
            Sig::Net(n) if n >= num_inputs && !claimed[n] => n,
            Sig::Net(n) => bld.gate(GateKind::Buf, vec![n]),
            Sig::Const(v) => {
                let na = bld.not(a[0]);
                let zero = bld.and(a[0], na);
                let Sig::Net(z) = (if v { bld.not(zero) } else { zero }) else {
                    unreachable!()
                };
                bld.gate(GateKind::Buf, vec![z])
            }
        };
        claimed.resize(bld.net_names.len(), false);
        claimed[net] = true;
        bld.net_names[net] = format!("r{i}");
        outputs.push((i as u8, net));
    }
    Netlist::new(width, bld.net_names, inputs, outputs, bld.gates)
}

//! Gate-level combinational netlists and their stuck-at fault universe.
//!
//! Nets are numbered with primary inputs first (in port order) followed by
//! one net per gate output. Evaluation is bit-parallel: each net carries a
//! `u64` whose lanes are independent patterns, so a single pass can apply
//! up to 64 patterns under the same fault.

mod alu;
mod parse;

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

pub use alu::build_reference_alu;
pub use parse::load_netlist;

/// Largest supported bus width.
pub const MAX_WIDTH: u32 = 16;

/// Width of the opcode bus.
pub const OP_BITS: u32 = 3;

pub type NetId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GateKind {
    And,
    Or,
    Not,
    Nand,
    Nor,
    Xor,
    Xnor,
    Buf,
}

impl GateKind {
    pub const ALL: [GateKind; 8] = [
        GateKind::And,
        GateKind::Or,
        GateKind::Not,
        GateKind::Nand,
        GateKind::Nor,
        GateKind::Xor,
        GateKind::Xnor,
        GateKind::Buf,
    ];

    pub fn fanin(self) -> usize {
        match self {
            GateKind::Not | GateKind::Buf => 1,
            _ => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::And => "AND",
            GateKind::Or => "OR",
            GateKind::Not => "NOT",
            GateKind::Nand => "NAND",
            GateKind::Nor => "NOR",
            GateKind::Xor => "XOR",
            GateKind::Xnor => "XNOR",
            GateKind::Buf => "BUF",
        }
    }

    pub fn from_name(s: &str) -> Option<GateKind> {
        GateKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
    }

    #[inline]
    pub fn apply(self, x: u64, y: u64) -> u64 {
        match self {
            GateKind::And => x & y,
            GateKind::Or => x | y,
            GateKind::Not => !x,
            GateKind::Nand => !(x & y),
            GateKind::Nor => !(x | y),
            GateKind::Xor => x ^ y,
            GateKind::Xnor => !(x ^ y),
            GateKind::Buf => x,
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gate {
    pub name: String,
    pub kind: GateKind,
    pub output: NetId,
    /// One entry for NOT/BUF, two otherwise.
    pub inputs: Vec<NetId>,
}

/// Meaning of a primary input bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PortBit {
    Op(u8),
    A(u8),
    B(u8),
}

impl fmt::Display for PortBit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PortBit::Op(i) => write!(f, "op{i}"),
            PortBit::A(i) => write!(f, "a{i}"),
            PortBit::B(i) => write!(f, "b{i}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pin {
    /// Zero-based gate input (0 is "input-1").
    Input(u8),
    Output,
}

impl fmt::Display for Pin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pin::Input(i) => write!(f, "in{}", i + 1),
            Pin::Output => f.write_str("out"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Polarity {
    Sa0,
    Sa1,
}

impl Polarity {
    #[inline]
    fn word(self) -> u64 {
        match self {
            Polarity::Sa0 => 0,
            Polarity::Sa1 => !0,
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarity::Sa0 => "SA0",
            Polarity::Sa1 => "SA1",
        })
    }
}

/// A pin-level stuck-at fault. `gate` indexes [`Netlist::gates`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fault {
    pub id: usize,
    pub gate: usize,
    pub pin: Pin,
    pub polarity: Polarity,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NetlistError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown gate kind `{kind}`")]
    UnknownGateKind { line: usize, kind: String },
    #[error("line {line}: gate `{gate}` of kind {kind} takes {expected} input(s), found {found}")]
    Fanin {
        line: usize,
        gate: String,
        kind: GateKind,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: duplicate gate name `{gate}`")]
    DuplicateGate { line: usize, gate: String },
    #[error("combinational cycle through gate `{gate}`")]
    Cycle { gate: String },
    #[error("net `{net}` is not driven")]
    UndrivenNet { net: String },
    #[error("net `{net}` has more than one driver")]
    MultipleDrivers { net: String },
    #[error("port `{port}` does not fit a {width}-bit interface")]
    PortWidth { port: String, width: u32 },
    #[error("width {0} outside 1..={MAX_WIDTH}")]
    Width(u32),
    #[error("expected {expected} input values, got {found}")]
    MissingInput { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Netlist {
    width: u32,
    net_names: Vec<String>,
    inputs: Vec<PortBit>,
    /// Output bit index and the net driving it, in declaration order.
    outputs: Vec<(u8, NetId)>,
    gates: Vec<Gate>,
    /// Evaluation order (indices into `gates`).
    order: Vec<usize>,
}

impl Netlist {
    /// Builds and validates a netlist. Input nets are `0..inputs.len()`;
    /// each gate drives the net `inputs.len() + gate index`.
    pub(crate) fn new(
        width: u32,
        net_names: Vec<String>,
        inputs: Vec<PortBit>,
        outputs: Vec<(u8, NetId)>,
        gates: Vec<Gate>,
    ) -> Result<Netlist, NetlistError> {
        if width == 0 || width > MAX_WIDTH {
            return Err(NetlistError::Width(width));
        }
        let order = topological_order(inputs.len(), &gates)?;
        Ok(Netlist {
            width,
            net_names,
            inputs,
            outputs,
            gates,
            order,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn inputs(&self) -> &[PortBit] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[(u8, NetId)] {
        &self.outputs
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn net_count(&self) -> usize {
        self.net_names.len()
    }

    pub fn net_name(&self, net: NetId) -> &str {
        &self.net_names[net]
    }

    pub fn input_names(&self) -> impl Iterator<Item = &str> {
        self.net_names[..self.inputs.len()]
            .iter()
            .map(String::as_str)
    }

    pub fn output_names(&self) -> impl Iterator<Item = &str> {
        self.outputs
            .iter()
            .map(|&(_, net)| self.net_names[net].as_str())
    }

    /// Gates in evaluation order.
    pub fn topological_gates(&self) -> impl Iterator<Item = &Gate> {
        self.order.iter().map(|&g| &self.gates[g])
    }

    /// True when the netlist declares an opcode bus.
    pub fn has_op_bus(&self) -> bool {
        self.inputs.iter().any(|p| matches!(p, PortBit::Op(_)))
    }

    /// Netlists without an opcode bus are driven by the `unit` instruction.
    pub fn is_unit_mode(&self) -> bool {
        !self.has_op_bus()
    }

    /// Human-readable fault site, e.g. `g1.in2`.
    pub fn fault_site(&self, fault: &Fault) -> String {
        alloc::format!("{}.{}", self.gates[fault.gate].name, fault.pin)
    }

    /// Bit-parallel evaluation. `inputs` holds one word per primary input;
    /// `nets` is resized and filled with every net value.
    pub fn eval_words(&self, inputs: &[u64], fault: Option<&Fault>, nets: &mut Vec<u64>) {
        debug_assert_eq!(inputs.len(), self.inputs.len());
        nets.resize(self.net_names.len(), 0);
        nets[..inputs.len()].copy_from_slice(inputs);
        for &g in &self.order {
            let gate = &self.gates[g];
            let mut x = nets[gate.inputs[0]];
            let mut y = gate.inputs.get(1).map_or(0, |&n| nets[n]);
            let value = match fault {
                Some(f) if f.gate == g => match f.pin {
                    Pin::Input(0) => {
                        x = f.polarity.word();
                        gate.kind.apply(x, y)
                    }
                    Pin::Input(_) => {
                        y = f.polarity.word();
                        gate.kind.apply(x, y)
                    }
                    Pin::Output => f.polarity.word(),
                },
                _ => gate.kind.apply(x, y),
            };
            nets[gate.output] = value;
        }
    }

    /// Evaluates one pattern given as one bit per primary input, in port
    /// order. Returns one bit per output port, in port order.
    pub fn evaluate(
        &self,
        inputs: &[bool],
        fault: Option<&Fault>,
    ) -> Result<Vec<bool>, NetlistError> {
        if inputs.len() != self.inputs.len() {
            return Err(NetlistError::MissingInput {
                expected: self.inputs.len(),
                found: inputs.len(),
            });
        }
        let words: Vec<u64> = inputs.iter().map(|&b| b as u64).collect();
        let mut nets = Vec::new();
        self.eval_words(&words, fault, &mut nets);
        Ok(self
            .outputs
            .iter()
            .map(|&(_, n)| nets[n] & 1 == 1)
            .collect())
    }

    /// Every pin-level stuck-at fault: gate order, then pin order (inputs
    /// before the output), SA0 before SA1.
    pub fn enumerate_faults(&self) -> Vec<Fault> {
        let mut faults = Vec::with_capacity(self.fault_count());
        for (g, gate) in self.gates.iter().enumerate() {
            let pins = (0..gate.inputs.len() as u8)
                .map(Pin::Input)
                .chain([Pin::Output]);
            for pin in pins {
                for polarity in [Polarity::Sa0, Polarity::Sa1] {
                    faults.push(Fault {
                        id: faults.len(),
                        gate: g,
                        pin,
                        polarity,
                    });
                }
            }
        }
        faults
    }

    /// Size of the uncollapsed fault universe.
    pub fn fault_count(&self) -> usize {
        self.gates.iter().map(|g| (g.inputs.len() + 1) * 2).sum()
    }

    /// Input words for one pattern presented to the word-level interface.
    /// Ports the netlist does not declare are ignored.
    pub fn pack_inputs(&self, opcode: u8, a: u32, b: u32, out: &mut Vec<u64>) {
        out.clear();
        out.extend(self.inputs.iter().map(|p| {
            let bit = match *p {
                PortBit::Op(i) => (opcode as u32 >> i) & 1,
                PortBit::A(i) => (a >> i) & 1,
                PortBit::B(i) => (b >> i) & 1,
            };
            bit as u64
        }));
    }

    /// Gathers lane `lane` of the output nets into a result word.
    pub fn unpack_output(&self, nets: &[u64], lane: u32) -> u32 {
        self.outputs.iter().fold(0, |acc, &(bit, net)| {
            acc | ((((nets[net] >> lane) & 1) as u32) << bit)
        })
    }

    /// Pattern bits in input-port order packed into a word (bit i is port i).
    pub fn pattern_bits(&self, opcode: u8, a: u32, b: u32) -> u64 {
        let mut words = Vec::with_capacity(self.inputs.len());
        self.pack_inputs(opcode, a, b, &mut words);
        words
            .iter()
            .enumerate()
            .fold(0, |acc, (i, &w)| acc | (w << i))
    }
}

/// Reusable scratch space for word-level evaluation.
#[derive(Debug, Clone)]
pub struct Evaluator<'n> {
    netlist: &'n Netlist,
    inputs: Vec<u64>,
    nets: Vec<u64>,
}

impl<'n> Evaluator<'n> {
    pub fn new(netlist: &'n Netlist) -> Evaluator<'n> {
        Evaluator {
            netlist,
            inputs: Vec::with_capacity(netlist.inputs.len()),
            nets: vec![0; netlist.net_count()],
        }
    }

    pub fn netlist(&self) -> &'n Netlist {
        self.netlist
    }

    /// Applies `(opcode, a, b)` and returns the result word.
    pub fn apply(&mut self, opcode: u8, a: u32, b: u32, fault: Option<&Fault>) -> u32 {
        self.netlist.pack_inputs(opcode, a, b, &mut self.inputs);
        self.netlist.eval_words(&self.inputs, fault, &mut self.nets);
        self.netlist.unpack_output(&self.nets, 0)
    }
}

fn topological_order(num_inputs: usize, gates: &[Gate]) -> Result<Vec<usize>, NetlistError> {
    let num_nets = num_inputs + gates.len();
    let mut fanout: Vec<Vec<usize>> = vec![Vec::new(); num_nets];
    let mut pending = vec![0usize; gates.len()];
    for (g, gate) in gates.iter().enumerate() {
        for &n in &gate.inputs {
            if n >= num_inputs {
                pending[g] += 1;
            }
            fanout[n].push(g);
        }
    }
    // Kahn's algorithm; ties resolved by declaration order.
    let mut ready: alloc::collections::BinaryHeap<core::cmp::Reverse<usize>> = pending
        .iter()
        .enumerate()
        .filter(|&(_, &c)| c == 0)
        .map(|(g, _)| core::cmp::Reverse(g))
        .collect();
    let mut order = Vec::with_capacity(gates.len());
    while let Some(core::cmp::Reverse(g)) = ready.pop() {
        order.push(g);
        for &succ in &fanout[gates[g].output] {
            pending[succ] -= 1;
            if pending[succ] == 0 {
                ready.push(core::cmp::Reverse(succ));
            }
        }
    }
    if order.len() != gates.len() {
        let stuck = (0..gates.len()).find(|&g| pending[g] > 0).unwrap_or(0);
        return Err(NetlistError::Cycle {
            gate: gates[stuck].name.clone(),
        });
    }
    Ok(order)
}

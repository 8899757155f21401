//! Micro-ISA assembly: parsing, canonical text and emission.
//!
//! Source format, one statement per line:
//!
//! ```text
//! [label:] mnemonic operands   # comment
//! ```
//!
//! Registers are `r0`..`r15` (`r0` reads as zero). Loads and stores use
//! `lw rD, imm(rB)` / `sw rS, imm(rB)`. Immediates are decimal or `0x` hex.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

/// Number of architectural registers.
pub const NUM_REGS: usize = 16;

/// Largest supported data word width.
pub const MAX_WORD_WIDTH: u32 = 16;

/// Default data word width.
pub const DEFAULT_WORD_WIDTH: u32 = 8;

/// Width of the bus address space, which bounds load/store offsets.
pub const ADDRESS_BITS: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Reg(u8);

impl Reg {
    pub const ZERO: Reg = Reg(0);

    pub fn new(index: u8) -> Option<Reg> {
        ((index as usize) < NUM_REGS).then_some(Reg(index))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Reg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

/// Operations routed through the execute unit when it exposes an opcode bus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AluOp {
    Add,
    Sub,
    And,
    Or,
    Xor,
    Sll,
    Srl,
    Slt,
}

impl AluOp {
    pub const ALL: [AluOp; 8] = [
        AluOp::Add,
        AluOp::Sub,
        AluOp::And,
        AluOp::Or,
        AluOp::Xor,
        AluOp::Sll,
        AluOp::Srl,
        AluOp::Slt,
    ];

    /// Value driven on the `op` bus.
    pub fn opcode(self) -> u8 {
        self as u8
    }

    pub fn from_opcode(code: u8) -> Option<AluOp> {
        AluOp::ALL.get(code as usize).copied()
    }

    pub fn mnemonic(self) -> Mnemonic {
        match self {
            AluOp::Add => Mnemonic::Add,
            AluOp::Sub => Mnemonic::Sub,
            AluOp::And => Mnemonic::And,
            AluOp::Or => Mnemonic::Or,
            AluOp::Xor => Mnemonic::Xor,
            AluOp::Sll => Mnemonic::Sll,
            AluOp::Srl => Mnemonic::Srl,
            AluOp::Slt => Mnemonic::Slt,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Mnemonic {
    Li,
    Add,
    Sub,
    And,
    Or,
    Xor,
    Sll,
    Srl,
    Slt,
    Unit,
    Lw,
    Sw,
    Beq,
    Bne,
    J,
    Nop,
    Halt,
}

impl Mnemonic {
    pub fn as_str(self) -> &'static str {
        match self {
            Mnemonic::Li => "li",
            Mnemonic::Add => "add",
            Mnemonic::Sub => "sub",
            Mnemonic::And => "and",
            Mnemonic::Or => "or",
            Mnemonic::Xor => "xor",
            Mnemonic::Sll => "sll",
            Mnemonic::Srl => "srl",
            Mnemonic::Slt => "slt",
            Mnemonic::Unit => "unit",
            Mnemonic::Lw => "lw",
            Mnemonic::Sw => "sw",
            Mnemonic::Beq => "beq",
            Mnemonic::Bne => "bne",
            Mnemonic::J => "j",
            Mnemonic::Nop => "nop",
            Mnemonic::Halt => "halt",
        }
    }

    fn parse(word: &str) -> Option<Mnemonic> {
        let m = match word.to_ascii_lowercase().as_str() {
            "li" => Mnemonic::Li,
            "add" => Mnemonic::Add,
            "sub" => Mnemonic::Sub,
            "and" => Mnemonic::And,
            "or" => Mnemonic::Or,
            "xor" => Mnemonic::Xor,
            "sll" => Mnemonic::Sll,
            "srl" => Mnemonic::Srl,
            "slt" => Mnemonic::Slt,
            "unit" => Mnemonic::Unit,
            "lw" => Mnemonic::Lw,
            "sw" => Mnemonic::Sw,
            "beq" => Mnemonic::Beq,
            "bne" => Mnemonic::Bne,
            "j" => Mnemonic::J,
            "nop" => Mnemonic::Nop,
            "halt" => Mnemonic::Halt,
            _ => return None,
        };
        Some(m)
    }

    fn alu_op(self) -> Option<AluOp> {
        AluOp::ALL.into_iter().find(|op| op.mnemonic() == self)
    }
}

impl fmt::Display for Mnemonic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An instruction with its operands.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Op {
    Li {
        rd: Reg,
        imm: i64,
    },
    Alu {
        op: AluOp,
        rd: Reg,
        rs1: Reg,
        rs2: Reg,
    },
    Unit {
        rd: Reg,
        rs1: Reg,
        rs2: Reg,
    },
    Lw {
        rd: Reg,
        offset: i64,
        base: Reg,
    },
    Sw {
        rs: Reg,
        offset: i64,
        base: Reg,
    },
    Beq {
        rs1: Reg,
        rs2: Reg,
        target: String,
    },
    Bne {
        rs1: Reg,
        rs2: Reg,
        target: String,
    },
    J {
        target: String,
    },
    Nop,
    Halt,
}

impl Op {
    pub fn mnemonic(&self) -> Mnemonic {
        match self {
            Op::Li { .. } => Mnemonic::Li,
            Op::Alu { op, .. } => op.mnemonic(),
            Op::Unit { .. } => Mnemonic::Unit,
            Op::Lw { .. } => Mnemonic::Lw,
            Op::Sw { .. } => Mnemonic::Sw,
            Op::Beq { .. } => Mnemonic::Beq,
            Op::Bne { .. } => Mnemonic::Bne,
            Op::J { .. } => Mnemonic::J,
            Op::Nop => Mnemonic::Nop,
            Op::Halt => Mnemonic::Halt,
        }
    }

    /// True for instructions that end a basic block.
    pub fn is_control_flow(&self) -> bool {
        matches!(
            self,
            Op::Beq { .. } | Op::Bne { .. } | Op::J { .. } | Op::Halt
        )
    }

    /// Label referenced by a branch or jump.
    pub fn target(&self) -> Option<&str> {
        match self {
            Op::Beq { target, .. } | Op::Bne { target, .. } | Op::J { target } => Some(target),
            _ => None,
        }
    }

    /// Register written by this instruction, if any.
    pub fn dest(&self) -> Option<Reg> {
        match *self {
            Op::Li { rd, .. } | Op::Alu { rd, .. } | Op::Unit { rd, .. } | Op::Lw { rd, .. } => {
                Some(rd)
            }
            _ => None,
        }
    }

    /// Registers read by this instruction.
    pub fn sources(&self) -> Vec<Reg> {
        match *self {
            Op::Alu { rs1, rs2, .. } | Op::Unit { rs1, rs2, .. } => alloc::vec![rs1, rs2],
            Op::Beq { rs1, rs2, .. } | Op::Bne { rs1, rs2, .. } => alloc::vec![rs1, rs2],
            Op::Lw { base, .. } => alloc::vec![base],
            Op::Sw { rs, base, .. } => alloc::vec![rs, base],
            _ => Vec::new(),
        }
    }
}

/// Canonical text, also used as the decoded-instruction field of traces.
impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = self.mnemonic();
        match self {
            Op::Li { rd, imm } => write!(f, "{m} {rd}, {imm}"),
            Op::Alu { rd, rs1, rs2, .. } | Op::Unit { rd, rs1, rs2 } => {
                write!(f, "{m} {rd}, {rs1}, {rs2}")
            }
            Op::Lw { rd, offset, base } => write!(f, "{m} {rd}, {offset}({base})"),
            Op::Sw { rs, offset, base } => write!(f, "{m} {rs}, {offset}({base})"),
            Op::Beq { rs1, rs2, target } | Op::Bne { rs1, rs2, target } => {
                write!(f, "{m} {rs1}, {rs2}, {target}")
            }
            Op::J { target } => write!(f, "{m} {target}"),
            Op::Nop | Op::Halt => write!(f, "{m}"),
        }
    }
}

#[derive(Debug, Clone, Eq)]
pub struct Instruction {
    pub op: Op,
    /// 1-based line in the source it was parsed from (0 when synthesized).
    pub source_line: usize,
}

impl Instruction {
    pub fn new(op: Op) -> Instruction {
        Instruction { op, source_line: 0 }
    }
}

// Source position is not part of instruction identity.
impl PartialEq for Instruction {
    fn eq(&self, other: &Self) -> bool {
        self.op == other.op
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.op.fmt(f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub name: String,
    pub word_width: u32,
    pub instructions: Vec<Instruction>,
    /// Label name to instruction index.
    pub labels: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AsmErrorKind {
    #[error("unknown mnemonic `{0}`")]
    UnknownMnemonic(String),
    #[error("unresolved label `{0}`")]
    UnresolvedLabel(String),
    #[error("immediate {value} out of range for {bits}-bit field")]
    ImmediateOutOfRange { value: i64, bits: u32 },
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("invalid label name `{0}`")]
    InvalidLabel(String),
    #[error("label `{0}` is not followed by an instruction")]
    DanglingLabel(String),
    #[error("`{mnemonic}` expects {expected}")]
    Operands {
        mnemonic: Mnemonic,
        expected: &'static str,
    },
    #[error("invalid register `{0}`")]
    Register(String),
    #[error("invalid immediate `{0}`")]
    Immediate(String),
    #[error("more than one halt instruction")]
    MultipleHalt,
    #[error("program has no instructions")]
    Empty,
    #[error("word width {0} outside 1..={MAX_WORD_WIDTH}")]
    WordWidth(u32),
}

/// Assembly error with the 1-based source line it refers to (0 when the
/// error is not tied to a line).
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {kind}")]
pub struct AsmError {
    pub line: usize,
    pub kind: AsmErrorKind,
}

impl AsmError {
    fn at(line: usize, kind: AsmErrorKind) -> AsmError {
        AsmError { line, kind }
    }
}

/// Inclusive range of values an immediate may take in a `bits`-wide field:
/// either the signed or the unsigned interpretation.
pub fn immediate_range(bits: u32) -> (i64, i64) {
    (-(1i64 << (bits - 1)), (1i64 << bits) - 1)
}

fn check_imm(value: i64, bits: u32, line: usize) -> Result<(), AsmError> {
    let (lo, hi) = immediate_range(bits);
    if value < lo || value > hi {
        return Err(AsmError::at(
            line,
            AsmErrorKind::ImmediateOutOfRange { value, bits },
        ));
    }
    Ok(())
}

fn valid_label(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' || c == '.' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

impl Program {
    /// Assembles a program from already-decoded instructions, checking the
    /// same invariants as [`parse_program`].
    pub fn from_parts(
        name: impl Into<String>,
        word_width: u32,
        instructions: Vec<Instruction>,
        labels: BTreeMap<String, usize>,
    ) -> Result<Program, AsmError> {
        if word_width == 0 || word_width > MAX_WORD_WIDTH {
            return Err(AsmError::at(0, AsmErrorKind::WordWidth(word_width)));
        }
        if instructions.is_empty() {
            return Err(AsmError::at(0, AsmErrorKind::Empty));
        }
        for (name, &idx) in &labels {
            if !valid_label(name) {
                return Err(AsmError::at(0, AsmErrorKind::InvalidLabel(name.clone())));
            }
            if idx >= instructions.len() {
                return Err(AsmError::at(0, AsmErrorKind::DanglingLabel(name.clone())));
            }
        }
        let mut halts = 0;
        for ins in &instructions {
            let line = ins.source_line;
            match &ins.op {
                Op::Li { imm, .. } => check_imm(*imm, word_width, line)?,
                Op::Lw { offset, .. } | Op::Sw { offset, .. } => {
                    check_imm(*offset, ADDRESS_BITS, line)?
                }
                Op::Halt => {
                    halts += 1;
                    if halts > 1 {
                        return Err(AsmError::at(line, AsmErrorKind::MultipleHalt));
                    }
                }
                _ => {}
            }
            if let Some(t) = ins.op.target() {
                if !labels.contains_key(t) {
                    return Err(AsmError::at(
                        line,
                        AsmErrorKind::UnresolvedLabel(t.to_string()),
                    ));
                }
            }
        }
        Ok(Program {
            name: name.into(),
            word_width,
            instructions,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.instructions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instructions.is_empty()
    }

    /// Instruction index a label resolves to.
    pub fn resolve(&self, label: &str) -> Option<usize> {
        self.labels.get(label).copied()
    }

    /// Bit mask of a data word.
    pub fn word_mask(&self) -> u32 {
        word_mask(self.word_width)
    }

    /// Labels attached to each instruction index, in name order.
    pub fn labels_by_index(&self) -> Vec<Vec<&str>> {
        let mut out = alloc::vec![Vec::new(); self.instructions.len()];
        for (name, &idx) in &self.labels {
            out[idx].push(name.as_str());
        }
        out
    }
}

pub(crate) fn word_mask(width: u32) -> u32 {
    if width >= 32 {
        u32::MAX
    } else {
        (1u32 << width) - 1
    }
}

fn parse_reg(tok: &str, line: usize) -> Result<Reg, AsmError> {
    let t = tok.trim();
    let err = || AsmError::at(line, AsmErrorKind::Register(t.to_string()));
    let digits = t
        .strip_prefix('r')
        .or_else(|| t.strip_prefix('R'))
        .ok_or_else(err)?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(err());
    }
    digits.parse::<u8>().ok().and_then(Reg::new).ok_or_else(err)
}

fn parse_imm(tok: &str, line: usize) -> Result<i64, AsmError> {
    let t = tok.trim();
    let err = || AsmError::at(line, AsmErrorKind::Immediate(t.to_string()));
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    let magnitude = if let Some(hex) = body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) {
        i64::from_str_radix(hex, 16).map_err(|_| err())?
    } else {
        if body.is_empty() || !body.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        body.parse::<i64>().map_err(|_| err())?
    };
    Ok(if neg { -magnitude } else { magnitude })
}

/// Parses `imm(rB)`.
fn parse_mem(tok: &str, line: usize) -> Result<(i64, Reg), AsmError> {
    let t = tok.trim();
    let err = || AsmError::at(line, AsmErrorKind::Immediate(t.to_string()));
    let open = t.find('(').ok_or_else(err)?;
    let inner = t[open + 1..].strip_suffix(')').ok_or_else(err)?;
    let imm_text = t[..open].trim();
    let imm = if imm_text.is_empty() {
        0
    } else {
        parse_imm(imm_text, line)?
    };
    Ok((imm, parse_reg(inner, line)?))
}

fn parse_target(tok: &str, line: usize) -> Result<String, AsmError> {
    let t = tok.trim();
    if !valid_label(t) {
        return Err(AsmError::at(
            line,
            AsmErrorKind::InvalidLabel(t.to_string()),
        ));
    }
    Ok(t.to_string())
}

fn parse_op(mnemonic: Mnemonic, operands: &[&str], line: usize) -> Result<Op, AsmError> {
    let shape =
        |expected: &'static str| AsmError::at(line, AsmErrorKind::Operands { mnemonic, expected });
    let op = match mnemonic {
        Mnemonic::Li => match operands {
            [rd, imm] => Op::Li {
                rd: parse_reg(rd, line)?,
                imm: parse_imm(imm, line)?,
            },
            _ => return Err(shape("`rd, imm`")),
        },
        Mnemonic::Unit => match operands {
            [rd, rs1, rs2] => Op::Unit {
                rd: parse_reg(rd, line)?,
                rs1: parse_reg(rs1, line)?,
                rs2: parse_reg(rs2, line)?,
            },
            _ => return Err(shape("`rd, rs1, rs2`")),
        },
        Mnemonic::Lw => match operands {
            [rd, mem] => {
                let (offset, base) = parse_mem(mem, line)?;
                Op::Lw {
                    rd: parse_reg(rd, line)?,
                    offset,
                    base,
                }
            }
            _ => return Err(shape("`rd, imm(rB)`")),
        },
        Mnemonic::Sw => match operands {
            [rs, mem] => {
                let (offset, base) = parse_mem(mem, line)?;
                Op::Sw {
                    rs: parse_reg(rs, line)?,
                    offset,
                    base,
                }
            }
            _ => return Err(shape("`rs, imm(rB)`")),
        },
        Mnemonic::Beq | Mnemonic::Bne => match operands {
            [rs1, rs2, target] => {
                let (rs1, rs2) = (parse_reg(rs1, line)?, parse_reg(rs2, line)?);
                let target = parse_target(target, line)?;
                if mnemonic == Mnemonic::Beq {
                    Op::Beq { rs1, rs2, target }
                } else {
                    Op::Bne { rs1, rs2, target }
                }
            }
            _ => return Err(shape("`rs1, rs2, label`")),
        },
        Mnemonic::J => match operands {
            [target] => Op::J {
                target: parse_target(target, line)?,
            },
            _ => return Err(shape("`label`")),
        },
        Mnemonic::Nop | Mnemonic::Halt => {
            if !operands.is_empty() {
                return Err(shape("no operands"));
            }
            if mnemonic == Mnemonic::Nop {
                Op::Nop
            } else {
                Op::Halt
            }
        }
        alu => {
            let op = alu
                .alu_op()
                .expect("remaining mnemonics are ALU operations");
            match operands {
                [rd, rs1, rs2] => Op::Alu {
                    op,
                    rd: parse_reg(rd, line)?,
                    rs1: parse_reg(rs1, line)?,
                    rs2: parse_reg(rs2, line)?,
                },
                _ => return Err(shape("`rd, rs1, rs2`")),
            }
        }
    };
    Ok(op)
}

/// Parses assembly source into a [`Program`] with resolved labels.
pub fn parse_program(text: &str, name: &str, word_width: u32) -> Result<Program, AsmError> {
    if word_width == 0 || word_width > MAX_WORD_WIDTH {
        return Err(AsmError::at(0, AsmErrorKind::WordWidth(word_width)));
    }
    let mut instructions = Vec::new();
    let mut labels = BTreeMap::new();
    let mut pending: Vec<(String, usize)> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let mut rest = raw.split('#').next().unwrap_or("").trim();
        // Leading `label:` prefixes.
        while let Some(colon) = rest.find(':') {
            let name = rest[..colon].trim();
            if name.contains(char::is_whitespace) {
                break;
            }
            if !valid_label(name) {
                return Err(AsmError::at(
                    line,
                    AsmErrorKind::InvalidLabel(name.to_string()),
                ));
            }
            if labels.contains_key(name) || pending.iter().any(|(n, _)| n == name) {
                return Err(AsmError::at(
                    line,
                    AsmErrorKind::DuplicateLabel(name.to_string()),
                ));
            }
            pending.push((name.to_string(), line));
            rest = rest[colon + 1..].trim();
        }
        if rest.is_empty() {
            continue;
        }
        let (word, operand_text) = match rest.find(char::is_whitespace) {
            Some(sp) => (&rest[..sp], rest[sp..].trim()),
            None => (rest, ""),
        };
        let mnemonic = Mnemonic::parse(word)
            .ok_or_else(|| AsmError::at(line, AsmErrorKind::UnknownMnemonic(word.to_string())))?;
        let operands: Vec<&str> = if operand_text.is_empty() {
            Vec::new()
        } else {
            operand_text.split(',').map(str::trim).collect()
        };
        let op = parse_op(mnemonic, &operands, line)?;
        for (name, _) in pending.drain(..) {
            labels.insert(name, instructions.len());
        }
        instructions.push(Instruction {
            op,
            source_line: line,
        });
    }
    if let Some((name, line)) = pending.into_iter().next() {
        return Err(AsmError::at(line, AsmErrorKind::DanglingLabel(name)));
    }
    Program::from_parts(name, word_width, instructions, labels)
}

/// Emits canonical assembly. Labels go on their own line before the
/// instruction they mark.
pub fn emit_program(p: &Program) -> String {
    let mut out = String::new();
    let by_index = p.labels_by_index();
    for (ins, labels) in p.instructions.iter().zip(by_index) {
        for l in labels {
            out.push_str(l);
            out.push_str(":\n");
        }
        out.push_str(&format!("    {}\n", ins.op));
    }
    out
}

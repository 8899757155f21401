//! Cycle-by-cycle execution of a program on the micro-architecture: a
//! register file, a gate-level execute unit and a flat bus address space.
//!
//! Every instruction takes one cycle. ALU and `unit` instructions are
//! evaluated through the netlist; loads and stores produce bus events.
//! Branch comparisons use architectural register values directly.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::asm::{Op, Program, Reg, NUM_REGS};
use crate::netlist::{Evaluator, Fault, Netlist};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BusEvent {
    pub addr: u16,
    pub data: u32,
    pub is_write: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    /// Clock cycle, 1-based.
    pub cc: u64,
    /// Instruction index.
    pub pc: usize,
    /// Canonical text of the decoded instruction.
    pub di: String,
    /// Execute-unit input pattern: bit `i` is the value of input port `i`.
    pub pattern: Option<u64>,
    pub bus_event: Option<BusEvent>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Termination {
    Halt,
    CycleLimit,
    /// Control reached the end of the program without a halt.
    RanOffEnd,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceReport {
    pub program_name: String,
    pub records: Vec<TraceRecord>,
    pub terminated: Termination,
}

impl TraceReport {
    /// Duration in clock cycles.
    pub fn duration(&self) -> u64 {
        self.records.len() as u64
    }

    pub fn halted(&self) -> bool {
        self.terminated == Termination::Halt
    }

    /// Record for a 1-based clock cycle.
    pub fn at_cycle(&self, cc: u64) -> Option<&TraceRecord> {
        cc.checked_sub(1).and_then(|i| self.records.get(i as usize))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IssError {
    #[error("line {line}: `unit` needs a netlist without an opcode bus")]
    UnitOnOpBus { line: usize },
    #[error("line {line}: ALU instruction needs a netlist with an opcode bus")]
    MissingOpBus { line: usize },
    #[error("netlist width {netlist} exceeds program word width {program}")]
    WidthMismatch { netlist: u32, program: u32 },
    #[error("cycle limit must be at least 1")]
    ZeroCycleLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Exec {
    Li {
        rd: usize,
        value: u32,
    },
    Alu {
        opcode: u8,
        rd: usize,
        rs1: usize,
        rs2: usize,
    },
    Lw {
        rd: usize,
        offset: u16,
        base: usize,
    },
    Sw {
        rs: usize,
        offset: u16,
        base: usize,
    },
    Beq {
        rs1: usize,
        rs2: usize,
        target: usize,
    },
    Bne {
        rs1: usize,
        rs2: usize,
        target: usize,
    },
    J {
        target: usize,
    },
    Nop,
    Halt,
}

/// Word-addressed data memory behind the bus.
pub trait Memory {
    fn load(&mut self, addr: u16) -> u32;
    fn store(&mut self, addr: u16, data: u32);
}

/// Zero-initialized flat memory.
#[derive(Debug, Clone, Default)]
pub struct FlatMemory(BTreeMap<u16, u32>);

impl Memory for FlatMemory {
    fn load(&mut self, addr: u16) -> u32 {
        self.0.get(&addr).copied().unwrap_or(0)
    }

    fn store(&mut self, addr: u16, data: u32) {
        self.0.insert(addr, data);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MachineState {
    pub regs: [u32; NUM_REGS],
    pub pc: usize,
}

impl MachineState {
    pub fn reset() -> MachineState {
        MachineState {
            regs: [0; NUM_REGS],
            pc: 0,
        }
    }
}

/// What one cycle did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Step {
    pub pc: usize,
    pub pattern: Option<u64>,
    pub bus: Option<BusEvent>,
    pub halted: bool,
}

/// A program decoded against a specific execute unit.
#[derive(Debug, Clone)]
pub struct Executable<'a> {
    program: &'a Program,
    netlist: &'a Netlist,
    code: Vec<Exec>,
    mask: u32,
}

fn reg(r: Reg) -> usize {
    r.index()
}

fn wrap_offset(offset: i64) -> u16 {
    offset.rem_euclid(1 << 16) as u16
}

impl<'a> Executable<'a> {
    pub fn new(program: &'a Program, netlist: &'a Netlist) -> Result<Executable<'a>, IssError> {
        if netlist.width() > program.word_width {
            return Err(IssError::WidthMismatch {
                netlist: netlist.width(),
                program: program.word_width,
            });
        }
        let mask = program.word_mask();
        let unit_mode = netlist.is_unit_mode();
        let target = |label: &str| program.resolve(label).expect("labels resolved at parse");
        let mut code = Vec::with_capacity(program.len());
        for ins in &program.instructions {
            let line = ins.source_line;
            let e = match &ins.op {
                Op::Li { rd, imm } => Exec::Li {
                    rd: reg(*rd),
                    value: (*imm as u32) & mask,
                },
                Op::Alu { op, rd, rs1, rs2 } => {
                    if unit_mode {
                        return Err(IssError::MissingOpBus { line });
                    }
                    Exec::Alu {
                        opcode: op.opcode(),
                        rd: reg(*rd),
                        rs1: reg(*rs1),
                        rs2: reg(*rs2),
                    }
                }
                Op::Unit { rd, rs1, rs2 } => {
                    if !unit_mode {
                        return Err(IssError::UnitOnOpBus { line });
                    }
                    Exec::Alu {
                        opcode: 0,
                        rd: reg(*rd),
                        rs1: reg(*rs1),
                        rs2: reg(*rs2),
                    }
                }
                Op::Lw { rd, offset, base } => Exec::Lw {
                    rd: reg(*rd),
                    offset: wrap_offset(*offset),
                    base: reg(*base),
                },
                Op::Sw { rs, offset, base } => Exec::Sw {
                    rs: reg(*rs),
                    offset: wrap_offset(*offset),
                    base: reg(*base),
                },
                Op::Beq {
                    rs1,
                    rs2,
                    target: t,
                } => Exec::Beq {
                    rs1: reg(*rs1),
                    rs2: reg(*rs2),
                    target: target(t),
                },
                Op::Bne {
                    rs1,
                    rs2,
                    target: t,
                } => Exec::Bne {
                    rs1: reg(*rs1),
                    rs2: reg(*rs2),
                    target: target(t),
                },
                Op::J { target: t } => Exec::J { target: target(t) },
                Op::Nop => Exec::Nop,
                Op::Halt => Exec::Halt,
            };
            code.push(e);
        }
        Ok(Executable {
            program,
            netlist,
            code,
            mask,
        })
    }

    pub fn program(&self) -> &'a Program {
        self.program
    }

    pub fn netlist(&self) -> &'a Netlist {
        self.netlist
    }

    pub fn len(&self) -> usize {
        self.code.len()
    }

    pub fn is_empty(&self) -> bool {
        self.code.is_empty()
    }

    /// Executes the instruction at `state.pc`. The caller guarantees
    /// `state.pc < self.len()`.
    pub fn step(
        &self,
        state: &mut MachineState,
        mem: &mut impl Memory,
        eval: &mut Evaluator<'_>,
        fault: Option<&Fault>,
    ) -> Step {
        let pc = state.pc;
        let r = &mut state.regs;
        let mut next = pc + 1;
        let mut out = Step {
            pc,
            pattern: None,
            bus: None,
            halted: false,
        };
        match self.code[pc] {
            Exec::Li { rd, value } => {
                if rd != 0 {
                    r[rd] = value;
                }
            }
            Exec::Alu {
                opcode,
                rd,
                rs1,
                rs2,
            } => {
                let (a, b) = (r[rs1], r[rs2]);
                out.pattern = Some(self.netlist.pattern_bits(opcode, a, b));
                let v = eval.apply(opcode, a, b, fault) & self.mask;
                if rd != 0 {
                    r[rd] = v;
                }
            }
            Exec::Lw { rd, offset, base } => {
                let addr = (r[base] as u16).wrapping_add(offset);
                let data = mem.load(addr) & self.mask;
                out.bus = Some(BusEvent {
                    addr,
                    data,
                    is_write: false,
                });
                if rd != 0 {
                    r[rd] = data;
                }
            }
            Exec::Sw { rs, offset, base } => {
                let addr = (r[base] as u16).wrapping_add(offset);
                let data = r[rs];
                mem.store(addr, data);
                out.bus = Some(BusEvent {
                    addr,
                    data,
                    is_write: true,
                });
            }
            Exec::Beq { rs1, rs2, target } => {
                if r[rs1] == r[rs2] {
                    next = target;
                }
            }
            Exec::Bne { rs1, rs2, target } => {
                if r[rs1] != r[rs2] {
                    next = target;
                }
            }
            Exec::J { target } => next = target,
            Exec::Nop => {}
            Exec::Halt => {
                out.halted = true;
                next = pc;
            }
        }
        state.pc = next;
        out
    }
}

/// Runs a program, optionally with one stuck-at fault in the execute unit.
pub fn run(
    p: &Program,
    n: &Netlist,
    fault: Option<&Fault>,
    max_cycles: u64,
) -> Result<TraceReport, IssError> {
    if max_cycles == 0 {
        return Err(IssError::ZeroCycleLimit);
    }
    let exe = Executable::new(p, n)?;
    let mut state = MachineState::reset();
    let mut mem = FlatMemory::default();
    let mut eval = Evaluator::new(n);
    let mut records = Vec::new();
    let mut terminated = Termination::CycleLimit;
    for cc in 1..=max_cycles {
        if state.pc >= exe.len() {
            terminated = Termination::RanOffEnd;
            break;
        }
        let step = exe.step(&mut state, &mut mem, &mut eval, fault);
        records.push(TraceRecord {
            cc,
            pc: step.pc,
            di: p.instructions[step.pc].op.to_string(),
            pattern: step.pattern,
            bus_event: step.bus,
        });
        if step.halted {
            terminated = Termination::Halt;
            break;
        }
    }
    Ok(TraceReport {
        program_name: p.name.clone(),
        records,
        terminated,
    })
}

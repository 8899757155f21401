//! Seeded test-program generators.
//!
//! Two styles are produced, both as straight-line code framed by a prologue
//! block that zeroes r1..r15 and a final `done: halt`:
//!
//! * random blocks: each block loads random operands with `li`, chains one
//!   or more execute-unit instructions and stores the last result to an
//!   address unique to the block;
//! * pattern encoding: random execute-unit patterns are sampled, a pattern
//!   is kept when it is the first to expose some fault at the unit outputs,
//!   and each kept pattern becomes a `li a; li b; op; sw` block.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::asm::{parse_program, AluOp, AsmError, Program, MAX_WORD_WIDTH, NUM_REGS};
use crate::netlist::Netlist;

/// Registers a block may write.
const USABLE_REGS: usize = NUM_REGS - 1;

/// Largest block: one register per written value, plus the store.
pub const MAX_BLOCK_SIZE: u32 = USABLE_REGS as u32 + 1;

/// Smallest block: load, operate, store.
pub const MIN_BLOCK_SIZE: u32 = 3;

/// Distinct store offsets available.
pub const MAX_BLOCKS: usize = 1 << 16;

/// The splitmix64 generator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> SplitMix64 {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform value in `0..n` by multiply-shift; `n` must be nonzero.
    pub fn below(&mut self, n: u64) -> u64 {
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GenMode {
    RandomBlocks,
    Atpg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockSize {
    Fixed(u32),
    /// Inclusive range.
    Range(u32, u32),
}

impl BlockSize {
    fn bounds(self) -> (u32, u32) {
        match self {
            BlockSize::Fixed(k) => (k, k),
            BlockSize::Range(lo, hi) => (lo, hi),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenConfig {
    pub mode: GenMode,
    pub n_blocks: usize,
    pub block_size: BlockSize,
    pub seed: u64,
    pub word_width: u32,
    /// Every operand a block reads is loaded inside that block.
    pub independent: bool,
    /// Random patterns sampled in pattern-encoding mode.
    pub sample_budget: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            mode: GenMode::RandomBlocks,
            n_blocks: 100,
            block_size: BlockSize::Range(3, 6),
            seed: 42,
            word_width: 8,
            independent: true,
            sample_budget: 4096,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TpgenError {
    #[error(
        "block size range {lo}..={hi} is infeasible (allowed {MIN_BLOCK_SIZE}..={MAX_BLOCK_SIZE})"
    )]
    BlockSize { lo: u32, hi: u32 },
    #[error("block count {0} outside 1..={MAX_BLOCKS}")]
    BlockCount(usize),
    #[error("word width {0} outside 1..={MAX_WORD_WIDTH}")]
    WordWidth(u32),
    #[error("netlist width {netlist} exceeds word width {program}")]
    NetlistWidth { netlist: u32, program: u32 },
    #[error("netlist has neither an opcode bus nor operand ports")]
    NoOperandPorts,
    #[error("sample budget is zero")]
    ZeroBudget,
    #[error("no sampled pattern detects any fault")]
    NoPatternsKept,
    #[error(transparent)]
    Asm(#[from] AsmError),
}

/// Generates a program in the style selected by `cfg.mode`.
pub fn generate(cfg: &GenConfig, n: &Netlist) -> Result<Program, TpgenError> {
    match cfg.mode {
        GenMode::RandomBlocks => gen_random_program(cfg, n),
        GenMode::Atpg => gen_atpg_program(n, cfg),
    }
}

fn check_common(cfg: &GenConfig, n: &Netlist) -> Result<(), TpgenError> {
    if cfg.word_width == 0 || cfg.word_width > MAX_WORD_WIDTH {
        return Err(TpgenError::WordWidth(cfg.word_width));
    }
    if n.width() > cfg.word_width {
        return Err(TpgenError::NetlistWidth {
            netlist: n.width(),
            program: cfg.word_width,
        });
    }
    Ok(())
}

fn prologue() -> String {
    let mut s = String::new();
    for r in 1..=USABLE_REGS {
        let _ = writeln!(s, "    li r{r}, 0");
    }
    s
}

fn op_text(n: &Netlist, opcode: u8) -> &'static str {
    if n.has_op_bus() {
        AluOp::from_opcode(opcode)
            .expect("opcode < 8")
            .mnemonic()
            .as_str()
    } else {
        "unit"
    }
}

/// Random-block program. Deterministic in `(cfg, n)`.
pub fn gen_random_program(cfg: &GenConfig, n: &Netlist) -> Result<Program, TpgenError> {
    check_common(cfg, n)?;
    let (lo, hi) = cfg.block_size.bounds();
    if lo < MIN_BLOCK_SIZE || hi > MAX_BLOCK_SIZE || lo > hi {
        return Err(TpgenError::BlockSize { lo, hi });
    }
    if cfg.n_blocks == 0 || cfg.n_blocks > MAX_BLOCKS {
        return Err(TpgenError::BlockCount(cfg.n_blocks));
    }
    let mask = (1u64 << cfg.word_width) - 1;
    let mut rng = SplitMix64::new(cfg.seed);
    let mut text = prologue();
    for block in 0..cfg.n_blocks {
        let k = lo + rng.below((hi - lo + 1) as u64) as u32;
        let n_alu = ((k - 1) / 2).max(1) as usize;
        let n_li = k as usize - 1 - n_alu;
        let mut regs: Vec<usize> = (1..=USABLE_REGS).collect();
        rng.shuffle(&mut regs);
        let (used, outside) = regs.split_at(k as usize - 1);
        let (loads, results) = used.split_at(n_li);

        let _ = writeln!(text, "bb{block}:");
        for &r in loads {
            let _ = writeln!(text, "    li r{r}, {}", rng.next_u64() & mask);
        }
        for (i, &rd) in results.iter().enumerate() {
            let defined = n_li + i;
            let rs1 = if i == 0 {
                loads[rng.below(n_li as u64) as usize]
            } else {
                results[i - 1]
            };
            let pick_outside = !cfg.independent && !outside.is_empty() && rng.below(4) == 0;
            let rs2 = if pick_outside {
                outside[rng.below(outside.len() as u64) as usize]
            } else {
                used[rng.below(defined as u64) as usize]
            };
            let op = op_text(n, rng.below(8) as u8);
            let _ = writeln!(text, "    {op} r{rd}, r{rs1}, r{rs2}");
        }
        let _ = writeln!(text, "    sw r{}, {block}(r0)", results[n_alu - 1]);
    }
    text.push_str("done:\n    halt\n");
    let name = format!("random_bb_s{}", cfg.seed);
    Ok(parse_program(&text, &name, cfg.word_width)?)
}

/// Pattern-encoding program: greedy random pattern selection with
/// detection at the unit outputs. Deterministic in `(cfg, n)`.
pub fn gen_atpg_program(n: &Netlist, cfg: &GenConfig) -> Result<Program, TpgenError> {
    check_common(cfg, n)?;
    if cfg.sample_budget == 0 {
        return Err(TpgenError::ZeroBudget);
    }
    if n.inputs().is_empty() {
        return Err(TpgenError::NoOperandPorts);
    }
    let patterns = select_patterns(n, cfg.seed, cfg.sample_budget);
    if patterns.is_empty() {
        return Err(TpgenError::NoPatternsKept);
    }
    if patterns.len() > MAX_BLOCKS {
        return Err(TpgenError::BlockCount(patterns.len()));
    }
    let mut text = prologue();
    for (block, &(opcode, a, b)) in patterns.iter().enumerate() {
        let op = op_text(n, opcode);
        let _ = writeln!(text, "bb{block}:\n    li r1, {a}\n    li r2, {b}\n    {op} r3, r1, r2\n    sw r3, {block}(r0)");
    }
    text.push_str("done:\n    halt\n");
    let name = format!("atpg_s{}", cfg.seed);
    Ok(parse_program(&text, &name, cfg.word_width)?)
}

/// Kept patterns `(opcode, a, b)` in sample order. A sample is kept iff it
/// is the first sample to expose some fault at the unit outputs.
pub fn select_patterns(n: &Netlist, seed: u64, budget: u64) -> Vec<(u8, u32, u32)> {
    let mask = (1u64 << n.width()) - 1;
    let opcodes = if n.has_op_bus() { 8 } else { 1 };
    let faults = n.enumerate_faults();
    let mut alive: Vec<usize> = (0..faults.len()).collect();
    let mut rng = SplitMix64::new(seed);
    let mut kept = Vec::new();
    let mut remaining = budget;
    let mut inputs = vec![0u64; n.inputs().len()];
    let mut word = Vec::new();
    let mut good = Vec::new();
    let mut bad = Vec::new();
    while remaining > 0 && !alive.is_empty() {
        let lanes = remaining.min(64) as usize;
        remaining -= lanes as u64;
        let batch: Vec<(u8, u32, u32)> = (0..lanes)
            .map(|_| {
                let op = rng.below(opcodes) as u8;
                let a = (rng.next_u64() & mask) as u32;
                let b = (rng.next_u64() & mask) as u32;
                (op, a, b)
            })
            .collect();
        inputs.iter_mut().for_each(|w| *w = 0);
        for (lane, &(op, a, b)) in batch.iter().enumerate() {
            n.pack_inputs(op, a, b, &mut word);
            for (w, &bit) in inputs.iter_mut().zip(&word) {
                *w |= bit << lane;
            }
        }
        let valid = if lanes == 64 { !0 } else { (1u64 << lanes) - 1 };
        n.eval_words(&inputs, None, &mut good);
        let mut keep_lanes = 0u64;
        alive.retain(|&f| {
            n.eval_words(&inputs, Some(&faults[f]), &mut bad);
            let diff = n
                .outputs()
                .iter()
                .fold(0, |acc, &(_, net)| acc | (good[net] ^ bad[net]))
                & valid;
            if diff == 0 {
                return true;
            }
            keep_lanes |= 1 << diff.trailing_zeros();
            false
        });
        kept.extend(
            batch
                .iter()
                .enumerate()
                .filter(|(lane, _)| keep_lanes >> lane & 1 == 1)
                .map(|(_, &p)| p),
        );
    }
    kept
}

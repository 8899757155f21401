//! Basic-block partitioning and admissible-region detection.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use crate::asm::{Op, Program};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasicBlock {
    pub id: usize,
    /// First instruction index.
    pub start: usize,
    /// Last instruction index (inclusive).
    pub end: usize,
    pub is_branch_target: bool,
    pub ends_in_control_flow: bool,
}

impl BasicBlock {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, index: usize) -> bool {
        (self.start..=self.end).contains(&index)
    }
}

/// Blocks that may be removed during compaction.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AdmissibleRegion {
    pub block_ids: BTreeSet<usize>,
}

impl AdmissibleRegion {
    pub fn contains(&self, block_id: usize) -> bool {
        self.block_ids.contains(&block_id)
    }

    /// Number of instructions covered by the region.
    pub fn instruction_count(&self, bbs: &[BasicBlock]) -> usize {
        self.block_ids.iter().map(|&id| bbs[id].len()).sum()
    }

    /// Instruction indices covered by the region, ascending.
    pub fn instruction_indices(&self, bbs: &[BasicBlock]) -> Vec<usize> {
        self.block_ids
            .iter()
            .flat_map(|&id| bbs[id].start..=bbs[id].end)
            .collect()
    }

    /// Share of the program's instructions inside the region, in percent.
    pub fn percentage(&self, p: &Program, bbs: &[BasicBlock]) -> f64 {
        if p.is_empty() {
            return 0.0;
        }
        100.0 * self.instruction_count(bbs) as f64 / p.len() as f64
    }
}

/// Instruction indices targeted by some branch or jump.
pub fn branch_targets(p: &Program) -> BTreeSet<usize> {
    p.instructions
        .iter()
        .filter_map(|i| i.op.target())
        .filter_map(|t| p.resolve(t))
        .collect()
}

/// Splits a program into basic blocks.
///
/// Leaders are index 0, every labeled instruction (branch targets included)
/// and every instruction following a control-flow instruction.
pub fn partition_basic_blocks(p: &Program) -> Vec<BasicBlock> {
    let n = p.len();
    if n == 0 {
        return Vec::new();
    }
    let mut leader = vec![false; n];
    leader[0] = true;
    for &idx in p.labels.values() {
        leader[idx] = true;
    }
    for (i, ins) in p.instructions.iter().enumerate() {
        if ins.op.is_control_flow() && i + 1 < n {
            leader[i + 1] = true;
        }
    }
    let targets = branch_targets(p);
    let starts: Vec<usize> = (0..n).filter(|&i| leader[i]).collect();
    starts
        .iter()
        .enumerate()
        .map(|(id, &start)| {
            let end = starts.get(id + 1).map_or(n - 1, |&next| next - 1);
            BasicBlock {
                id,
                start,
                end,
                is_branch_target: targets.contains(&start),
                ends_in_control_flow: p.instructions[end].op.is_control_flow(),
            }
        })
        .collect()
}

/// Index of the block containing each instruction.
pub fn block_of_instruction(p: &Program, bbs: &[BasicBlock]) -> Vec<usize> {
    let mut out = vec![0; p.len()];
    for bb in bbs {
        for slot in &mut out[bb.start..=bb.end] {
            *slot = bb.id;
        }
    }
    out
}

/// Control-flow successors of every block.
pub fn successors(p: &Program, bbs: &[BasicBlock]) -> Vec<Vec<usize>> {
    let owner = block_of_instruction(p, bbs);
    let target_block = |label: &str| p.resolve(label).map(|i| owner[i]);
    bbs.iter()
        .map(|bb| {
            let fall = (bb.id + 1 < bbs.len()).then_some(bb.id + 1);
            let mut succ = Vec::new();
            match &p.instructions[bb.end].op {
                Op::Halt => {}
                Op::J { target } => succ.extend(target_block(target)),
                Op::Beq { target, .. } | Op::Bne { target, .. } => {
                    succ.extend(target_block(target));
                    succ.extend(fall);
                }
                _ => succ.extend(fall),
            }
            succ.sort_unstable();
            succ.dedup();
            succ
        })
        .collect()
}

/// Marks blocks that lie on some control-flow cycle (strongly connected
/// components with more than one block, or a self-loop).
pub fn blocks_on_cycles(succ: &[Vec<usize>]) -> Vec<bool> {
    let n = succ.len();
    // Kosaraju, iterative: finish order on the forward graph ...
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for root in 0..n {
        if visited[root] {
            continue;
        }
        visited[root] = true;
        let mut stack = vec![(root, 0usize)];
        while let Some((node, next)) = stack.last_mut() {
            if let Some(&s) = succ[*node].get(*next) {
                *next += 1;
                if !visited[s] {
                    visited[s] = true;
                    stack.push((s, 0));
                }
            } else {
                order.push(*node);
                stack.pop();
            }
        }
    }
    // ... then components on the reverse graph in reverse finish order.
    let mut pred = vec![Vec::new(); n];
    for (u, ss) in succ.iter().enumerate() {
        for &v in ss {
            pred[v].push(u);
        }
    }
    let mut comp = vec![usize::MAX; n];
    let mut sizes = Vec::new();
    for &root in order.iter().rev() {
        if comp[root] != usize::MAX {
            continue;
        }
        let c = sizes.len();
        let mut size = 0;
        comp[root] = c;
        let mut stack = vec![root];
        while let Some(u) = stack.pop() {
            size += 1;
            for &v in &pred[u] {
                if comp[v] == usize::MAX {
                    comp[v] = c;
                    stack.push(v);
                }
            }
        }
        sizes.push(size);
    }
    (0..n)
        .map(|u| sizes[comp[u]] > 1 || succ[u].contains(&u))
        .collect()
}

/// Selects the blocks eligible for removal.
///
/// A block qualifies when it is not the entry block, does not end in a
/// control-flow instruction (halt included), is not a branch/jump target,
/// and does not lie on any control-flow cycle, so it executes at most once.
pub fn find_admissible_region(p: &Program, bbs: &[BasicBlock]) -> AdmissibleRegion {
    let succ = successors(p, bbs);
    let cyclic = blocks_on_cycles(&succ);
    let block_ids = bbs
        .iter()
        .filter(|bb| {
            bb.id != 0 && !bb.ends_in_control_flow && !bb.is_branch_target && !cyclic[bb.id]
        })
        .map(|bb| bb.id)
        .collect();
    AdmissibleRegion { block_ids }
}

//! Interprocedural control-flow graph.
//!
//! Nodes are per-procedure entry/exit anchors plus one node per instruction.
//! The program entry node `v_en` is the entry procedure's anchor and the
//! program exit `v_ex` is its exit anchor. Edges come in three kinds:
//!
//! - [`EdgeKind::Seq`]: ordinary flow — anchor to first instruction,
//!   instruction to instruction, terminator to successor blocks, `ret` to the
//!   procedure exit. A call instruction also has a `Seq` edge to the next
//!   instruction, which carries the caller's local state around the callee.
//!   A `call exit(..)` flows straight to `v_ex`: the program ends there.
//! - [`EdgeKind::Call`]: call instruction to the callee's entry anchor.
//! - [`EdgeKind::Ret`]: callee's exit anchor back to the instruction after
//!   the call.
//!
//! Intrinsics (`readcfg`, `print`, `exit`) are opaque: they get no call or
//! return edges.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::ir::{is_intrinsic, Instruction, Location, Program, INTRINSIC_EXIT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EdgeKind {
    Seq,
    Call,
    Ret,
}

/// What an ICFG node stands for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeKind {
    Entry { procedure: String },
    Exit { procedure: String },
    Instr { location: Location },
}

impl NodeKind {
    /// Short display form: `proc:entry`, `proc:exit`, or `proc/block/idx`.
    pub fn name(&self) -> String {
        match self {
            NodeKind::Entry { procedure } => format!("{procedure}:entry"),
            NodeKind::Exit { procedure } => format!("{procedure}:exit"),
            NodeKind::Instr { location } => location.to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Icfg {
    nodes: Vec<NodeKind>,
    succs: Vec<Vec<(usize, EdgeKind)>>,
    preds: Vec<Vec<(usize, EdgeKind)>>,
    entry_ids: Vec<usize>,
    exit_ids: Vec<usize>,
    /// `instr_ids[proc][block][instr]` — node of that instruction.
    instr_ids: Vec<Vec<Vec<usize>>>,
    proc_index: BTreeMap<String, usize>,
    block_index: Vec<BTreeMap<String, usize>>,
    v_entry: usize,
    v_exit: usize,
}

impl Icfg {
    /// Builds the graph for a validated program.
    pub fn build(program: &Program) -> Icfg {
        let proc_index: BTreeMap<String, usize> = program
            .procedures
            .iter()
            .enumerate()
            .map(|(i, p)| (p.name.clone(), i))
            .collect();
        let block_index: Vec<BTreeMap<String, usize>> = program
            .procedures
            .iter()
            .map(|p| {
                p.blocks
                    .iter()
                    .enumerate()
                    .map(|(i, b)| (b.label.clone(), i))
                    .collect()
            })
            .collect();

        let mut nodes = Vec::new();
        let mut entry_ids = Vec::new();
        let mut exit_ids = Vec::new();
        let mut instr_ids = Vec::new();
        for proc in &program.procedures {
            entry_ids.push(nodes.len());
            nodes.push(NodeKind::Entry {
                procedure: proc.name.clone(),
            });
            exit_ids.push(nodes.len());
            nodes.push(NodeKind::Exit {
                procedure: proc.name.clone(),
            });
            let mut per_block = Vec::new();
            for block in &proc.blocks {
                let mut ids = Vec::new();
                for index in 0..block.instructions.len() {
                    ids.push(nodes.len());
                    nodes.push(NodeKind::Instr {
                        location: Location::new(&proc.name, &block.label, index),
                    });
                }
                per_block.push(ids);
            }
            instr_ids.push(per_block);
        }

        let entry_proc = proc_index[&program.entry_name];
        let v_entry = entry_ids[entry_proc];
        let v_exit = exit_ids[entry_proc];

        let mut succs: Vec<Vec<(usize, EdgeKind)>> = vec![Vec::new(); nodes.len()];
        for (p, proc) in program.procedures.iter().enumerate() {
            // Anchor to the first instruction of the entry block.
            succs[entry_ids[p]].push((instr_ids[p][0][0], EdgeKind::Seq));
            for (b, block) in proc.blocks.iter().enumerate() {
                for (i, instr) in block.instructions.iter().enumerate() {
                    let node = instr_ids[p][b][i];
                    match instr {
                        Instruction::Branch {
                            then_label,
                            else_label,
                            ..
                        } => {
                            let mut targets = vec![
                                instr_ids[p][block_index[p][then_label]][0],
                                instr_ids[p][block_index[p][else_label]][0],
                            ];
                            targets.dedup();
                            for t in targets {
                                succs[node].push((t, EdgeKind::Seq));
                            }
                        }
                        Instruction::Jump { label } => {
                            succs[node].push((instr_ids[p][block_index[p][label]][0], EdgeKind::Seq));
                        }
                        Instruction::Return { .. } => {
                            succs[node].push((exit_ids[p], EdgeKind::Seq));
                        }
                        Instruction::Call { callee, .. } if callee == INTRINSIC_EXIT => {
                            succs[node].push((v_exit, EdgeKind::Seq));
                        }
                        Instruction::Call { callee, .. } if !is_intrinsic(callee) => {
                            let next = instr_ids[p][b][i + 1];
                            let q = proc_index[callee];
                            succs[node].push((next, EdgeKind::Seq));
                            succs[node].push((entry_ids[q], EdgeKind::Call));
                            succs[exit_ids[q]].push((next, EdgeKind::Ret));
                        }
                        _ => {
                            succs[node].push((instr_ids[p][b][i + 1], EdgeKind::Seq));
                        }
                    }
                }
            }
        }

        let mut preds: Vec<Vec<(usize, EdgeKind)>> = vec![Vec::new(); nodes.len()];
        for (from, edges) in succs.iter().enumerate() {
            for &(to, kind) in edges {
                preds[to].push((from, kind));
            }
        }

        Icfg {
            nodes,
            succs,
            preds,
            entry_ids,
            exit_ids,
            instr_ids,
            proc_index,
            block_index,
            v_entry,
            v_exit,
        }
    }

    /// Program entry: the entry procedure's entry anchor.
    pub fn v_entry(&self) -> usize {
        self.v_entry
    }

    /// Program exit: the entry procedure's exit anchor.
    pub fn v_exit(&self) -> usize {
        self.v_exit
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, id: usize) -> &NodeKind {
        &self.nodes[id]
    }

    pub fn successors(&self, id: usize) -> &[(usize, EdgeKind)] {
        &self.succs[id]
    }

    pub fn predecessors(&self, id: usize) -> &[(usize, EdgeKind)] {
        &self.preds[id]
    }

    pub fn entry_of(&self, proc_idx: usize) -> usize {
        self.entry_ids[proc_idx]
    }

    pub fn exit_of(&self, proc_idx: usize) -> usize {
        self.exit_ids[proc_idx]
    }

    pub fn instr_node(&self, proc_idx: usize, block_idx: usize, instr_idx: usize) -> usize {
        self.instr_ids[proc_idx][block_idx][instr_idx]
    }

    pub fn first_instr_of_block(&self, proc_idx: usize, block_idx: usize) -> usize {
        self.instr_ids[proc_idx][block_idx][0]
    }

    pub fn proc_index(&self, name: &str) -> Option<usize> {
        self.proc_index.get(name).copied()
    }

    pub fn block_index(&self, proc_idx: usize, label: &str) -> Option<usize> {
        self.block_index[proc_idx].get(label).copied()
    }

    /// Node of an instruction location, if it exists in the program.
    pub fn node_of_location(&self, loc: &Location) -> Option<usize> {
        let p = self.proc_index(&loc.procedure)?;
        let b = self.block_index(p, &loc.block)?;
        self.instr_ids[p][b].get(loc.index).copied()
    }

    /// Nodes reachable from `start` following edges forward, including
    /// `start` itself.
    pub fn reachable_from(&self, start: usize) -> Vec<bool> {
        let mut seen = vec![false; self.nodes.len()];
        seen[start] = true;
        let mut stack = vec![start];
        while let Some(node) = stack.pop() {
            for &(next, _) in &self.succs[node] {
                if !seen[next] {
                    seen[next] = true;
                    stack.push(next);
                }
            }
        }
        seen
    }

    /// Graphviz rendering: solid sequential edges, dashed call/return edges.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph icfg {\n  node [shape=box];\n");
        for (id, node) in self.nodes.iter().enumerate() {
            let _ = writeln!(out, "  n{id} [label=\"{}\"];", node.name());
        }
        for (from, edges) in self.succs.iter().enumerate() {
            for &(to, kind) in edges {
                let attr = match kind {
                    EdgeKind::Seq => "",
                    EdgeKind::Call => " [style=dashed, label=\"call\"]",
                    EdgeKind::Ret => " [style=dashed, label=\"ret\"]",
                };
                let _ = writeln!(out, "  n{from} -> n{to}{attr};");
            }
        }
        out.push_str("}\n");
        out
    }
}

/// Procedure-level call graph: `result[p]` lists the procedure indices `p`
/// calls directly (intrinsics excluded), deduplicated.
pub fn call_graph(program: &Program) -> Vec<Vec<usize>> {
    let proc_index: BTreeMap<&str, usize> = program
        .procedures
        .iter()
        .enumerate()
        .map(|(i, p)| (p.name.as_str(), i))
        .collect();
    program
        .procedures
        .iter()
        .map(|proc| {
            let mut callees: Vec<usize> = proc
                .blocks
                .iter()
                .flat_map(|b| &b.instructions)
                .filter_map(|instr| match instr {
                    Instruction::Call { callee, .. } if !is_intrinsic(callee) => {
                        Some(proc_index[callee.as_str()])
                    }
                    _ => None,
                })
                .collect();
            callees.sort_unstable();
            callees.dedup();
            callees
        })
        .collect()
}

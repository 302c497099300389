//! A brute-force re-derivation of the boundary verdict for small programs.
//!
//! The optimized pipeline leans on linear-time graph algorithms (lowlink
//! articulation points, iterative post-dominator intersection, Tarjan
//! components). This module answers the same question from first
//! principles: articulation by actually removing each node and counting
//! components, post-dominance by searching for a path that avoids the
//! contender, cycles by mutual reachability, and the interprocedural
//! successor relation written out again from the instruction forms.
//!
//! It deliberately shares the taint analysis, the hosting-set derivation,
//! and [`defs_of`] with the pipeline — those define *what* the analysis
//! looks for — while everything graph-shaped, which is *how* the answer
//! is computed, is independent. Exhaustive search is exponential-ish in
//! places, so programs above [`ORACLE_BLOCK_LIMIT`] blocks are refused.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use crate::boundary::{BlockRef, Verdict};
use crate::graph::BlockGraph;
use crate::icfg::Icfg;
use crate::ir::{defs_of, Instruction, Procedure, Program, INTRINSIC_EXIT};
use crate::taint::{analyze_taint, hosting_set, TaintSourceSpec};

/// Largest total block count the oracle accepts.
pub const ORACLE_BLOCK_LIMIT: usize = 40;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("program has {blocks} blocks; the brute-force oracle handles at most {limit}")]
    ProgramTooLarge { blocks: usize, limit: usize },
}

/// What the oracle re-derives: the verdict and the chosen block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleReport {
    pub verdict: Verdict,
    pub boundary: Option<BlockRef>,
}

/// Successor block indices restated from the terminator forms. Blocks are
/// indexed by declaration order; the virtual exit is the extra node
/// `proc.blocks.len()`. A `ret` flows to the virtual exit; a call of the
/// terminating intrinsic flows nowhere.
fn block_successors(proc: &Procedure) -> Vec<Vec<usize>> {
    let vx = proc.blocks.len();
    let label_idx: BTreeMap<&str, usize> = proc
        .blocks
        .iter()
        .enumerate()
        .map(|(i, b)| (b.label.as_str(), i))
        .collect();
    let mut succs: Vec<Vec<usize>> = Vec::with_capacity(vx + 1);
    for block in &proc.blocks {
        let mut out: BTreeSet<usize> = BTreeSet::new();
        match block.instructions.last() {
            Some(Instruction::Branch {
                then_label,
                else_label,
                ..
            }) => {
                out.insert(label_idx[then_label.as_str()]);
                out.insert(label_idx[else_label.as_str()]);
            }
            Some(Instruction::Jump { label }) => {
                out.insert(label_idx[label.as_str()]);
            }
            Some(Instruction::Return { .. }) => {
                out.insert(vx);
            }
            // A call terminator is the terminating intrinsic: a dead end.
            _ => {}
        }
        succs.push(out.into_iter().collect());
    }
    succs.push(Vec::new());
    succs
}

/// Reachability matrix by one flood fill per node; `m[a][b]` means a path
/// (possibly empty) leads from `a` to `b`.
fn reach_matrix(succs: &[Vec<usize>]) -> Vec<Vec<bool>> {
    let n = succs.len();
    let mut matrix = vec![vec![false; n]; n];
    for start in 0..n {
        let row = &mut matrix[start];
        let mut stack = vec![start];
        row[start] = true;
        while let Some(v) = stack.pop() {
            for &w in &succs[v] {
                if !row[w] {
                    row[w] = true;
                    stack.push(w);
                }
            }
        }
    }
    matrix
}

/// Whether `node` lies on a cycle: it has a self edge or is mutually
/// reachable with some other node.
fn on_cycle(succs: &[Vec<usize>], reach: &[Vec<bool>], node: usize) -> bool {
    succs[node].contains(&node)
        || (0..succs.len()).any(|w| w != node && reach[node][w] && reach[w][node])
}

/// Number of connected components of the undirected view, optionally with
/// one node deleted.
fn undirected_components(succs: &[Vec<usize>], removed: Option<usize>) -> usize {
    let n = succs.len();
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for (a, out) in succs.iter().enumerate() {
        for &b in out {
            if a != b {
                adj[a].insert(b);
                adj[b].insert(a);
            }
        }
    }
    let skip = |v: usize| removed == Some(v);
    let mut seen = vec![false; n];
    let mut components = 0;
    for start in 0..n {
        if seen[start] || skip(start) {
            continue;
        }
        components += 1;
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] && !skip(w) {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
    }
    components
}

/// Articulation points the slow way: delete each node in turn and see
/// whether the component count goes up.
fn brute_articulation(succs: &[Vec<usize>]) -> BTreeSet<usize> {
    let base = undirected_components(succs, None);
    (0..succs.len())
        .filter(|&v| undirected_components(succs, Some(v)) > base)
        .collect()
}

/// Whether a path from `from` to `to` exists that never touches `avoid`.
fn reaches_avoiding(succs: &[Vec<usize>], from: usize, to: usize, avoid: usize) -> bool {
    if from == avoid {
        return false;
    }
    let mut seen = vec![false; succs.len()];
    let mut stack = vec![from];
    seen[from] = true;
    while let Some(v) = stack.pop() {
        if v == to {
            return true;
        }
        for &w in &succs[v] {
            if w != avoid && !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    false
}

/// Post-dominance by its definition: every path from `n` to the virtual
/// exit passes through `p`. Vacuously true when no such path exists.
fn brute_post_dominates(
    succs: &[Vec<usize>],
    reach: &[Vec<bool>],
    vx: usize,
    p: usize,
    n: usize,
) -> bool {
    if p == n {
        return true;
    }
    if !reach[n][vx] {
        return true;
    }
    !reaches_avoiding(succs, n, vx, p)
}

/// An interprocedural position: procedure entry, procedure exit, or one
/// instruction, all by index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Spot {
    Entry(usize),
    Exit(usize),
    Ins(usize, usize, usize),
}

/// The interprocedural successor relation, restated instruction by
/// instruction: execution falls through to the next instruction (which
/// for a call doubles as the return point), branches and jumps enter the
/// first instruction of their targets, `ret` reaches the procedure exit,
/// a call enters the callee's entry with the callee's exit feeding every
/// return point, and the terminating intrinsic jumps straight to the
/// entry procedure's exit.
fn spot_successors(program: &Program, proc_idx: &BTreeMap<&str, usize>, spot: Spot) -> Vec<Spot> {
    let entry = proc_idx[program.entry_name.as_str()];
    match spot {
        Spot::Entry(p) => vec![Spot::Ins(p, 0, 0)],
        Spot::Exit(p) => {
            let name = &program.procedures[p].name;
            let mut out = Vec::new();
            for (q, proc) in program.procedures.iter().enumerate() {
                for (b, block) in proc.blocks.iter().enumerate() {
                    for (i, instr) in block.instructions.iter().enumerate() {
                        if let Instruction::Call { callee, .. } = instr {
                            if callee == name {
                                out.push(Spot::Ins(q, b, i + 1));
                            }
                        }
                    }
                }
            }
            out
        }
        Spot::Ins(p, b, i) => {
            let block = &program.procedures[p].blocks[b];
            let label_of = |label: &str| {
                program.procedures[p]
                    .blocks
                    .iter()
                    .position(|bl| bl.label == label)
                    .expect("validated label")
            };
            match &block.instructions[i] {
                Instruction::Assign { .. } => vec![Spot::Ins(p, b, i + 1)],
                Instruction::Call { callee, .. } => {
                    if callee == INTRINSIC_EXIT {
                        return vec![Spot::Exit(entry)];
                    }
                    let mut out = vec![Spot::Ins(p, b, i + 1)];
                    if let Some(&q) = proc_idx.get(callee.as_str()) {
                        out.push(Spot::Entry(q));
                    }
                    out
                }
                Instruction::Branch {
                    then_label,
                    else_label,
                    ..
                } => {
                    let mut out = vec![Spot::Ins(p, label_of(then_label), 0)];
                    let e = Spot::Ins(p, label_of(else_label), 0);
                    if !out.contains(&e) {
                        out.push(e);
                    }
                    out
                }
                Instruction::Jump { label } => vec![Spot::Ins(p, label_of(label), 0)],
                Instruction::Return { .. } => vec![Spot::Exit(p)],
            }
        }
    }
}

/// Every spot reachable from `start`, inclusive.
fn reachable_spots(
    program: &Program,
    proc_idx: &BTreeMap<&str, usize>,
    start: Spot,
) -> BTreeSet<Spot> {
    let mut seen: BTreeSet<Spot> = BTreeSet::new();
    let mut queue: VecDeque<Spot> = VecDeque::new();
    seen.insert(start);
    queue.push_back(start);
    while let Some(spot) = queue.pop_front() {
        for next in spot_successors(program, proc_idx, spot) {
            if seen.insert(next) {
                queue.push_back(next);
            }
        }
    }
    seen
}

/// Which procedures each procedure can end up calling, transitively and
/// reflexively, straight off the call instructions.
fn callable_closure(program: &Program, proc_idx: &BTreeMap<&str, usize>) -> Vec<Vec<bool>> {
    let n = program.procedures.len();
    let mut direct: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (p, proc) in program.procedures.iter().enumerate() {
        for block in &proc.blocks {
            for instr in &block.instructions {
                if let Instruction::Call { callee, .. } = instr {
                    if let Some(&q) = proc_idx.get(callee.as_str()) {
                        direct[p].push(q);
                    }
                }
            }
        }
    }
    reach_matrix(&direct)
}

/// Re-derives the verdict and boundary with brute-force primitives.
pub fn oracle_boundary(
    program: &Program,
    spec: &TaintSourceSpec,
) -> Result<OracleReport, OracleError> {
    let total_blocks: usize = program.procedures.iter().map(|p| p.blocks.len()).sum();
    if total_blocks > ORACLE_BLOCK_LIMIT {
        return Err(OracleError::ProgramTooLarge {
            blocks: total_blocks,
            limit: ORACLE_BLOCK_LIMIT,
        });
    }

    // Shared ground truth: what counts as configuration data and where it
    // lands. Everything after this is independent re-derivation.
    let icfg = Icfg::build(program);
    let graphs: Vec<BlockGraph> = program.procedures.iter().map(BlockGraph::build).collect();
    let taint = analyze_taint(program, &icfg, spec);
    let hosting = hosting_set(program, &icfg, &taint, &graphs, spec);

    let none = OracleReport {
        verdict: Verdict::NoneFound,
        boundary: None,
    };
    if hosting.is_empty() {
        return Ok(none);
    }

    let proc_idx: BTreeMap<&str, usize> = program
        .procedures
        .iter()
        .enumerate()
        .map(|(i, p)| (p.name.as_str(), i))
        .collect();
    let block_idx = |p: usize, label: &str| {
        program.procedures[p]
            .blocks
            .iter()
            .position(|b| b.label == label)
            .expect("validated label")
    };
    let entry = proc_idx[program.entry_name.as_str()];
    let succs: Vec<Vec<Vec<usize>>> = program.procedures.iter().map(block_successors).collect();
    let reach: Vec<Vec<Vec<bool>>> = succs.iter().map(|s| reach_matrix(s)).collect();

    // Hosting blocks, with any block on a cycle replaced by the blocks the
    // cycle exits into.
    let mut pool: BTreeSet<(usize, usize)> = BTreeSet::new();
    for &(p, b) in &hosting.blocks {
        let vx = program.procedures[p].blocks.len();
        if on_cycle(&succs[p], &reach[p], b) {
            let members: BTreeSet<usize> = (0..vx)
                .filter(|&w| w == b || (reach[p][b][w] && reach[p][w][b]))
                .collect();
            for &m in &members {
                for &s in &succs[p][m] {
                    if !members.contains(&s) && s != vx {
                        pool.insert((p, s));
                    }
                }
            }
        } else {
            pool.insert((p, b));
        }
    }

    // Articulation in the candidate's own procedure, then reachability
    // from program start.
    let artic: Vec<BTreeSet<usize>> = succs.iter().map(|s| brute_articulation(s)).collect();
    pool.retain(|&(p, b)| artic[p].contains(&b));
    let live = reachable_spots(program, &proc_idx, Spot::Entry(entry));
    pool.retain(|&(p, b)| live.contains(&Spot::Ins(p, b, 0)));

    // Candidates outside the entry procedure relocate to the reachable
    // entry call sites whose callees can end up in their procedure.
    let callable = callable_closure(program, &proc_idx);
    let entry_call_blocks: Vec<(usize, usize)> = program.procedures[entry]
        .blocks
        .iter()
        .enumerate()
        .flat_map(|(bi, block)| {
            block.instructions.iter().filter_map(move |instr| {
                if let Instruction::Call { callee, .. } = instr {
                    Some((bi, callee))
                } else {
                    None
                }
            })
        })
        .filter_map(|(bi, callee)| proc_idx.get(callee.as_str()).map(|&q| (bi, q)))
        .collect();
    for (q, b) in pool.clone() {
        if q == entry {
            continue;
        }
        pool.remove(&(q, b));
        for &(cb, r) in &entry_call_blocks {
            if callable[r][q] && live.contains(&Spot::Ins(entry, cb, 0)) {
                pool.insert((entry, cb));
            }
        }
    }
    pool.retain(|&(_, b)| artic[entry].contains(&b));

    // Filters. C1: some cycle the candidate is not on can reach it.
    let entry_succs = &succs[entry];
    let entry_reach = &reach[entry];
    let entry_vx = program.procedures[entry].blocks.len();
    pool.retain(|&(_, c)| {
        (0..entry_succs.len()).any(|w| {
            // `w` reaches `c` but not the other way around, so `c` sits
            // strictly after the cycle `w` is on.
            on_cycle(entry_succs, entry_reach, w) && entry_reach[w][c] && !entry_reach[c][w]
        })
    });

    // C2: the candidate reaches program end and no hosting write can get
    // there around it. Writes in callees are represented by every entry
    // call block whose callee chain reaches their procedure.
    let mut proxy_blocks: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for &(cb, r) in &entry_call_blocks {
        for (q, ok) in callable[r].iter().enumerate() {
            if *ok {
                proxy_blocks.entry(q).or_default().insert(cb);
            }
        }
    }
    let targets: Vec<BTreeSet<usize>> = hosting
        .assignments
        .iter()
        .map(|loc| {
            let p = proc_idx[loc.procedure.as_str()];
            let b = block_idx(p, &loc.block);
            if p == entry {
                BTreeSet::from([b])
            } else {
                proxy_blocks.get(&p).cloned().unwrap_or_default()
            }
        })
        .collect();
    pool.retain(|&(_, c)| {
        entry_reach[c][entry_vx]
            && targets.iter().all(|set| {
                set.iter()
                    .all(|&t| brute_post_dominates(entry_succs, entry_reach, entry_vx, c, t))
            })
    });

    // C3: past the candidate's terminator, no hosted variable is written.
    let mut def_spots: BTreeSet<Spot> = BTreeSet::new();
    for var in &hosting.vars {
        for loc in defs_of(program, var).expect("hosted variable has definitions") {
            let p = proc_idx[loc.procedure.as_str()];
            def_spots.insert(Spot::Ins(p, block_idx(p, &loc.block), loc.index));
        }
    }
    pool.retain(|&(p, b)| {
        let last = program.procedures[p].blocks[b].instructions.len() - 1;
        let onward = reachable_spots(program, &proc_idx, Spot::Ins(p, b, last));
        def_spots.is_disjoint(&onward)
    });

    if pool.is_empty() {
        return Ok(none);
    }

    // Closest survivor by breadth-first distance from the entry block,
    // ties to the earliest declared.
    let mut dist: Vec<Option<usize>> = vec![None; entry_succs.len()];
    let mut queue = VecDeque::from([0usize]);
    dist[0] = Some(0);
    while let Some(v) = queue.pop_front() {
        for &w in &entry_succs[v] {
            if dist[w].is_none() {
                dist[w] = Some(dist[v].expect("visited") + 1);
                queue.push_back(w);
            }
        }
    }
    let &(p, b) = pool
        .iter()
        .min_by_key(|&&(_, b)| (dist[b].unwrap_or(usize::MAX), b))
        .expect("pool is non-empty");
    Ok(OracleReport {
        verdict: Verdict::SingleElementFound,
        boundary: Some(BlockRef::new(
            program.procedures[p].name.clone(),
            program.procedures[p].blocks[b].label.clone(),
        )),
    })
}

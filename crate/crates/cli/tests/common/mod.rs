//! Shared harness for the acceptance suite: a seeded program generator,
//! brute-force graph oracles restated from their definitions, checkers for
//! the result invariants, and a path-enumeration taint oracle.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use boundary_analysis::ir::{is_intrinsic, INTRINSIC_EXIT};
use boundary_analysis::{
    Analysis, BoundaryReport, EliminationReason, Instruction, Location, Procedure, Program, VarId,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------------------
// Program generation

pub struct GenConfig {
    pub max_procs: usize,
    pub max_blocks: usize,
    pub loop_probability: f64,
    pub allow_loops: bool,
    pub allow_calls: bool,
}

impl GenConfig {
    /// Interprocedural programs with loops: up to 3 procedures and 30
    /// blocks, with a forced loop in the entry procedure 80% of the time.
    pub fn standard() -> GenConfig {
        GenConfig {
            max_procs: 3,
            max_blocks: 30,
            loop_probability: 0.8,
            allow_loops: true,
            allow_calls: true,
        }
    }

    /// Single-procedure programs whose branches only jump forward and that
    /// contain no calls at all, so every execution path can be enumerated.
    pub fn loop_free_call_free() -> GenConfig {
        GenConfig {
            max_procs: 1,
            max_blocks: 10,
            loop_probability: 0.0,
            allow_loops: false,
            allow_calls: false,
        }
    }
}

/// Emits a random program as source text. Every output parses and
/// validates: operand variables are drawn from names that are assigned
/// somewhere in the procedure (or are parameters/globals), jump targets
/// exist, call arities match, and procedures only call later-declared
/// procedures (so the entry procedure is never a callee).
pub fn generate_source(rng: &mut ChaCha8Rng, cfg: &GenConfig) -> String {
    let nprocs = if cfg.allow_calls {
        rng.gen_range(1..=cfg.max_procs)
    } else {
        1
    };
    let proc_names: Vec<String> = (0..nprocs)
        .map(|i| {
            if i == 0 {
                "main".to_string()
            } else {
                format!("helper{i}")
            }
        })
        .collect();
    let globals: Vec<String> = (0..rng.gen_range(0..=2)).map(|i| format!("g{i}")).collect();
    let params: Vec<Vec<String>> = (0..nprocs)
        .map(|i| {
            let pool: [&str; 2] = if i == 0 { ["argc", "argv"] } else { ["x", "y"] };
            let n = if i == 0 {
                rng.gen_range(1..=2)
            } else {
                rng.gen_range(0..=2)
            };
            pool[..n].iter().map(|s| s.to_string()).collect()
        })
        .collect();

    // Split the block budget, keeping at least two blocks per procedure.
    let mut counts = Vec::new();
    let mut budget = cfg.max_blocks;
    for i in 0..nprocs {
        let reserve = 2 * (nprocs - i - 1);
        let hi = budget.saturating_sub(reserve).clamp(2, 10);
        let n = rng.gen_range(2..=hi);
        counts.push(n);
        budget -= n;
    }

    let mut out = String::new();
    for g in &globals {
        out.push_str("global ");
        out.push_str(g);
        out.push('\n');
    }
    if !globals.is_empty() {
        out.push('\n');
    }

    for (pi, &count) in counts.iter().enumerate() {
        gen_procedure(
            rng,
            cfg,
            &mut out,
            pi,
            &proc_names,
            &params,
            count,
            &globals,
        );
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn gen_procedure(
    rng: &mut ChaCha8Rng,
    cfg: &GenConfig,
    out: &mut String,
    pi: usize,
    proc_names: &[String],
    params: &[Vec<String>],
    nblocks: usize,
    globals: &[String],
) {
    out.push_str(&format!(
        "proc {}({}) {{\n",
        proc_names[pi],
        params[pi].join(", ")
    ));

    // Names an operand may read. The validator is flow-insensitive (any
    // name assigned somewhere in the procedure is readable), so growing
    // the pool as destinations appear only under-approximates it.
    let mut readable: Vec<String> = globals.iter().chain(params[pi].iter()).cloned().collect();
    let locals = ["v0", "v1", "v2"];

    // Guarantee a loop in the entry procedure with the configured
    // probability by overwriting one terminator with a back edge.
    let forced_back_edge: Option<(usize, usize)> =
        if pi == 0 && cfg.allow_loops && nblocks >= 2 && rng.gen_bool(cfg.loop_probability) {
            let from = rng.gen_range(1..nblocks);
            let to = rng.gen_range(0..=from);
            Some((from, to))
        } else {
            None
        };

    for bi in 0..nblocks {
        out.push_str(&format!("b{bi}:\n"));
        for _ in 0..rng.gen_range(0..=2) {
            let line = gen_instruction(rng, cfg, pi, proc_names, params, &mut readable, &locals);
            out.push_str("  ");
            out.push_str(&line);
            out.push('\n');
        }
        let term = match forced_back_edge {
            Some((from, to)) if from == bi => format!("jmp b{to}"),
            _ => gen_terminator(rng, cfg, bi, nblocks, &readable),
        };
        out.push_str("  ");
        out.push_str(&term);
        out.push('\n');
    }
    out.push_str("}\n\n");
}

fn gen_instruction(
    rng: &mut ChaCha8Rng,
    cfg: &GenConfig,
    pi: usize,
    proc_names: &[String],
    params: &[Vec<String>],
    readable: &mut Vec<String>,
    locals: &[&str],
) -> String {
    if cfg.allow_calls && rng.gen_bool(0.25) {
        let has_later = pi + 1 < proc_names.len();
        if has_later && rng.gen_bool(0.5) {
            let target = rng.gen_range(pi + 1..proc_names.len());
            let args: Vec<String> = (0..params[target].len())
                .map(|_| operand(rng, readable))
                .collect();
            let call = format!("call {}({})", proc_names[target], args.join(", "));
            if rng.gen_bool(0.6) {
                let dest = locals[rng.gen_range(0..locals.len())].to_string();
                push_name(readable, &dest);
                return format!("{dest} = {call}");
            }
            return call;
        }
        if rng.gen_bool(0.6) {
            let dest = locals[rng.gen_range(0..locals.len())].to_string();
            let arg = operand(rng, readable);
            push_name(readable, &dest);
            return format!("{dest} = call readcfg({arg})");
        }
        return format!("call print({})", operand(rng, readable));
    }

    let dest = if rng.gen_bool(0.55) || readable.is_empty() {
        locals[rng.gen_range(0..locals.len())].to_string()
    } else {
        readable[rng.gen_range(0..readable.len())].clone()
    };
    push_name(readable, &dest);
    if rng.gen_bool(0.4) {
        format!("{dest} = {}", operand(rng, readable))
    } else {
        let ops = ["add", "sub", "mul", "eq", "ne", "lt", "gt", "index"];
        let op = ops[rng.gen_range(0..ops.len())];
        format!(
            "{dest} = {op}({}, {})",
            operand(rng, readable),
            operand(rng, readable)
        )
    }
}

fn gen_terminator(
    rng: &mut ChaCha8Rng,
    cfg: &GenConfig,
    bi: usize,
    nblocks: usize,
    readable: &[String],
) -> String {
    if bi == nblocks - 1 {
        return ret_line(rng, readable);
    }
    let roll: f64 = rng.gen();
    if cfg.allow_calls && roll < 0.06 {
        return format!("call exit({})", rng.gen_range(0..3));
    }
    if roll < 0.18 {
        return ret_line(rng, readable);
    }
    if roll < 0.52 || readable.is_empty() {
        return format!("jmp b{}", pick_target(rng, cfg, bi, nblocks));
    }
    let cond = &readable[rng.gen_range(0..readable.len())];
    format!(
        "br {cond} b{} b{}",
        pick_target(rng, cfg, bi, nblocks),
        pick_target(rng, cfg, bi, nblocks)
    )
}

fn ret_line(rng: &mut ChaCha8Rng, readable: &[String]) -> String {
    if !readable.is_empty() && rng.gen_bool(0.3) {
        format!("ret {}", readable[rng.gen_range(0..readable.len())])
    } else {
        "ret".to_string()
    }
}

fn pick_target(rng: &mut ChaCha8Rng, cfg: &GenConfig, bi: usize, nblocks: usize) -> usize {
    if cfg.allow_loops && rng.gen_bool(0.3) {
        rng.gen_range(0..=bi)
    } else {
        rng.gen_range(bi + 1..nblocks)
    }
}

fn operand(rng: &mut ChaCha8Rng, readable: &[String]) -> String {
    if readable.is_empty() || rng.gen_bool(0.35) {
        rng.gen_range(0..10).to_string()
    } else {
        readable[rng.gen_range(0..readable.len())].clone()
    }
}

fn push_name(pool: &mut Vec<String>, name: &str) {
    if !pool.iter().any(|n| n == name) {
        pool.push(name.to_string());
    }
}

// ---------------------------------------------------------------------------
// Graph oracles

/// Block-level successor lists for one procedure with a virtual exit as the
/// extra last node: `ret` edges to the exit, `call exit` ends the program
/// and has no successor.
pub fn block_succs(proc: &Procedure) -> Vec<Vec<usize>> {
    let index: BTreeMap<&str, usize> = proc
        .blocks
        .iter()
        .enumerate()
        .map(|(i, b)| (b.label.as_str(), i))
        .collect();
    let vx = proc.blocks.len();
    let mut succs = vec![Vec::new(); vx + 1];
    for (i, block) in proc.blocks.iter().enumerate() {
        let mut outs = BTreeSet::new();
        match block.instructions.last() {
            Some(Instruction::Branch {
                then_label,
                else_label,
                ..
            }) => {
                outs.insert(index[then_label.as_str()]);
                outs.insert(index[else_label.as_str()]);
            }
            Some(Instruction::Jump { label }) => {
                outs.insert(index[label.as_str()]);
            }
            Some(Instruction::Return { .. }) => {
                outs.insert(vx);
            }
            _ => {}
        }
        succs[i] = outs.into_iter().collect();
    }
    succs
}

fn undirected_component_count(succs: &[Vec<usize>], removed: Option<usize>) -> usize {
    let n = succs.len();
    let mut adj = vec![BTreeSet::new(); n];
    for (u, outs) in succs.iter().enumerate() {
        for &v in outs {
            if u != v {
                adj[u].insert(v);
                adj[v].insert(u);
            }
        }
    }
    let mut seen = vec![false; n];
    if let Some(r) = removed {
        seen[r] = true;
    }
    let mut components = 0;
    for start in 0..n {
        if seen[start] {
            continue;
        }
        components += 1;
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
    }
    components
}

/// Articulation points by definition: delete each vertex in turn and see
/// whether the number of undirected components grows.
pub fn removal_articulation(succs: &[Vec<usize>]) -> BTreeSet<usize> {
    let base = undirected_component_count(succs, None);
    (0..succs.len())
        .filter(|&v| undirected_component_count(succs, Some(v)) > base)
        .collect()
}

/// Whether every path from `n` to `exit` passes through `p`, decided by
/// enumerating paths. Visiting each node at most once per path is
/// exhaustive: a walk that avoids `p` shortens to a simple path that still
/// avoids `p`.
pub fn path_post_dominates(succs: &[Vec<usize>], exit: usize, p: usize, n: usize) -> bool {
    if p == n {
        return true;
    }
    let mut on_path = vec![false; succs.len()];
    !avoiding_path(succs, exit, p, n, &mut on_path)
}

fn avoiding_path(
    succs: &[Vec<usize>],
    exit: usize,
    avoid: usize,
    cur: usize,
    on_path: &mut [bool],
) -> bool {
    if cur == avoid {
        return false;
    }
    if cur == exit {
        return true;
    }
    if on_path[cur] {
        return false;
    }
    on_path[cur] = true;
    let found = succs[cur]
        .iter()
        .any(|&s| avoiding_path(succs, exit, avoid, s, on_path));
    on_path[cur] = false;
    found
}

/// Reachability rows (reflexive): `rows[v][w]` iff `w` is reachable from `v`.
pub fn reach_rows(succs: &[Vec<usize>]) -> Vec<Vec<bool>> {
    (0..succs.len())
        .map(|start| {
            let mut seen = vec![false; succs.len()];
            seen[start] = true;
            let mut stack = vec![start];
            while let Some(u) = stack.pop() {
                for &v in &succs[u] {
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
            seen
        })
        .collect()
}

/// Strongly connected components by definition: two nodes share a
/// component iff each reaches the other.
pub fn mutual_reach_components(succs: &[Vec<usize>]) -> BTreeSet<BTreeSet<usize>> {
    let reach = reach_rows(succs);
    (0..succs.len())
        .map(|v| {
            (0..succs.len())
                .filter(|&w| reach[v][w] && reach[w][v])
                .collect()
        })
        .collect()
}

fn on_cycle(succs: &[Vec<usize>], reach: &[Vec<bool>], v: usize) -> bool {
    succs[v].contains(&v) || (0..succs.len()).any(|w| w != v && reach[v][w] && reach[w][v])
}

fn bfs_dist(succs: &[Vec<usize>], start: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; succs.len()];
    dist[start] = Some(0);
    let mut queue = VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        for &v in &succs[u] {
            if dist[v].is_none() {
                dist[v] = Some(dist[u].unwrap() + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

// ---------------------------------------------------------------------------
// Result invariants

/// Checks the result invariants on a found boundary. Returns one message
/// per violation; an empty vector means every invariant holds. All graph
/// facts are recomputed here from the program text, not taken from the
/// library's graph layer.
pub fn invariant_violations(analysis: &Analysis, report: &BoundaryReport) -> Vec<String> {
    let mut violations = Vec::new();
    let Some(boundary) = &report.boundary else {
        return violations;
    };
    let program = analysis.program;
    let entry = program.entry_procedure().expect("entry procedure exists");
    if boundary.procedure != entry.name {
        violations.push(format!("{boundary} is outside the entry procedure"));
        return violations;
    }
    let succs = block_succs(entry);
    let vx = entry.blocks.len();
    let b = entry
        .blocks
        .iter()
        .position(|bl| bl.label == boundary.block)
        .expect("boundary names an existing block");

    // Articulation: removing the boundary must disconnect the graph.
    if !removal_articulation(&succs).contains(&b) {
        violations.push(format!("{boundary} is not an articulation point"));
    }

    // Reachability from the procedure entry block.
    let reach = reach_rows(&succs);
    if !reach[0][b] {
        violations.push(format!("{boundary} is unreachable from the entry block"));
    }

    // Some loop lies strictly before the boundary.
    let loop_before = (0..vx).any(|w| on_cycle(&succs, &reach, w) && reach[w][b] && !reach[b][w]);
    if !loop_before {
        violations.push(format!("no loop precedes {boundary}"));
    }

    // The boundary reaches the exit and post-dominates every hosting target.
    if !reach[b][vx] {
        violations.push(format!("{boundary} cannot reach the virtual exit"));
    }
    for targets in hosting_targets(program, analysis) {
        for t in targets {
            if !path_post_dominates(&succs, vx, b, t) {
                violations.push(format!(
                    "{boundary} does not post-dominate hosting target {}",
                    entry.blocks[t].label
                ));
            }
        }
    }

    // No configuration variable is written at any point reachable from the
    // boundary's terminator.
    for var in &report.c_host {
        if let Some(loc) = def_reachable_from_terminator(program, b, var) {
            violations.push(format!("{var} is written at {loc}, after {boundary}"));
        }
    }

    // Minimality: no other surviving candidate is strictly closer to entry.
    let dist = bfs_dist(&succs, 0);
    let key = |idx: usize| (dist[idx].unwrap_or(usize::MAX), idx);
    for candidate in &report.candidates {
        if candidate.eliminated_by != Some(EliminationReason::NotClosest) {
            continue;
        }
        let idx = entry
            .blocks
            .iter()
            .position(|bl| bl.label == candidate.block.block)
            .expect("surviving candidates are entry blocks");
        if key(idx) < key(b) {
            violations.push(format!(
                "{} survived the filters and is closer to entry than {boundary}",
                candidate.block
            ));
        }
    }

    // When every loop exit of the procedure lies outside all loops, the
    // boundary must too.
    let components = mutual_reach_components(&succs);
    let cyclic: Vec<&BTreeSet<usize>> = components
        .iter()
        .filter(|c| c.iter().any(|&v| on_cycle(&succs, &reach, v)))
        .collect();
    let premise = cyclic.iter().all(|comp| {
        comp.iter().all(|&v| {
            succs[v]
                .iter()
                .filter(|s| !comp.contains(s))
                .all(|s| !cyclic.iter().any(|c2| c2.contains(s)))
        })
    });
    if premise && cyclic.iter().any(|c| c.contains(&b)) {
        violations.push(format!(
            "{boundary} lies inside a loop although every loop exit is outside all loops"
        ));
    }

    violations
}

/// The post-dominance obligations: for a hosting write in the entry
/// procedure, its own block; for a hosting write elsewhere, every entry
/// block whose calls can (transitively) reach the hosting procedure.
fn hosting_targets(program: &Program, analysis: &Analysis) -> Vec<BTreeSet<usize>> {
    let entry = program.entry_procedure().expect("entry procedure exists");
    let position = |name: &str| program.procedures.iter().position(|p| p.name == name);
    let closure = call_closure(program);
    let mut sets = Vec::new();
    for loc in &analysis.hosting.assignments {
        if loc.procedure == entry.name {
            let hb = entry
                .blocks
                .iter()
                .position(|bl| bl.label == loc.block)
                .expect("hosting block exists");
            sets.push(BTreeSet::from([hb]));
        } else {
            let q = position(&loc.procedure).expect("hosting procedure exists");
            let mut set = BTreeSet::new();
            for (i, block) in entry.blocks.iter().enumerate() {
                let calls_into_q = block.instructions.iter().any(|ins| match ins {
                    Instruction::Call { callee, .. } => {
                        position(callee).is_some_and(|r| closure[r][q])
                    }
                    _ => false,
                });
                if calls_into_q {
                    set.insert(i);
                }
            }
            sets.push(set);
        }
    }
    sets
}

/// Reflexive transitive closure of the procedure call relation.
fn call_closure(program: &Program) -> Vec<Vec<bool>> {
    let position = |name: &str| program.procedures.iter().position(|p| p.name == name);
    let direct: Vec<Vec<usize>> = program
        .procedures
        .iter()
        .map(|proc| {
            let mut out = BTreeSet::new();
            for block in &proc.blocks {
                for ins in &block.instructions {
                    if let Instruction::Call { callee, .. } = ins {
                        if let Some(q) = position(callee) {
                            out.insert(q);
                        }
                    }
                }
            }
            out.into_iter().collect()
        })
        .collect();
    reach_rows(&direct)
}

/// One point in an interprocedural walk: a procedure entry, a procedure
/// exit, or an instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Spot {
    Entry(usize),
    Exit(usize),
    At(usize, usize, usize),
}

/// Interprocedural successors restated from the instruction semantics: a
/// call flows both into the callee and on to the next instruction, `ret`
/// flows to the procedure exit, a procedure exit flows to the point after
/// every call of that procedure, and `call exit` ends the program.
fn spot_succs(program: &Program, entry_idx: usize, spot: Spot) -> Vec<Spot> {
    let mut out = Vec::new();
    match spot {
        Spot::Entry(p) => out.push(Spot::At(p, 0, 0)),
        Spot::Exit(p) => {
            let name = &program.procedures[p].name;
            for (q, proc) in program.procedures.iter().enumerate() {
                for (b, block) in proc.blocks.iter().enumerate() {
                    for (i, ins) in block.instructions.iter().enumerate() {
                        if let Instruction::Call { callee, .. } = ins {
                            if callee == name && !is_intrinsic(callee) {
                                out.push(Spot::At(q, b, i + 1));
                            }
                        }
                    }
                }
            }
        }
        Spot::At(p, b, i) => {
            let proc = &program.procedures[p];
            let block = &proc.blocks[b];
            let target = |label: &str| {
                proc.blocks
                    .iter()
                    .position(|x| x.label == label)
                    .expect("validated target")
            };
            match &block.instructions[i] {
                Instruction::Branch {
                    then_label,
                    else_label,
                    ..
                } => {
                    out.push(Spot::At(p, target(then_label), 0));
                    out.push(Spot::At(p, target(else_label), 0));
                }
                Instruction::Jump { label } => out.push(Spot::At(p, target(label), 0)),
                Instruction::Return { .. } => out.push(Spot::Exit(p)),
                Instruction::Call { callee, .. } if callee == INTRINSIC_EXIT => {
                    out.push(Spot::Exit(entry_idx));
                }
                Instruction::Call { callee, .. } if !is_intrinsic(callee) => {
                    out.push(Spot::At(p, b, i + 1));
                    let q = program
                        .procedures
                        .iter()
                        .position(|x| &x.name == callee)
                        .expect("validated callee");
                    out.push(Spot::Entry(q));
                }
                _ => out.push(Spot::At(p, b, i + 1)),
            }
        }
    }
    out
}

/// First write to `var` at any point reachable from the terminator of the
/// entry-procedure block `block_idx`, walking the interprocedural relation.
fn def_reachable_from_terminator(
    program: &Program,
    block_idx: usize,
    var: &VarId,
) -> Option<Location> {
    let entry_idx = program
        .procedures
        .iter()
        .position(|p| p.name == program.entry_name)
        .expect("entry procedure exists");
    let entry = &program.procedures[entry_idx];
    let last = entry.blocks[block_idx].instructions.len() - 1;
    let start = Spot::At(entry_idx, block_idx, last);

    let mut seen = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(spot) = queue.pop_front() {
        if let Spot::At(p, b, i) = spot {
            let proc = &program.procedures[p];
            let ins = &proc.blocks[b].instructions[i];
            if let Some(dest) = ins.written_var() {
                if program.resolve_var(proc, dest) == *var {
                    return Some(Location::new(&proc.name, &proc.blocks[b].label, i));
                }
            }
        }
        for next in spot_succs(program, entry_idx, spot) {
            if seen.insert(next) {
                queue.push_back(next);
            }
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Taint oracle

/// Expected may-taint facts before every instruction, computed by walking
/// every execution path. Exact only for single-procedure, call-free,
/// loop-free programs, where the path set is finite.
pub fn taint_by_paths(program: &Program) -> BTreeMap<Location, BTreeSet<VarId>> {
    let proc = program.entry_procedure().expect("entry procedure exists");
    let mut states: BTreeMap<Location, BTreeSet<VarId>> = BTreeMap::new();
    for block in &proc.blocks {
        for i in 0..block.instructions.len() {
            states.insert(Location::new(&proc.name, &block.label, i), BTreeSet::new());
        }
    }
    let seed: BTreeSet<VarId> = proc
        .params
        .iter()
        .map(|p| program.resolve_var(proc, p))
        .collect();
    walk_paths(program, proc, 0, seed, &mut states);
    states
}

fn walk_paths(
    program: &Program,
    proc: &Procedure,
    block_idx: usize,
    mut taint: BTreeSet<VarId>,
    states: &mut BTreeMap<Location, BTreeSet<VarId>>,
) {
    let block = &proc.blocks[block_idx];
    for (i, ins) in block.instructions.iter().enumerate() {
        let loc = Location::new(&proc.name, &block.label, i);
        states
            .get_mut(&loc)
            .expect("location prefilled")
            .extend(taint.iter().cloned());
        match ins {
            Instruction::Assign { dest, expr } => {
                let hot = expr
                    .used_vars()
                    .iter()
                    .any(|v| taint.contains(&program.resolve_var(proc, v)));
                let dest_id = program.resolve_var(proc, dest);
                if hot {
                    taint.insert(dest_id);
                } else {
                    taint.remove(&dest_id);
                }
            }
            Instruction::Call { .. } => panic!("taint path oracle requires call-free programs"),
            _ => {}
        }
    }
    let target = |label: &str| {
        proc.blocks
            .iter()
            .position(|x| x.label == label)
            .expect("validated target")
    };
    match block.instructions.last() {
        Some(Instruction::Branch {
            then_label,
            else_label,
            ..
        }) => {
            let t = target(then_label);
            let e = target(else_label);
            walk_paths(program, proc, t, taint.clone(), states);
            if e != t {
                walk_paths(program, proc, e, taint, states);
            }
        }
        Some(Instruction::Jump { label }) => walk_paths(program, proc, target(label), taint, states),
        _ => {}
    }
}

//! Interprocedural may-taint analysis and the hosting set it induces.
//!
//! Taint starts at the configuration sources — the entry procedure's
//! parameters and the results of source intrinsics (`readcfg` by default) —
//! and is propagated over the ICFG as a union fixpoint with one transfer
//! function per edge:
//!
//! - sequential edge from an assignment: the destination is killed, then
//!   re-tainted if any variable the right-hand side uses is tainted (strong
//!   update);
//! - sequential edge across a call: the destination (if any) is killed — its
//!   new value arrives only on the return edge — while caller locals and
//!   globals flow around the callee;
//! - call edge: globals pass through, and each formal parameter becomes
//!   tainted when the corresponding actual is a tainted variable;
//! - return edge: globals pass through, and the call destination becomes
//!   tainted when the callee may return a tainted value (tracked in a
//!   synthetic per-procedure return slot written by each `ret`).
//!
//! The analysis is context-insensitive: states from all call sites of a
//! procedure merge at its entry.
//!
//! The hosting set records the writes that place configuration data: an
//! instruction is recorded when (a) it assigns from a tainted right-hand
//! side (or is a source-intrinsic call with a result, or a call passing a
//! tainted argument to a declared procedure), or (b) it writes anything in a
//! block directly control-dependent on a branch whose condition is tainted.

use std::collections::{BTreeSet, VecDeque};

use crate::graph::BlockGraph;
use crate::icfg::{EdgeKind, Icfg, NodeKind};
use crate::ir::{
    is_intrinsic, Instruction, Location, Operand, Procedure, Program, VarId, INTRINSIC_READCFG,
};

/// Which values count as configuration sources.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaintSourceSpec {
    /// Entry-procedure parameters to taint; `None` taints all of them.
    pub entry_params: Option<BTreeSet<String>>,
    /// Intrinsics whose call results are tainted.
    pub source_intrinsics: BTreeSet<String>,
}

impl Default for TaintSourceSpec {
    fn default() -> Self {
        TaintSourceSpec {
            entry_params: None,
            source_intrinsics: BTreeSet::from([INTRINSIC_READCFG.to_string()]),
        }
    }
}

/// A taint fact: either a variable, or the synthetic "return value of
/// procedure" slot that carries taint from `ret v` to call destinations.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Slot {
    Var(VarId),
    Ret(String),
}

type State = BTreeSet<Slot>;

/// Fixpoint result: may-taint facts before every ICFG node.
#[derive(Debug, Clone)]
pub struct TaintResult {
    before: Vec<State>,
}

impl TaintResult {
    /// Whether `var` may be tainted immediately before the given node.
    pub fn var_tainted_at(&self, node: usize, var: &VarId) -> bool {
        self.before[node].contains(&Slot::Var(var.clone()))
    }

    /// Variables that may be tainted immediately before the instruction,
    /// filtered to those visible there (globals and the procedure's locals).
    pub fn tainted_before(&self, icfg: &Icfg, loc: &Location) -> BTreeSet<VarId> {
        let node = icfg
            .node_of_location(loc)
            .expect("location exists in the program");
        self.visible(node, &loc.procedure)
    }

    /// Variables that may be tainted once the instruction has executed. For
    /// a non-terminator this is the state at the next instruction (for a
    /// call, that includes what the callee returned); a terminator writes
    /// nothing, so its after-state equals its before-state.
    pub fn tainted_after(&self, icfg: &Icfg, program: &Program, loc: &Location) -> BTreeSet<VarId> {
        let proc_idx = icfg.proc_index(&loc.procedure).expect("procedure exists");
        let block_idx = icfg
            .block_index(proc_idx, &loc.block)
            .expect("block exists");
        let proc = &program.procedures[proc_idx];
        let instr = &proc.blocks[block_idx].instructions[loc.index];
        let node = if instr.is_terminator() {
            icfg.instr_node(proc_idx, block_idx, loc.index)
        } else {
            icfg.instr_node(proc_idx, block_idx, loc.index + 1)
        };
        self.visible(node, &loc.procedure)
    }

    fn visible(&self, node: usize, procedure: &str) -> BTreeSet<VarId> {
        self.before[node]
            .iter()
            .filter_map(|slot| match slot {
                Slot::Var(v @ VarId::Global(_)) => Some(v.clone()),
                Slot::Var(v @ VarId::Local { procedure: p, .. }) if p == procedure => {
                    Some(v.clone())
                }
                _ => None,
            })
            .collect()
    }
}

/// Runs the taint fixpoint over the ICFG of a validated program.
pub fn analyze_taint(program: &Program, icfg: &Icfg, spec: &TaintSourceSpec) -> TaintResult {
    let entry_proc = program.entry_procedure().expect("validated program");
    let mut before: Vec<State> = vec![State::new(); icfg.node_count()];

    let mut seed = State::new();
    for param in &entry_proc.params {
        let selected = match &spec.entry_params {
            None => true,
            Some(names) => names.contains(param),
        };
        if selected {
            seed.insert(Slot::Var(VarId::local(&entry_proc.name, param)));
        }
    }
    before[icfg.v_entry()] = seed;

    // Every reachable node is processed at least once: a transfer can
    // generate facts from an empty state (a source-intrinsic call), so
    // waiting for a node's input to grow would miss those. Unreachable
    // nodes are never processed and keep empty states.
    let reachable = icfg.reachable_from(icfg.v_entry());
    let mut queue: VecDeque<usize> = (0..icfg.node_count()).filter(|&n| reachable[n]).collect();
    let mut queued = vec![false; icfg.node_count()];
    for &n in &queue {
        queued[n] = true;
    }

    while let Some(node) = queue.pop_front() {
        queued[node] = false;
        let state = before[node].clone();
        for &(next, kind) in icfg.successors(node) {
            let out = edge_transfer(program, icfg, spec, node, next, kind, &state);
            let target = &mut before[next];
            let mut grew = false;
            for slot in out {
                grew |= target.insert(slot);
            }
            if grew && !queued[next] {
                queued[next] = true;
                queue.push_back(next);
            }
        }
    }
    TaintResult { before }
}

/// State carried along one ICFG edge, given the state before its source.
fn edge_transfer(
    program: &Program,
    icfg: &Icfg,
    spec: &TaintSourceSpec,
    from: usize,
    to: usize,
    kind: EdgeKind,
    state: &State,
) -> State {
    match kind {
        EdgeKind::Seq => match icfg.node(from) {
            NodeKind::Entry { .. } => state.clone(),
            NodeKind::Exit { .. } => unreachable!("exit anchors have only return edges"),
            NodeKind::Instr { location } => {
                let (proc, instr) = instr_at(program, location);
                sequential_transfer(program, spec, proc, instr, state)
            }
        },
        EdgeKind::Call => {
            let NodeKind::Instr { location } = icfg.node(from) else {
                unreachable!("call edges start at call instructions");
            };
            let (caller, instr) = instr_at(program, location);
            let Instruction::Call { callee, args, .. } = instr else {
                unreachable!("call edges start at call instructions");
            };
            let target = program.procedure(callee).expect("validated callee");
            let mut out = globals_of(state);
            for (arg, formal) in args.iter().zip(&target.params) {
                if let Some(name) = arg.as_var() {
                    if state.contains(&Slot::Var(program.resolve_var(caller, name))) {
                        out.insert(Slot::Var(VarId::local(&target.name, formal)));
                    }
                }
            }
            out
        }
        EdgeKind::Ret => {
            let NodeKind::Exit { procedure: callee } = icfg.node(from) else {
                unreachable!("return edges start at exit anchors");
            };
            let NodeKind::Instr { location } = icfg.node(to) else {
                unreachable!("return edges land on the instruction after the call");
            };
            // The call is the instruction directly before the return site.
            let call_loc = Location::new(&location.procedure, &location.block, location.index - 1);
            let (caller, call) = instr_at(program, &call_loc);
            let Instruction::Call { dest, .. } = call else {
                unreachable!("return sites follow call instructions");
            };
            let mut out = globals_of(state);
            if let Some(dest) = dest {
                if state.contains(&Slot::Ret(callee.clone())) {
                    out.insert(Slot::Var(program.resolve_var(caller, dest)));
                }
            }
            out
        }
    }
}

fn sequential_transfer(
    program: &Program,
    spec: &TaintSourceSpec,
    proc: &Procedure,
    instr: &Instruction,
    state: &State,
) -> State {
    match instr {
        Instruction::Assign { dest, expr } => {
            let dest = Slot::Var(program.resolve_var(proc, dest));
            let mut out = state.clone();
            out.remove(&dest);
            let tainted = expr
                .used_vars()
                .iter()
                .any(|v| state.contains(&Slot::Var(program.resolve_var(proc, v))));
            if tainted {
                out.insert(dest);
            }
            out
        }
        Instruction::Call { callee, args, dest } => {
            let mut out = state.clone();
            if let Some(dest) = dest {
                let dest = Slot::Var(program.resolve_var(proc, dest));
                out.remove(&dest);
                if spec.source_intrinsics.contains(callee) {
                    out.insert(dest);
                } else if !is_intrinsic(callee) {
                    // Result arrives via the return edge; the kill stands.
                } else {
                    // Non-source intrinsic results are clean data.
                    let _ = args;
                }
            }
            out
        }
        Instruction::Return { value } => {
            let mut out = state.clone();
            let slot = Slot::Ret(proc.name.clone());
            out.remove(&slot);
            if let Some(v) = value {
                if state.contains(&Slot::Var(program.resolve_var(proc, v))) {
                    out.insert(slot);
                }
            }
            out
        }
        Instruction::Branch { .. } | Instruction::Jump { .. } => state.clone(),
    }
}

fn instr_at<'p>(program: &'p Program, loc: &Location) -> (&'p Procedure, &'p Instruction) {
    let proc = program.procedure(&loc.procedure).expect("procedure exists");
    let block = proc
        .blocks
        .iter()
        .find(|b| b.label == loc.block)
        .expect("block exists");
    (proc, &block.instructions[loc.index])
}

fn globals_of(state: &State) -> State {
    state
        .iter()
        .filter(|slot| matches!(slot, Slot::Var(VarId::Global(_))))
        .cloned()
        .collect()
}

/// The configuration-hosting writes: where configuration data lands.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HostingSet {
    /// Recorded writing instructions.
    pub assignments: BTreeSet<Location>,
    /// Blocks containing a recorded instruction, as (procedure index, block
    /// index) pairs.
    pub blocks: BTreeSet<(usize, usize)>,
    /// Variables written by recorded instructions (the candidate
    /// configuration set).
    pub vars: BTreeSet<VarId>,
}

impl HostingSet {
    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }
}

/// Derives the hosting set. `graphs` must hold one [`BlockGraph`] per
/// procedure, in procedure order.
pub fn hosting_set(
    program: &Program,
    icfg: &Icfg,
    taint: &TaintResult,
    graphs: &[BlockGraph],
    spec: &TaintSourceSpec,
) -> HostingSet {
    let mut assignments: BTreeSet<Location> = BTreeSet::new();
    let mut blocks: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut vars: BTreeSet<VarId> = BTreeSet::new();

    // Tainted branch conditions, per procedure: block indices whose
    // terminating branch tests a tainted variable.
    let mut tainted_branches: Vec<BTreeSet<usize>> = Vec::new();
    for (p, proc) in program.procedures.iter().enumerate() {
        let mut set = BTreeSet::new();
        for (b, block) in proc.blocks.iter().enumerate() {
            if let Some(Instruction::Branch { cond, .. }) = block.instructions.last() {
                let node = icfg.instr_node(p, b, block.instructions.len() - 1);
                if taint.var_tainted_at(node, &program.resolve_var(proc, cond)) {
                    set.insert(b);
                }
            }
        }
        tainted_branches.push(set);
    }

    for (p, proc) in program.procedures.iter().enumerate() {
        let graph = &graphs[p];
        let control_deps = graph.control_dependence(&graph.post_dominators());
        for (b, block) in proc.blocks.iter().enumerate() {
            let under_tainted_branch = control_deps[b]
                .iter()
                .any(|a| tainted_branches[p].contains(a));
            for (i, instr) in block.instructions.iter().enumerate() {
                let Some(written) = instr.written_var() else {
                    continue;
                };
                let node = icfg.instr_node(p, b, i);
                let direct = match instr {
                    Instruction::Assign { expr, .. } => expr
                        .used_vars()
                        .iter()
                        .any(|v| taint.var_tainted_at(node, &program.resolve_var(proc, v))),
                    Instruction::Call { callee, args, .. } => {
                        if spec.source_intrinsics.contains(callee) {
                            // Reading the source is itself a configuration
                            // write.
                            true
                        } else if is_intrinsic(callee) {
                            false
                        } else {
                            args.iter().filter_map(Operand::as_var).any(|v| {
                                taint.var_tainted_at(node, &program.resolve_var(proc, v))
                            })
                        }
                    }
                    _ => false,
                };
                if direct || under_tainted_branch {
                    assignments.insert(Location::new(&proc.name, &block.label, i));
                    blocks.insert((p, b));
                    vars.insert(program.resolve_var(proc, written));
                }
            }
        }
    }

    HostingSet {
        assignments,
        blocks,
        vars,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;

    const WC_MINI: &str = include_str!("../tests/fixtures/wc_mini.mir");

    struct Setup {
        program: Program,
        icfg: Icfg,
        taint: TaintResult,
        spec: TaintSourceSpec,
    }

    fn setup(src: &str, spec: TaintSourceSpec) -> Setup {
        let program = parse(src).unwrap();
        let icfg = Icfg::build(&program);
        let taint = analyze_taint(&program, &icfg, &spec);
        Setup {
            program,
            icfg,
            taint,
            spec,
        }
    }

    fn hosting(s: &Setup) -> HostingSet {
        let graphs: Vec<BlockGraph> = s.program.procedures.iter().map(BlockGraph::build).collect();
        hosting_set(&s.program, &s.icfg, &s.taint, &graphs, &s.spec)
    }

    fn vars(names: &[&str]) -> BTreeSet<VarId> {
        names
            .iter()
            .map(|n| match n.split_once("::") {
                Some((p, v)) => VarId::local(p, v),
                None => VarId::global(*n),
            })
            .collect()
    }

    #[test]
    fn taint_flows_through_assignments() {
        let s = setup(
            "\
proc main(p) {
bb0:
  x = p
  y = add(x, 1)
  call print(y)
  ret
}
",
            TaintSourceSpec::default(),
        );
        let at_print = Location::new("main", "bb0", 2);
        assert_eq!(
            s.taint.tainted_before(&s.icfg, &at_print),
            vars(&["main::p", "main::x", "main::y"])
        );
    }

    #[test]
    fn constant_reassignment_kills_taint() {
        let s = setup(
            "\
proc main(p) {
bb0:
  x = p
  x = 0
  call print(x)
  ret
}
",
            TaintSourceSpec::default(),
        );
        let at_print = Location::new("main", "bb0", 2);
        assert_eq!(
            s.taint.tainted_before(&s.icfg, &at_print),
            vars(&["main::p"])
        );
    }

    #[test]
    fn taint_reaches_globals_through_calls() {
        let s = setup(
            "\
global g

proc main(p) {
bb0:
  call setg(p)
  h = g
  call print(h)
  ret
}

proc setg(v) {
bb0:
  g = v
  ret
}
",
            TaintSourceSpec::default(),
        );
        let at_print = Location::new("main", "bb0", 2);
        assert_eq!(
            s.taint.tainted_before(&s.icfg, &at_print),
            vars(&["g", "main::h", "main::p"])
        );
    }

    #[test]
    fn return_values_carry_taint_and_clean_returns_do_not() {
        let s = setup(
            "\
proc main(p) {
bb0:
  a = call id(p)
  b = call zero()
  call print(a)
  ret
}

proc id(v) {
bb0:
  ret v
}

proc zero() {
bb0:
  z = 0
  ret z
}
",
            TaintSourceSpec::default(),
        );
        let at_print = Location::new("main", "bb0", 2);
        assert_eq!(
            s.taint.tainted_before(&s.icfg, &at_print),
            vars(&["main::a", "main::p"])
        );
    }

    #[test]
    fn caller_locals_survive_calls_and_callee_locals_stay_invisible() {
        let s = setup(
            "\
proc main(p) {
bb0:
  x = p
  call id(x)
  y = x
  ret
}

proc id(v) {
bb0:
  ret v
}
",
            TaintSourceSpec::default(),
        );
        let at_y = Location::new("main", "bb0", 2);
        assert_eq!(
            s.taint.tainted_before(&s.icfg, &at_y),
            vars(&["main::p", "main::x"])
        );
        let after_y = s.taint.tainted_after(&s.icfg, &s.program, &at_y);
        assert_eq!(after_y, vars(&["main::p", "main::x", "main::y"]));
    }

    #[test]
    fn source_intrinsic_results_are_tainted_and_sink_results_are_not() {
        let s = setup(
            "\
proc main() {
bb0:
  line = call readcfg()
  key = index(line, 0)
  shown = call print(key)
  used = add(shown, 1)
  ret
}
",
            TaintSourceSpec::default(),
        );
        let at_ret = Location::new("main", "bb0", 4);
        assert_eq!(
            s.taint.tainted_before(&s.icfg, &at_ret),
            vars(&["main::key", "main::line"])
        );
    }

    #[test]
    fn empty_source_spec_taints_nothing() {
        let spec = TaintSourceSpec {
            entry_params: Some(BTreeSet::new()),
            source_intrinsics: BTreeSet::new(),
        };
        let s = setup(WC_MINI, spec);
        let at_done = Location::new("main", "bb_done", 0);
        assert!(s.taint.tainted_before(&s.icfg, &at_done).is_empty());
        assert!(hosting(&s).is_empty());
    }

    #[test]
    fn param_selection_taints_only_named_parameters() {
        let spec = TaintSourceSpec {
            entry_params: Some(BTreeSet::from(["b".to_string()])),
            source_intrinsics: BTreeSet::new(),
        };
        let s = setup(
            "\
proc main(a, b) {
bb0:
  x = a
  y = b
  ret
}
",
            spec,
        );
        let at_ret = Location::new("main", "bb0", 2);
        assert_eq!(
            s.taint.tainted_before(&s.icfg, &at_ret),
            vars(&["main::b", "main::y"])
        );
    }

    #[test]
    fn a_non_default_intrinsic_can_be_declared_a_source() {
        let spec = TaintSourceSpec {
            entry_params: Some(BTreeSet::new()),
            source_intrinsics: BTreeSet::from(["print".to_string()]),
        };
        let s = setup(
            "\
proc main() {
bb0:
  x = call print(1)
  ret
}
",
            spec,
        );
        let at_ret = Location::new("main", "bb0", 1);
        assert_eq!(s.taint.tainted_before(&s.icfg, &at_ret), vars(&["main::x"]));
    }

    #[test]
    fn wc_mini_taint_at_the_report_block() {
        let s = setup(WC_MINI, TaintSourceSpec::default());
        let at_done = Location::new("main", "bb_done", 0);
        assert_eq!(
            s.taint.tainted_before(&s.icfg, &at_done),
            vars(&[
                "main::a",
                "main::argc",
                "main::argv",
                "main::more",
                "main::tc",
                "main::tl"
            ]),
            "counters are assigned constants and never become tainted"
        );
    }

    #[test]
    fn wc_mini_hosting_set_is_the_parse_loop() {
        let s = setup(WC_MINI, TaintSourceSpec::default());
        let hosting = hosting(&s);
        assert_eq!(
            hosting.vars,
            vars(&[
                "count_chars",
                "count_lines",
                "main::a",
                "main::argc",
                "main::more",
                "main::tc",
                "main::tl"
            ])
        );
        // The two counters land in the hosting set even though their
        // right-hand sides are constants: their blocks run under tainted
        // branches.
        assert!(hosting.vars.contains(&VarId::global("count_chars")));
        assert!(hosting.vars.contains(&VarId::global("count_lines")));
        let proc = s.program.entry_procedure().unwrap();
        let labels: BTreeSet<&str> = hosting
            .blocks
            .iter()
            .map(|&(_, b)| proc.blocks[b].label.as_str())
            .collect();
        assert_eq!(
            labels,
            BTreeSet::from(["bb_parse", "bb_arg", "bb_setchars", "bb_checkline", "bb_setline"])
        );
        assert_eq!(hosting.assignments.len(), 7);
    }

    #[test]
    fn tainted_argument_to_declared_procedure_is_a_hosting_write() {
        let s = setup(
            "\
proc main(p) {
bb0:
  n = call widen(p)
  call print(n)
  ret
}

proc widen(v) {
bb0:
  r = add(v, 0)
  ret r
}
",
            TaintSourceSpec::default(),
        );
        let hosting = hosting(&s);
        assert!(hosting
            .assignments
            .contains(&Location::new("main", "bb0", 0)));
        assert!(hosting.vars.contains(&VarId::local("main", "n")));
        // The callee's own computation on the tainted formal is recorded
        // too.
        assert!(hosting
            .assignments
            .contains(&Location::new("widen", "bb0", 0)));
    }

    #[test]
    fn sink_call_result_is_not_a_direct_hosting_write() {
        let s = setup(
            "\
proc main(p) {
bb0:
  x = call print(p)
  ret
}
",
            TaintSourceSpec::default(),
        );
        let hosting = hosting(&s);
        assert!(hosting.is_empty());
    }
}

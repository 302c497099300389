//! Boundary identification: locating the single block that separates
//! configuration-parsing logic from the main computation.
//!
//! The pipeline generates candidate blocks from the configuration-hosting
//! set, rewrites candidates trapped inside loops to the loop exits, relocates
//! candidates in callees to the entry-procedure call sites that reach them,
//! and then narrows the pool with structural filters:
//!
//! 1. a candidate must be an articulation point of its procedure's block
//!    graph (removing it must split the graph), and reachable from program
//!    start;
//! 2. `follows_loop`: a candidate must come after some cycle, because the
//!    option-scanning idiom loops over the input before the work begins;
//! 3. `post_dominates_all`: every path from each hosting write to program
//!    end must pass through the candidate;
//! 4. `definition_free`: no hosted variable may be written anywhere
//!    reachable from the candidate's terminator onward.
//!
//! Of the survivors, the one closest to the procedure entry wins. Every
//! candidate that falls out of the pool keeps a record of which step
//! eliminated it, so reports can show the full decision trail.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::graph::{self, BlockGraph, PostDominators};
use crate::icfg::{call_graph, Icfg};
use crate::ir::{defs_of, Instruction, Location, Program, VarId, INTRINSIC_EXIT};
use crate::taint::{analyze_taint, hosting_set, HostingSet, TaintResult, TaintSourceSpec};

/// A block named by procedure and label, the externally visible way to
/// point at a block.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct BlockRef {
    pub procedure: String,
    pub block: String,
}

impl BlockRef {
    pub fn new(procedure: impl Into<String>, block: impl Into<String>) -> BlockRef {
        BlockRef {
            procedure: procedure.into(),
            block: block.into(),
        }
    }
}

impl fmt::Display for BlockRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.procedure, self.block)
    }
}

/// How a block entered the candidate pool. A block can collect several
/// origins (for example, a loop exit shared by multiple hosting blocks).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum CandidateOrigin {
    /// The block itself holds a configuration-hosting write.
    HostingBlock,
    /// The block is an exit of a cycle that contains a hosting block.
    LoopExit { hosting_block: BlockRef },
    /// The block holds a call through which a candidate in another
    /// procedure was relocated into the entry procedure.
    Proxy {
        callee_block: BlockRef,
        via_call: Location,
    },
}

impl fmt::Display for CandidateOrigin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CandidateOrigin::HostingBlock => write!(f, "hosting-block"),
            CandidateOrigin::LoopExit { hosting_block } => {
                write!(f, "loop-exit-of {hosting_block}")
            }
            CandidateOrigin::Proxy {
                callee_block,
                via_call,
            } => write!(f, "proxy-for {callee_block} via {via_call}"),
        }
    }
}

/// The pipeline step that removed a candidate from the pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EliminationReason {
    /// Removing the block does not disconnect its procedure's block graph.
    NotArticulation,
    /// The block can never execute from program start.
    Unreachable,
    /// No cycle precedes the block.
    FailsC1,
    /// Some hosting write can reach program end without passing the block.
    FailsC2,
    /// A hosted variable is written somewhere after the block.
    FailsC3,
    /// Survived every filter but another survivor sits closer to entry.
    NotClosest,
}

impl EliminationReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            EliminationReason::NotArticulation => "not-articulation",
            EliminationReason::Unreachable => "unreachable",
            EliminationReason::FailsC1 => "fails-C1",
            EliminationReason::FailsC2 => "fails-C2",
            EliminationReason::FailsC3 => "fails-C3",
            EliminationReason::NotClosest => "not-closest",
        }
    }
}

impl fmt::Display for EliminationReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Overall outcome of the analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    SingleElementFound,
    NoneFound,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::SingleElementFound => "single-element-found",
            Verdict::NoneFound => "none-found",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One candidate's full story: where it is, why it was considered, and
/// which step (if any) removed it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub block: BlockRef,
    pub origins: Vec<CandidateOrigin>,
    pub eliminated_by: Option<EliminationReason>,
}

/// The complete analysis result.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryReport {
    pub verdict: Verdict,
    pub boundary: Option<BlockRef>,
    /// Variables that receive configuration data (qualified names).
    pub c_host: BTreeSet<VarId>,
    /// All candidates ever considered, in procedure/block declaration
    /// order, each with its origins and fate.
    pub candidates: Vec<Candidate>,
    pub warnings: Vec<String>,
}

/// Everything derived from one program under one taint specification:
/// per-procedure block graphs, the interprocedural graph, taint states,
/// and the hosting set. Built once, consumed by [`identify_boundary`].
pub struct Analysis<'p> {
    pub program: &'p Program,
    pub spec: TaintSourceSpec,
    /// One block graph per procedure, in declaration order.
    pub graphs: Vec<BlockGraph>,
    pub icfg: Icfg,
    pub taint: TaintResult,
    pub hosting: HostingSet,
}

impl<'p> Analysis<'p> {
    /// Runs the underlying analyses. The program must have passed
    /// [`crate::ir::validate`].
    pub fn new(program: &'p Program, spec: TaintSourceSpec) -> Analysis<'p> {
        let graphs: Vec<BlockGraph> = program.procedures.iter().map(BlockGraph::build).collect();
        let icfg = Icfg::build(program);
        let taint = analyze_taint(program, &icfg, &spec);
        let hosting = hosting_set(program, &icfg, &taint, &graphs, &spec);
        Analysis {
            program,
            spec,
            graphs,
            icfg,
            taint,
            hosting,
        }
    }

    /// Index of the entry procedure.
    pub fn entry_index(&self) -> usize {
        self.program
            .procedures
            .iter()
            .position(|p| p.name == self.program.entry_name)
            .expect("validated program has an entry procedure")
    }
}

/// Whether some cycle other than the block's own component can reach
/// `block`. Computed over the condensation: a block "follows a loop" when
/// any cyclic strongly connected component precedes its component.
pub fn follows_loop(graph: &BlockGraph, block: usize) -> bool {
    follows_loop_map(graph)[block]
}

/// [`follows_loop`] for every node at once.
pub fn follows_loop_map(graph: &BlockGraph) -> Vec<bool> {
    let succs = graph.successor_lists();
    let comps = graph::strongly_connected_components(succs);
    let mut comp_of = vec![0usize; graph.node_count()];
    for (ci, comp) in comps.iter().enumerate() {
        for &v in comp {
            comp_of[v] = ci;
        }
    }
    // Components arrive in topological order, so one forward pass settles
    // "is any cyclic component strictly before mine".
    let mut follows = vec![false; comps.len()];
    for (ci, comp) in comps.iter().enumerate() {
        let carries = follows[ci] || graph::is_cyclic_component(succs, comp);
        for &v in comp {
            for &w in &succs[v] {
                if comp_of[w] != ci {
                    follows[comp_of[w]] = follows[comp_of[w]] || carries;
                }
            }
        }
    }
    (0..graph.node_count()).map(|v| follows[comp_of[v]]).collect()
}

/// Whether `candidate` reaches the virtual exit and post-dominates every
/// block in every target set. Each target set stands for one hosting
/// write: a singleton for writes in the entry procedure, the relevant
/// call-site blocks for writes in callees. An empty set holds vacuously
/// (the write's procedure is never invoked from the entry procedure).
pub fn post_dominates_all(
    pdom: &PostDominators,
    candidate: usize,
    targets: &[BTreeSet<usize>],
) -> bool {
    if !pdom.reaches_exit(candidate) {
        return false;
    }
    targets
        .iter()
        .all(|set| set.iter().all(|&b| pdom.post_dominates(candidate, b)))
}

/// Whether no definition of `var` is reachable from the terminator of the
/// named block onward (the terminator's own node included).
pub fn definition_free(
    program: &Program,
    icfg: &Icfg,
    procedure: &str,
    block: &str,
    var: &VarId,
) -> bool {
    let p = icfg.proc_index(procedure).expect("known procedure");
    let b = icfg.block_index(p, block).expect("known block");
    let last = program.procedures[p].blocks[b].instructions.len() - 1;
    let reached = icfg.reachable_from(icfg.instr_node(p, b, last));
    let defs = defs_of(program, var).expect("variable appears in the program");
    !defs
        .iter()
        .filter_map(|loc| icfg.node_of_location(loc))
        .any(|node| reached[node])
}

/// Internal candidate bookkeeping, keyed by (procedure index, block index).
#[derive(Debug, Default, Clone)]
struct CandidateState {
    origins: BTreeSet<CandidateOrigin>,
    eliminated_by: Option<EliminationReason>,
}

fn block_ref(program: &Program, p: usize, b: usize) -> BlockRef {
    let proc = &program.procedures[p];
    BlockRef::new(proc.name.clone(), proc.blocks[b].label.clone())
}

/// Among survivors, the entry-closest one; ties break toward the earliest
/// declared block. `distances` are BFS distances in the entry block graph.
fn choose_closest(alive: &[(usize, usize)], distances: &[Option<usize>]) -> (usize, usize) {
    *alive
        .iter()
        .min_by_key(|&&(_, b)| (distances[b].unwrap_or(usize::MAX), b))
        .expect("at least one survivor")
}

fn multi_survivor_warning(refs: &[BlockRef]) -> String {
    let list: Vec<String> = refs.iter().map(BlockRef::to_string).collect();
    format!(
        "multiple candidates satisfy all filters: {}; selecting the closest to the entry block",
        list.join(", ")
    )
}

/// Runs the full candidate pipeline and produces the report.
pub fn identify_boundary(analysis: &Analysis) -> BoundaryReport {
    let program = analysis.program;
    let icfg = &analysis.icfg;
    let entry = analysis.entry_index();
    let entry_graph = &analysis.graphs[entry];
    let c_host = analysis.hosting.vars.clone();

    // Nothing hosts configuration data: there is no boundary to find.
    if analysis.hosting.is_empty() {
        return BoundaryReport {
            verdict: Verdict::NoneFound,
            boundary: None,
            c_host,
            candidates: Vec::new(),
            warnings: Vec::new(),
        };
    }

    let mut cands: BTreeMap<(usize, usize), CandidateState> = BTreeMap::new();

    // Step 1: seed from hosting blocks. A hosting block caught inside a
    // cycle cannot separate anything (the cycle strands it), so the
    // cycle's exit blocks stand in for it.
    let cyclic_sccs: Vec<Vec<Vec<usize>>> =
        analysis.graphs.iter().map(BlockGraph::cyclic_sccs).collect();
    for &(p, b) in &analysis.hosting.blocks {
        let g = &analysis.graphs[p];
        if let Some(scc) = cyclic_sccs[p].iter().find(|s| s.contains(&b)) {
            let members: BTreeSet<usize> = scc.iter().copied().collect();
            let mut exits: BTreeSet<usize> = BTreeSet::new();
            for &m in scc {
                for &s in g.successors(m) {
                    if !members.contains(&s) && s != g.virtual_exit {
                        exits.insert(s);
                    }
                }
            }
            for e in exits {
                cands.entry((p, e)).or_default().origins.insert(
                    CandidateOrigin::LoopExit {
                        hosting_block: block_ref(program, p, b),
                    },
                );
            }
        } else {
            cands
                .entry((p, b))
                .or_default()
                .origins
                .insert(CandidateOrigin::HostingBlock);
        }
    }

    // Step 2: a boundary must split its own procedure in two.
    let mut proc_aps: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for (&(p, b), st) in cands.iter_mut() {
        let aps = proc_aps
            .entry(p)
            .or_insert_with(|| analysis.graphs[p].articulation_points());
        if !aps.contains(&b) {
            st.eliminated_by = Some(EliminationReason::NotArticulation);
        }
    }

    // Step 3: drop candidates no execution from program start can reach.
    let reachable = icfg.reachable_from(icfg.v_entry());
    for (&(p, b), st) in cands.iter_mut() {
        if st.eliminated_by.is_none() && !reachable[icfg.first_instr_of_block(p, b)] {
            st.eliminated_by = Some(EliminationReason::Unreachable);
        }
    }

    // Step 4: candidates in callees relocate to the entry-procedure call
    // sites whose callees (transitively) reach their procedure. The
    // original vanishes; the call blocks inherit it as proxy origins.
    let cg = call_graph(program);
    let entry_proc = &program.procedures[entry];
    let mut call_sites: Vec<(usize, usize, usize)> = Vec::new();
    for (bi, block) in entry_proc.blocks.iter().enumerate() {
        for (ii, instr) in block.instructions.iter().enumerate() {
            if let Instruction::Call { callee, .. } = instr {
                if let Some(ci) = icfg.proc_index(callee) {
                    call_sites.push((bi, ii, ci));
                }
            }
        }
    }
    let mut reach_memo: BTreeMap<usize, Vec<bool>> = BTreeMap::new();
    let foreign_alive: Vec<(usize, usize)> = cands
        .iter()
        .filter(|(&(p, _), st)| st.eliminated_by.is_none() && p != entry)
        .map(|(&k, _)| k)
        .collect();
    for (q, b) in foreign_alive {
        let mut proxies: Vec<(usize, CandidateOrigin)> = Vec::new();
        for &(cb, ci, callee) in &call_sites {
            let reach = reach_memo
                .entry(callee)
                .or_insert_with(|| graph::reachable_from(&cg, [callee]));
            if reach[q] {
                proxies.push((
                    cb,
                    CandidateOrigin::Proxy {
                        callee_block: block_ref(program, q, b),
                        via_call: Location::new(
                            entry_proc.name.clone(),
                            entry_proc.blocks[cb].label.clone(),
                            ci,
                        ),
                    },
                ));
            }
        }
        if proxies.is_empty() {
            // Reachable in the interprocedural graph, yet no entry call
            // site leads to its procedure: only call/return interleavings
            // that no real execution takes connect it, so treat it as
            // unreachable.
            cands.get_mut(&(q, b)).expect("candidate exists").eliminated_by =
                Some(EliminationReason::Unreachable);
        } else {
            cands.remove(&(q, b));
            for (cb, origin) in proxies {
                let st = cands.entry((entry, cb)).or_default();
                st.origins.insert(origin);
                // A proxy at a call block no execution reaches is as dead
                // as the unreachable candidates of step 3; a previously
                // eliminated call block stays eliminated.
                if st.eliminated_by.is_none() && !reachable[icfg.first_instr_of_block(entry, cb)] {
                    st.eliminated_by = Some(EliminationReason::Unreachable);
                }
            }
        }
    }

    // Step 5: re-check articulation in the entry procedure; this only
    // affects freshly created proxy candidates.
    let entry_aps = entry_graph.articulation_points();
    for (&(p, b), st) in cands.iter_mut() {
        if st.eliminated_by.is_none() {
            debug_assert_eq!(p, entry, "all survivors sit in the entry procedure");
            if !entry_aps.contains(&b) {
                st.eliminated_by = Some(EliminationReason::NotArticulation);
            }
        }
    }

    // Filters C1-C3, each stamping the first one a candidate fails.
    let follows = follows_loop_map(entry_graph);
    let pdom = entry_graph.post_dominators();

    // One post-dominance target set per hosting write: its own block when
    // it lives in the entry procedure, otherwise every call-site block
    // whose callee chain reaches its procedure.
    let mut proxy_blocks: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for &(cb, _, callee) in &call_sites {
        let reach = reach_memo
            .entry(callee)
            .or_insert_with(|| graph::reachable_from(&cg, [callee]));
        for (q, ok) in reach.iter().enumerate() {
            if *ok {
                proxy_blocks.entry(q).or_default().insert(cb);
            }
        }
    }
    let targets: Vec<BTreeSet<usize>> = analysis
        .hosting
        .assignments
        .iter()
        .map(|loc| {
            let p = icfg.proc_index(&loc.procedure).expect("known procedure");
            let b = icfg.block_index(p, &loc.block).expect("known block");
            if p == entry {
                BTreeSet::from([b])
            } else {
                proxy_blocks.get(&p).cloned().unwrap_or_default()
            }
        })
        .collect();

    // Every write to a hosted variable, as an interprocedural node, for
    // the definition-freedom check.
    let mut host_def_nodes: Vec<usize> = Vec::new();
    for var in &c_host {
        let defs = defs_of(program, var).expect("hosted variable has definitions");
        host_def_nodes.extend(defs.iter().filter_map(|loc| icfg.node_of_location(loc)));
    }

    for (&(p, b), st) in cands.iter_mut() {
        if st.eliminated_by.is_some() {
            continue;
        }
        if !follows[b] {
            st.eliminated_by = Some(EliminationReason::FailsC1);
            continue;
        }
        if !post_dominates_all(&pdom, b, &targets) {
            st.eliminated_by = Some(EliminationReason::FailsC2);
            continue;
        }
        let last = program.procedures[p].blocks[b].instructions.len() - 1;
        let reached = icfg.reachable_from(icfg.instr_node(p, b, last));
        if host_def_nodes.iter().any(|&n| reached[n]) {
            st.eliminated_by = Some(EliminationReason::FailsC3);
        }
    }

    // Closest survivor wins; the rest are recorded, not discarded.
    let mut warnings: Vec<String> = Vec::new();
    for b in pdom.nodes_not_reaching_exit() {
        if b == entry_graph.virtual_exit {
            continue;
        }
        let is_exit_call = matches!(
            entry_proc.blocks[b].instructions.last(),
            Some(Instruction::Call { callee, .. }) if callee == INTRINSIC_EXIT
        );
        if !is_exit_call {
            warnings.push(format!(
                "block {} cannot reach the virtual exit; post-dominance requirements hold vacuously for it",
                block_ref(program, entry, b)
            ));
        }
    }

    let alive: Vec<(usize, usize)> = cands
        .iter()
        .filter(|(_, st)| st.eliminated_by.is_none())
        .map(|(&k, _)| k)
        .collect();
    let boundary = if alive.is_empty() {
        None
    } else {
        if alive.len() > 1 {
            let refs: Vec<BlockRef> = alive
                .iter()
                .map(|&(p, b)| block_ref(program, p, b))
                .collect();
            warnings.push(multi_survivor_warning(&refs));
        }
        let distances = entry_graph.distances_from_entry();
        let chosen = choose_closest(&alive, &distances);
        for key in alive {
            if key != chosen {
                cands.get_mut(&key).expect("candidate exists").eliminated_by =
                    Some(EliminationReason::NotClosest);
            }
        }
        Some(block_ref(program, chosen.0, chosen.1))
    };

    let candidates: Vec<Candidate> = cands
        .into_iter()
        .map(|((p, b), st)| Candidate {
            block: block_ref(program, p, b),
            origins: st.origins.into_iter().collect(),
            eliminated_by: st.eliminated_by,
        })
        .collect();

    BoundaryReport {
        verdict: if boundary.is_some() {
            Verdict::SingleElementFound
        } else {
            Verdict::NoneFound
        },
        boundary,
        c_host,
        candidates,
        warnings,
    }
}

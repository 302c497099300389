//! Per-procedure control-flow graphs and the graph algorithms the boundary
//! pipeline needs: strongly connected components, articulation points,
//! post-dominators, control dependence, reachability, and BFS distances.
//!
//! All traversals are iterative (explicit work stacks) so deeply nested or
//! very long programs cannot overflow the call stack.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use crate::ir::{Instruction, Procedure, INTRINSIC_EXIT};

/// Control-flow graph of one procedure.
///
/// Nodes `0..labels.len()` are the procedure's blocks in declaration order
/// (node 0 is the entry block); node `labels.len()` is the virtual exit,
/// which every `ret` jumps to. A block terminated by `call exit(..)` is a
/// dead end: the process stops there, so it gets no edge at all — in
/// particular none to the virtual exit, which represents normal completion.
#[derive(Debug, Clone)]
pub struct BlockGraph {
    pub proc_name: String,
    pub labels: Vec<String>,
    pub entry: usize,
    pub virtual_exit: usize,
    succs: Vec<Vec<usize>>,
    preds: Vec<Vec<usize>>,
    index_of: BTreeMap<String, usize>,
}

impl BlockGraph {
    /// Builds the graph for a procedure of a validated program.
    pub fn build(proc: &Procedure) -> BlockGraph {
        let n = proc.blocks.len();
        let virtual_exit = n;
        let index_of: BTreeMap<String, usize> = proc
            .blocks
            .iter()
            .enumerate()
            .map(|(i, b)| (b.label.clone(), i))
            .collect();
        let mut succs = vec![Vec::new(); n + 1];
        for (i, block) in proc.blocks.iter().enumerate() {
            let mut targets: Vec<usize> = Vec::new();
            match block.instructions.last() {
                Some(Instruction::Branch {
                    then_label,
                    else_label,
                    ..
                }) => {
                    targets.push(index_of[then_label]);
                    targets.push(index_of[else_label]);
                }
                Some(Instruction::Jump { label }) => targets.push(index_of[label]),
                Some(Instruction::Return { .. }) => targets.push(virtual_exit),
                Some(Instruction::Call { callee, .. }) if callee == INTRINSIC_EXIT => {}
                _ => unreachable!("validated blocks end in a terminator"),
            }
            targets.dedup();
            succs[i] = targets;
        }
        let mut preds = vec![Vec::new(); n + 1];
        for (from, ts) in succs.iter().enumerate() {
            for &to in ts {
                preds[to].push(from);
            }
        }
        BlockGraph {
            proc_name: proc.name.clone(),
            labels: proc.blocks.iter().map(|b| b.label.clone()).collect(),
            entry: 0,
            virtual_exit,
            succs,
            preds,
            index_of,
        }
    }

    /// Total node count including the virtual exit.
    pub fn node_count(&self) -> usize {
        self.labels.len() + 1
    }

    pub fn successors(&self, node: usize) -> &[usize] {
        &self.succs[node]
    }

    pub fn predecessors(&self, node: usize) -> &[usize] {
        &self.preds[node]
    }

    pub fn block_index(&self, label: &str) -> Option<usize> {
        self.index_of.get(label).copied()
    }

    /// Node name for display: the block label, or `<exit>` for the virtual
    /// exit.
    pub fn node_name(&self, node: usize) -> &str {
        if node == self.virtual_exit {
            "<exit>"
        } else {
            &self.labels[node]
        }
    }

    pub fn successor_lists(&self) -> &[Vec<usize>] {
        &self.succs
    }

    /// Strongly connected components that contain a cycle (more than one
    /// node, or a single node with a self-edge), in topological order of the
    /// condensation. The virtual exit has no out-edges and never appears.
    pub fn cyclic_sccs(&self) -> Vec<Vec<usize>> {
        strongly_connected_components(&self.succs)
            .into_iter()
            .filter(|c| is_cyclic_component(&self.succs, c))
            .collect()
    }

    /// The undirected view used for articulation points: edge directions
    /// dropped, duplicates and self-loops removed.
    fn undirected_adjacency(&self) -> Vec<Vec<usize>> {
        let mut sets: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); self.node_count()];
        for (from, ts) in self.succs.iter().enumerate() {
            for &to in ts {
                if from != to {
                    sets[from].insert(to);
                    sets[to].insert(from);
                }
            }
        }
        sets.into_iter().map(|s| s.into_iter().collect()).collect()
    }

    /// Articulation points of the undirected view: nodes whose removal
    /// increases the number of connected components.
    pub fn articulation_points(&self) -> BTreeSet<usize> {
        articulation_points(&self.undirected_adjacency())
    }

    pub fn post_dominators(&self) -> PostDominators {
        PostDominators::compute(self)
    }

    /// Direct control dependence: `result[b]` is the set of branch blocks
    /// `a` such that one successor edge of `a` commits execution to `b`
    /// while another can bypass it (computed by walking post-dominator
    /// chains). Successors that cannot reach the virtual exit have no
    /// post-dominator chain and contribute nothing.
    pub fn control_dependence(&self, pdom: &PostDominators) -> Vec<BTreeSet<usize>> {
        let mut deps: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); self.node_count()];
        for a in 0..self.node_count() {
            let Some(stop) = pdom.ipdom(a) else { continue };
            for &s in &self.succs[a] {
                if !pdom.reaches_exit(s) {
                    continue;
                }
                let mut cur = s;
                while cur != stop {
                    deps[cur].insert(a);
                    cur = pdom.ipdom(cur).expect("chain reaches the stop node");
                }
            }
        }
        deps
    }

    /// BFS distance from the entry block to every node.
    pub fn distances_from_entry(&self) -> Vec<Option<usize>> {
        bfs_distances(&self.succs, self.entry)
    }

    /// Graphviz rendering; nodes are named `proc:label`.
    pub fn to_dot(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "digraph \"{}\" {{", self.proc_name);
        let _ = writeln!(out, "  node [shape=box];");
        for node in 0..self.node_count() {
            let _ = writeln!(out, "  \"{}:{}\";", self.proc_name, self.node_name(node));
        }
        for (from, ts) in self.succs.iter().enumerate() {
            for &to in ts {
                let _ = writeln!(
                    out,
                    "  \"{}:{}\" -> \"{}:{}\";",
                    self.proc_name,
                    self.node_name(from),
                    self.proc_name,
                    self.node_name(to)
                );
            }
        }
        out.push_str("}\n");
        out
    }
}

/// Post-dominator tree of a [`BlockGraph`], rooted at the virtual exit.
/// Nodes that cannot reach the virtual exit (dead ends from `call exit`,
/// infinite loops) have no post-dominator and are reported by
/// [`PostDominators::nodes_not_reaching_exit`].
#[derive(Debug, Clone)]
pub struct PostDominators {
    ipdom: Vec<Option<usize>>,
    /// DFS entry/exit intervals over the post-dominator tree, for O(1)
    /// ancestor queries. `None` for nodes outside the tree.
    intervals: Vec<Option<(usize, usize)>>,
}

impl PostDominators {
    /// Immediate post-dominator computation: the iterative two-finger
    /// intersection scheme run on the reverse graph from the virtual exit.
    fn compute(graph: &BlockGraph) -> PostDominators {
        let n = graph.node_count();
        let vx = graph.virtual_exit;

        // Postorder of a DFS over reversed edges from the virtual exit;
        // exactly the nodes that can reach it are visited.
        let mut po_index: Vec<Option<usize>> = vec![None; n];
        let mut order: Vec<usize> = Vec::new();
        let mut visited = vec![false; n];
        let mut stack: Vec<(usize, usize)> = vec![(vx, 0)];
        visited[vx] = true;
        while let Some(&mut (node, ref mut i)) = stack.last_mut() {
            if *i < graph.preds[node].len() {
                let next = graph.preds[node][*i];
                *i += 1;
                if !visited[next] {
                    visited[next] = true;
                    stack.push((next, 0));
                }
            } else {
                po_index[node] = Some(order.len());
                order.push(node);
                stack.pop();
            }
        }

        let mut ipdom: Vec<Option<usize>> = vec![None; n];
        ipdom[vx] = Some(vx);
        let intersect = |ipdom: &[Option<usize>], mut a: usize, mut b: usize| {
            while a != b {
                while po_index[a] < po_index[b] {
                    a = ipdom[a].expect("processed node");
                }
                while po_index[b] < po_index[a] {
                    b = ipdom[b].expect("processed node");
                }
            }
            a
        };
        let mut changed = true;
        while changed {
            changed = false;
            // Reverse postorder: root first.
            for &node in order.iter().rev() {
                if node == vx {
                    continue;
                }
                let mut new_ipdom: Option<usize> = None;
                for &succ in &graph.succs[node] {
                    if po_index[succ].is_none() || ipdom[succ].is_none() {
                        continue;
                    }
                    new_ipdom = Some(match new_ipdom {
                        None => succ,
                        Some(cur) => intersect(&ipdom, cur, succ),
                    });
                }
                if new_ipdom.is_some() && ipdom[node] != new_ipdom {
                    ipdom[node] = new_ipdom;
                    changed = true;
                }
            }
        }
        // DFS intervals over the post-dominator tree rooted at the virtual
        // exit, so ancestor tests below are constant-time.
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (node, parent) in ipdom.iter().enumerate() {
            match *parent {
                Some(parent) if node != vx => children[parent].push(node),
                _ => {}
            }
        }
        let mut intervals: Vec<Option<(usize, usize)>> = vec![None; n];
        let mut clock = 0usize;
        let mut stack: Vec<(usize, usize)> = vec![(vx, 0)];
        intervals[vx] = Some((clock, clock));
        clock += 1;
        while let Some(&mut (node, ref mut i)) = stack.last_mut() {
            if *i < children[node].len() {
                let child = children[node][*i];
                *i += 1;
                intervals[child] = Some((clock, clock));
                clock += 1;
                stack.push((child, 0));
            } else {
                if let Some(span) = intervals[node].as_mut() {
                    span.1 = clock;
                }
                clock += 1;
                stack.pop();
            }
        }

        PostDominators { ipdom, intervals }
    }

    /// Immediate post-dominator, if the node can reach the virtual exit.
    /// The virtual exit maps to itself.
    pub fn ipdom(&self, node: usize) -> Option<usize> {
        self.ipdom[node]
    }

    /// Whether any path from `node` reaches the virtual exit.
    pub fn reaches_exit(&self, node: usize) -> bool {
        self.ipdom[node].is_some()
    }

    /// Nodes with no path to the virtual exit.
    pub fn nodes_not_reaching_exit(&self) -> Vec<usize> {
        (0..self.ipdom.len())
            .filter(|&n| self.ipdom[n].is_none())
            .collect()
    }

    /// Whether `p` post-dominates `n`: every path from `n` to the virtual
    /// exit passes through `p`. Every node post-dominates itself. A node
    /// with no path to the virtual exit has no such paths at all, so the
    /// condition holds vacuously.
    pub fn post_dominates(&self, p: usize, n: usize) -> bool {
        if p == n {
            return true;
        }
        let Some((n_in, _)) = self.intervals[n] else {
            return true; // no path to the exit: vacuously post-dominated
        };
        match self.intervals[p] {
            // `p` post-dominates `n` exactly when it is a proper ancestor
            // of `n` in the post-dominator tree.
            Some((p_in, p_out)) => p_in <= n_in && n_in < p_out,
            // `n` reaches the exit but `p` never does, so `p` lies on no
            // exit path of `n`.
            None => false,
        }
    }
}

/// Strongly connected components of a directed graph given as adjacency
/// lists, in topological order of the condensation (a component precedes
/// the components it has edges into). Each component's nodes are sorted.
pub fn strongly_connected_components(succs: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = succs.len();
    let mut index: Vec<Option<usize>> = vec![None; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut node_stack: Vec<usize> = Vec::new();
    let mut components: Vec<Vec<usize>> = Vec::new();
    let mut next_index = 0usize;

    for root in 0..n {
        if index[root].is_some() {
            continue;
        }
        let mut frames: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = Some(next_index);
        low[root] = next_index;
        next_index += 1;
        node_stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (node, ref mut i)) = frames.last_mut() {
            if *i < succs[node].len() {
                let next = succs[node][*i];
                *i += 1;
                if index[next].is_none() {
                    index[next] = Some(next_index);
                    low[next] = next_index;
                    next_index += 1;
                    node_stack.push(next);
                    on_stack[next] = true;
                    frames.push((next, 0));
                } else if on_stack[next] {
                    low[node] = low[node].min(index[next].expect("visited"));
                }
            } else {
                if low[node] == index[node].expect("visited") {
                    let mut component = Vec::new();
                    loop {
                        let member = node_stack.pop().expect("component root on stack");
                        on_stack[member] = false;
                        component.push(member);
                        if member == node {
                            break;
                        }
                    }
                    component.sort_unstable();
                    components.push(component);
                }
                frames.pop();
                if let Some(&mut (parent, _)) = frames.last_mut() {
                    low[parent] = low[parent].min(low[node]);
                }
            }
        }
    }
    // Tarjan emits components in reverse topological order.
    components.reverse();
    components
}

/// Whether a strongly connected component contains a cycle: more than one
/// node, or a single node with a self-edge.
pub fn is_cyclic_component(succs: &[Vec<usize>], component: &[usize]) -> bool {
    component.len() > 1 || succs[component[0]].contains(&component[0])
}

/// Articulation points of an undirected graph (adjacency lists without
/// self-loops or duplicate edges): nodes whose removal increases the number
/// of connected components. Handles disconnected graphs.
pub fn articulation_points(adj: &[Vec<usize>]) -> BTreeSet<usize> {
    let n = adj.len();
    let mut disc: Vec<Option<usize>> = vec![None; n];
    let mut low = vec![0usize; n];
    let mut points = BTreeSet::new();
    let mut timer = 0usize;

    for root in 0..n {
        if disc[root].is_some() {
            continue;
        }
        let mut root_children = 0usize;
        disc[root] = Some(timer);
        low[root] = timer;
        timer += 1;
        // (node, its DFS parent, next adjacency index)
        let mut frames: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];

        while let Some(&mut (node, parent, ref mut i)) = frames.last_mut() {
            if *i < adj[node].len() {
                let next = adj[node][*i];
                *i += 1;
                if disc[next].is_none() {
                    if node == root {
                        root_children += 1;
                    }
                    disc[next] = Some(timer);
                    low[next] = timer;
                    timer += 1;
                    frames.push((next, node, 0));
                } else if next != parent {
                    low[node] = low[node].min(disc[next].expect("visited"));
                }
            } else {
                frames.pop();
                if parent != usize::MAX {
                    low[parent] = low[parent].min(low[node]);
                    if parent != root && low[node] >= disc[parent].expect("visited") {
                        points.insert(parent);
                    }
                }
            }
        }
        if root_children >= 2 {
            points.insert(root);
        }
    }
    points
}

/// Nodes reachable from any of `starts` by following edges forward
/// (including the start nodes themselves).
pub fn reachable_from(succs: &[Vec<usize>], starts: impl IntoIterator<Item = usize>) -> Vec<bool> {
    let mut seen = vec![false; succs.len()];
    let mut stack: Vec<usize> = Vec::new();
    for s in starts {
        if !seen[s] {
            seen[s] = true;
            stack.push(s);
        }
    }
    while let Some(node) = stack.pop() {
        for &next in &succs[node] {
            if !seen[next] {
                seen[next] = true;
                stack.push(next);
            }
        }
    }
    seen
}

/// Breadth-first distances from `start`; `None` for unreachable nodes.
pub fn bfs_distances(succs: &[Vec<usize>], start: usize) -> Vec<Option<usize>> {
    let mut dist: Vec<Option<usize>> = vec![None; succs.len()];
    dist[start] = Some(0);
    let mut queue = VecDeque::from([start]);
    while let Some(node) = queue.pop_front() {
        let d = dist[node].expect("queued nodes have distances");
        for &next in &succs[node] {
            if dist[next].is_none() {
                dist[next] = Some(d + 1);
                queue.push_back(next);
            }
        }
    }
    dist
}

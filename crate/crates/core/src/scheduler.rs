//! Instruction scheduling on an abstract dual-pipeline machine.
//!
//! A node of an [`InstructionDag`] stands for `group_count` corresponding
//! instructions that are always issued in a fixed internal order (copy 0,
//! then copy 1, ...). For an edge `a -> b`, copy `c` of `b` depends on copy
//! `c` of `a` when both nodes have the same group count; otherwise every copy
//! of `b` depends on every copy of `a`.
//!
//! Timing model, applied to an issue order one instruction at a time: an
//! instruction on pipeline `p` issues at the earliest cycle `t >= 1` with
//! * `t` later than the previous issue on `p`,
//! * `t >= issue(d) + latency(d)` for every instruction `d` it depends on,
//! * no previously issued instruction completing at `t + latency` (on the
//!   same pipeline, or on any pipeline with [`WritebackScope::Global`]).
//!
//! The makespan is the largest `issue + latency`, 0 for an empty order.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};
use std::fmt;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

pub const DEFAULT_MAX_INSTRUCTIONS: usize = 64;
pub const DEFAULT_MAX_STATES: usize = 2_000_000;
pub const BRUTE_FORCE_LIMIT: usize = 9;
pub const EXPANDED_SEARCH_LIMIT: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchedError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("dependency cycle: {}", fmt_cycle(.0))]
    Cycle(Vec<u32>),
    #[error("unknown node id {0}")]
    UnknownNode(u32),
    #[error("duplicate node id {0}")]
    DuplicateNode(u32),
    #[error("invalid node {id}: {msg}")]
    InvalidNode { id: u32, msg: String },
    #[error("invalid order: {0}")]
    InvalidOrder(String),
    #[error("{size} expanded instructions exceed the limit of {limit}")]
    TooLarge { size: usize, limit: usize },
    #[error("search gave up after {states} states; group more instructions per node")]
    StateLimit { states: usize },
}

fn fmt_cycle(c: &[u32]) -> String {
    c.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" -> ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Pipeline {
    P0,
    P1,
}

impl Pipeline {
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pipeline::P0 => "P0",
            Pipeline::P1 => "P1",
        })
    }
}

/// Default latencies by operation class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpClass {
    FullMul,
    Add,
    Sub,
    Shift,
    Shuffle,
    Select,
}

impl OpClass {
    pub fn latency(self) -> u32 {
        match self {
            OpClass::FullMul => 6,
            OpClass::Add | OpClass::Sub | OpClass::Shift => 2,
            OpClass::Shuffle | OpClass::Select => 1,
        }
    }

    pub fn from_mnemonic(s: &str) -> Option<Self> {
        Some(match s {
            "mul" => OpClass::FullMul,
            "add" => OpClass::Add,
            "sub" => OpClass::Sub,
            "shift" => OpClass::Shift,
            "shuffle" => OpClass::Shuffle,
            "select" => OpClass::Select,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct InstructionNode {
    pub id: u32,
    pub latency: u32,
    pub pipeline: Pipeline,
    pub group_count: u32,
}

impl InstructionNode {
    pub fn new(id: u32, latency: u32, pipeline: Pipeline, group_count: u32) -> Self {
        Self { id, latency, pipeline, group_count }
    }
}

/// Validated acyclic instruction graph. Edges are stored by node index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstructionDag {
    nodes: Vec<InstructionNode>,
    edges: Vec<(usize, usize)>,
}

impl InstructionDag {
    /// Builds a graph from nodes and `(from_id, to_id)` edges. Duplicate
    /// edges are merged.
    pub fn new(nodes: Vec<InstructionNode>, edges: &[(u32, u32)]) -> Result<Self, SchedError> {
        let mut by_id = HashMap::new();
        for (k, n) in nodes.iter().enumerate() {
            if n.latency == 0 {
                return Err(SchedError::InvalidNode { id: n.id, msg: "latency must be at least 1".into() });
            }
            if n.group_count == 0 {
                return Err(SchedError::InvalidNode { id: n.id, msg: "group count must be at least 1".into() });
            }
            if by_id.insert(n.id, k).is_some() {
                return Err(SchedError::DuplicateNode(n.id));
            }
        }
        let mut idx_edges = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            let ia = *by_id.get(&a).ok_or(SchedError::UnknownNode(a))?;
            let ib = *by_id.get(&b).ok_or(SchedError::UnknownNode(b))?;
            if !idx_edges.contains(&(ia, ib)) {
                idx_edges.push((ia, ib));
            }
        }
        let dag = Self { nodes, edges: idx_edges };
        if let Some(cycle) = dag.find_cycle() {
            return Err(SchedError::Cycle(cycle.into_iter().map(|k| dag.nodes[k].id).collect()));
        }
        Ok(dag)
    }

    pub fn nodes(&self) -> &[InstructionNode] {
        &self.nodes
    }

    /// Edges as `(from_id, to_id)`.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.edges.iter().map(|&(a, b)| (self.nodes[a].id, self.nodes[b].id))
    }

    pub fn edge_indices(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Number of instructions after expanding groups.
    pub fn expanded_len(&self) -> usize {
        self.nodes.iter().map(|n| n.group_count as usize).sum()
    }

    pub fn node_index(&self, id: u32) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    /// Copy of the graph with one more edge, if it stays acyclic.
    pub fn with_edge(&self, from: u32, to: u32) -> Result<Self, SchedError> {
        let mut edges: Vec<(u32, u32)> = self.edges().collect();
        edges.push((from, to));
        Self::new(self.nodes.clone(), &edges)
    }

    fn find_cycle(&self) -> Option<Vec<usize>> {
        let n = self.nodes.len();
        let mut succ = vec![Vec::new(); n];
        for &(a, b) in &self.edges {
            succ[a].push(b);
        }
        // 0 unvisited, 1 on stack, 2 done
        let mut state = vec![0u8; n];
        let mut stack: Vec<(usize, usize)> = Vec::new();
        for root in 0..n {
            if state[root] != 0 {
                continue;
            }
            stack.push((root, 0));
            state[root] = 1;
            while let Some(&mut (v, ref mut next)) = stack.last_mut() {
                if *next < succ[v].len() {
                    let w = succ[v][*next];
                    *next += 1;
                    match state[w] {
                        0 => {
                            state[w] = 1;
                            stack.push((w, 0));
                        }
                        1 => {
                            let start = stack.iter().position(|&(x, _)| x == w).unwrap();
                            let mut cycle: Vec<usize> = stack[start..].iter().map(|&(x, _)| x).collect();
                            cycle.push(w);
                            return Some(cycle);
                        }
                        _ => {}
                    }
                } else {
                    state[v] = 2;
                    stack.pop();
                }
            }
        }
        None
    }

    /// Node indices in a topological order, smallest index first among ready nodes.
    pub fn topological_nodes(&self) -> Vec<usize> {
        let n = self.nodes.len();
        let mut indeg = vec![0usize; n];
        for &(_, b) in &self.edges {
            indeg[b] += 1;
        }
        let mut ready: std::collections::BTreeSet<usize> = (0..n).filter(|&k| indeg[k] == 0).collect();
        let mut out = Vec::with_capacity(n);
        while let Some(&k) = ready.iter().next() {
            ready.remove(&k);
            out.push(k);
            for &(a, b) in &self.edges {
                if a == k {
                    indeg[b] -= 1;
                    if indeg[b] == 0 {
                        ready.insert(b);
                    }
                }
            }
        }
        out
    }

    /// Every copy of every node, node by node in topological order.
    pub fn natural_order(&self) -> Vec<InstrRef> {
        self.topological_nodes()
            .into_iter()
            .flat_map(|k| (0..self.nodes[k].group_count).map(move |c| InstrRef { node: self.nodes[k].id, copy: c }))
            .collect()
    }
}

/// One expanded instruction: copy `copy` of node `node` (by id).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct InstrRef {
    pub node: u32,
    pub copy: u32,
}

impl fmt::Display for InstrRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.node, self.copy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WritebackScope {
    /// At most one completion per pipeline per cycle.
    #[default]
    PerPipeline,
    /// At most one completion per cycle across both pipelines.
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct MachineModel {
    pub writeback: WritebackScope,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScheduledInstr {
    pub instr: InstrRef,
    pub pipeline: Pipeline,
    pub issue: u32,
    pub complete: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Schedule {
    pub slots: Vec<ScheduledInstr>,
    pub makespan: u32,
}

impl Schedule {
    pub fn order(&self) -> Vec<InstrRef> {
        self.slots.iter().map(|s| s.instr).collect()
    }
}

/// Expanded instruction table shared by the simulator and the searches.
#[derive(Debug, Clone)]
struct Expanded {
    /// First expanded index of each node.
    offset: Vec<usize>,
    node_of: Vec<usize>,
    copy_of: Vec<u32>,
    latency: Vec<u32>,
    pipe: Vec<usize>,
    preds: Vec<Vec<usize>>,
    succs: Vec<Vec<usize>>,
}

impl Expanded {
    fn new(dag: &InstructionDag) -> Self {
        let mut offset = Vec::with_capacity(dag.nodes.len());
        let (mut node_of, mut copy_of, mut latency, mut pipe) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (k, n) in dag.nodes.iter().enumerate() {
            offset.push(node_of.len());
            for c in 0..n.group_count {
                node_of.push(k);
                copy_of.push(c);
                latency.push(n.latency);
                pipe.push(n.pipeline.index());
            }
        }
        let total = node_of.len();
        let mut preds = vec![Vec::new(); total];
        let mut succs = vec![Vec::new(); total];
        for &(a, b) in &dag.edges {
            let (ga, gb) = (dag.nodes[a].group_count as usize, dag.nodes[b].group_count as usize);
            for cb in 0..gb {
                let to = offset[b] + cb;
                let from: Vec<usize> = if ga == gb { vec![offset[a] + cb] } else { (0..ga).map(|ca| offset[a] + ca).collect() };
                for f in from {
                    preds[to].push(f);
                    succs[f].push(to);
                }
            }
        }
        Self { offset, node_of, copy_of, latency, pipe, preds, succs }
    }

    fn len(&self) -> usize {
        self.node_of.len()
    }

    fn index(&self, dag: &InstructionDag, r: InstrRef) -> Option<usize> {
        let k = dag.node_index(r.node)?;
        (r.copy < dag.nodes[k].group_count).then(|| self.offset[k] + r.copy as usize)
    }

    fn instr_ref(&self, dag: &InstructionDag, i: usize) -> InstrRef {
        InstrRef { node: dag.nodes[self.node_of[i]].id, copy: self.copy_of[i] }
    }
}

/// Earliest legal issue cycle for instruction `i`, given the last issue on
/// its pipeline, its dependence-ready cycle and the completion cycles of the
/// instructions issued so far (`complete[j] == 0` means not issued).
fn earliest_issue(x: &Expanded, model: MachineModel, i: usize, last: u32, ready: u32, complete: &[u32]) -> u32 {
    let mut t = (last + 1).max(ready);
    let p = x.pipe[i];
    loop {
        let c = t + x.latency[i];
        let clash = complete.iter().enumerate().any(|(j, &cj)| {
            cj == c && (model.writeback == WritebackScope::Global || x.pipe[j] == p)
        });
        if !clash {
            return t;
        }
        t += 1;
    }
}

fn ready_time(x: &Expanded, i: usize, complete: &[u32]) -> u32 {
    x.preds[i].iter().map(|&d| complete[d]).max().unwrap_or(0)
}

/// Issue cycles for `order` under the default model.
pub fn simulate(dag: &InstructionDag, order: &[InstrRef]) -> Result<Schedule, SchedError> {
    simulate_with(dag, order, MachineModel::default())
}

/// Issue cycles for `order`. Every expanded instruction must appear exactly
/// once and after everything it depends on; copy order within a group is
/// not required here.
pub fn simulate_with(dag: &InstructionDag, order: &[InstrRef], model: MachineModel) -> Result<Schedule, SchedError> {
    let x = Expanded::new(dag);
    if order.len() != x.len() {
        return Err(SchedError::InvalidOrder(format!("{} instructions given, {} expected", order.len(), x.len())));
    }
    let mut complete = vec![0u32; x.len()];
    let mut last = [0u32; 2];
    let mut slots = Vec::with_capacity(order.len());
    for &r in order {
        let i = x.index(dag, r).ok_or_else(|| SchedError::InvalidOrder(format!("unknown instruction {r}")))?;
        if complete[i] != 0 {
            return Err(SchedError::InvalidOrder(format!("{r} appears twice")));
        }
        if let Some(&d) = x.preds[i].iter().find(|&&d| complete[d] == 0) {
            return Err(SchedError::InvalidOrder(format!("{r} issued before {}", x.instr_ref(dag, d))));
        }
        let t = earliest_issue(&x, model, i, last[x.pipe[i]], ready_time(&x, i, &complete), &complete);
        last[x.pipe[i]] = t;
        complete[i] = t + x.latency[i];
        slots.push(ScheduledInstr { instr: r, pipeline: dag.nodes[x.node_of[i]].pipeline, issue: t, complete: complete[i] });
    }
    let makespan = complete.iter().copied().max().unwrap_or(0);
    Ok(Schedule { slots, makespan })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchOptions {
    pub model: MachineModel,
    pub max_instructions: usize,
    pub max_states: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { model: MachineModel::default(), max_instructions: DEFAULT_MAX_INSTRUCTIONS, max_states: DEFAULT_MAX_STATES }
    }
}

/// Search statistics returned alongside the optimal schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct SearchStats {
    pub expanded: usize,
    pub generated: usize,
    pub pruned: usize,
}

#[derive(Clone)]
struct SearchState {
    issued: Vec<u32>,
    complete: Vec<u32>,
    last: [u32; 2],
    makespan: u32,
    remaining: [u32; 2],
    /// index into the trail arena, `usize::MAX` at the root
    trail: usize,
}

struct Trail {
    parent: usize,
    instr: usize,
}

struct QueueEntry {
    f: u32,
    depth: usize,
    seq: u64,
    state: usize,
}

impl PartialEq for QueueEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for QueueEntry {}
impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for QueueEntry {
    // max-heap: smaller f first, then deeper, then older
    fn cmp(&self, other: &Self) -> Ordering {
        (Reverse(self.f), self.depth, Reverse(self.seq)).cmp(&(Reverse(other.f), other.depth, Reverse(other.seq)))
    }
}

/// Lower bound on the makespan of any completion of `s`.
///
/// Each pipeline still has to issue its remaining instructions in distinct
/// later cycles, and every remaining instruction must wait for its
/// dependences and then for its longest chain of successors.
fn lower_bound(x: &Expanded, s: &SearchState, tail: &[u32], topo: &[usize]) -> u32 {
    let mut f = s.makespan;
    for p in 0..2 {
        if s.remaining[p] > 0 {
            f = f.max(s.last[p] + s.remaining[p] + 1);
        }
    }
    let mut est = vec![0u32; x.len()];
    for &i in topo {
        if s.complete[i] != 0 {
            continue;
        }
        let mut e = s.last[x.pipe[i]] + 1;
        for &d in &x.preds[i] {
            let r = if s.complete[d] != 0 { s.complete[d] } else { est[d] + x.latency[d] };
            e = e.max(r);
        }
        est[i] = e;
        f = f.max(e + tail[i]);
    }
    f
}

/// Longest latency sum along any path starting at each instruction.
fn tails(x: &Expanded, topo: &[usize]) -> Vec<u32> {
    let mut tail = vec![0u32; x.len()];
    for &i in topo.iter().rev() {
        tail[i] = x.latency[i] + x.succs[i].iter().map(|&s| tail[s]).max().unwrap_or(0);
    }
    tail
}

/// Expanded instructions in a topological order that also respects copy order.
fn expanded_topo(x: &Expanded, dag: &InstructionDag) -> Vec<usize> {
    dag.topological_nodes()
        .into_iter()
        .flat_map(|k| x.offset[k]..x.offset[k] + dag.nodes[k].group_count as usize)
        .collect()
}

/// Dominance key: issued counts, then every time that can still influence
/// the future, relative to the earliest clock among pipelines with work left.
/// Two states with equal keys evolve identically up to a shift, so the one
/// with the smaller base dominates.
fn state_key(x: &Expanded, model: MachineModel, s: &SearchState) -> (u32, Vec<u32>) {
    let active = [s.remaining[0] > 0, s.remaining[1] > 0];
    let base = (0..2).filter(|&p| active[p]).map(|p| s.last[p]).min().unwrap_or(0);
    let mut key: Vec<u32> = s.issued.clone();
    for p in 0..2 {
        key.push(if active[p] { s.last[p] - base } else { 0 });
    }
    key.push(s.makespan.saturating_sub(base));
    // a future instruction on p completes at last[p] + 2 or later
    let horizon = |p: usize| match model.writeback {
        WritebackScope::PerPipeline if active[p] => Some(s.last[p] + 2),
        WritebackScope::PerPipeline => None,
        WritebackScope::Global => Some(base + 2),
    };
    for (j, &c) in s.complete.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let wb = match horizon(x.pipe[j]) {
            Some(h) if c >= h => c - base,
            _ => 0,
        };
        // dependence-ready times matter only while a successor is pending
        let dep = if x.succs[j].iter().any(|&k| s.complete[k] == 0) { c.saturating_sub(base) } else { 0 };
        key.push(wb);
        key.push(dep);
    }
    (base, key)
}

/// The search's lower bound for the state reached by issuing `prefix`.
/// The prefix must respect dependences and copy order.
pub fn prefix_lower_bound(dag: &InstructionDag, prefix: &[InstrRef], model: MachineModel) -> Result<u32, SchedError> {
    let x = Expanded::new(dag);
    let topo = expanded_topo(&x, dag);
    let tail = tails(&x, &topo);
    let mut s = SearchState {
        issued: vec![0; dag.nodes.len()],
        complete: vec![0; x.len()],
        last: [0, 0],
        makespan: 0,
        remaining: [0, 0],
        trail: usize::MAX,
    };
    for &p in &x.pipe {
        s.remaining[p] += 1;
    }
    for &r in prefix {
        let i = x.index(dag, r).ok_or_else(|| SchedError::InvalidOrder(format!("unknown instruction {r}")))?;
        let k = x.node_of[i];
        if s.issued[k] != x.copy_of[i] || x.preds[i].iter().any(|&d| s.complete[d] == 0) {
            return Err(SchedError::InvalidOrder(format!("{r} is not ready")));
        }
        let p = x.pipe[i];
        let t = earliest_issue(&x, model, i, s.last[p], ready_time(&x, i, &s.complete), &s.complete);
        s.issued[k] += 1;
        s.complete[i] = t + x.latency[i];
        s.last[p] = t;
        s.makespan = s.makespan.max(s.complete[i]);
        s.remaining[p] -= 1;
    }
    Ok(lower_bound(&x, &s, &tail, &topo))
}

/// Minimum-makespan schedule by best-first search over issue prefixes.
pub fn astar_schedule(dag: &InstructionDag) -> Result<(Schedule, SearchStats), SchedError> {
    astar_schedule_with(dag, SearchOptions::default())
}

pub fn astar_schedule_with(dag: &InstructionDag, opts: SearchOptions) -> Result<(Schedule, SearchStats), SchedError> {
    let x = Expanded::new(dag);
    let total = x.len();
    if total > opts.max_instructions {
        return Err(SchedError::TooLarge { size: total, limit: opts.max_instructions });
    }
    let topo = expanded_topo(&x, dag);
    let tail = tails(&x, &topo);
    let mut remaining = [0u32; 2];
    for &p in &x.pipe {
        remaining[p] += 1;
    }
    let root = SearchState {
        issued: vec![0; dag.nodes.len()],
        complete: vec![0; total],
        last: [0, 0],
        makespan: 0,
        remaining,
        trail: usize::MAX,
    };
    let mut stats = SearchStats::default();
    let mut trail: Vec<Trail> = Vec::new();
    let mut states: Vec<Option<SearchState>> = Vec::new();
    let mut best: HashMap<Vec<u32>, u32> = HashMap::new();
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;

    heap.push(QueueEntry { f: lower_bound(&x, &root, &tail, &topo), depth: 0, seq, state: 0 });
    states.push(Some(root));

    while let Some(entry) = heap.pop() {
        let s = states[entry.state].take().expect("state popped twice");
        if entry.depth == total {
            let mut order = Vec::with_capacity(total);
            let mut t = s.trail;
            while t != usize::MAX {
                order.push(x.instr_ref(dag, trail[t].instr));
                t = trail[t].parent;
            }
            order.reverse();
            let schedule = simulate_with(dag, &order, opts.model)?;
            debug_assert_eq!(schedule.makespan, entry.f);
            return Ok((schedule, stats));
        }
        stats.expanded += 1;
        for (k, node) in dag.nodes.iter().enumerate() {
            let c = s.issued[k];
            if c == node.group_count {
                continue;
            }
            let i = x.offset[k] + c as usize;
            if x.preds[i].iter().any(|&d| s.complete[d] == 0) {
                continue;
            }
            let p = x.pipe[i];
            let t = earliest_issue(&x, opts.model, i, s.last[p], ready_time(&x, i, &s.complete), &s.complete);
            let mut child = s.clone();
            child.issued[k] += 1;
            child.complete[i] = t + x.latency[i];
            child.last[p] = t;
            child.makespan = child.makespan.max(t + x.latency[i]);
            child.remaining[p] -= 1;
            trail.push(Trail { parent: s.trail, instr: i });
            child.trail = trail.len() - 1;
            stats.generated += 1;

            let (base, key) = state_key(&x, opts.model, &child);
            match best.get(&key) {
                Some(&b) if b <= base => {
                    stats.pruned += 1;
                    continue;
                }
                _ => {
                    best.insert(key, base);
                }
            }
            if best.len() > opts.max_states {
                return Err(SchedError::StateLimit { states: best.len() });
            }
            seq += 1;
            let f = lower_bound(&x, &child, &tail, &topo);
            states.push(Some(child));
            heap.push(QueueEntry { f, depth: entry.depth + 1, seq, state: states.len() - 1 });
        }
    }
    // the root always leads to a complete schedule
    unreachable!("search exhausted without a schedule")
}

/// Exhaustive search over every issue order that respects dependences and
/// copy order. Limited to [`BRUTE_FORCE_LIMIT`] expanded instructions.
pub fn brute_force_schedule(dag: &InstructionDag) -> Result<Schedule, SchedError> {
    brute_force_schedule_with(dag, MachineModel::default())
}

pub fn brute_force_schedule_with(dag: &InstructionDag, model: MachineModel) -> Result<Schedule, SchedError> {
    let x = Expanded::new(dag);
    if x.len() > BRUTE_FORCE_LIMIT {
        return Err(SchedError::TooLarge { size: x.len(), limit: BRUTE_FORCE_LIMIT });
    }
    let mut best: Option<Schedule> = None;
    let mut order = Vec::with_capacity(x.len());
    let mut placed = vec![false; x.len()];
    permute(dag, &x, model, true, &mut order, &mut placed, &mut best)?;
    Ok(best.unwrap_or(Schedule { slots: Vec::new(), makespan: 0 }))
}

/// Like [`brute_force_schedule`] but copies of a group may issue in any
/// order. Used to measure what the fixed copy order costs.
pub fn brute_force_unconstrained(dag: &InstructionDag, model: MachineModel) -> Result<Schedule, SchedError> {
    let x = Expanded::new(dag);
    if x.len() > BRUTE_FORCE_LIMIT {
        return Err(SchedError::TooLarge { size: x.len(), limit: BRUTE_FORCE_LIMIT });
    }
    let mut best: Option<Schedule> = None;
    let mut order = Vec::with_capacity(x.len());
    let mut placed = vec![false; x.len()];
    permute(dag, &x, model, false, &mut order, &mut placed, &mut best)?;
    Ok(best.unwrap_or(Schedule { slots: Vec::new(), makespan: 0 }))
}

fn permute(
    dag: &InstructionDag,
    x: &Expanded,
    model: MachineModel,
    copy_order: bool,
    order: &mut Vec<InstrRef>,
    placed: &mut [bool],
    best: &mut Option<Schedule>,
) -> Result<(), SchedError> {
    if order.len() == x.len() {
        let s = simulate_with(dag, order, model)?;
        if best.as_ref().map_or(true, |b| s.makespan < b.makespan) {
            *best = Some(s);
        }
        return Ok(());
    }
    for i in 0..x.len() {
        if placed[i] || x.preds[i].iter().any(|&d| !placed[d]) {
            continue;
        }
        if copy_order && x.copy_of[i] > 0 && !placed[i - 1] {
            continue;
        }
        placed[i] = true;
        order.push(x.instr_ref(dag, i));
        permute(dag, x, model, copy_order, order, placed, best)?;
        order.pop();
        placed[i] = false;
    }
    Ok(())
}

/// Depth-first branch and bound over single expanded instructions with copy
/// order enforced, without state merging. Limited to
/// [`EXPANDED_SEARCH_LIMIT`] instructions.
pub fn expanded_search_schedule(dag: &InstructionDag, model: MachineModel) -> Result<Schedule, SchedError> {
    let x = Expanded::new(dag);
    let n = x.len();
    if n > EXPANDED_SEARCH_LIMIT {
        return Err(SchedError::TooLarge { size: n, limit: EXPANDED_SEARCH_LIMIT });
    }
    struct Dfs<'a> {
        x: &'a Expanded,
        model: MachineModel,
        complete: Vec<u32>,
        last: [u32; 2],
        left: [u32; 2],
        order: Vec<usize>,
        best: u32,
        best_order: Vec<usize>,
    }
    impl Dfs<'_> {
        fn go(&mut self, makespan: u32) {
            let n = self.x.len();
            if self.order.len() == n {
                if makespan < self.best {
                    self.best = makespan;
                    self.best_order = self.order.clone();
                }
                return;
            }
            let mut bound = makespan;
            for p in 0..2 {
                if self.left[p] > 0 {
                    bound = bound.max(self.last[p] + self.left[p] + 1);
                }
            }
            if bound >= self.best {
                return;
            }
            for i in 0..n {
                if self.complete[i] != 0 || self.x.preds[i].iter().any(|&d| self.complete[d] == 0) {
                    continue;
                }
                if self.x.copy_of[i] > 0 && self.complete[i - 1] == 0 {
                    continue;
                }
                let p = self.x.pipe[i];
                let t = earliest_issue(self.x, self.model, i, self.last[p], ready_time(self.x, i, &self.complete), &self.complete);
                let saved = self.last[p];
                self.complete[i] = t + self.x.latency[i];
                self.last[p] = t;
                self.left[p] -= 1;
                self.order.push(i);
                self.go(makespan.max(t + self.x.latency[i]));
                self.order.pop();
                self.left[p] += 1;
                self.last[p] = saved;
                self.complete[i] = 0;
            }
        }
    }
    let mut left = [0u32; 2];
    for &p in &x.pipe {
        left[p] += 1;
    }
    let mut dfs = Dfs {
        x: &x,
        model,
        complete: vec![0; n],
        last: [0, 0],
        left,
        order: Vec::with_capacity(n),
        best: u32::MAX,
        best_order: Vec::new(),
    };
    dfs.go(0);
    let order: Vec<InstrRef> = dfs.best_order.iter().map(|&i| x.instr_ref(dag, i)).collect();
    simulate_with(dag, &order, model)
}

/// Parses the text format:
///
/// ```text
/// nodes <n> edges <m>
/// <id> <latency> <P0|P1> <group_count>     n lines
/// <from> <to>                              m lines
/// ```
///
/// The latency may also be one of `mul add sub shift shuffle select`.
/// Blank lines and `#` comments are ignored.
pub fn load_dag(text: &str) -> Result<InstructionDag, SchedError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let err = |line: usize, msg: String| SchedError::Parse { line, msg };
    let (hl, header) = lines.next().ok_or_else(|| err(1, "missing header".into()))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    let (n, m) = match h.as_slice() {
        ["nodes", n, "edges", m] => (
            n.parse::<usize>().map_err(|e| err(hl, format!("node count: {e}")))?,
            m.parse::<usize>().map_err(|e| err(hl, format!("edge count: {e}")))?,
        ),
        _ => return Err(err(hl, "expected `nodes <n> edges <m>`".into())),
    };
    let mut nodes = Vec::with_capacity(n);
    let mut seen = HashMap::new();
    for _ in 0..n {
        let (ln, l) = lines.next().ok_or_else(|| err(hl, format!("expected {n} node lines")))?;
        let f: Vec<&str> = l.split_whitespace().collect();
        let [id, lat, pipe, group] = f.as_slice() else {
            return Err(err(ln, "expected `id latency pipeline group_count`".into()));
        };
        let id: u32 = id.parse().map_err(|e| err(ln, format!("node id: {e}")))?;
        let latency = match OpClass::from_mnemonic(lat) {
            Some(op) => op.latency(),
            None => lat.parse().map_err(|e| err(ln, format!("latency: {e}")))?,
        };
        let pipeline = match *pipe {
            "P0" => Pipeline::P0,
            "P1" => Pipeline::P1,
            other => return Err(err(ln, format!("unknown pipeline {other:?}"))),
        };
        let group_count: u32 = group.parse().map_err(|e| err(ln, format!("group count: {e}")))?;
        if latency == 0 || group_count == 0 {
            return Err(err(ln, "latency and group count must be at least 1".into()));
        }
        if seen.insert(id, ln).is_some() {
            return Err(err(ln, format!("duplicate node id {id}")));
        }
        nodes.push(InstructionNode { id, latency, pipeline, group_count });
    }
    let mut edges = Vec::with_capacity(m);
    for _ in 0..m {
        let (ln, l) = lines.next().ok_or_else(|| err(hl, format!("expected {m} edge lines")))?;
        let f: Vec<&str> = l.split_whitespace().collect();
        let [a, b] = f.as_slice() else {
            return Err(err(ln, "expected `from to`".into()));
        };
        let a: u32 = a.parse().map_err(|e| err(ln, format!("edge source: {e}")))?;
        let b: u32 = b.parse().map_err(|e| err(ln, format!("edge target: {e}")))?;
        for id in [a, b] {
            if !seen.contains_key(&id) {
                return Err(err(ln, format!("unknown node id {id}")));
            }
        }
        edges.push((a, b));
    }
    if let Some((ln, _)) = lines.next() {
        return Err(err(ln, "unexpected trailing content".into()));
    }
    InstructionDag::new(nodes, &edges)
}

/// Canonical text: nodes sorted by id, edges sorted and deduplicated.
pub fn emit_dag(dag: &InstructionDag) -> String {
    let mut nodes = dag.nodes.clone();
    nodes.sort_by_key(|n| n.id);
    let mut edges: Vec<(u32, u32)> = dag.edges().collect();
    edges.sort_unstable();
    edges.dedup();
    let mut out = format!("nodes {} edges {}\n", nodes.len(), edges.len());
    for n in &nodes {
        let _ = writeln!(out, "{} {} {} {}", n.id, n.latency, n.pipeline, n.group_count);
    }
    for (a, b) in edges {
        let _ = writeln!(out, "{a} {b}");
    }
    out
}

/// Human-readable schedule listing.
pub fn report(schedule: &Schedule) -> String {
    let mut out = String::from("cycle  pipe  instr   done\n");
    for s in &schedule.slots {
        let _ = writeln!(out, "{:>5}  {:<4}  {:<6}  {:>4}", s.issue, s.pipeline.to_string(), s.instr.to_string(), s.complete);
    }
    let _ = writeln!(out, "makespan {}", schedule.makespan);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(id: u32, lat: u32, p: Pipeline, g: u32) -> InstructionNode {
        InstructionNode::new(id, lat, p, g)
    }

    fn r(node: u32, copy: u32) -> InstrRef {
        InstrRef { node, copy }
    }

    #[test]
    fn independent_single_cycle() {
        let dag = InstructionDag::new((0..3).map(|k| node(k, 1, Pipeline::P0, 1)).collect(), &[]).unwrap();
        let s = simulate(&dag, &dag.natural_order()).unwrap();
        assert_eq!(s.slots.iter().map(|x| x.issue).collect::<Vec<_>>(), vec![1, 2, 3]);
        assert_eq!(s.makespan, 4);
    }

    #[test]
    fn raw_stall() {
        let dag = InstructionDag::new(vec![node(0, 6, Pipeline::P0, 1), node(1, 1, Pipeline::P0, 1)], &[(0, 1)]).unwrap();
        let s = simulate(&dag, &[r(0, 0), r(1, 0)]).unwrap();
        assert_eq!(s.slots[1].issue, s.slots[0].issue + 6);
    }

    #[test]
    fn writeback_stall() {
        let dag = InstructionDag::new(vec![node(0, 2, Pipeline::P0, 1), node(1, 1, Pipeline::P0, 1)], &[]).unwrap();
        let s = simulate(&dag, &[r(0, 0), r(1, 0)]).unwrap();
        assert_eq!((s.slots[0].issue, s.slots[1].issue), (1, 3));
        // a different pipeline only clashes in the global model
        let dag = InstructionDag::new(vec![node(0, 2, Pipeline::P0, 1), node(1, 2, Pipeline::P1, 1)], &[]).unwrap();
        let order = [r(0, 0), r(1, 0)];
        assert_eq!(simulate(&dag, &order).unwrap().slots[1].issue, 1);
        let global = MachineModel { writeback: WritebackScope::Global };
        assert_eq!(simulate_with(&dag, &order, global).unwrap().slots[1].issue, 2);
    }

    #[test]
    fn chain_of_two() {
        let dag = InstructionDag::new(vec![node(0, 2, Pipeline::P0, 1), node(1, 2, Pipeline::P0, 1)], &[(0, 1)]).unwrap();
        let s = brute_force_schedule(&dag).unwrap();
        assert_eq!((s.slots[0].issue, s.slots[1].issue, s.makespan), (1, 3, 5));
        assert_eq!(astar_schedule(&dag).unwrap().0.makespan, 5);
    }

    #[test]
    fn empty_dag() {
        let dag = InstructionDag::new(vec![], &[]).unwrap();
        assert_eq!(brute_force_schedule(&dag).unwrap().makespan, 0);
        assert_eq!(astar_schedule(&dag).unwrap().0.makespan, 0);
    }

    #[test]
    fn order_errors() {
        let dag = InstructionDag::new(vec![node(0, 2, Pipeline::P0, 1), node(1, 2, Pipeline::P0, 1)], &[(0, 1)]).unwrap();
        assert!(matches!(simulate(&dag, &[r(1, 0), r(0, 0)]), Err(SchedError::InvalidOrder(_))));
        assert!(matches!(simulate(&dag, &[r(0, 0)]), Err(SchedError::InvalidOrder(_))));
        assert!(matches!(simulate(&dag, &[r(0, 0), r(0, 0)]), Err(SchedError::InvalidOrder(_))));
    }

    #[test]
    fn grouped_edges() {
        // equal counts pair copies, unequal counts connect all
        let dag = InstructionDag::new(
            vec![node(0, 6, Pipeline::P0, 2), node(1, 1, Pipeline::P1, 2), node(2, 1, Pipeline::P1, 1)],
            &[(0, 1), (1, 2)],
        )
        .unwrap();
        let x = Expanded::new(&dag);
        assert_eq!(x.preds[2], vec![0]);
        assert_eq!(x.preds[3], vec![1]);
        assert_eq!(x.preds[4], vec![2, 3]);
    }

    #[test]
    fn text_round_trip_and_errors() {
        let text = "# demo\nnodes 3 edges 2\n2 mul P0 1\n0 2 P1 4\n1 1 P0 1\n0 2\n1 2\n";
        let dag = load_dag(text).unwrap();
        let canon = emit_dag(&dag);
        assert_eq!(canon, "nodes 3 edges 2\n0 2 P1 4\n1 1 P0 1\n2 6 P0 1\n0 2\n1 2\n");
        assert_eq!(emit_dag(&load_dag(&canon).unwrap()), canon);

        let bad = load_dag("nodes 1 edges 0\n0 1 P2 1\n").unwrap_err();
        assert_eq!(bad, SchedError::Parse { line: 2, msg: "unknown pipeline \"P2\"".into() });
        let cyc = load_dag("nodes 3 edges 3\n0 1 P0 1\n1 1 P0 1\n2 1 P0 1\n0 1\n1 2\n2 0\n").unwrap_err();
        assert_eq!(cyc, SchedError::Cycle(vec![0, 1, 2, 0]));
        assert!(cyc.to_string().contains("0 -> 1 -> 2 -> 0"));
        assert!(matches!(load_dag("nodes 1 edges 1\n0 1 P0 1\n0 5\n"), Err(SchedError::Parse { line: 3, .. })));
    }

    #[test]
    fn state_limit_is_reported() {
        let dag = InstructionDag::new((0..10).map(|k| node(k, 1 + k % 3, Pipeline::P0, 1)).collect(), &[]).unwrap();
        let opts = SearchOptions { max_states: 5, ..Default::default() };
        assert!(matches!(astar_schedule_with(&dag, opts), Err(SchedError::StateLimit { .. })));
        let opts = SearchOptions { max_instructions: 4, ..Default::default() };
        assert!(matches!(astar_schedule_with(&dag, opts), Err(SchedError::TooLarge { .. })));
    }
}

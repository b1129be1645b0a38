//! Exhaustive exploration of the global state space under rendezvous
//! semantics. Slow but simple; the other checkers are tested against it.
//!
//! A node's control state is its position in the statement tree: one frame
//! per open statement list, holding the index into that list and, while a
//! loop below it runs, the iterations still to go. Infinite loops carry a
//! fixed marker instead of a counter, so every node has finitely many
//! control states and exploration always terminates.
//!
//! A state is a deadlock when some unterminated node can never move again,
//! whatever the others do. When every node is finite this is the same as
//! "nothing is enabled and not everyone is done".

use alloc::collections::{BTreeMap, VecDeque};
use alloc::vec;
use alloc::vec::Vec;

use crate::model::{LoopCount, NodeId, Program, Statement, Symbol};

pub const DEFAULT_MAX_STATES: usize = 1_000_000;

const FOREVER: u64 = u64::MAX;

/// (index into the statement list, iterations left of the loop at that
/// index while it runs).
type Frame = (u32, u64);

/// Control state of one node; empty once the node has terminated.
pub type NodeState = Vec<Frame>;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GlobalState(pub Vec<NodeState>);

impl GlobalState {
    pub fn is_terminated(&self, node: NodeId) -> bool {
        self.0[node.index()].is_empty()
    }

    pub fn all_terminated(&self) -> bool {
        self.0.iter().all(Vec::is_empty)
    }
}

/// Steps a program one rendezvous at a time.
#[derive(Debug, Clone)]
pub struct Simulator<'a> {
    program: &'a Program,
}

impl<'a> Simulator<'a> {
    pub fn new(program: &'a Program) -> Self {
        Simulator { program }
    }

    pub fn initial(&self) -> GlobalState {
        GlobalState(
            self.program
                .nodes()
                .map(|n| {
                    let mut st = vec![(0, 0)];
                    self.settle(n, &mut st);
                    st
                })
                .collect(),
        )
    }

    fn list_at<'b>(&'b self, node: NodeId, frames: &[Frame]) -> &'b [Statement] {
        let mut list = self.program.body(node);
        for f in frames {
            match &list[f.0 as usize] {
                Statement::For(_, inner) => list = inner,
                _ => unreachable!("frame below an event"),
            }
        }
        list
    }

    /// Moves forward until the top frame sits on an event or the node is
    /// done.
    fn settle(&self, node: NodeId, st: &mut NodeState) {
        loop {
            let Some(&(idx, _)) = st.last() else { return };
            let list = self.list_at(node, &st[..st.len() - 1]);
            match list.get(idx as usize) {
                None => {
                    st.pop();
                    let Some(parent) = st.last_mut() else { return };
                    if parent.1 != FOREVER {
                        parent.1 -= 1;
                    }
                    if parent.1 > 0 {
                        st.push((0, 0));
                    } else {
                        parent.0 += 1;
                    }
                }
                Some(Statement::Send(_) | Statement::Recv(_)) => return,
                Some(Statement::For(count, inner)) => {
                    let top = st.last_mut().unwrap();
                    let n = match count {
                        LoopCount::Infinite => FOREVER,
                        LoopCount::Finite(n) => *n,
                    };
                    if n == 0 || inner.is_empty() {
                        top.0 += 1;
                    } else {
                        top.1 = n;
                        st.push((0, 0));
                    }
                }
            }
        }
    }

    /// The event a node waits on, if it has not terminated.
    pub fn next_event(&self, state: &GlobalState, node: NodeId) -> Option<Symbol> {
        let st = &state.0[node.index()];
        let &(idx, _) = st.last()?;
        self.list_at(node, &st[..st.len() - 1])[idx as usize].symbol()
    }

    /// Symbols whose sender and receiver both wait on them.
    pub fn enabled(&self, state: &GlobalState) -> Vec<Symbol> {
        let mut out = Vec::new();
        for node in self.program.nodes() {
            let Some(s) = self.next_event(state, node) else { continue };
            if s.src == node
                && s.dst.index() < state.0.len()
                && self.next_event(state, s.dst) == Some(s)
            {
                out.push(s);
            }
        }
        out
    }

    /// Performs the rendezvous on `sym`. `None` if it is not enabled.
    pub fn fire(&self, state: &GlobalState, sym: Symbol) -> Option<GlobalState> {
        if self.next_event(state, sym.src) != Some(sym) || self.next_event(state, sym.dst) != Some(sym) {
            return None;
        }
        let mut next = state.clone();
        for node in [sym.src, sym.dst] {
            let st = &mut next.0[node.index()];
            st.last_mut().unwrap().0 += 1;
            self.settle(node, st);
        }
        Some(next)
    }

    /// Fires a sequence of rendezvous from the initial state.
    pub fn replay(&self, trace: &[Symbol]) -> Option<GlobalState> {
        trace
            .iter()
            .try_fold(self.initial(), |st, s| self.fire(&st, *s))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleVerdict {
    /// `trace` leads from the initial state to a state in which every node
    /// of `blocked` is unterminated and can never move again.
    DeadlockReachable { trace: Vec<Symbol>, blocked: Vec<NodeId> },
    DeadlockFree,
    Inconclusive(usize),
}

impl OracleVerdict {
    pub fn is_deadlock(&self) -> bool {
        matches!(self, OracleVerdict::DeadlockReachable { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleReport {
    pub verdict: OracleVerdict,
    pub states: usize,
}

/// Breadth-first search over all reachable states, followed by a backward
/// pass per node to find the states from which that node can still move.
pub fn explore(program: &Program, max_states: usize) -> OracleReport {
    let sim = Simulator::new(program);
    let mut states: Vec<GlobalState> = vec![sim.initial()];
    let mut index: BTreeMap<GlobalState, usize> = BTreeMap::new();
    index.insert(states[0].clone(), 0);
    let mut parent: Vec<Option<(usize, Symbol)>> = vec![None];
    let mut succ: Vec<Vec<usize>> = Vec::new();
    let mut moves: Vec<Vec<Symbol>> = Vec::new();
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        let en = sim.enabled(&states[i]);
        let mut out = Vec::with_capacity(en.len());
        for s in &en {
            let next = sim.fire(&states[i], *s).expect("enabled symbol fires");
            let j = match index.get(&next) {
                Some(&j) => j,
                None => {
                    if states.len() >= max_states {
                        return OracleReport {
                            verdict: OracleVerdict::Inconclusive(states.len()),
                            states: states.len(),
                        };
                    }
                    let j = states.len();
                    index.insert(next.clone(), j);
                    states.push(next);
                    parent.push(Some((i, *s)));
                    queue.push_back(j);
                    j
                }
            };
            out.push(j);
        }
        if succ.len() <= i {
            succ.resize(i + 1, Vec::new());
            moves.resize(i + 1, Vec::new());
        }
        succ[i] = out;
        moves[i] = en;
    }
    let total = states.len();
    succ.resize(total, Vec::new());
    moves.resize(total, Vec::new());

    let mut pred: Vec<Vec<usize>> = vec![Vec::new(); total];
    for (i, out) in succ.iter().enumerate() {
        for &j in out {
            pred[j].push(i);
        }
    }

    // blocked[i] lists the nodes that can never move again from state i.
    let mut blocked: Vec<Vec<NodeId>> = vec![Vec::new(); total];
    for node in program.nodes() {
        let mut can_move = vec![false; total];
        let mut stack = Vec::new();
        for i in 0..total {
            if moves[i].iter().any(|s| s.involves(node)) {
                can_move[i] = true;
                stack.push(i);
            }
        }
        while let Some(j) = stack.pop() {
            for &i in &pred[j] {
                if !can_move[i] {
                    can_move[i] = true;
                    stack.push(i);
                }
            }
        }
        for i in 0..total {
            if !can_move[i] && !states[i].is_terminated(node) {
                blocked[i].push(node);
            }
        }
    }

    let verdict = match (0..total).find(|&i| !blocked[i].is_empty()) {
        None => OracleVerdict::DeadlockFree,
        Some(i) => {
            let mut trace = Vec::new();
            let mut cur = i;
            while let Some((p, s)) = parent[cur] {
                trace.push(s);
                cur = p;
            }
            trace.reverse();
            OracleVerdict::DeadlockReachable {
                trace,
                blocked: core::mem::take(&mut blocked[i]),
            }
        }
    };
    OracleReport { verdict, states: total }
}

//! Deadlock detection for loop-free programs.
//!
//! Two independent methods:
//! * [`check_by_queues`]: each node is a queue of events; matching fronts
//!   are removed until the queues drain or nothing matches. Linear in the
//!   number of events.
//! * [`build_mdg`] + [`find_deadlock_cycle`]: the message dependence graph
//!   with every matched send/recv pair contracted into one vertex. The
//!   only circles of length 2 in the uncontracted graph are the matched
//!   pairs themselves, so a deadlock shows up as a plain directed cycle.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use crate::model::{EventQueues, NodeId, Symbol};
use crate::verdict::{AnalysisError, DeadlockWitness, Verdict};

/// Runs the queue algorithm, picking the next worklist entry with `pick`
/// (given the worklist length, returns an index). The verdict does not
/// depend on the choice; this hook exists to test that.
pub fn check_by_queues_with(queues: &EventQueues, mut pick: impl FnMut(usize) -> usize) -> Verdict {
    let n = queues.node_count();
    let mut front = vec![0usize; n];
    let mut work: Vec<NodeId> = (0..n as u32).map(NodeId).collect();
    while !work.is_empty() {
        let k = pick(work.len());
        let node = work.swap_remove(k);
        let Some(&sym) = queues.queue(node).get(front[node.index()]) else {
            continue;
        };
        let peer = sym.peer_of(node);
        if peer.index() < n && queues.queue(peer).get(front[peer.index()]) == Some(&sym) {
            front[node.index()] += 1;
            front[peer.index()] += 1;
            work.push(node);
            work.push(peer);
        }
    }
    let remaining: Vec<Vec<Symbol>> = queues
        .queues()
        .iter()
        .zip(&front)
        .map(|(q, &f)| q[f..].to_vec())
        .collect();
    if remaining.iter().all(Vec::is_empty) {
        Verdict::DeadlockFree
    } else {
        Verdict::Deadlock(DeadlockWitness::StuckQueues(EventQueues::new(remaining)))
    }
}

pub fn check_by_queues(queues: &EventQueues) -> Verdict {
    check_by_queues_with(queues, |len| len - 1)
}

/// The k-th send of `symbol` together with its k-th receive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MatchedPair {
    pub symbol: Symbol,
    pub k: u32,
}

/// An event with no partner (the symbol's send and receive totals differ).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UnpairedEvent {
    pub node: NodeId,
    pub symbol: Symbol,
    pub k: u32,
}

/// Contracted message dependence graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mdg {
    pairs: Vec<MatchedPair>,
    edges: Vec<(usize, usize)>,
    unpaired: Vec<UnpairedEvent>,
    totals: BTreeMap<Symbol, (u64, u64)>,
}

impl Mdg {
    pub fn pairs(&self) -> &[MatchedPair] {
        &self.pairs
    }

    /// Edges as indices into [`Mdg::pairs`], sorted and deduplicated.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn unpaired(&self) -> &[UnpairedEvent] {
        &self.unpaired
    }

    /// Send and receive totals of a symbol.
    pub fn totals(&self, sym: Symbol) -> (u64, u64) {
        self.totals.get(&sym).copied().unwrap_or((0, 0))
    }

    pub fn index_of(&self, pair: MatchedPair) -> Option<usize> {
        self.pairs.iter().position(|p| *p == pair)
    }
}

pub fn build_mdg(queues: &EventQueues) -> Mdg {
    let mut totals: BTreeMap<Symbol, (u64, u64)> = BTreeMap::new();
    for (i, q) in queues.queues().iter().enumerate() {
        let node = NodeId(i as u32);
        for s in q {
            let t = totals.entry(*s).or_default();
            if s.src == node {
                t.0 += 1;
            } else {
                t.1 += 1;
            }
        }
    }

    let mut pair_index: BTreeMap<MatchedPair, usize> = BTreeMap::new();
    let mut pairs = Vec::new();
    let mut edges = BTreeSet::new();
    let mut unpaired = Vec::new();
    for (i, q) in queues.queues().iter().enumerate() {
        let node = NodeId(i as u32);
        let mut seen: BTreeMap<Symbol, u32> = BTreeMap::new();
        let mut prev: Option<usize> = None;
        for s in q {
            let k = seen.entry(*s).or_insert(0);
            let this = *k;
            *k += 1;
            let (sends, recvs) = totals[s];
            if (this as u64) < sends.min(recvs) {
                let pair = MatchedPair { symbol: *s, k: this };
                let idx = *pair_index.entry(pair).or_insert_with(|| {
                    pairs.push(pair);
                    pairs.len() - 1
                });
                if let Some(p) = prev {
                    edges.insert((p, idx));
                }
                prev = Some(idx);
            } else {
                unpaired.push(UnpairedEvent { node, symbol: *s, k: this });
                prev = None;
            }
        }
    }
    Mdg {
        pairs,
        edges: edges.into_iter().collect(),
        unpaired,
        totals,
    }
}

/// What makes a dependence graph deadlock.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MdgDeadlock {
    Cycle(Vec<MatchedPair>),
    Unmatched { symbol: Symbol, sends: u64, recvs: u64 },
}

/// Looks for a directed cycle; failing that, for an unpaired event.
pub fn find_deadlock_cycle(mdg: &Mdg) -> Option<MdgDeadlock> {
    if let Some(cycle) = find_cycle(mdg.pairs.len(), &mdg.edges) {
        return Some(MdgDeadlock::Cycle(cycle.into_iter().map(|i| mdg.pairs[i]).collect()));
    }
    mdg.unpaired.first().map(|u| {
        let (sends, recvs) = mdg.totals(u.symbol);
        MdgDeadlock::Unmatched {
            symbol: u.symbol,
            sends,
            recvs,
        }
    })
}

/// Iterative three-colour DFS; returns the vertices of one cycle in order.
pub(crate) fn find_cycle(n: usize, edges: &[(usize, usize)]) -> Option<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
    }
    #[derive(Clone, Copy, PartialEq)]
    enum Colour {
        White,
        Grey,
        Black,
    }
    let mut colour = vec![Colour::White; n];
    let mut parent = vec![usize::MAX; n];
    for start in 0..n {
        if colour[start] != Colour::White {
            continue;
        }
        let mut stack = vec![(start, 0usize)];
        colour[start] = Colour::Grey;
        while let Some(top) = stack.last_mut() {
            let v = top.0;
            if let Some(&w) = adj[v].get(top.1) {
                top.1 += 1;
                match colour[w] {
                    Colour::White => {
                        colour[w] = Colour::Grey;
                        parent[w] = v;
                        stack.push((w, 0));
                    }
                    Colour::Grey => {
                        let mut cycle = vec![v];
                        let mut cur = v;
                        while cur != w {
                            cur = parent[cur];
                            cycle.push(cur);
                        }
                        cycle.reverse();
                        return Some(cycle);
                    }
                    Colour::Black => {}
                }
            } else {
                colour[v] = Colour::Black;
                stack.pop();
            }
        }
    }
    None
}

/// Queue verdict, with the dependence graph supplying the witness when it
/// can. With `verify` set, the graph test also runs on deadlock-free
/// inputs and any disagreement is an error.
pub fn check_smodel(queues: &EventQueues, verify: bool) -> Result<Verdict, AnalysisError> {
    let by_queues = check_by_queues(queues);
    if !by_queues.is_deadlock() && !verify {
        return Ok(by_queues);
    }
    let graph = find_deadlock_cycle(&build_mdg(queues));
    if verify && graph.is_some() != by_queues.is_deadlock() {
        return Err(AnalysisError::InternalDisagreement {
            queues_deadlock: by_queues.is_deadlock(),
            graph_deadlock: graph.is_some(),
        });
    }
    Ok(match (by_queues, graph) {
        (Verdict::DeadlockFree, _) => Verdict::DeadlockFree,
        (_, Some(MdgDeadlock::Cycle(c))) => Verdict::Deadlock(DeadlockWitness::MdgCycle(c)),
        (_, Some(MdgDeadlock::Unmatched { symbol, sends, recvs })) => {
            Verdict::Deadlock(DeadlockWitness::UnmatchedTotals { symbol, sends, recvs })
        }
        (stuck, None) => stuck,
    })
}

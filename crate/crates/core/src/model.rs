//! Program model for synchronous message-passing programs.
//!
//! A [`Program`] is a set of node programs, each a sequence of sends,
//! receives and counted loops. Messages are identified by the triple
//! (name, source node, destination node); see [`Symbol`].

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

/// Default cap on the number of events produced by unrolling.
pub const DEFAULT_MAX_EVENTS: usize = 1_000_000;

/// Process rank. Ranks are dense: `0..program.node_count()`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Interned message name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MsgId(pub u32);

impl MsgId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A message identity. Every send of a symbol lives in `src`, every
/// receive in `dst`; the k-th send is matched with the k-th receive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Symbol {
    pub msg: MsgId,
    pub src: NodeId,
    pub dst: NodeId,
}

impl Symbol {
    pub fn new(msg: MsgId, src: NodeId, dst: NodeId) -> Self {
        Symbol { msg, src, dst }
    }

    /// The other endpoint, seen from `node`.
    pub fn peer_of(&self, node: NodeId) -> NodeId {
        if node == self.src {
            self.dst
        } else {
            self.src
        }
    }

    pub fn involves(&self, node: NodeId) -> bool {
        self.src == node || self.dst == node
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LoopCount {
    Finite(u64),
    Infinite,
}

impl LoopCount {
    pub fn is_infinite(self) -> bool {
        matches!(self, LoopCount::Infinite)
    }

    pub fn finite(self) -> Option<u64> {
        match self {
            LoopCount::Finite(n) => Some(n),
            LoopCount::Infinite => None,
        }
    }
}

impl fmt::Display for LoopCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoopCount::Finite(n) => write!(f, "{n}"),
            LoopCount::Infinite => f.write_str("inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Statement {
    Send(Symbol),
    Recv(Symbol),
    For(LoopCount, Vec<Statement>),
}

impl Statement {
    /// The symbol of a send or receive.
    pub fn symbol(&self) -> Option<Symbol> {
        match self {
            Statement::Send(s) | Statement::Recv(s) => Some(*s),
            Statement::For(..) => None,
        }
    }
}

/// S-Model (no loops), L0 (loops, none nested) or L2 (nested loops).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModelClass {
    SModel,
    L0,
    L2,
}

impl fmt::Display for ModelClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelClass::SModel => "S-Model",
            ModelClass::L0 => "L0",
            ModelClass::L2 => "L2",
        })
    }
}

/// A whole program: one statement sequence per declared node.
///
/// `node_names` may be longer than `bodies`: names past the declared
/// nodes are endpoints that were referenced but never declared, which
/// [`validate`] rejects.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Program {
    node_names: Vec<String>,
    msg_names: Vec<String>,
    bodies: Vec<Vec<Statement>>,
}

impl Program {
    pub fn new(node_names: Vec<String>, msg_names: Vec<String>, bodies: Vec<Vec<Statement>>) -> Self {
        assert!(
            node_names.len() >= bodies.len(),
            "every declared node needs a name"
        );
        Program {
            node_names,
            msg_names,
            bodies,
        }
    }

    /// Number of declared nodes.
    pub fn node_count(&self) -> usize {
        self.bodies.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.bodies.len() as u32).map(NodeId)
    }

    pub fn body(&self, node: NodeId) -> &[Statement] {
        &self.bodies[node.index()]
    }

    pub fn bodies(&self) -> &[Vec<Statement>] {
        &self.bodies
    }

    pub fn node_name(&self, node: NodeId) -> &str {
        self.node_names
            .get(node.index())
            .map(String::as_str)
            .unwrap_or("?")
    }

    pub fn node_names(&self) -> &[String] {
        &self.node_names
    }

    pub fn msg_name(&self, msg: MsgId) -> &str {
        self.msg_names
            .get(msg.index())
            .map(String::as_str)
            .unwrap_or("?")
    }

    pub fn msg_names(&self) -> &[String] {
        &self.msg_names
    }

    pub fn node_by_name(&self, name: &str) -> Option<NodeId> {
        self.node_names[..self.bodies.len()]
            .iter()
            .position(|n| n == name)
            .map(|i| NodeId(i as u32))
    }

    /// Looks up a message symbol by name and endpoint names.
    pub fn symbol(&self, name: &str, src: &str, dst: &str) -> Option<Symbol> {
        let msg = self.msg_names.iter().position(|n| n == name)?;
        Some(Symbol::new(
            MsgId(msg as u32),
            self.node_by_name(src)?,
            self.node_by_name(dst)?,
        ))
    }

    /// "name: src→dst", used in reports.
    pub fn symbol_label(&self, sym: Symbol) -> String {
        alloc::format!(
            "{}: {}→{}",
            self.msg_name(sym.msg),
            self.node_name(sym.src),
            self.node_name(sym.dst)
        )
    }

    /// Same names, new bodies.
    pub fn with_bodies(&self, bodies: Vec<Vec<Statement>>) -> Program {
        Program::new(self.node_names.clone(), self.msg_names.clone(), bodies)
    }

    /// Every symbol in order of first appearance (node order, then text order).
    pub fn symbols(&self) -> Vec<Symbol> {
        fn walk(stmts: &[Statement], seen: &mut Vec<Symbol>) {
            for st in stmts {
                match st {
                    Statement::Send(s) | Statement::Recv(s) => {
                        if !seen.contains(s) {
                            seen.push(*s);
                        }
                    }
                    Statement::For(_, body) => walk(body, seen),
                }
            }
        }
        let mut seen = Vec::new();
        for body in &self.bodies {
            walk(body, &mut seen);
        }
        seen
    }

    /// Nodes declared with an empty statement list.
    pub fn empty_nodes(&self) -> Vec<NodeId> {
        self.nodes().filter(|n| self.body(*n).is_empty()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("program has no nodes")]
    NoNodes,
    #[error("node `{name}` is declared more than once")]
    DuplicateNode { name: String },
    #[error("message `{message}` in node `{node}` is sent from a node to itself")]
    SelfMessage { node: String, message: String },
    #[error("node `{node}` performs `{op} {message}` but the message belongs to `{src}`→`{dst}`")]
    MisplacedOperation {
        node: String,
        op: &'static str,
        message: String,
        src: String,
        dst: String,
    },
    #[error("message `{message}` in node `{node}` refers to undeclared node `{endpoint}`")]
    DanglingEndpoint {
        node: String,
        message: String,
        endpoint: String,
    },
    #[error("node `{node}` has an infinite loop below the top level")]
    NestedInfinite { node: String },
    #[error("node `{node}` has a loop with count 0")]
    ZeroLoopCount { node: String },
    #[error("node `{node}` has a loop with an empty body")]
    EmptyLoopBody { node: String },
    #[error("node `{node}` has statements after its infinite loop")]
    StatementAfterInfinite { node: String },
}

/// Checks every well-formedness rule and hands the program back.
pub fn validate(program: Program) -> Result<Program, ValidationError> {
    if program.bodies.is_empty() {
        return Err(ValidationError::NoNodes);
    }
    let declared = program.bodies.len();
    for i in 0..declared {
        if program.node_names[..i].contains(&program.node_names[i]) {
            return Err(ValidationError::DuplicateNode {
                name: program.node_names[i].clone(),
            });
        }
    }
    for node in program.nodes() {
        let body = program.body(node);
        if let Some(pos) = body
            .iter()
            .position(|s| matches!(s, Statement::For(LoopCount::Infinite, _)))
        {
            if pos + 1 != body.len() {
                return Err(ValidationError::StatementAfterInfinite {
                    node: program.node_name(node).into(),
                });
            }
        }
        validate_stmts(&program, node, body, true)?;
    }
    Ok(program)
}

fn validate_stmts(
    program: &Program,
    node: NodeId,
    stmts: &[Statement],
    top: bool,
) -> Result<(), ValidationError> {
    let node_name = || String::from(program.node_name(node));
    for st in stmts {
        match st {
            Statement::Send(s) | Statement::Recv(s) => {
                let message = || String::from(program.msg_name(s.msg));
                for end in [s.src, s.dst] {
                    if end.index() >= program.node_count() {
                        return Err(ValidationError::DanglingEndpoint {
                            node: node_name(),
                            message: message(),
                            endpoint: program.node_name(end).into(),
                        });
                    }
                }
                if s.src == s.dst {
                    return Err(ValidationError::SelfMessage {
                        node: node_name(),
                        message: message(),
                    });
                }
                let (op, owner) = match st {
                    Statement::Send(_) => ("send", s.src),
                    _ => ("recv", s.dst),
                };
                if owner != node {
                    return Err(ValidationError::MisplacedOperation {
                        node: node_name(),
                        op,
                        message: message(),
                        src: program.node_name(s.src).into(),
                        dst: program.node_name(s.dst).into(),
                    });
                }
            }
            Statement::For(count, body) => {
                match count {
                    LoopCount::Infinite if !top => {
                        return Err(ValidationError::NestedInfinite { node: node_name() })
                    }
                    LoopCount::Finite(0) => {
                        return Err(ValidationError::ZeroLoopCount { node: node_name() })
                    }
                    _ => {}
                }
                if body.is_empty() {
                    return Err(ValidationError::EmptyLoopBody { node: node_name() });
                }
                validate_stmts(program, node, body, false)?;
            }
        }
    }
    Ok(())
}

fn loop_depth(stmts: &[Statement]) -> usize {
    stmts
        .iter()
        .map(|s| match s {
            Statement::For(_, body) => 1 + loop_depth(body),
            _ => 0,
        })
        .max()
        .unwrap_or(0)
}

pub fn classify(program: &Program) -> ModelClass {
    match program.bodies.iter().map(|b| loop_depth(b)).max().unwrap_or(0) {
        0 => ModelClass::SModel,
        1 => ModelClass::L0,
        _ => ModelClass::L2,
    }
}

/// Loop-weighted occurrences of each symbol in one pass over a body.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OccurrenceCount(BTreeMap<Symbol, u64>);

impl OccurrenceCount {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, sym: Symbol) -> u64 {
        self.0.get(&sym).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Symbol, u64)> + '_ {
        self.0.iter().map(|(s, n)| (*s, *n))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.0.values().sum()
    }

    pub(crate) fn add(&mut self, sym: Symbol, n: u64) -> Result<(), CountError> {
        let slot = self.0.entry(sym).or_insert(0);
        *slot = slot.checked_add(n).ok_or(CountError::Overflow)?;
        Ok(())
    }

    pub(crate) fn add_scaled(&mut self, other: &OccurrenceCount, k: u64) -> Result<(), CountError> {
        for (s, n) in other.iter() {
            self.add(s, n.checked_mul(k).ok_or(CountError::Overflow)?)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum CountError {
    #[error("infinite loop inside a counted body")]
    InfiniteInside,
    #[error("occurrence count overflows 64 bits")]
    Overflow,
}

pub fn count_occurrences(body: &[Statement]) -> Result<OccurrenceCount, CountError> {
    let mut out = OccurrenceCount::new();
    for st in body {
        match st {
            Statement::Send(s) | Statement::Recv(s) => out.add(*s, 1)?,
            Statement::For(LoopCount::Infinite, _) => return Err(CountError::InfiniteInside),
            Statement::For(LoopCount::Finite(n), inner) => {
                out.add_scaled(&count_occurrences(inner)?, *n)?
            }
        }
    }
    Ok(out)
}

/// Per-node event sequences of an S-Model.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct EventQueues(Vec<Vec<Symbol>>);

impl EventQueues {
    pub fn new(queues: Vec<Vec<Symbol>>) -> Self {
        EventQueues(queues)
    }

    pub fn node_count(&self) -> usize {
        self.0.len()
    }

    pub fn queue(&self, node: NodeId) -> &[Symbol] {
        &self.0[node.index()]
    }

    pub fn queues(&self) -> &[Vec<Symbol>] {
        &self.0
    }

    pub fn total_events(&self) -> usize {
        self.0.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.iter().all(Vec::is_empty)
    }

    /// Rebuilds a loop-free program with the names of `names`.
    pub fn to_program(&self, names: &Program) -> Program {
        let bodies = self
            .0
            .iter()
            .enumerate()
            .map(|(i, q)| {
                let node = NodeId(i as u32);
                q.iter()
                    .map(|s| {
                        if s.src == node {
                            Statement::Send(*s)
                        } else {
                            Statement::Recv(*s)
                        }
                    })
                    .collect()
            })
            .collect();
        names.with_bodies(bodies)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum UnrollError {
    #[error("node {node} has an infinite loop; it cannot be unrolled")]
    InfiniteLoop { node: NodeId },
    #[error("unrolled model exceeds {limit} events")]
    SizeExceeded { limit: usize },
}

/// Replaces each `for(n)` by n copies of its body.
pub fn unroll(program: &Program, max_events: usize) -> Result<EventQueues, UnrollError> {
    let mut budget = max_events;
    let mut queues = Vec::with_capacity(program.node_count());
    for node in program.nodes() {
        let mut q = Vec::new();
        unroll_into(program.body(node), node, &mut q, &mut budget, max_events)?;
        queues.push(q);
    }
    Ok(EventQueues(queues))
}

fn unroll_into(
    stmts: &[Statement],
    node: NodeId,
    out: &mut Vec<Symbol>,
    budget: &mut usize,
    limit: usize,
) -> Result<(), UnrollError> {
    for st in stmts {
        match st {
            Statement::Send(s) | Statement::Recv(s) => {
                if *budget == 0 {
                    return Err(UnrollError::SizeExceeded { limit });
                }
                *budget -= 1;
                out.push(*s);
            }
            Statement::For(LoopCount::Infinite, _) => {
                return Err(UnrollError::InfiniteLoop { node })
            }
            Statement::For(LoopCount::Finite(n), body) => {
                for _ in 0..*n {
                    unroll_into(body, node, out, budget, limit)?;
                }
            }
        }
    }
    Ok(())
}

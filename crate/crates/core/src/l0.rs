//! Single-loop programs: every node is one top-level loop over a loop-free
//! body.
//!
//! The pipeline builds a ratio equation group from per-iteration message
//! counts, checks that declared loop times respect the solved ratios, cuts
//! each loop down to `lcm / p_i` iterations and hands the unrolled result
//! to the S-Model checker.

use alloc::vec::Vec;

use thiserror::Error;

use crate::model::{count_occurrences, unroll, LoopCount, NodeId, Program, Statement, Symbol};
use crate::ratio::{solve, RatioEquation, RatioEquationGroup, RatioSolution, RegError, VarId};
use crate::smodel::check_smodel;
use crate::verdict::{AnalysisError, DeadlockWitness, LoopTimeTerm, RatioConflict, Verdict};
use crate::CheckOptions;

/// One node split around its (single) top-level loop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct L0Node {
    pub preamble: Vec<Statement>,
    pub body_loop: Option<(LoopCount, Vec<Statement>)>,
    pub postamble: Vec<Statement>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct L0View {
    nodes: Vec<L0Node>,
}

impl L0View {
    /// `None` when some node has two top-level loops or a nested loop.
    pub fn from_program(program: &Program) -> Option<L0View> {
        let mut nodes = Vec::with_capacity(program.node_count());
        for node in program.nodes() {
            let body = program.body(node);
            let loops: Vec<usize> = body
                .iter()
                .enumerate()
                .filter(|(_, s)| matches!(s, Statement::For(..)))
                .map(|(i, _)| i)
                .collect();
            match loops.as_slice() {
                [] => nodes.push(L0Node {
                    preamble: body.to_vec(),
                    body_loop: None,
                    postamble: Vec::new(),
                }),
                [k] => {
                    let Statement::For(count, inner) = &body[*k] else { unreachable!() };
                    if inner.iter().any(|s| matches!(s, Statement::For(..))) {
                        return None;
                    }
                    nodes.push(L0Node {
                        preamble: body[..*k].to_vec(),
                        body_loop: Some((*count, inner.clone())),
                        postamble: body[k + 1..].to_vec(),
                    });
                }
                _ => return None,
            }
        }
        Some(L0View { nodes })
    }

    pub fn nodes(&self) -> &[L0Node] {
        &self.nodes
    }

    /// Every node is either empty or exactly one loop.
    pub fn is_canonical(&self) -> bool {
        self.nodes
            .iter()
            .all(|n| n.preamble.is_empty() && n.postamble.is_empty())
    }

    pub fn loop_times(&self) -> LoopTimes {
        LoopTimes(
            self.nodes
                .iter()
                .map(|n| n.body_loop.as_ref().map(|(c, _)| *c))
                .collect(),
        )
    }

    fn loop_body(&self, node: NodeId) -> &[Statement] {
        self.nodes[node.index()]
            .body_loop
            .as_ref()
            .map(|(_, b)| b.as_slice())
            .unwrap_or(&[])
    }
}

/// Declared loop count per node; `None` for a node without a loop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoopTimes(pub Vec<Option<LoopCount>>);

/// A ratio equation group together with the symbol behind each equation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelledReg {
    pub group: RatioEquationGroup,
    pub symbols: Vec<Symbol>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("symbol occurs {src_count}x per iteration at its sender and {dst_count}x at its receiver")]
pub struct UnmatchedSymbol {
    pub symbol: Symbol,
    pub src_count: u64,
    pub dst_count: u64,
}

pub(crate) fn var(node: NodeId) -> VarId {
    VarId(node.0)
}

/// Emits `p_i : p_j = c_i : c_j` (i < j) for each symbol, from
/// per-iteration counts. Symbols are taken in order of first appearance.
pub(crate) fn reg_from_counts(
    node_count: usize,
    order: &[Symbol],
    count: impl Fn(NodeId, Symbol) -> u64,
) -> Result<LabelledReg, UnmatchedSymbol> {
    let mut group = RatioEquationGroup::with_vars(node_count);
    let mut symbols = Vec::new();
    for &s in order {
        let (cs, cd) = (count(s.src, s), count(s.dst, s));
        if cs == 0 || cd == 0 {
            return Err(UnmatchedSymbol {
                symbol: s,
                src_count: cs,
                dst_count: cd,
            });
        }
        let eq = if s.src < s.dst {
            RatioEquation::new(var(s.src), var(s.dst), cs, cd)
        } else {
            RatioEquation::new(var(s.dst), var(s.src), cd, cs)
        };
        group.push(eq);
        symbols.push(s);
    }
    Ok(LabelledReg { group, symbols })
}

fn symbols_of(view: &L0View) -> Vec<Symbol> {
    let mut seen = Vec::new();
    for n in &view.nodes {
        if let Some((_, body)) = &n.body_loop {
            for s in body.iter().filter_map(Statement::symbol) {
                if !seen.contains(&s) {
                    seen.push(s);
                }
            }
        }
    }
    seen
}

/// One variable per node, one equation per symbol of the loop bodies.
pub fn build_l0_reg(view: &L0View) -> Result<LabelledReg, UnmatchedSymbol> {
    let counts: Vec<_> = (0..view.nodes.len() as u32)
        .map(|i| count_occurrences(view.loop_body(NodeId(i))).unwrap_or_default())
        .collect();
    reg_from_counts(view.nodes.len(), &symbols_of(view), |n, s| counts[n.index()].get(s))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Consistency {
    Consistent,
    Inconsistent(RatioConflict),
}

/// Within each component all products `p_i * t_i` must agree, an infinite
/// loop counting as `t = 0`. Components are never compared with each other.
pub fn ratio_consistent(
    solution: &RatioSolution,
    times: &LoopTimes,
) -> Result<Consistency, AnalysisError> {
    for comp in solution.components() {
        let mut first: Option<(LoopTimeTerm, u128)> = None;
        for v in comp {
            let node = NodeId(v.0);
            let Some(Some(t)) = times.0.get(node.index()) else { continue };
            let term = LoopTimeTerm {
                node,
                ratio: solution.value(*v).unwrap_or(1),
                times: *t,
            };
            let product = term.product().ok_or(AnalysisError::Reg(RegError::Overflow))?;
            match first {
                None => first = Some((term, product)),
                Some((f, fp)) if fp != product => {
                    return Ok(Consistency::Inconsistent(RatioConflict::LoopTimes {
                        first: f,
                        second: term,
                    }))
                }
                _ => {}
            }
        }
    }
    Ok(Consistency::Consistent)
}

/// Loop times after slicing, plus the lcm used for each component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slice {
    pub program: Program,
    pub times: Vec<Option<u64>>,
    pub lcms: Vec<(Vec<NodeId>, u128)>,
}

/// Sets each loop count to `lcm / p_i`, the lcm taken over the node's
/// component. Infinite loops become finite.
pub fn slice(program: &Program, view: &L0View, solution: &RatioSolution) -> Result<Slice, AnalysisError> {
    let overflow = || AnalysisError::Reg(RegError::Overflow);
    let mut times = alloc::vec![None; view.nodes.len()];
    let mut lcms = Vec::new();
    for comp in solution.components() {
        let l = solution.lcm(comp).map_err(AnalysisError::Reg)?;
        for v in comp {
            let p = solution.value(*v).unwrap_or(1);
            times[v.0 as usize] = Some(u64::try_from(l / p).map_err(|_| overflow())?);
        }
        lcms.push((comp.iter().map(|v| NodeId(v.0)).collect(), l));
    }
    let mut bodies = Vec::with_capacity(view.nodes.len());
    let mut sliced_times = Vec::with_capacity(view.nodes.len());
    for (i, n) in view.nodes.iter().enumerate() {
        let mut body = n.preamble.clone();
        match &n.body_loop {
            Some((_, inner)) => {
                let t = times[i].unwrap_or(1);
                body.push(Statement::For(LoopCount::Finite(t), inner.clone()));
                sliced_times.push(Some(t));
            }
            None => sliced_times.push(None),
        }
        body.extend(n.postamble.iter().cloned());
        bodies.push(body);
    }
    Ok(Slice {
        program: program.with_bodies(bodies),
        times: sliced_times,
        lcms,
    })
}

/// Everything the single-loop pipeline computed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct L0Analysis {
    pub verdict: Verdict,
    pub reg: Option<LabelledReg>,
    pub solution: Option<RatioSolution>,
    pub slice: Option<Slice>,
}

pub fn check_l0(program: &Program, options: &CheckOptions) -> Result<L0Analysis, AnalysisError> {
    let view = L0View::from_program(program).ok_or(AnalysisError::NotApplicable {
        method: "l0",
        reason: "a node has nested loops or more than one loop",
    })?;
    if !view.is_canonical() {
        return Err(AnalysisError::NotApplicable {
            method: "l0",
            reason: "every node must be a single top-level loop (or empty)",
        });
    }
    let mut out = L0Analysis {
        verdict: Verdict::DeadlockFree,
        reg: None,
        solution: None,
        slice: None,
    };
    let reg = match build_l0_reg(&view) {
        Ok(reg) => reg,
        Err(u) => {
            out.verdict = Verdict::Deadlock(DeadlockWitness::UnmatchedTotals {
                symbol: u.symbol,
                sends: u.src_count,
                recvs: u.dst_count,
            });
            return Ok(out);
        }
    };
    let solution = match solve(&reg.group) {
        Ok(s) => s,
        Err(RegError::Inconsistent(inc)) => {
            out.verdict = Verdict::Deadlock(DeadlockWitness::RatioInconsistency(
                unsolvable_conflict(&reg, inc),
            ));
            out.reg = Some(reg);
            return Ok(out);
        }
        Err(e) => return Err(AnalysisError::Reg(e)),
    };
    out.reg = Some(reg);
    if let Consistency::Inconsistent(conflict) = ratio_consistent(&solution, &view.loop_times())? {
        out.verdict = Verdict::Deadlock(DeadlockWitness::RatioInconsistency(conflict));
        out.solution = Some(solution);
        return Ok(out);
    }
    let sliced = slice(program, &view, &solution)?;
    let queues = unroll(&sliced.program, options.max_events)?;
    debug_assert!(crate::balanced(&queues));
    out.verdict = check_smodel(&queues, options.verify)?;
    out.solution = Some(solution);
    out.slice = Some(sliced);
    Ok(out)
}

/// Attaches the originating symbols to an inconsistency witness.
pub(crate) fn unsolvable_conflict(reg: &LabelledReg, inc: crate::ratio::Inconsistency) -> RatioConflict {
    let label = |eq: &RatioEquation| {
        reg.group
            .equations()
            .iter()
            .position(|e| e == eq)
            .map(|k| reg.symbols[k])
    };
    let symbols = inc
        .path
        .iter()
        .chain(core::iter::once(&inc.conflicting))
        .filter_map(label)
        .collect();
    RatioConflict::Unsolvable {
        inconsistency: inc,
        symbols,
    }
}

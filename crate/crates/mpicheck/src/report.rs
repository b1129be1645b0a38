//! The JSON report written by `check --json`.
//!
//! Shape (all keys camelCase):
//!
//! ```text
//! verdict        "DeadlockFree" | "Deadlock"
//! phase          "smodel" | "l0" | "l2"
//! class          "S-Model" | "L0" | "L2"
//! nodes          node names by rank
//! witness        null | { kind, description, ...kind-specific fields }
//! regEquations   [{ equation, symbol }]
//! regSolutions   value of p_i for every node rank (1 when unconstrained)
//! regComponents  node names per ratio component
//! lcms           lcm per component (single-loop programs)
//! slicedTimes    loop time per node after slicing, null for no loop
//! fppTrace       null unless tracing; one entry per pass of the pool loop
//! notes          free-form remarks, e.g. empty nodes
//! timings        { parseMs, analysisMs }
//! ```

use serde::{Deserialize, Serialize};

use mpicheck_core::l0::LabelledReg;
use mpicheck_core::l2::{render_power, FppStep};
use mpicheck_core::model::{NodeId, Program};
use mpicheck_core::ratio::{RatioSolution, VarId};
use mpicheck_core::verdict::{DeadlockWitness, LoopTimeTerm, RatioConflict};
use mpicheck_core::{Analysis, Details, Verdict};

use crate::text;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerdictKind {
    DeadlockFree,
    Deadlock,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Report {
    pub verdict: VerdictKind,
    pub phase: String,
    pub class: String,
    pub nodes: Vec<String>,
    pub witness: Option<WitnessReport>,
    pub reg_equations: Vec<EquationReport>,
    pub reg_solutions: Vec<u128>,
    pub reg_components: Vec<Vec<String>>,
    pub lcms: Vec<u128>,
    pub sliced_times: Vec<Option<u64>>,
    pub fpp_trace: Option<Vec<StepReport>>,
    pub notes: Vec<String>,
    pub timings: Timings,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "camelCase")]
pub struct Timings {
    pub parse_ms: f64,
    pub analysis_ms: f64,
}

impl Eq for Timings {}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquationReport {
    pub equation: String,
    pub symbol: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub description: String,
    #[serde(flatten)]
    pub detail: WitnessDetail,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase", rename_all_fields = "camelCase")]
pub enum WitnessDetail {
    StuckQueues { queues: Vec<NodeEvents> },
    MdgCycle { pairs: Vec<String> },
    UnmatchedTotals { symbol: String, sends: u64, recvs: u64 },
    UnsolvableRatios { equations: Vec<String>, symbols: Vec<String> },
    LoopTimes { first: TermReport, second: TermReport },
    FppStuck { pool: Vec<PoolEntry>, blocked: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeEvents {
    pub node: String,
    pub events: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermReport {
    pub node: String,
    pub ratio: u128,
    /// Loop count, `"inf"` for an endless loop.
    pub times: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub node: String,
    pub power: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetReport {
    pub members: Vec<String>,
    pub symbols: Vec<String>,
    pub eligible: bool,
    pub action: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StepReport {
    pub pool: Vec<PoolEntry>,
    /// Ratio solution over the pool, one list of `[node, value]` per
    /// component.
    pub reg_components: Vec<Vec<(String, u128)>>,
    pub sets: Vec<SetReport>,
    pub unfolded: Vec<String>,
}

fn names(program: &Program, nodes: impl IntoIterator<Item = NodeId>) -> Vec<String> {
    nodes.into_iter().map(|n| program.node_name(n).to_string()).collect()
}

fn pool(program: &Program, pool: &[(NodeId, mpicheck_core::l2::Power)]) -> Vec<PoolEntry> {
    pool.iter()
        .map(|(n, p)| PoolEntry {
            node: program.node_name(*n).to_string(),
            power: render_power(p, program),
        })
        .collect()
}

fn term(program: &Program, t: &LoopTimeTerm) -> TermReport {
    TermReport {
        node: program.node_name(t.node).to_string(),
        ratio: t.ratio,
        times: t.times.to_string(),
    }
}

pub fn witness(program: &Program, w: &DeadlockWitness) -> WitnessReport {
    let label = |s| text::symbol(program, s);
    let detail = match w {
        DeadlockWitness::StuckQueues(q) => WitnessDetail::StuckQueues {
            queues: program
                .nodes()
                .map(|n| NodeEvents {
                    node: program.node_name(n).to_string(),
                    events: q.queue(n).iter().map(|s| label(*s)).collect(),
                })
                .collect(),
        },
        DeadlockWitness::MdgCycle(c) => WitnessDetail::MdgCycle {
            pairs: c.iter().map(|p| text::pair(program, *p)).collect(),
        },
        DeadlockWitness::UnmatchedTotals { symbol, sends, recvs } => WitnessDetail::UnmatchedTotals {
            symbol: label(*symbol),
            sends: *sends,
            recvs: *recvs,
        },
        DeadlockWitness::RatioInconsistency(RatioConflict::Unsolvable { inconsistency, symbols }) => {
            let mut equations: Vec<String> = inconsistency.path.iter().map(text::equation).collect();
            equations.push(text::equation(&inconsistency.conflicting));
            WitnessDetail::UnsolvableRatios {
                equations,
                symbols: symbols.iter().map(|s| label(*s)).collect(),
            }
        }
        DeadlockWitness::RatioInconsistency(RatioConflict::LoopTimes { first, second }) => WitnessDetail::LoopTimes {
            first: term(program, first),
            second: term(program, second),
        },
        DeadlockWitness::FppStuck(snap) => WitnessDetail::FppStuck {
            pool: pool(program, &snap.pool),
            blocked: names(program, snap.blocked.iter().copied()),
        },
    };
    WitnessReport {
        description: text::witness(program, w),
        detail,
    }
}

fn equations(program: &Program, reg: &LabelledReg) -> Vec<EquationReport> {
    reg.group
        .equations()
        .iter()
        .zip(&reg.symbols)
        .map(|(eq, s)| EquationReport {
            equation: text::equation(eq),
            symbol: text::symbol(program, *s),
        })
        .collect()
}

fn components(program: &Program, s: &RatioSolution) -> Vec<Vec<String>> {
    s.components()
        .iter()
        .map(|c| names(program, c.iter().map(|v| NodeId(v.0))))
        .collect()
}

fn values(program: &Program, s: &RatioSolution) -> Vec<u128> {
    program
        .nodes()
        .map(|n| s.value(VarId(n.0)).unwrap_or(1))
        .collect()
}

fn step(program: &Program, st: &FppStep) -> StepReport {
    StepReport {
        pool: pool(program, &st.pool),
        reg_components: st
            .reg
            .as_ref()
            .map(|s| {
                s.components()
                    .iter()
                    .map(|c| {
                        c.iter()
                            .map(|v| (program.node_name(NodeId(v.0)).to_string(), s.value(*v).unwrap_or(1)))
                            .collect()
                    })
                    .collect()
            })
            .unwrap_or_default(),
        sets: st
            .sets
            .iter()
            .map(|set| SetReport {
                members: names(program, set.members.iter().copied()),
                symbols: set.symbols.iter().map(|s| text::symbol(program, *s)).collect(),
                eligible: set.eligible,
                action: text::action(program, &set.action),
            })
            .collect(),
        unfolded: names(program, st.unfolded.iter().copied()),
    }
}

pub fn build(program: &Program, analysis: &Analysis, with_trace: bool, timings: Timings) -> Report {
    let mut report = Report {
        verdict: match analysis.verdict {
            Verdict::DeadlockFree => VerdictKind::DeadlockFree,
            Verdict::Deadlock(_) => VerdictKind::Deadlock,
        },
        phase: analysis.phase.name().to_string(),
        class: analysis.class.to_string(),
        nodes: names(program, program.nodes()),
        witness: analysis.verdict.witness().map(|w| witness(program, w)),
        reg_equations: Vec::new(),
        reg_solutions: Vec::new(),
        reg_components: Vec::new(),
        lcms: Vec::new(),
        sliced_times: Vec::new(),
        fpp_trace: None,
        notes: Vec::new(),
        timings,
    };
    let empty = program.empty_nodes();
    if !empty.is_empty() {
        report.notes.push(format!(
            "empty node(s) {} terminate immediately",
            names(program, empty).join(", ")
        ));
    }
    match &analysis.details {
        Details::SModel(_) => {}
        Details::L0(a) => {
            if let Some(reg) = &a.reg {
                report.reg_equations = equations(program, reg);
            }
            if let Some(s) = &a.solution {
                report.reg_solutions = values(program, s);
                report.reg_components = components(program, s);
            }
            if let Some(slice) = &a.slice {
                report.lcms = slice.lcms.iter().map(|(_, l)| *l).collect();
                report.sliced_times = slice.times.clone();
            }
        }
        Details::L2(a) => {
            if let Some(strip) = &a.strip {
                report.reg_equations = equations(program, &strip.reg);
                if let Some(s) = &strip.solution {
                    report.reg_solutions = values(program, s);
                    report.reg_components = components(program, s);
                }
            } else if a.working.is_empty() {
                // decided before any reduction
            } else {
                report
                    .notes
                    .push("a node runs statements before its endless loop; outer loops were kept".into());
            }
            if with_trace {
                report.fpp_trace = Some(a.trace.iter().map(|s| step(program, s)).collect());
            }
        }
    }
    report
}

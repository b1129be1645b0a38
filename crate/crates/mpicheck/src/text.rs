//! Human-readable rendering of verdicts, witnesses and traces.

use std::fmt::Write;

use mpicheck_core::l0::{L0Analysis, LabelledReg};
use mpicheck_core::l2::{render_power, render_string, FppStep, L2Analysis, SetAction};
use mpicheck_core::model::{NodeId, Program, Symbol};
use mpicheck_core::ratio::{RatioEquation, RatioSolution, VarId};
use mpicheck_core::smodel::MatchedPair;
use mpicheck_core::verdict::{DeadlockWitness, LoopTimeTerm, RatioConflict};
use mpicheck_core::{Analysis, Details, Verdict};

pub fn symbol(program: &Program, s: Symbol) -> String {
    program.symbol_label(s)
}

pub fn pair(program: &Program, p: MatchedPair) -> String {
    format!("{}#{}", program.symbol_label(p.symbol), p.k + 1)
}

pub fn node_list(program: &Program, nodes: impl IntoIterator<Item = NodeId>) -> String {
    let names: Vec<&str> = nodes.into_iter().map(|n| program.node_name(n)).collect();
    format!("{{{}}}", names.join(", "))
}

pub fn equation(eq: &RatioEquation) -> String {
    eq.to_string()
}

/// `p0 : p1 : p2 = 1 : 2 : 1` for each component, joined by `, `.
pub fn solution(s: &RatioSolution) -> String {
    s.components()
        .iter()
        .map(|comp| {
            let vars: Vec<String> = comp.iter().map(VarId::to_string).collect();
            let vals: Vec<String> = comp.iter().map(|v| s.value(*v).unwrap_or(1).to_string()).collect();
            format!("{} = {}", vars.join(" : "), vals.join(" : "))
        })
        .collect::<Vec<_>>()
        .join(", ")
}

fn term(program: &Program, t: &LoopTimeTerm) -> String {
    format!("{}: p = {}, t = {}", program.node_name(t.node), t.ratio, t.times)
}

pub fn witness(program: &Program, w: &DeadlockWitness) -> String {
    match w {
        DeadlockWitness::StuckQueues(q) => {
            let parts: Vec<String> = program
                .nodes()
                .filter(|n| !q.queue(*n).is_empty())
                .map(|n| {
                    let head = q.queue(n)[0];
                    format!("{} waits on {}", program.node_name(n), symbol(program, head))
                })
                .collect();
            format!("no rendezvous possible: {}", parts.join("; "))
        }
        DeadlockWitness::MdgCycle(c) => {
            let mut labels: Vec<String> = c.iter().map(|p| pair(program, *p)).collect();
            if let Some(first) = labels.first().cloned() {
                labels.push(first);
            }
            format!("dependence cycle of {} pairs: {}", c.len(), labels.join(" -> "))
        }
        DeadlockWitness::UnmatchedTotals { symbol: s, sends, recvs } => format!(
            "{} is sent {} time(s) but received {} time(s)",
            symbol(program, *s),
            sends,
            recvs
        ),
        DeadlockWitness::RatioInconsistency(RatioConflict::Unsolvable { inconsistency, symbols }) => {
            let mut eqs: Vec<String> = inconsistency.path.iter().map(equation).collect();
            eqs.push(equation(&inconsistency.conflicting));
            let syms: Vec<String> = symbols.iter().map(|s| symbol(program, *s)).collect();
            format!(
                "ratio equations have no solution: {} (from {})",
                eqs.join(", "),
                syms.join(", ")
            )
        }
        DeadlockWitness::RatioInconsistency(RatioConflict::LoopTimes { first, second }) => format!(
            "loop times break the ratios: {} vs {} (p * t differs; infinite counts as 0)",
            term(program, first),
            term(program, second)
        ),
        DeadlockWitness::FppStuck(snap) => {
            let pool: Vec<String> = snap
                .pool
                .iter()
                .map(|(n, p)| format!("{}: {}", program.node_name(*n), render_power(p, program)))
                .collect();
            format!(
                "no related set can be reduced; blocked {} with pool {}",
                node_list(program, snap.blocked.iter().copied()),
                pool.join(", ")
            )
        }
    }
}

pub fn verdict_line(program: &Program, v: &Verdict) -> String {
    match v {
        Verdict::DeadlockFree => "verdict: deadlock-free".into(),
        Verdict::Deadlock(w) => format!("verdict: DEADLOCK\nwitness: {}", witness(program, w)),
    }
}

pub fn reg_lines(program: &Program, reg: &LabelledReg, out: &mut String) {
    for (eq, s) in reg.group.equations().iter().zip(&reg.symbols) {
        let _ = writeln!(out, "  {:<20} {}", equation(eq), symbol(program, *s));
    }
}

fn l0_trace(program: &Program, a: &L0Analysis, out: &mut String) {
    if let Some(reg) = &a.reg {
        out.push_str("ratio equations\n");
        reg_lines(program, reg, out);
    }
    if let Some(s) = &a.solution {
        let _ = writeln!(out, "solution: {}", solution(s));
    }
    if let Some(slice) = &a.slice {
        out.push_str("ratio consistent\n");
        for (nodes, l) in &slice.lcms {
            let _ = writeln!(out, "lcm {} over {}", l, node_list(program, nodes.iter().copied()));
        }
        let times: Vec<String> = program
            .nodes()
            .zip(&slice.times)
            .filter_map(|(n, t)| t.map(|t| format!("{} {}", program.node_name(n), t)))
            .collect();
        let _ = writeln!(out, "sliced loop times: {}", times.join(", "));
    }
}

pub fn pool_line(program: &Program, pool: &[(NodeId, mpicheck_core::l2::Power)]) -> String {
    pool.iter()
        .map(|(n, p)| format!("{}: {}", program.node_name(*n), render_power(p, program)))
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn action(program: &Program, a: &SetAction) -> String {
    let per = |v: &[(NodeId, u64)]| {
        v.iter()
            .map(|(n, u)| format!("{} x{}", program.node_name(*n), u))
            .collect::<Vec<_>>()
            .join(", ")
    };
    match a {
        SetAction::Waiting => "waiting (an endpoint is busy with an earlier power)".into(),
        SetAction::Reduced { rounds, per_round } => {
            format!("removed {} round(s) of {}", rounds, per(per_round))
        }
        SetAction::Perpetual { per_round } => format!("repeats forever without blocking ({})", per(per_round)),
        SetAction::NoProgress => "no whole round available".into(),
        SetAction::Deadlock => "one round deadlocks".into(),
    }
}

fn step_lines(program: &Program, i: usize, step: &FppStep, out: &mut String) {
    let _ = writeln!(out, "pass {}", i + 1);
    let _ = writeln!(out, "  FPP  {}", pool_line(program, &step.pool));
    if let Some(s) = &step.reg {
        let _ = writeln!(out, "  REG  {}", solution(s));
    }
    for set in &step.sets {
        let syms: Vec<&str> = set.symbols.iter().map(|s| program.msg_name(s.msg)).collect();
        let _ = writeln!(
            out,
            "  {} over {}: {}",
            node_list(program, set.members.iter().copied()),
            syms.join(", "),
            action(program, &set.action)
        );
    }
    if !step.unfolded.is_empty() {
        let _ = writeln!(
            out,
            "  split leading power of {}",
            node_list(program, step.unfolded.iter().copied())
        );
    }
}

fn l2_trace(program: &Program, a: &L2Analysis, out: &mut String) {
    out.push_str("power strings\n");
    for n in program.nodes() {
        let _ = writeln!(out, "  {}: {}", program.node_name(n), render_string(&a.strings[n.index()], program));
    }
    if let Some(strip) = &a.strip {
        out.push_str("ratio equations over one outer iteration\n");
        reg_lines(program, &strip.reg, out);
        if let Some(s) = &strip.solution {
            let _ = writeln!(out, "solution: {}", solution(s));
        }
        if !a.working.is_empty() {
            out.push_str("outer loops replaced by one round\n");
            for n in program.nodes() {
                let _ = writeln!(out, "  {}: {}", program.node_name(n), render_string(&a.working[n.index()], program));
            }
        }
    }
    for (i, step) in a.trace.iter().enumerate() {
        step_lines(program, i, step, out);
    }
}

/// The stage-by-stage narration printed by `check --trace`.
pub fn trace(program: &Program, analysis: &Analysis) -> String {
    let mut out = String::new();
    match &analysis.details {
        Details::SModel(q) => {
            let _ = writeln!(out, "S-Model with {} events", q.total_events());
        }
        Details::L0(a) => l0_trace(program, a, &mut out),
        Details::L2(a) => l2_trace(program, a, &mut out),
    }
    out
}

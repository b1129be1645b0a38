//! Graphviz export of the message dependence graph.

use std::collections::BTreeSet;
use std::fmt::Write;

use mpicheck_core::model::Program;
use mpicheck_core::smodel::{find_deadlock_cycle, Mdg, MdgDeadlock};

use crate::text;

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

/// One vertex per matched pair, labelled `name: src→dst#k`; edges of a
/// deadlock cycle are drawn red and bold.
pub fn mdg_to_dot(program: &Program, mdg: &Mdg) -> String {
    let mut cycle_edges = BTreeSet::new();
    if let Some(MdgDeadlock::Cycle(c)) = find_deadlock_cycle(mdg) {
        let idx: Vec<usize> = c.iter().filter_map(|p| mdg.index_of(*p)).collect();
        for k in 0..idx.len() {
            cycle_edges.insert((idx[k], idx[(k + 1) % idx.len()]));
        }
    }
    let mut out = String::from("digraph mdg {\n  node [shape=box];\n");
    for (i, p) in mdg.pairs().iter().enumerate() {
        let _ = writeln!(out, "  n{i} [label={}];", quote(&text::pair(program, *p)));
    }
    for &(a, b) in mdg.edges() {
        if cycle_edges.contains(&(a, b)) {
            let _ = writeln!(out, "  n{a} -> n{b} [color=red, penwidth=2];");
        } else {
            let _ = writeln!(out, "  n{a} -> n{b};");
        }
    }
    for u in mdg.unpaired() {
        let _ = writeln!(
            out,
            "  // unmatched: {} at {}",
            text::symbol(program, u.symbol),
            program.node_name(u.node)
        );
    }
    out.push_str("}\n");
    out
}

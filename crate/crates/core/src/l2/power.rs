//! Loop powers: a node program as a sequence of `body^n` terms.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::model::{CountError, LoopCount, NodeId, OccurrenceCount, Program, Statement, Symbol, UnrollError};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Body {
    /// A run of plain events.
    Lit(Vec<Symbol>),
    Seq(Vec<Power>),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Power {
    pub body: Body,
    pub exp: LoopCount,
}

pub type PowerString = Vec<Power>;

impl Power {
    pub fn lit(symbols: Vec<Symbol>, exp: LoopCount) -> Power {
        Power { body: Body::Lit(symbols), exp }
    }

    pub fn seq(items: Vec<Power>, exp: LoopCount) -> Power {
        Power { body: Body::Seq(items), exp }
    }

    /// A single event with exponent 1.
    pub fn is_atomic(&self) -> bool {
        self.exp == LoopCount::Finite(1) && matches!(&self.body, Body::Lit(s) if s.len() == 1)
    }

    pub fn is_infinite(&self) -> bool {
        self.exp.is_infinite()
    }

    /// Occurrences in one iteration of the body.
    pub fn body_counts(&self) -> Result<OccurrenceCount, CountError> {
        let mut out = OccurrenceCount::new();
        match &self.body {
            Body::Lit(syms) => {
                for s in syms {
                    out.add(*s, 1)?;
                }
            }
            Body::Seq(items) => {
                for p in items {
                    out.add_scaled(&p.body_counts()?, p.finite_exp()?)?;
                }
            }
        }
        Ok(out)
    }

    fn finite_exp(&self) -> Result<u64, CountError> {
        self.exp.finite().ok_or(CountError::InfiniteInside)
    }

    /// Whether `sym` occurs anywhere in the body.
    pub fn mentions(&self, sym: Symbol) -> bool {
        match &self.body {
            Body::Lit(s) => s.contains(&sym),
            Body::Seq(items) => items.iter().any(|p| p.mentions(sym)),
        }
    }

    pub fn symbols(&self, out: &mut Vec<Symbol>) {
        match &self.body {
            Body::Lit(s) => {
                for x in s {
                    if !out.contains(x) {
                        out.push(*x);
                    }
                }
            }
            Body::Seq(items) => items.iter().for_each(|p| p.symbols(out)),
        }
    }

    fn size(&self) -> usize {
        1 + match &self.body {
            Body::Lit(s) => s.len(),
            Body::Seq(items) => items.iter().map(Power::size).sum(),
        }
    }
}

/// Structural size, used to bound the reduction loop.
pub fn size(s: &[Power]) -> usize {
    s.iter().map(Power::size).sum()
}

pub fn counts(s: &[Power]) -> Result<OccurrenceCount, CountError> {
    let mut out = OccurrenceCount::new();
    for p in s {
        out.add_scaled(&p.body_counts()?, p.finite_exp()?)?;
    }
    Ok(out)
}

/// Maps one node's statements to powers. Plain events are grouped into
/// maximal runs with exponent 1.
pub fn to_power_string(stmts: &[Statement]) -> PowerString {
    let mut out = Vec::new();
    let mut run = Vec::new();
    for st in stmts {
        match st {
            Statement::Send(s) | Statement::Recv(s) => run.push(*s),
            Statement::For(n, body) => {
                if !run.is_empty() {
                    out.push(Power::lit(core::mem::take(&mut run), LoopCount::Finite(1)));
                }
                let mut inner = to_power_string(body);
                let p = match inner.as_slice() {
                    [Power { body: Body::Lit(_), exp: LoopCount::Finite(1) }] => {
                        let Some(Power { body, .. }) = inner.pop() else { unreachable!() };
                        Power { body, exp: *n }
                    }
                    _ => Power::seq(inner, *n),
                };
                out.push(p);
            }
        }
    }
    if !run.is_empty() {
        out.push(Power::lit(run, LoopCount::Finite(1)));
    }
    out
}

/// Converts powers back to statements of `node`.
pub fn to_statements(s: &[Power], node: NodeId) -> Vec<Statement> {
    let event = |x: &Symbol| {
        if x.src == node {
            Statement::Send(*x)
        } else {
            Statement::Recv(*x)
        }
    };
    let mut out = Vec::new();
    for p in s {
        let body: Vec<Statement> = match &p.body {
            Body::Lit(syms) => syms.iter().map(event).collect(),
            Body::Seq(items) => to_statements(items, node),
        };
        if p.exp == LoopCount::Finite(1) {
            out.extend(body);
        } else {
            out.push(Statement::For(p.exp, body));
        }
    }
    out
}

/// The fully unrolled event sequence of a finite string.
pub fn flatten(s: &[Power], limit: usize) -> Result<Vec<Symbol>, UnrollError> {
    let mut out = Vec::new();
    flatten_into(s, &mut out, limit)?;
    Ok(out)
}

fn flatten_into(s: &[Power], out: &mut Vec<Symbol>, limit: usize) -> Result<(), UnrollError> {
    for p in s {
        let n = p.exp.finite().ok_or(UnrollError::InfiniteLoop { node: NodeId(0) })?;
        for _ in 0..n {
            match &p.body {
                Body::Lit(syms) => {
                    if out.len() + syms.len() > limit {
                        return Err(UnrollError::SizeExceeded { limit });
                    }
                    out.extend_from_slice(syms);
                }
                Body::Seq(items) => flatten_into(items, out, limit)?,
            }
        }
    }
    Ok(())
}

fn mul(a: LoopCount, b: LoopCount) -> Option<LoopCount> {
    match (a, b) {
        (LoopCount::Finite(x), LoopCount::Finite(y)) => x.checked_mul(y).map(LoopCount::Finite),
        _ => Some(LoopCount::Infinite),
    }
}

/// Rewrites to the simplest form:
/// * Power Reduction: `(x^p)^q -> x^(p*q)`; an infinite factor absorbs
///   the other one;
/// * exponent-1 groups are spliced into the enclosing sequence, and inside
///   a loop body adjacent exponent-1 runs are merged;
/// * Left Prefix Reduction: `x^p (x y)^q -> x^(p+1) y (x y)^(q-1)` for
///   finite `q` and nonempty `y`;
/// * zero exponents and empty bodies disappear.
///
/// Repeats until nothing changes. The unrolled sequence of a finite string
/// is preserved.
pub fn normalize(s: &[Power]) -> PowerString {
    let mut cur = s.to_vec();
    loop {
        let next = pass(&cur, false);
        if next == cur {
            return cur;
        }
        cur = next;
    }
}

fn pass(s: &[Power], in_body: bool) -> PowerString {
    let mut items: Vec<Power> = Vec::with_capacity(s.len());
    for p in s {
        let Some(p) = reduce_power(p) else { continue };
        if p.exp == LoopCount::Finite(1) {
            if let Body::Seq(inner) = p.body {
                items.extend(inner);
                continue;
            }
        }
        items.push(p);
    }
    if in_body {
        items = merge_runs(items);
    }
    left_prefix(&mut items);
    items
}

/// Power Reduction on a single power, with its body normalized one level.
fn reduce_power(p: &Power) -> Option<Power> {
    if p.exp == LoopCount::Finite(0) {
        return None;
    }
    match &p.body {
        Body::Lit(s) if s.is_empty() => None,
        Body::Lit(_) => Some(p.clone()),
        Body::Seq(items) => {
            let mut inner = pass(items, true);
            match inner.len() {
                0 => None,
                1 => {
                    let only = inner.pop().unwrap();
                    match mul(p.exp, only.exp) {
                        Some(exp) => Some(Power { body: only.body, exp }),
                        None => Some(Power::seq(alloc::vec![only], p.exp)),
                    }
                }
                _ => Some(Power::seq(inner, p.exp)),
            }
        }
    }
}

fn merge_runs(items: Vec<Power>) -> Vec<Power> {
    let mut out: Vec<Power> = Vec::with_capacity(items.len());
    for p in items {
        if p.exp == LoopCount::Finite(1) {
            if let Body::Lit(next) = &p.body {
                if let Some(Power { body: Body::Lit(prev), exp: LoopCount::Finite(1) }) = out.last_mut() {
                    prev.extend_from_slice(next);
                    continue;
                }
            }
        }
        out.push(p);
    }
    out
}

/// The body of a power viewed as a sequence of items, for prefix matching.
fn body_items(p: &Power) -> Vec<Power> {
    match &p.body {
        Body::Lit(s) => s.iter().map(|x| Power::lit(alloc::vec![*x], LoopCount::Finite(1))).collect(),
        Body::Seq(items) => {
            let mut out = Vec::new();
            for it in items {
                match (&it.body, it.exp) {
                    (Body::Lit(s), LoopCount::Finite(1)) => {
                        out.extend(s.iter().map(|x| Power::lit(alloc::vec![*x], LoopCount::Finite(1))))
                    }
                    _ => out.push(it.clone()),
                }
            }
            out
        }
    }
}

/// Rebuilds a body from items produced by [`body_items`].
fn from_items(items: Vec<Power>) -> Body {
    if items.iter().all(|p| p.is_atomic()) {
        Body::Lit(
            items
                .into_iter()
                .map(|p| match p.body {
                    Body::Lit(s) => s[0],
                    Body::Seq(_) => unreachable!(),
                })
                .collect(),
        )
    } else {
        Body::Seq(merge_runs(items))
    }
}

fn left_prefix(items: &mut Vec<Power>) {
    let mut i = 0;
    while i + 1 < items.len() {
        if let Some(rewritten) = left_prefix_at(&items[i], &items[i + 1]) {
            items.splice(i..i + 2, rewritten);
            continue;
        }
        i += 1;
    }
}

/// `x^p (x y)^q` with finite `p`, `q`; `x` is either the body of the first
/// power, or the first power itself (then `p = 1`).
fn left_prefix_at(first: &Power, second: &Power) -> Option<Vec<Power>> {
    let LoopCount::Finite(q) = second.exp else { return None };
    let LoopCount::Finite(p) = first.exp else { return None };
    if q == 0 {
        return None;
    }
    let whole = body_items(second);
    let candidates: [(Vec<Power>, Power); 2] = [
        (body_items(first), {
            let exp = LoopCount::Finite(p.checked_add(1)?);
            Power { body: first.body.clone(), exp }
        }),
        (alloc::vec![first.clone()], Power::seq(alloc::vec![first.clone()], LoopCount::Finite(2))),
    ];
    for (x, grown) in candidates {
        if x.len() < whole.len() && whole[..x.len()] == x[..] {
            let y = whole[x.len()..].to_vec();
            let mut out = alloc::vec![grown];
            out.push(Power { body: from_items(y), exp: LoopCount::Finite(1) });
            if q > 1 {
                out.push(Power { body: second.body.clone(), exp: LoopCount::Finite(q - 1) });
            }
            return Some(out);
        }
    }
    None
}

/// Renders a power the way it is usually written, e.g. `(ac)^2` or `b^4`.
/// Message names are concatenated when all are one character long.
pub fn render_power(p: &Power, program: &Program) -> String {
    let mut out = String::new();
    write_power(&mut out, p, program, compact(program));
    out
}

pub fn render_string(s: &[Power], program: &Program) -> String {
    let compact = compact(program);
    let mut out = String::new();
    for (i, p) in s.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        write_power(&mut out, p, program, compact);
    }
    out
}

fn compact(program: &Program) -> bool {
    program.msg_names().iter().all(|n| n.chars().count() == 1)
}

fn write_power(out: &mut String, p: &Power, program: &Program, compact: bool) {
    let sep = if compact { "" } else { " " };
    let (inner, single) = match &p.body {
        Body::Lit(s) => {
            let names: Vec<&str> = s.iter().map(|x| program.msg_name(x.msg)).collect();
            (names.join(sep), s.len() == 1)
        }
        Body::Seq(items) => {
            let mut buf = String::new();
            for (i, it) in items.iter().enumerate() {
                if i > 0 {
                    buf.push(' ');
                }
                write_power(&mut buf, it, program, compact);
            }
            (buf, false)
        }
    };
    if single {
        out.push_str(&inner);
    } else {
        let _ = write!(out, "({inner})");
    }
    match p.exp {
        LoopCount::Infinite => out.push_str("^∞"),
        LoopCount::Finite(n) => {
            let _ = write!(out, "^{n}");
        }
    }
}

//! Random program corpus shared by the property and acceptance tests.
//!
//! Most programs are projections of a random global sequence of
//! rendezvous (optionally repeated forever), which are deadlock-free by
//! construction, then perturbed by a random edit. The rest are unrelated
//! random node programs.
#![allow(dead_code)]

use mpicheck_core::l2::{Power, PowerString};
use mpicheck_core::model::{validate, EventQueues, LoopCount, MsgId, NodeId, Program, Statement, Symbol};
use mpicheck_core::ratio::{RatioEquation, RatioEquationGroup, VarId};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub max_nodes: usize,
    pub max_events: usize,
    pub max_count: u64,
    pub max_depth: usize,
}

impl Default for Shape {
    fn default() -> Self {
        Shape {
            max_nodes: 4,
            max_events: 12,
            max_count: 4,
            max_depth: 2,
        }
    }
}

const MSGS: [&str; 4] = ["a", "b", "c", "d"];

#[derive(Debug, Clone)]
enum Global {
    Comm(Symbol),
    Loop(u64, Vec<Global>),
}

fn random_symbol(rng: &mut impl Rng, n: usize) -> Symbol {
    let src = rng.gen_range(0..n);
    let mut dst = rng.gen_range(0..n - 1);
    if dst >= src {
        dst += 1;
    }
    Symbol::new(
        MsgId(rng.gen_range(0..MSGS.len()) as u32),
        NodeId(src as u32),
        NodeId(dst as u32),
    )
}

fn global_seq(rng: &mut impl Rng, n: usize, shape: &Shape, depth: usize, budget: &mut usize) -> Vec<Global> {
    let mut out = Vec::new();
    let len = rng.gen_range(1..=4);
    for _ in 0..len {
        if *budget == 0 {
            break;
        }
        if depth < shape.max_depth && rng.gen_bool(0.3) {
            let count = rng.gen_range(1..=shape.max_count);
            let body = global_seq(rng, n, shape, depth + 1, budget);
            if !body.is_empty() {
                out.push(Global::Loop(count, body));
            }
        } else {
            *budget -= 1;
            out.push(Global::Comm(random_symbol(rng, n)));
        }
    }
    out
}

fn project(g: &[Global], node: NodeId) -> Vec<Statement> {
    let mut out = Vec::new();
    for item in g {
        match item {
            Global::Comm(s) if s.src == node => out.push(Statement::Send(*s)),
            Global::Comm(s) if s.dst == node => out.push(Statement::Recv(*s)),
            Global::Comm(_) => {}
            Global::Loop(k, body) => {
                let inner = project(body, node);
                if !inner.is_empty() {
                    out.push(Statement::For(LoopCount::Finite(*k), inner));
                }
            }
        }
    }
    out
}

fn event(s: Symbol, node: NodeId) -> Statement {
    if s.src == node {
        Statement::Send(s)
    } else {
        Statement::Recv(s)
    }
}

fn random_node(rng: &mut impl Rng, n: usize, node: NodeId, shape: &Shape, depth: usize, budget: &mut usize) -> Vec<Statement> {
    let mut out = Vec::new();
    let len = rng.gen_range(1..=4);
    for _ in 0..len {
        if *budget == 0 {
            break;
        }
        if depth < shape.max_depth && rng.gen_bool(0.3) {
            let count = rng.gen_range(1..=shape.max_count);
            let body = random_node(rng, n, node, shape, depth + 1, budget);
            if !body.is_empty() {
                out.push(Statement::For(LoopCount::Finite(count), body));
            }
        } else {
            *budget -= 1;
            let mut s = random_symbol(rng, n);
            if !s.involves(node) {
                if rng.gen_bool(0.5) {
                    s.src = node;
                } else {
                    s.dst = node;
                }
                if s.src == s.dst {
                    s.dst = NodeId(((node.0 as usize + 1) % n) as u32);
                    if s.src == s.dst {
                        continue;
                    }
                }
            }
            out.push(event(s, node));
        }
    }
    out
}

fn list_paths(body: &[Statement], prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    out.push(prefix.clone());
    for (i, st) in body.iter().enumerate() {
        if let Statement::For(_, inner) = st {
            prefix.push(i);
            list_paths(inner, prefix, out);
            prefix.pop();
        }
    }
}

fn list_mut<'a>(body: &'a mut Vec<Statement>, path: &[usize]) -> &'a mut Vec<Statement> {
    match path.split_first() {
        None => body,
        Some((i, rest)) => match &mut body[*i] {
            Statement::For(_, inner) => list_mut(inner, rest),
            _ => unreachable!(),
        },
    }
}

fn with_list<R>(
    body: &mut Vec<Statement>,
    rng: &mut impl Rng,
    f: impl FnOnce(&mut Vec<Statement>, &mut dyn FnMut(usize) -> usize) -> R,
) -> R {
    let mut paths = Vec::new();
    list_paths(body, &mut Vec::new(), &mut paths);
    let path = paths.choose(rng).unwrap().clone();
    let mut r = |k: usize| if k == 0 { 0 } else { rng.gen_range(0..k) };
    f(list_mut(body, &path), &mut r)
}

/// Adapts the index picker so `shuffle` can use it.
struct ShuffleRng<'a>(&'a mut dyn FnMut(usize) -> usize);

impl rand::RngCore for ShuffleRng<'_> {
    fn next_u32(&mut self) -> u32 {
        (self.0)(1 << 31) as u32
    }
    fn next_u64(&mut self) -> u64 {
        ((self.next_u32() as u64) << 32) | self.next_u32() as u64
    }
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        for b in dest {
            *b = self.next_u32() as u8;
        }
    }
    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.fill_bytes(dest);
        Ok(())
    }
}

fn mutate(rng: &mut impl Rng, bodies: &mut [Vec<Statement>], n: usize, shape: &Shape) {
    let node = rng.gen_range(0..bodies.len());
    let nid = NodeId(node as u32);
    // Swaps and shuffles keep every symbol's totals, so they favour the
    // hard cases over trivially unbalanced ones.
    let kind = [0, 0, 0, 0, 5, 5, 5, 1, 1, 2, 3, 4][rng.gen_range(0..12)];
    let max_count = shape.max_count;
    let extra = {
        let mut s = random_symbol(rng, n);
        if !s.involves(nid) {
            s.src = nid;
            if s.dst == nid {
                s.dst = NodeId(((node + 1) % n) as u32);
            }
        }
        event(s, nid)
    };
    let body = &mut bodies[node];
    if body.is_empty() {
        if n > 1 {
            body.push(extra);
        }
        return;
    }
    with_list(body, rng, |list, r| match kind {
        0 if list.len() >= 2 => {
            let i = r(list.len() - 1);
            list.swap(i, i + 1);
        }
        1 => {
            let loops: Vec<usize> = (0..list.len()).filter(|i| matches!(list[*i], Statement::For(..))).collect();
            if !loops.is_empty() {
                let i = loops[r(loops.len())];
                if let Statement::For(LoopCount::Finite(k), _) = &mut list[i] {
                    *k = 1 + r(max_count as usize) as u64;
                }
            }
        }
        2 if list.len() >= 2 => {
            let i = r(list.len());
            list.remove(i);
        }
        5 => list.shuffle(&mut ShuffleRng(r)),
        3 if n > 1 => {
            let i = r(list.len() + 1);
            list.insert(i, extra);
        }
        _ => {
            let i = r(list.len());
            if let Statement::Send(s) | Statement::Recv(s) = list[i] {
                let mut t = s;
                t.msg = MsgId((s.msg.0 + 1) % MSGS.len() as u32);
                list[i] = event(t, nid);
            }
        }
    });
}

fn events_of(body: &[Statement]) -> usize {
    body.iter()
        .map(|s| match s {
            Statement::For(_, inner) => events_of(inner),
            _ => 1,
        })
        .sum()
}

fn build(n: usize, bodies: Vec<Vec<Statement>>) -> Program {
    let names = (0..n).map(|i| format!("P{i}")).collect();
    let msgs = MSGS.iter().map(|m| m.to_string()).collect();
    Program::new(names, msgs, bodies)
}

/// One random program; the same seed always gives the same program.
pub fn program(seed: u64, shape: &Shape) -> Program {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let n = rng.gen_range(2..=shape.max_nodes.max(2));
        let style = rng.gen_range(0..10);
        let mut bodies: Vec<Vec<Statement>> = match style {
            0..=8 => {
                let mut budget = shape.max_events;
                let infinite = rng.gen_bool(0.4);
                let (prefix, body) = if infinite {
                    let mut pre_budget = if rng.gen_bool(0.4) { rng.gen_range(1..=3) } else { 0 };
                    let prefix = if pre_budget > 0 {
                        global_seq(&mut rng, n, shape, 1, &mut pre_budget)
                    } else {
                        Vec::new()
                    };
                    let body = global_seq(&mut rng, n, shape, 1, &mut budget);
                    (prefix, Some(body))
                } else {
                    (global_seq(&mut rng, n, shape, 0, &mut budget), None)
                };
                (0..n)
                    .map(|i| {
                        let node = NodeId(i as u32);
                        let mut stmts = project(&prefix, node);
                        if let Some(b) = &body {
                            let inner = project(b, node);
                            if !inner.is_empty() {
                                stmts.push(Statement::For(LoopCount::Infinite, inner));
                            }
                        }
                        stmts
                    })
                    .collect()
            }
            _ => (0..n)
                .map(|i| {
                    let mut budget = rng.gen_range(1..=shape.max_events / 2);
                    let mut body = random_node(&mut rng, n, NodeId(i as u32), shape, 0, &mut budget);
                    if rng.gen_bool(0.2) && !body.is_empty() {
                        body = vec![Statement::For(LoopCount::Infinite, body)];
                    }
                    body
                })
                .collect(),
        };
        if style <= 8 && rng.gen_bool(0.6) {
            let edits = rng.gen_range(1..=3);
            for _ in 0..edits {
                mutate(&mut rng, &mut bodies, n, shape);
            }
        }
        if bodies.iter().any(|b| events_of(b) > shape.max_events) {
            continue;
        }
        if let Ok(p) = validate(build(n, bodies)) {
            return p;
        }
    }
}

/// A random finite program (no infinite loops).
pub fn finite_program(seed: u64, shape: &Shape) -> Program {
    let mut k = 0;
    loop {
        let p = program(seed.wrapping_mul(7919).wrapping_add(k), shape);
        if !has_infinite(&p) {
            return p;
        }
        k += 1;
    }
}

pub fn has_infinite(p: &Program) -> bool {
    fn any(b: &[Statement]) -> bool {
        b.iter().any(|s| match s {
            Statement::For(LoopCount::Infinite, _) => true,
            Statement::For(_, inner) => any(inner),
            _ => false,
        })
    }
    p.bodies().iter().any(|b| any(b))
}

/// Depth of loop nesting, outer infinite loops not counted.
pub fn finite_depth(p: &Program) -> usize {
    fn depth(b: &[Statement]) -> usize {
        b.iter()
            .map(|s| match s {
                Statement::For(LoopCount::Infinite, inner) => depth(inner),
                Statement::For(_, inner) => 1 + depth(inner),
                _ => 0,
            })
            .max()
            .unwrap_or(0)
    }
    p.bodies().iter().map(|b| depth(b)).max().unwrap_or(0)
}

pub fn max_node_events(p: &Program) -> usize {
    p.bodies().iter().map(|b| events_of(b)).max().unwrap_or(0)
}

pub fn max_count(p: &Program) -> u64 {
    fn m(b: &[Statement]) -> u64 {
        b.iter()
            .map(|s| match s {
                Statement::For(LoopCount::Finite(k), inner) => (*k).max(m(inner)),
                Statement::For(_, inner) => m(inner),
                _ => 0,
            })
            .max()
            .unwrap_or(0)
    }
    p.bodies().iter().map(|b| m(b)).max().unwrap_or(0)
}

fn power(rng: &mut ChaCha8Rng, syms: &[Symbol], depth: usize) -> Power {
    let exp = LoopCount::Finite(rng.gen_range(0..=4));
    if depth == 0 || rng.gen_bool(0.5) {
        let len = rng.gen_range(1..=3);
        Power::lit((0..len).map(|_| *syms.choose(rng).unwrap()).collect(), exp)
    } else {
        let len = rng.gen_range(1..=3);
        Power::seq((0..len).map(|_| power(rng, syms, depth - 1)).collect(), exp)
    }
}

/// A random finite power string over three symbols. Small alphabets and
/// exponents of 0 and 1 make the rewrite rules fire often.
pub fn power_string(seed: u64) -> PowerString {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let syms: Vec<Symbol> = (0..3).map(|m| Symbol::new(MsgId(m), NodeId(0), NodeId(1))).collect();
    let len = rng.gen_range(0..=4);
    (0..len).map(|_| power(&mut rng, &syms, 3)).collect()
}

/// Two nodes trading `a` and `b` back and forth, `events` events in all.
pub fn ping_pong(events: usize) -> EventQueues {
    let a = Symbol::new(MsgId(0), NodeId(0), NodeId(1));
    let b = Symbol::new(MsgId(1), NodeId(1), NodeId(0));
    let rounds = events / 4;
    let q: Vec<Symbol> = (0..rounds).flat_map(|_| [a, b]).collect();
    EventQueues::new(vec![q.clone(), q])
}

/// `count` equations over `vars` variables, all satisfied by hidden values
/// in 1..=6, so the group is always consistent.
pub fn consistent_equations(seed: u64, vars: u32, count: usize) -> (RatioEquationGroup, Vec<u64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hidden: Vec<u64> = (0..vars).map(|_| rng.gen_range(1..=6)).collect();
    let mut group = RatioEquationGroup::with_vars(vars as usize);
    for _ in 0..count {
        let i = rng.gen_range(0..vars);
        let j = loop {
            let j = rng.gen_range(0..vars);
            if j != i {
                break j;
            }
        };
        let (i, j) = (i.min(j), i.max(j));
        let k = rng.gen_range(1..=3);
        group.push(RatioEquation::new(VarId(i), VarId(j), k * hidden[i as usize], k * hidden[j as usize]));
    }
    (group, hidden)
}

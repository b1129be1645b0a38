//! The first power pool: repeatedly take the leading power of every node,
//! group the powers that talk to each other and consume whole rounds of
//! them.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use super::power::{counts, flatten, normalize, size, to_power_string, Body, Power, PowerString};
use crate::l0::{ratio_consistent, reg_from_counts, unsolvable_conflict, var, Consistency, LabelledReg, LoopTimes};
use crate::model::{EventQueues, LoopCount, NodeId, OccurrenceCount, Program, Symbol, UnrollError};
use crate::ratio::{solve, RatioEquation, RatioEquationGroup, RatioSolution, RegError};
use crate::smodel::check_smodel;
use crate::verdict::{AnalysisError, DeadlockWitness, Verdict};
use crate::CheckOptions;

/// Leading power of every node that still has work.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fpp {
    entries: Vec<(NodeId, Power)>,
}

impl Fpp {
    pub fn entries(&self) -> &[(NodeId, Power)] {
        &self.entries
    }

    pub fn get(&self, node: NodeId) -> Option<&Power> {
        self.entries.iter().find(|(n, _)| *n == node).map(|(_, p)| p)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }
}

/// The pool at the moment the reduction got stuck.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FppSnapshot {
    pub pool: Vec<(NodeId, Power)>,
    /// Nodes that can never move again.
    pub blocked: Vec<NodeId>,
}

pub fn fpp(strings: &[PowerString]) -> Fpp {
    pool_of(strings, &vec![false; strings.len()])
}

fn pool_of(strings: &[PowerString], retired: &[bool]) -> Fpp {
    Fpp {
        entries: strings
            .iter()
            .enumerate()
            .filter(|(i, s)| !retired[*i] && !s.is_empty())
            .map(|(i, s)| (NodeId(i as u32), s[0].clone()))
            .collect(),
    }
}

/// Pool entries connected through shared symbols.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelatedSet {
    pub members: Vec<NodeId>,
    pub symbols: Vec<Symbol>,
    /// Every symbol has both endpoints in the set, each mentioning it.
    pub eligible: bool,
}

pub fn related_sets(pool: &Fpp) -> Vec<RelatedSet> {
    let n = pool.entries.len();
    let syms: Vec<Vec<Symbol>> = pool
        .entries
        .iter()
        .map(|(_, p)| {
            let mut v = Vec::new();
            p.symbols(&mut v);
            v
        })
        .collect();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut owner: BTreeMap<Symbol, usize> = BTreeMap::new();
    for (i, ss) in syms.iter().enumerate() {
        for s in ss {
            match owner.get(s) {
                Some(&j) => {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    parent[a.max(b)] = a.min(b);
                }
                None => {
                    owner.insert(*s, i);
                }
            }
        }
    }
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        match groups.iter_mut().find(|(root, _)| *root == r) {
            Some((_, g)) => g.push(i),
            None => groups.push((r, vec![i])),
        }
    }
    groups
        .into_iter()
        .map(|(_, idx)| {
            let mut symbols = Vec::new();
            for &i in &idx {
                for s in &syms[i] {
                    if !symbols.contains(s) {
                        symbols.push(*s);
                    }
                }
            }
            let eligible = symbols.iter().all(|s| {
                [s.src, s.dst]
                    .iter()
                    .all(|end| pool.get(*end).is_some_and(|p| p.mentions(*s)))
            });
            RelatedSet {
                members: idx.iter().map(|&i| pool.entries[i].0).collect(),
                symbols,
                eligible,
            }
        })
        .collect()
}

/// Outcome of one attempt to consume a related set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reduction {
    /// `rounds` rounds consumed; each round runs `per_round` iterations of
    /// every member's leading power.
    Progress { rounds: u64, per_round: Vec<(NodeId, u64)> },
    /// All members loop forever among themselves without blocking.
    Perpetual { per_round: Vec<(NodeId, u64)> },
    Deadlock(DeadlockWitness),
    NoProgress,
}

fn overflow() -> AnalysisError {
    AnalysisError::Reg(RegError::Overflow)
}

/// Aligns the members of an eligible set by the ratio of their body counts
/// and removes as many whole rounds as every finite member allows. The
/// updated members are renormalized.
pub fn align_and_reduce(
    set: &RelatedSet,
    strings: &mut [PowerString],
    options: &CheckOptions,
) -> Result<Reduction, AnalysisError> {
    if !set.eligible {
        return Ok(Reduction::NoProgress);
    }
    let leads: Vec<(NodeId, Power)> = set
        .members
        .iter()
        .map(|m| (*m, strings[m.index()][0].clone()))
        .collect();
    let body_counts: Vec<OccurrenceCount> = leads
        .iter()
        .map(|(_, p)| p.body_counts())
        .collect::<Result<_, _>>()?;
    let count = |node: NodeId, s: Symbol| {
        leads
            .iter()
            .position(|(m, _)| *m == node)
            .map_or(0, |k| body_counts[k].get(s))
    };
    let Ok(reg) = reg_from_counts(strings.len(), &set.symbols, count) else {
        return Ok(Reduction::NoProgress);
    };
    let all_infinite = leads.iter().all(|(_, p)| p.is_infinite());
    let solution = match solve(&reg.group) {
        Ok(s) => s,
        Err(RegError::Inconsistent(inc)) if all_infinite => {
            return Ok(Reduction::Deadlock(DeadlockWitness::RatioInconsistency(
                unsolvable_conflict(&reg, inc),
            )))
        }
        Err(RegError::Inconsistent(_)) => return Ok(Reduction::NoProgress),
        Err(e) => return Err(AnalysisError::Reg(e)),
    };
    let comp = solution.component_of(var(set.members[0])).unwrap_or(&[]);
    let l = solution.lcm(comp).map_err(AnalysisError::Reg)?;
    let per_round: Vec<(NodeId, u64)> = leads
        .iter()
        .map(|(m, _)| {
            let p = solution.value(var(*m)).unwrap_or(1);
            u64::try_from(l / p).map(|u| (*m, u)).map_err(|_| overflow())
        })
        .collect::<Result<_, _>>()?;

    let rounds = if all_infinite {
        None
    } else {
        let r = leads
            .iter()
            .zip(&per_round)
            .filter_map(|((_, p), (_, u))| p.exp.finite().map(|t| t / u))
            .min()
            .unwrap_or(0);
        if r == 0 {
            return Ok(Reduction::NoProgress);
        }
        Some(r)
    };

    let limit = options.max_events;
    let mut queues = vec![Vec::new(); strings.len()];
    for ((m, p), (_, u)) in leads.iter().zip(&per_round) {
        let once = flatten(
            &[Power { body: p.body.clone(), exp: LoopCount::Finite(1) }],
            limit,
        )?;
        let total = (once.len() as u128) * (*u as u128);
        if total > limit as u128 {
            return Err(AnalysisError::Unroll(UnrollError::SizeExceeded { limit }));
        }
        let q = &mut queues[m.index()];
        for _ in 0..*u {
            q.extend_from_slice(&once);
        }
    }
    if let Verdict::Deadlock(w) = check_smodel(&EventQueues::new(queues), options.verify)? {
        return Ok(Reduction::Deadlock(w));
    }
    let Some(r) = rounds else {
        return Ok(Reduction::Perpetual { per_round });
    };
    for (m, u) in &per_round {
        let s = &mut strings[m.index()];
        if let LoopCount::Finite(t) = s[0].exp {
            let left = t - r * u;
            if left == 0 {
                s.remove(0);
            } else {
                s[0].exp = LoopCount::Finite(left);
            }
        }
        *s = normalize(s);
    }
    Ok(Reduction::Progress { rounds: r, per_round })
}

/// Splits off the first iteration (or first event) of a power. `None` for
/// a single event.
pub fn unfold(p: &Power) -> Option<Vec<Power>> {
    let one = LoopCount::Finite(1);
    let items = || match &p.body {
        Body::Lit(s) => vec![Power::lit(s.clone(), one)],
        Body::Seq(items) => items.clone(),
    };
    match p.exp {
        LoopCount::Finite(0) => None,
        LoopCount::Finite(1) => match &p.body {
            Body::Lit(s) if s.len() > 1 => Some(vec![
                Power::lit(vec![s[0]], one),
                Power::lit(s[1..].to_vec(), one),
            ]),
            Body::Lit(_) => None,
            Body::Seq(items) => Some(items.clone()),
        },
        LoopCount::Finite(k) => {
            let mut v = items();
            v.push(Power { body: p.body.clone(), exp: LoopCount::Finite(k - 1) });
            Some(v)
        }
        LoopCount::Infinite => {
            let mut v = items();
            v.push(p.clone());
            Some(v)
        }
    }
}

fn unfold_lead(s: &mut PowerString) -> bool {
    match s.first().and_then(unfold) {
        Some(items) => {
            s.splice(0..1, items);
            true
        }
        None => false,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StripReport {
    pub reg: LabelledReg,
    pub solution: Option<RatioSolution>,
    /// How many copies of its body each node keeps.
    pub copies: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StripOutcome {
    /// Some node runs other work before its infinite loop.
    NotApplicable,
    Deadlock {
        witness: DeadlockWitness,
        report: Option<StripReport>,
    },
    Stripped {
        strings: Vec<PowerString>,
        report: StripReport,
    },
}

/// Replaces each outermost infinite loop by `lcm / p_i` copies of its body,
/// the ratios coming from one iteration of every infinite node and the
/// whole of every finite node. Applies only when each node with an infinite
/// loop consists of that loop alone.
pub fn strip_outer_infinite(strings: &[PowerString]) -> Result<StripOutcome, AnalysisError> {
    let n = strings.len();
    let mut infinite = vec![false; n];
    for (i, s) in strings.iter().enumerate() {
        if s.iter().any(Power::is_infinite) {
            if s.len() != 1 {
                return Ok(StripOutcome::NotApplicable);
            }
            infinite[i] = true;
        }
    }
    let per_node: Vec<OccurrenceCount> = strings
        .iter()
        .zip(&infinite)
        .map(|(s, inf)| if *inf { s[0].body_counts() } else { counts(s) })
        .collect::<Result<_, _>>()?;
    let mut order = Vec::new();
    for s in strings {
        for p in s {
            p.symbols(&mut order);
        }
    }
    let reg = match reg_from_counts(n, &order, |node, s| per_node[node.index()].get(s)) {
        Ok(reg) => reg,
        Err(u) => {
            return Ok(StripOutcome::Deadlock {
                witness: DeadlockWitness::UnmatchedTotals {
                    symbol: u.symbol,
                    sends: u.src_count,
                    recvs: u.dst_count,
                },
                report: None,
            })
        }
    };
    let solution = match solve(&reg.group) {
        Ok(s) => s,
        Err(RegError::Inconsistent(inc)) => {
            let witness = DeadlockWitness::RatioInconsistency(unsolvable_conflict(&reg, inc));
            return Ok(StripOutcome::Deadlock {
                witness,
                report: Some(StripReport { reg, solution: None, copies: Vec::new() }),
            });
        }
        Err(e) => return Err(AnalysisError::Reg(e)),
    };
    let times = LoopTimes(
        strings
            .iter()
            .zip(&infinite)
            .map(|(s, inf)| match (inf, s.is_empty()) {
                (true, _) => Some(LoopCount::Infinite),
                (false, false) => Some(LoopCount::Finite(1)),
                (false, true) => None,
            })
            .collect(),
    );
    if let Consistency::Inconsistent(conflict) = ratio_consistent(&solution, &times)? {
        return Ok(StripOutcome::Deadlock {
            witness: DeadlockWitness::RatioInconsistency(conflict),
            report: Some(StripReport { reg, solution: Some(solution), copies: Vec::new() }),
        });
    }
    let mut copies = Vec::with_capacity(n);
    let mut out = Vec::with_capacity(n);
    for (i, s) in strings.iter().enumerate() {
        if infinite[i] {
            let v = var(NodeId(i as u32));
            let comp = solution.component_of(v).unwrap_or(&[]);
            let l = solution.lcm(comp).map_err(AnalysisError::Reg)?;
            let u = u64::try_from(l / solution.value(v).unwrap_or(1)).map_err(|_| overflow())?;
            copies.push(u);
            out.push(normalize(&[Power { body: s[0].body.clone(), exp: LoopCount::Finite(u) }]));
        } else {
            copies.push(1);
            out.push(s.clone());
        }
    }
    Ok(StripOutcome::Stripped {
        strings: out,
        report: StripReport { reg, solution: Some(solution), copies },
    })
}

/// What happened to one related set in a pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SetAction {
    /// Not eligible: some endpoint is still busy with an earlier power.
    Waiting,
    Reduced { rounds: u64, per_round: Vec<(NodeId, u64)> },
    Perpetual { per_round: Vec<(NodeId, u64)> },
    NoProgress,
    Deadlock,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SetStep {
    pub members: Vec<NodeId>,
    pub symbols: Vec<Symbol>,
    pub eligible: bool,
    pub action: SetAction,
}

/// One pass over the pool.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FppStep {
    pub pool: Vec<(NodeId, Power)>,
    /// Ratio solution over the pool (symbols with both endpoints present).
    pub reg: Option<RatioSolution>,
    pub sets: Vec<SetStep>,
    /// Nodes whose leading power was split because nothing else moved.
    pub unfolded: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct L2Analysis {
    pub verdict: Verdict,
    /// Normalized power strings of the input.
    pub strings: Vec<PowerString>,
    pub strip: Option<StripReport>,
    /// Strings the pool loop started from.
    pub working: Vec<PowerString>,
    pub trace: Vec<FppStep>,
}

fn pool_reg(pool: &Fpp) -> Option<RatioSolution> {
    let mut group = RatioEquationGroup::new();
    let mut order = Vec::new();
    for (n, p) in &pool.entries {
        group.add_var(var(*n));
        p.symbols(&mut order);
    }
    for s in order {
        let (Some(ps), Some(pd)) = (pool.get(s.src), pool.get(s.dst)) else { continue };
        let (cs, cd) = (ps.body_counts().ok()?.get(s), pd.body_counts().ok()?.get(s));
        if cs == 0 || cd == 0 {
            continue;
        }
        group.push(if s.src < s.dst {
            RatioEquation::new(var(s.src), var(s.dst), cs, cd)
        } else {
            RatioEquation::new(var(s.dst), var(s.src), cd, cs)
        });
    }
    solve(&group).ok()
}

pub fn check_l2(program: &Program, options: &CheckOptions) -> Result<L2Analysis, AnalysisError> {
    let strings: Vec<PowerString> = program
        .nodes()
        .map(|n| normalize(&to_power_string(program.body(n))))
        .collect();
    let mut out = L2Analysis {
        verdict: Verdict::DeadlockFree,
        strings: strings.clone(),
        strip: None,
        working: Vec::new(),
        trace: Vec::new(),
    };
    let mut work = match strip_outer_infinite(&strings)? {
        StripOutcome::NotApplicable => strings,
        StripOutcome::Deadlock { witness, report } => {
            out.strip = report;
            out.verdict = Verdict::Deadlock(witness);
            return Ok(out);
        }
        StripOutcome::Stripped { strings, report } => {
            out.strip = Some(report);
            strings
        }
    };
    out.working = work.clone();
    let trace = options.trace.then_some(&mut out.trace);
    out.verdict = run_pool(&mut work, options, trace)?;
    Ok(out)
}

fn run_pool(
    work: &mut [PowerString],
    options: &CheckOptions,
    mut trace: Option<&mut Vec<FppStep>>,
) -> Result<Verdict, AnalysisError> {
    let limit = options.max_events;
    let mut retired = vec![false; work.len()];
    let mut history: BTreeMap<Vec<(usize, PowerString)>, usize> = BTreeMap::new();
    let mut progress_log: Vec<BTreeSet<NodeId>> = Vec::new();
    let mut passes = 0usize;
    loop {
        passes += 1;
        if passes > limit || work.iter().map(|s| size(s)).sum::<usize>() > limit {
            return Err(AnalysisError::SizeExceeded { limit });
        }
        let pool = pool_of(work, &retired);
        if pool.is_empty() {
            return Ok(Verdict::DeadlockFree);
        }
        let cyclic = work
            .iter()
            .enumerate()
            .any(|(i, s)| !retired[i] && s.iter().any(Power::is_infinite));
        if cyclic {
            let key: Vec<(usize, PowerString)> = work
                .iter()
                .enumerate()
                .filter(|(i, _)| !retired[*i])
                .map(|(i, s)| (i, s.clone()))
                .collect();
            if let Some(&j) = history.get(&key) {
                let live: BTreeSet<NodeId> = progress_log[j..].iter().flatten().copied().collect();
                let stalled: Vec<NodeId> = pool
                    .entries
                    .iter()
                    .map(|(n, _)| *n)
                    .filter(|n| !live.contains(n))
                    .collect();
                if stalled.is_empty() {
                    return Ok(Verdict::DeadlockFree);
                }
                let unfolded: Vec<NodeId> = stalled
                    .iter()
                    .copied()
                    .filter(|m| unfold_lead(&mut work[m.index()]))
                    .collect();
                if let Some(t) = trace.as_deref_mut() {
                    t.push(FppStep {
                        pool: pool.entries.clone(),
                        reg: pool_reg(&pool),
                        sets: Vec::new(),
                        unfolded: unfolded.clone(),
                    });
                }
                if unfolded.is_empty() {
                    return Ok(Verdict::Deadlock(DeadlockWitness::FppStuck(FppSnapshot {
                        pool: pool.entries,
                        blocked: stalled,
                    })));
                }
                history.clear();
                progress_log.clear();
                continue;
            }
            history.insert(key, progress_log.len());
        }

        let mut progressed = BTreeSet::new();
        let mut steps = Vec::new();
        let mut deadlock = None;
        for set in related_sets(&pool) {
            let action = if !set.eligible {
                SetAction::Waiting
            } else {
                match align_and_reduce(&set, work, options)? {
                    Reduction::Progress { rounds, per_round } => {
                        progressed.extend(set.members.iter().copied());
                        SetAction::Reduced { rounds, per_round }
                    }
                    Reduction::Perpetual { per_round } => {
                        for m in &set.members {
                            retired[m.index()] = true;
                        }
                        progressed.extend(set.members.iter().copied());
                        SetAction::Perpetual { per_round }
                    }
                    Reduction::Deadlock(w) => {
                        deadlock = Some(w);
                        SetAction::Deadlock
                    }
                    Reduction::NoProgress => SetAction::NoProgress,
                }
            };
            steps.push(SetStep {
                members: set.members,
                symbols: set.symbols,
                eligible: set.eligible,
                action,
            });
            if deadlock.is_some() {
                break;
            }
        }
        let mut unfolded = Vec::new();
        if progressed.is_empty() && deadlock.is_none() {
            for (m, _) in &pool.entries {
                if unfold_lead(&mut work[m.index()]) {
                    unfolded.push(*m);
                }
            }
        }
        if let Some(t) = trace.as_deref_mut() {
            t.push(FppStep {
                pool: pool.entries.clone(),
                reg: pool_reg(&pool),
                sets: steps,
                unfolded: unfolded.clone(),
            });
        }
        if let Some(w) = deadlock {
            return Ok(Verdict::Deadlock(w));
        }
        if progressed.is_empty() && unfolded.is_empty() {
            let blocked = pool.entries.iter().map(|(n, _)| *n).collect();
            return Ok(Verdict::Deadlock(DeadlockWitness::FppStuck(FppSnapshot {
                pool: pool.entries,
                blocked,
            })));
        }
        progress_log.push(progressed);
    }
}


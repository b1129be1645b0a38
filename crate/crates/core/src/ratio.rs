//! Ratio equation groups: systems of proportions `p_i : p_j = a : b` over
//! positive unknowns.
//!
//! Solved with a weighted union-find whose edge weights are exact reduced
//! fractions `p_child / p_parent`. Each union reduces by gcd and every
//! product is checked, so the solver either answers exactly or reports
//! [`RegError::Overflow`].

use alloc::collections::{BTreeMap, VecDeque};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub u32);

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

/// `p_i : p_j = a : b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RatioEquation {
    pub i: VarId,
    pub j: VarId,
    pub a: u64,
    pub b: u64,
}

impl RatioEquation {
    pub fn new(i: VarId, j: VarId, a: u64, b: u64) -> Self {
        RatioEquation { i, j, a, b }
    }
}

impl fmt::Display for RatioEquation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} : {} = {} : {}", self.i, self.j, self.a, self.b)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RatioEquationGroup {
    vars: Vec<VarId>,
    equations: Vec<RatioEquation>,
}

impl RatioEquationGroup {
    pub fn new() -> Self {
        Self::default()
    }

    /// Group over variables `p0 .. p(n-1)`.
    pub fn with_vars(n: usize) -> Self {
        RatioEquationGroup {
            vars: (0..n as u32).map(VarId).collect(),
            equations: Vec::new(),
        }
    }

    pub fn add_var(&mut self, v: VarId) {
        if let Err(pos) = self.vars.binary_search(&v) {
            self.vars.insert(pos, v);
        }
    }

    pub fn push(&mut self, eq: RatioEquation) {
        self.equations.push(eq);
    }

    pub fn vars(&self) -> &[VarId] {
        &self.vars
    }

    pub fn equations(&self) -> &[RatioEquation] {
        &self.equations
    }

    fn slot(&self, v: VarId) -> Result<usize, RegError> {
        self.vars.binary_search(&v).map_err(|_| RegError::UnknownVar(v))
    }
}

/// Chain of equations whose combined ratio contradicts `conflicting`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Inconsistency {
    /// Equations linking `conflicting.i` to `conflicting.j`, in path order.
    pub path: Vec<RatioEquation>,
    pub conflicting: RatioEquation,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegError {
    #[error("ratio equation group has no solution")]
    Inconsistent(Inconsistency),
    #[error("equation uses a zero term: {0}")]
    ZeroTerm(RatioEquation),
    #[error("equation refers to unknown variable {0}")]
    UnknownVar(VarId),
    #[error("ratio arithmetic exceeds 128 bits")]
    Overflow,
}

/// Per-component integer solution, each component scaled to gcd 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatioSolution {
    components: Vec<Vec<VarId>>,
    values: BTreeMap<VarId, u128>,
}

impl RatioSolution {
    pub fn components(&self) -> &[Vec<VarId>] {
        &self.components
    }

    pub fn value(&self, v: VarId) -> Option<u128> {
        self.values.get(&v).copied()
    }

    pub fn values(&self) -> &BTreeMap<VarId, u128> {
        &self.values
    }

    pub fn component_of(&self, v: VarId) -> Option<&[VarId]> {
        self.components
            .iter()
            .find(|c| c.contains(&v))
            .map(Vec::as_slice)
    }

    /// Least common multiple of one component's values.
    pub fn lcm(&self, component: &[VarId]) -> Result<u128, RegError> {
        component.iter().try_fold(1u128, |acc, v| {
            lcm(acc, self.values.get(v).copied().unwrap_or(1)).ok_or(RegError::Overflow)
        })
    }
}

pub(crate) fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

pub(crate) fn lcm(a: u128, b: u128) -> Option<u128> {
    if a == 0 || b == 0 {
        return Some(0);
    }
    (a / gcd(a, b)).checked_mul(b)
}

/// Positive reduced fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Frac {
    num: u128,
    den: u128,
}

impl Frac {
    const ONE: Frac = Frac { num: 1, den: 1 };

    fn new(num: u128, den: u128) -> Frac {
        let g = gcd(num, den);
        Frac {
            num: num / g,
            den: den / g,
        }
    }

    fn mul(self, o: Frac) -> Option<Frac> {
        let g1 = gcd(self.num, o.den);
        let g2 = gcd(o.num, self.den);
        Some(Frac {
            num: (self.num / g1).checked_mul(o.num / g2)?,
            den: (self.den / g2).checked_mul(o.den / g1)?,
        })
    }

    fn inv(self) -> Frac {
        Frac {
            num: self.den,
            den: self.num,
        }
    }
}

struct WeightedUnionFind {
    parent: Vec<usize>,
    /// `p_x / p_parent(x)`.
    weight: Vec<Frac>,
    size: Vec<usize>,
}

impl WeightedUnionFind {
    fn new(n: usize) -> Self {
        WeightedUnionFind {
            parent: (0..n).collect(),
            weight: vec![Frac::ONE; n],
            size: vec![1; n],
        }
    }

    /// Root of `x` and `p_x / p_root`, compressing the path.
    fn find(&mut self, x: usize) -> Result<(usize, Frac), RegError> {
        let mut path = Vec::new();
        let mut cur = x;
        while self.parent[cur] != cur {
            path.push(cur);
            cur = self.parent[cur];
        }
        let root = cur;
        // Walk back from the node nearest the root so each weight becomes
        // relative to the root.
        let mut acc = Frac::ONE;
        for &node in path.iter().rev() {
            acc = self.weight[node].mul(acc).ok_or(RegError::Overflow)?;
            self.weight[node] = acc;
            self.parent[node] = root;
        }
        Ok((root, if path.is_empty() { Frac::ONE } else { self.weight[x] }))
    }
}

pub fn solve(group: &RatioEquationGroup) -> Result<RatioSolution, RegError> {
    let n = group.vars.len();
    let mut uf = WeightedUnionFind::new(n);
    // Spanning forest of the unions, for inconsistency witnesses.
    let mut forest: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];

    for (k, eq) in group.equations.iter().enumerate() {
        if eq.a == 0 || eq.b == 0 {
            return Err(RegError::ZeroTerm(*eq));
        }
        let (i, j) = (group.slot(eq.i)?, group.slot(eq.j)?);
        let (ri, wi) = uf.find(i)?;
        let (rj, wj) = uf.find(j)?;
        let want = Frac::new(eq.a as u128, eq.b as u128);
        if ri == rj {
            let have = wi.mul(wj.inv()).ok_or(RegError::Overflow)?;
            if have != want {
                return Err(RegError::Inconsistent(Inconsistency {
                    path: forest_path(&forest, i, j)
                        .into_iter()
                        .map(|e| group.equations[e])
                        .collect(),
                    conflicting: *eq,
                }));
            }
            continue;
        }
        // p_ri / p_rj = (p_ri / p_i) (p_i / p_j) (p_j / p_rj)
        let ri_over_rj = wi
            .inv()
            .mul(want)
            .and_then(|f| f.mul(wj))
            .ok_or(RegError::Overflow)?;
        if uf.size[ri] <= uf.size[rj] {
            uf.parent[ri] = rj;
            uf.weight[ri] = ri_over_rj;
            uf.size[rj] += uf.size[ri];
        } else {
            uf.parent[rj] = ri;
            uf.weight[rj] = ri_over_rj.inv();
            uf.size[ri] += uf.size[rj];
        }
        forest[i].push((j, k));
        forest[j].push((i, k));
    }

    let mut by_root: BTreeMap<usize, Vec<(usize, Frac)>> = BTreeMap::new();
    for x in 0..n {
        let (r, w) = uf.find(x)?;
        by_root.entry(r).or_default().push((x, w));
    }
    let mut components = Vec::with_capacity(by_root.len());
    let mut values = BTreeMap::new();
    for members in by_root.into_values() {
        let den_lcm = members
            .iter()
            .try_fold(1u128, |acc, (_, w)| lcm(acc, w.den))
            .ok_or(RegError::Overflow)?;
        let scaled: Vec<u128> = members
            .iter()
            .map(|(_, w)| w.num.checked_mul(den_lcm / w.den))
            .collect::<Option<_>>()
            .ok_or(RegError::Overflow)?;
        let g = scaled.iter().copied().fold(0, gcd);
        let mut comp = Vec::with_capacity(members.len());
        for ((x, _), v) in members.iter().zip(scaled) {
            values.insert(group.vars[*x], v / g);
            comp.push(group.vars[*x]);
        }
        components.push(comp);
    }
    components.sort();
    Ok(RatioSolution { components, values })
}

/// Equation indices along the forest path from `from` to `to`.
fn forest_path(forest: &[Vec<(usize, usize)>], from: usize, to: usize) -> Vec<usize> {
    let mut prev: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    let mut queue = VecDeque::from([from]);
    prev.insert(from, (from, usize::MAX));
    while let Some(x) = queue.pop_front() {
        if x == to {
            break;
        }
        for &(y, e) in &forest[x] {
            if let alloc::collections::btree_map::Entry::Vacant(slot) = prev.entry(y) {
                slot.insert((x, e));
                queue.push_back(y);
            }
        }
    }
    let mut path = Vec::new();
    let mut cur = to;
    while cur != from {
        let (p, e) = prev[&cur];
        path.push(e);
        cur = p;
    }
    path.reverse();
    path
}

/// Connected components of the equation graph, ignoring the ratios.
pub fn components(group: &RatioEquationGroup) -> Result<Vec<Vec<VarId>>, RegError> {
    let n = group.vars.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for eq in &group.equations {
        let (i, j) = (group.slot(eq.i)?, group.slot(eq.j)?);
        let (ri, rj) = (root(&mut parent, i), root(&mut parent, j));
        if ri != rj {
            parent[ri] = rj;
        }
    }
    let mut by_root: BTreeMap<usize, Vec<VarId>> = BTreeMap::new();
    for x in 0..n {
        let r = root(&mut parent, x);
        by_root.entry(r).or_default().push(group.vars[x]);
    }
    let mut out: Vec<Vec<VarId>> = by_root.into_values().collect();
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eq(i: u32, j: u32, a: u64, b: u64) -> RatioEquation {
        RatioEquation::new(VarId(i), VarId(j), a, b)
    }

    fn group(n: usize, eqs: &[RatioEquation]) -> RatioEquationGroup {
        let mut g = RatioEquationGroup::with_vars(n);
        for e in eqs {
            g.push(*e);
        }
        g
    }

    #[test]
    fn group_four_solves_to_one_two_one() {
        let g = group(3, &[eq(0, 1, 1, 2), eq(0, 2, 1, 1), eq(0, 1, 1, 2), eq(1, 2, 2, 1)]);
        let s = solve(&g).unwrap();
        assert_eq!(s.components(), &[vec![VarId(0), VarId(1), VarId(2)]]);
        let vals: Vec<u128> = s.values().values().copied().collect();
        assert_eq!(vals, [1, 2, 1]);
        assert_eq!(s.lcm(&s.components()[0]).unwrap(), 2);
        assert_eq!(components(&g).unwrap().len(), 1);
    }

    #[test]
    fn contradictory_edge_reports_both_equations() {
        let g = group(2, &[eq(0, 1, 1, 2), eq(0, 1, 1, 3)]);
        match solve(&g) {
            Err(RegError::Inconsistent(w)) => {
                assert_eq!(w.path, [eq(0, 1, 1, 2)]);
                assert_eq!(w.conflicting, eq(0, 1, 1, 3));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn witness_follows_the_cycle() {
        let g = group(3, &[eq(0, 1, 1, 1), eq(1, 2, 1, 1), eq(0, 2, 1, 2)]);
        let Err(RegError::Inconsistent(w)) = solve(&g) else { panic!() };
        assert_eq!(w.path, [eq(0, 1, 1, 1), eq(1, 2, 1, 1)]);
    }

    #[test]
    fn unrelated_variable_is_its_own_component() {
        let g = group(3, &[eq(0, 1, 1, 1)]);
        let s = solve(&g).unwrap();
        assert_eq!(s.components(), &[vec![VarId(0), VarId(1)], vec![VarId(2)]]);
        assert_eq!(s.value(VarId(2)), Some(1));
        assert_eq!(components(&RatioEquationGroup::with_vars(3)).unwrap().len(), 3);
    }

    #[test]
    fn lone_variable_is_one() {
        let s = solve(&RatioEquationGroup::with_vars(1)).unwrap();
        assert_eq!(s.value(VarId(0)), Some(1));
    }

    #[test]
    fn zero_terms_and_unknown_vars_are_rejected() {
        assert!(matches!(solve(&group(2, &[eq(0, 1, 0, 1)])), Err(RegError::ZeroTerm(_))));
        assert!(matches!(solve(&group(2, &[eq(0, 5, 1, 1)])), Err(RegError::UnknownVar(_))));
    }

    #[test]
    fn long_doubling_chain_overflows_loudly() {
        let eqs: Vec<_> = (0..200).map(|k| eq(k, k + 1, 1, 2)).collect();
        assert_eq!(solve(&group(201, &eqs)), Err(RegError::Overflow));
        let eqs: Vec<_> = (0..100).map(|k| eq(k, k + 1, 1, 2)).collect();
        let s = solve(&group(101, &eqs)).unwrap();
        assert_eq!(s.value(VarId(100)), Some(1u128 << 100));
    }
}

//! Rewriting of linear combinations for linear (2,1)-polygraphs.
//!
//! A step rewrites one whiskered left-hand side `l·lhs·r` occurring in a
//! combination with its full coefficient, so the rewritten monomial never
//! reappears in the untouched remainder.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::sync::OnceLock;

use rayon::prelude::*;

use crate::cell::{Coef, LinComb, Word};
use crate::error::CoreError;
use crate::polygraph::Polygraph;
use crate::expr::{Atom, CellExpr, Layer, Term};
use crate::rewrite::{whisker_layer, CoherenceCell, CriticalBranching, Direction, Redex, TraceKind, DEFAULT_BUDGET, DEFAULT_NODES};
use crate::verdict::{Budget, Status, Verdict};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LinRule {
    pub name: String,
    pub lhs: Word,
    pub rhs: LinComb,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearSystem {
    pub rules: Vec<LinRule>,
    convergent: OnceLock<bool>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LinStep {
    pub rule: usize,
    pub left: Word,
    pub right: Word,
    pub coef: Coef,
    pub remainder: LinComb,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinTrace {
    pub source: LinComb,
    pub target: LinComb,
    pub steps: Vec<(LinStep, Direction)>,
    pub kind: TraceKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinBranchingJoin {
    pub branching: CriticalBranching,
    pub left: LinTrace,
    pub right: LinTrace,
    pub joined: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinBudgetExceeded {
    pub partial: LinTrace,
}

impl std::fmt::Display for LinBudgetExceeded {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "budget exceeded after {} steps", self.partial.steps.len())
    }
}

impl std::error::Error for LinBudgetExceeded {}

impl LinStep {
    pub fn monomial(&self, sys: &LinearSystem) -> Word {
        whiskered(&self.left, &sys.rules[self.rule].lhs, &self.right)
    }

    pub fn source(&self, sys: &LinearSystem) -> LinComb {
        let m = LinComb::monomial(self.coef.clone(), &self.monomial(sys));
        m.add(&self.remainder).expect("parallel by construction")
    }

    pub fn target(&self, sys: &LinearSystem) -> LinComb {
        let rhs = sys.rules[self.rule].rhs.whisker(&self.left, &self.right).expect("typed contexts");
        LinComb::combine(&self.coef, &rhs, &Coef::from_integer(1.into()), &self.remainder).expect("parallel by construction")
    }

    pub fn scale(&self, c: &Coef) -> LinStep {
        LinStep { coef: &self.coef * c, remainder: self.remainder.scale(c), ..self.clone() }
    }
}

/// A forward trace as a vertical composite; each layer is the whiskered
/// rule with its coefficient plus the identity on the remainder.
pub fn lin_trace_expr(t: &LinTrace) -> Result<CellExpr, CoreError> {
    if t.steps.iter().any(|(_, d)| *d == Direction::Backward) {
        return Err(CoreError::Unsupported("backward steps have no expression form".into()));
    }
    if t.steps.is_empty() {
        return Err(CoreError::Unsupported("empty trace".into()));
    }
    let layer = |s: &LinStep| {
        let mut terms = whisker_layer(s.rule, &s.left, &s.right).0;
        terms[0].coef = s.coef.clone();
        for (w, c) in s.remainder.terms() {
            let atoms = if w.is_identity() {
                vec![Atom::Identity(w.src())]
            } else {
                w.letters().iter().map(|&a| Atom::Arrow(a)).collect()
            };
            terms.push(Term { coef: c.clone(), atoms });
        }
        Layer(terms)
    };
    Ok(CellExpr(t.steps.iter().map(|(s, _)| layer(s)).collect()))
}

fn whiskered(left: &Word, mid: &Word, right: &Word) -> Word {
    left.compose(mid).and_then(|x| x.compose(right)).expect("typed contexts")
}

impl LinTrace {
    pub fn empty(x: &LinComb, kind: TraceKind) -> LinTrace {
        LinTrace { source: x.clone(), target: x.clone(), steps: Vec::new(), kind }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn then(&self, other: &LinTrace) -> LinTrace {
        debug_assert_eq!(self.target, other.source);
        let mut steps = self.steps.clone();
        steps.extend(other.steps.iter().cloned());
        let kind = if self.kind == TraceKind::Reduction && other.kind == TraceKind::Reduction {
            TraceKind::Reduction
        } else {
            TraceKind::Derivation
        };
        LinTrace { source: self.source.clone(), target: other.target.clone(), steps, kind }
    }

    pub fn reverse(&self) -> LinTrace {
        LinTrace {
            source: self.target.clone(),
            target: self.source.clone(),
            steps: self.steps.iter().rev().map(|(s, d)| (s.clone(), d.flip())).collect(),
            kind: if self.steps.is_empty() { self.kind } else { TraceKind::Derivation },
        }
    }

    pub fn replay(&self, sys: &LinearSystem) -> Result<LinComb, String> {
        let mut cur = self.source.clone();
        for (i, (s, d)) in self.steps.iter().enumerate() {
            if *d == Direction::Backward && self.kind == TraceKind::Reduction {
                return Err(format!("step {i}: backward step in a reduction trace"));
            }
            if s.rule >= sys.rules.len() {
                return Err(format!("step {i}: no rule {}", s.rule));
            }
            if s.coef == Coef::from_integer(0.into()) {
                return Err(format!("step {i}: zero coefficient"));
            }
            if s.remainder.contains(&s.monomial(sys)) {
                return Err(format!("step {i}: rewritten monomial occurs in the remainder"));
            }
            let (from, to) = match d {
                Direction::Forward => (s.source(sys), s.target(sys)),
                Direction::Backward => (s.target(sys), s.source(sys)),
            };
            if from != cur {
                return Err(format!("step {i}: step source differs from the current combination"));
            }
            cur = to;
        }
        if cur != self.target {
            return Err("trace does not end at its target".into());
        }
        Ok(cur)
    }
}

impl LinearSystem {
    pub fn new(rules: Vec<LinRule>) -> Self {
        LinearSystem { rules, convergent: OnceLock::new() }
    }

    pub fn from_polygraph(pg: &Polygraph) -> Result<Self, CoreError> {
        pg.require_linear()?;
        Ok(LinearSystem::new(
            pg.rules.iter().map(|r| LinRule { name: r.name.clone(), lhs: r.lhs.clone(), rhs: r.rhs_lin() }).collect(),
        ))
    }

    /// Redexes in one monomial, by position then rule order.
    pub fn monomial_redexes(&self, m: &Word) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for pos in 0..=m.len() {
            for (i, r) in self.rules.iter().enumerate() {
                if m.occurs_at(&r.lhs, pos) {
                    out.push((i, pos));
                }
            }
        }
        out
    }

    fn leftmost(&self, m: &Word) -> Option<(usize, usize)> {
        for pos in 0..=m.len() {
            for (i, r) in self.rules.iter().enumerate() {
                if m.occurs_at(&r.lhs, pos) {
                    return Some((i, pos));
                }
            }
        }
        None
    }

    fn make_step(&self, x: &LinComb, m: &Word, rule: usize, pos: usize) -> LinStep {
        let len = self.rules[rule].lhs.len();
        let c = x.coefficient(m);
        let remainder = x.sub(&LinComb::monomial(c.clone(), m)).expect("parallel");
        LinStep { rule, left: m.slice(0, pos), right: m.slice(pos + len, m.len()), coef: c, remainder }
    }

    /// Canonical step: greatest reducible monomial, leftmost redex.
    pub fn lin_reduce_step(&self, x: &LinComb) -> Option<(LinComb, LinStep)> {
        for (m, _) in x.terms().rev() {
            if let Some((rule, pos)) = self.leftmost(m) {
                let step = self.make_step(x, m, rule, pos);
                return Some((step.target(self), step));
            }
        }
        None
    }

    pub fn is_normal(&self, x: &LinComb) -> bool {
        x.terms().all(|(m, _)| self.leftmost(m).is_none())
    }

    pub fn lin_normalize(&self, x: &LinComb, budget: usize) -> Result<(LinComb, LinTrace), LinBudgetExceeded> {
        let mut trace = LinTrace::empty(x, TraceKind::Reduction);
        let mut cur = x.clone();
        while let Some((next, step)) = self.lin_reduce_step(&cur) {
            if trace.steps.len() >= budget {
                return Err(LinBudgetExceeded { partial: trace });
            }
            trace.steps.push((step, Direction::Forward));
            cur = next;
            trace.target = cur.clone();
        }
        Ok((cur, trace))
    }

    pub fn normal_form(&self, x: &LinComb) -> Result<LinComb, CoreError> {
        self.lin_normalize(x, DEFAULT_BUDGET).map(|(n, _)| n).map_err(|e| CoreError::Unsupported(e.to_string()))
    }

    /// Every full-coefficient step out of `x`.
    pub fn successors(&self, x: &LinComb) -> Vec<(LinStep, LinComb)> {
        let mut out = Vec::new();
        for (m, _) in x.terms().rev() {
            for (rule, pos) in self.monomial_redexes(m) {
                let s = self.make_step(x, m, rule, pos);
                let t = s.target(self);
                out.push((s, t));
            }
        }
        out
    }

    /// A single step at a given monomial and redex.
    pub fn step_at(&self, x: &LinComb, m: &Word, rule: usize, pos: usize) -> LinTrace {
        let s = self.make_step(x, m, rule, pos);
        let t = s.target(self);
        LinTrace { source: x.clone(), target: t, steps: vec![(s, Direction::Forward)], kind: TraceKind::Reduction }
    }

    pub fn lin_critical_branchings(&self) -> Vec<CriticalBranching> {
        let redex = |host: &Word, rule: usize, pos: usize, len: usize| Redex {
            rule,
            position: pos,
            left: host.slice(0, pos),
            right: host.slice(pos + len, host.len()),
        };
        let mut seen = BTreeSet::new();
        for (i, ri) in self.rules.iter().enumerate() {
            for (j, rj) in self.rules.iter().enumerate() {
                let (li, lj) = (&ri.lhs, &rj.lhs);
                if li.is_identity() {
                    continue;
                }
                if lj.is_identity() {
                    // an identity rule fires wherever li visits its 0-cell
                    for p in li.occurrences(lj) {
                        let a = redex(li, i, 0, li.len());
                        let b = redex(li, j, p, 0);
                        seen.insert(order_pair(li.clone(), a, b));
                    }
                    continue;
                }
                for k in 1..li.len().min(lj.len()) {
                    let start = li.len() - k;
                    if li.letters()[start..] == lj.letters()[..k] {
                        let overlap = li.compose(&lj.slice(k, lj.len())).expect("shared letters fix typing");
                        let a = redex(&overlap, i, 0, li.len());
                        let b = redex(&overlap, j, start, lj.len());
                        seen.insert(order_pair(overlap, a, b));
                    }
                }
                if i != j && lj.len() <= li.len() {
                    for p in li.occurrences(lj) {
                        if lj.len() == li.len() && j < i {
                            continue;
                        }
                        let a = redex(li, i, 0, li.len());
                        let b = redex(li, j, p, lj.len());
                        seen.insert(order_pair(li.clone(), a, b));
                    }
                }
            }
        }
        seen.into_iter().collect()
    }

    /// The one-step reduct of `b.overlap` at one side of a branching.
    pub fn branch_step(&self, b: &CriticalBranching, first: bool) -> LinTrace {
        let r = if first { &b.a } else { &b.b };
        self.step_at(&LinComb::from_word(&b.overlap), &b.overlap, r.rule, r.position)
    }

    /// True when every rule's right-hand side lies strictly below its
    /// left-hand side in deglex, which makes reduction terminate.
    pub fn deglex_decreasing(&self) -> bool {
        self.rules.iter().all(|r| r.rhs.terms().all(|(m, _)| m < &r.lhs))
    }

    pub fn lin_confluence(&self, join_depth: usize) -> Verdict<Vec<LinBranchingJoin>> {
        let branchings = self.lin_critical_branchings();
        let mut budget = Budget::default();
        if self.deglex_decreasing() {
            let joins: Vec<Option<LinBranchingJoin>> = branchings
                .par_iter()
                .map(|b| {
                    let leg = |first: bool| -> Option<LinTrace> {
                        let s = self.branch_step(b, first);
                        let (_, rest) = self.lin_normalize(&s.target, DEFAULT_BUDGET).ok()?;
                        Some(s.then(&rest))
                    };
                    let (left, right) = (leg(true)?, leg(false)?);
                    let joined = left.target == right.target;
                    Some(LinBranchingJoin { branching: b.clone(), left, right, joined })
                })
                .collect();
            let mut done = Vec::new();
            for j in joins {
                let Some(j) = j else {
                    budget.exhausted = true;
                    return Verdict::unknown(budget, "normalization budget exceeded");
                };
                budget.steps += j.left.len() + j.right.len();
                done.push(j);
            }
            budget.nodes = done.len();
            if let Some(bad) = done.iter().find(|j| !j.joined) {
                return Verdict::no(vec![bad.clone()], budget);
            }
            return Verdict::yes(done, budget).with_note("deglex-decreasing and all critical branchings join");
        }
        let mut done = Vec::new();
        let mut all = true;
        for b in &branchings {
            let (sa, sb) = (self.branch_step(b, true), self.branch_step(b, false));
            let v = self.lin_joinable(&sa.target, &sb.target, join_depth);
            budget.absorb(&v.budget);
            match (v.status, v.witness) {
                (Status::Yes, Some((l, r))) => done.push(LinBranchingJoin {
                    branching: b.clone(),
                    left: sa.then(&l),
                    right: sb.then(&r),
                    joined: true,
                }),
                (Status::No, _) => {
                    return Verdict::no(vec![LinBranchingJoin { branching: b.clone(), left: sa, right: sb, joined: false }], budget)
                        .with_note("the reducts have disjoint finite reachable sets");
                }
                _ => all = false,
            }
        }
        let mut v = Verdict::unknown(
            budget,
            if all { "locally confluent; no termination certificate" } else { "some branchings did not join within depth" },
        );
        v.witness = Some(done);
        v
    }

    /// One coherence cell per critical branching of a convergent system.
    pub fn lin_squier_basis(&self) -> Result<Vec<CoherenceCell>, CoreError> {
        if !self.deglex_decreasing() {
            return Err(CoreError::Unsupported("system is not certified terminating".into()));
        }
        let conf = self.lin_confluence(0);
        if !conf.is_yes() {
            return Err(CoreError::Unsupported("system is not confluent".into()));
        }
        let mut out = Vec::new();
        for (k, j) in conf.witness.expect("yes carries joins").into_iter().enumerate() {
            let (src, tgt) = if j.branching.b.position >= j.branching.a.position {
                (&j.right, &j.left)
            } else {
                (&j.left, &j.right)
            };
            out.push(CoherenceCell { name: format!("A{}", k + 1), source: lin_trace_expr(src)?, target: lin_trace_expr(tgt)? });
        }
        Ok(out)
    }

    fn explore(&self, seeds: &[LinComb], depth: usize, max_nodes: usize) -> LinExploration {
        let mut ex = LinExploration { order: Vec::new(), index: HashMap::new(), parent: Vec::new(), closed: true, depth: 0, growth: None };
        let mut queue = VecDeque::new();
        for s in seeds {
            if !ex.index.contains_key(s) {
                ex.index.insert(s.clone(), ex.order.len());
                ex.order.push(s.clone());
                ex.parent.push(None);
                queue.push_back((ex.order.len() - 1, 0usize));
            }
        }
        while let Some((u, d)) = queue.pop_front() {
            let succ = self.successors(&ex.order[u]);
            if succ.is_empty() {
                continue;
            }
            if d >= depth || ex.order.len() >= max_nodes {
                ex.closed = false;
                continue;
            }
            ex.depth = ex.depth.max(d + 1);
            for (step, v) in succ {
                if ex.index.contains_key(&v) {
                    continue;
                }
                let id = ex.order.len();
                ex.index.insert(v.clone(), id);
                ex.order.push(v);
                ex.parent.push(Some((u, step)));
                queue.push_back((id, d + 1));
                if ex.growth.is_none() {
                    ex.growth = ex.find_growth(id);
                }
            }
        }
        ex
    }

    /// Region-based quasi-termination. NO is certified by a combination
    /// that rewrites into a multiple `c·x` of itself with `|c| != 1`.
    pub fn lin_quasi_termination_region(&self, seeds: &[LinComb], depth: usize) -> Result<Verdict<LinTrace>, CoreError> {
        if seeds.is_empty() {
            return Err(CoreError::Unsupported("empty seed set".into()));
        }
        let ex = self.explore(seeds, depth, DEFAULT_NODES);
        let budget = Budget { nodes: ex.order.len(), depth: ex.depth, steps: ex.order.len().saturating_sub(seeds.len()), exhausted: !ex.closed };
        if let Some((anc, node, ref c)) = ex.growth {
            return Ok(Verdict::no(ex.path(anc, node), budget)
                .with_note(format!("a combination rewrites into {c} times itself; its multiples never repeat")));
        }
        if ex.closed {
            return Ok(Verdict::yes(LinTrace::empty(&seeds[0], TraceKind::Reduction), budget)
                .with_note("reachable region is finite; every infinite path revisits a cell"));
        }
        Ok(Verdict::unknown(budget, "region did not close within depth"))
    }

    /// Bounded search for a common reduct of `x` and `y`.
    pub fn lin_joinable(&self, x: &LinComb, y: &LinComb, depth: usize) -> Verdict<(LinTrace, LinTrace)> {
        if !x.is_parallel(y) {
            return Verdict::unknown(Budget::default(), "combinations are not parallel");
        }
        if self.deglex_decreasing() {
            if let (Ok((nx, tx)), Ok((ny, ty))) = (self.lin_normalize(x, DEFAULT_BUDGET), self.lin_normalize(y, DEFAULT_BUDGET)) {
                let budget = Budget { steps: tx.len() + ty.len(), nodes: 2, depth: tx.len().max(ty.len()), exhausted: false };
                if nx == ny {
                    return Verdict::yes((tx, ty), budget);
                }
                if self.is_convergent() {
                    return Verdict { status: Status::No, witness: Some((tx, ty)), budget, note: "distinct normal forms of a convergent system".into() };
                }
            }
        }
        let ex = self.explore(std::slice::from_ref(x), depth, DEFAULT_NODES);
        let ey = self.explore(std::slice::from_ref(y), depth, DEFAULT_NODES);
        let budget = Budget { nodes: ex.order.len() + ey.order.len(), depth: ex.depth.max(ey.depth), steps: 0, exhausted: !(ex.closed && ey.closed) };
        let meet = ex
            .order
            .iter()
            .enumerate()
            .filter_map(|(i, w)| ey.index.get(w).map(|&j| (ex.distance(i) + ey.distance(j), i, j)))
            .min();
        if let Some((_, i, j)) = meet {
            return Verdict::yes((ex.path(0, i), ey.path(0, j)), budget);
        }
        if ex.closed && ey.closed {
            // paths to an irreducible combination on each side, when there is one
            let sink = |e: &LinExploration| (0..e.order.len()).find(|&i| self.is_normal(&e.order[i]));
            let witness = match (sink(&ex), sink(&ey)) {
                (Some(i), Some(j)) => Some((ex.path(0, i), ey.path(0, j))),
                _ => None,
            };
            return Verdict { status: Status::No, witness, budget, note: "reachable sets are finite and disjoint".into() };
        }
        Verdict::unknown(budget, "no common reduct within depth")
    }

    /// Deglex-decreasing and confluent; computed once.
    pub fn is_convergent(&self) -> bool {
        *self.convergent.get_or_init(|| self.deglex_decreasing() && self.lin_confluence(0).is_yes())
    }
}

fn order_pair(overlap: Word, a: Redex, b: Redex) -> CriticalBranching {
    let (a, b) = if (a.position, a.rule) <= (b.position, b.rule) { (a, b) } else { (b, a) };
    CriticalBranching { overlap, a, b }
}

struct LinExploration {
    order: Vec<LinComb>,
    index: HashMap<LinComb, usize>,
    parent: Vec<Option<(usize, LinStep)>>,
    closed: bool,
    depth: usize,
    growth: Option<(usize, usize, Coef)>,
}

impl LinExploration {
    fn distance(&self, mut i: usize) -> usize {
        let mut d = 0;
        while let Some((p, _)) = &self.parent[i] {
            i = *p;
            d += 1;
        }
        d
    }

    fn find_growth(&self, node: usize) -> Option<(usize, usize, Coef)> {
        let v = &self.order[node];
        let (m, cv) = v.terms().next()?;
        let mut cur = self.parent[node].as_ref().map(|(p, _)| *p);
        while let Some(a) = cur {
            let x = &self.order[a];
            let cx = x.coefficient(m);
            if cx != Coef::from_integer(0.into()) {
                let c = cv / &cx;
                let unit = c == Coef::from_integer(1.into()) || c == Coef::from_integer((-1).into());
                if !unit && x.scale(&c) == *v {
                    return Some((a, node, c));
                }
            }
            cur = self.parent[a].as_ref().map(|(p, _)| *p);
        }
        None
    }

    fn path(&self, from: usize, to: usize) -> LinTrace {
        let mut steps = Vec::new();
        let mut cur = to;
        while cur != from {
            let (p, s) = self.parent[cur].as_ref().expect("from is an ancestor of to");
            steps.push((s.clone(), Direction::Forward));
            cur = *p;
        }
        steps.reverse();
        LinTrace { source: self.order[from].clone(), target: self.order[to].clone(), steps, kind: TraceKind::Reduction }
    }
}

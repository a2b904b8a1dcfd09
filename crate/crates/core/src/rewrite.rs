//! Set-level string rewriting for 2-polygraphs.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use rayon::prelude::*;

use crate::cell::{ArrowId, Word};
use crate::error::CoreError;
use crate::expr::{Atom, CellExpr, Layer, Term};
use crate::polygraph::{Polygraph, Rhs};
use crate::verdict::{Budget, Status, Verdict};

pub const DEFAULT_BUDGET: usize = 10_000;
pub const DEFAULT_NODES: usize = 100_000;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SetRule {
    pub name: String,
    pub lhs: Word,
    pub rhs: Word,
}

/// The rules of a set-level 2-polygraph, detached from name tables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StringSystem {
    pub rules: Vec<SetRule>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Redex {
    pub rule: usize,
    pub position: usize,
    pub left: Word,
    pub right: Word,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn flip(self) -> Self {
        match self {
            Direction::Forward => Direction::Backward,
            Direction::Backward => Direction::Forward,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TraceKind {
    /// Forward steps only.
    Reduction,
    /// Steps in both directions: a cell of the free (2,1)-category.
    Derivation,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Step {
    pub redex: Redex,
    pub direction: Direction,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub source: Word,
    pub target: Word,
    pub steps: Vec<Step>,
    pub kind: TraceKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Strategy {
    Leftmost,
    Rightmost,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BudgetExceeded {
    pub partial: Trace,
}

impl std::fmt::Display for BudgetExceeded {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "budget exceeded after {} steps", self.partial.steps.len())
    }
}

impl std::error::Error for BudgetExceeded {}

/// Two rewrites of one overlap word whose redexes share a letter.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CriticalBranching {
    pub overlap: Word,
    pub a: Redex,
    pub b: Redex,
}

/// A branching together with the legs that try to close it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BranchingJoin {
    pub branching: CriticalBranching,
    pub left: Trace,
    pub right: Trace,
    pub joined: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ReductionOrder {
    /// Length first, then left-to-right comparison of letters by rank.
    Lenlex { rank: Vec<usize> },
    /// Total positive weight first, then as `Lenlex`.
    Weights { weights: Vec<u64>, rank: Vec<usize> },
}

impl ReductionOrder {
    /// Length-lexicographic order with later-declared generators greater.
    pub fn lenlex(arrows: usize) -> Self {
        ReductionOrder::Lenlex { rank: (0..arrows).collect() }
    }

    /// Lenlex with an explicit precedence list, lowest first. Generators
    /// missing from the list keep declaration order below listed ones.
    pub fn with_precedence(arrows: usize, lowest_first: &[ArrowId]) -> Self {
        let mut rank = vec![0; arrows];
        let mut next = 0;
        for a in 0..arrows {
            if !lowest_first.contains(&a) {
                rank[a] = next;
                next += 1;
            }
        }
        for &a in lowest_first {
            rank[a] = next;
            next += 1;
        }
        ReductionOrder::Lenlex { rank }
    }

    pub fn weights(weights: Vec<i64>) -> Result<Self, CoreError> {
        if let Some(w) = weights.iter().find(|&&w| w <= 0) {
            return Err(CoreError::Unsupported(format!("non-positive weight {w}")));
        }
        let n = weights.len();
        Ok(ReductionOrder::Weights { weights: weights.into_iter().map(|w| w as u64).collect(), rank: (0..n).collect() })
    }

    fn rank(&self) -> &[usize] {
        match self {
            ReductionOrder::Lenlex { rank } | ReductionOrder::Weights { rank, .. } => rank,
        }
    }

    pub fn compare(&self, u: &Word, v: &Word) -> Ordering {
        if let ReductionOrder::Weights { weights, .. } = self {
            let wu: u64 = u.letters().iter().map(|&a| weights[a]).sum();
            let wv: u64 = v.letters().iter().map(|&a| weights[a]).sum();
            if wu != wv {
                return wu.cmp(&wv);
            }
        }
        let rank = self.rank();
        u.len()
            .cmp(&v.len())
            .then_with(|| u.letters().iter().map(|&a| rank[a]).cmp(v.letters().iter().map(|&a| rank[a])))
    }
}

impl Redex {
    pub fn at(sys: &StringSystem, host: &Word, rule: usize, position: usize) -> Redex {
        let len = sys.rules[rule].lhs.len();
        Redex { rule, position, left: host.slice(0, position), right: host.slice(position + len, host.len()) }
    }
}

impl Trace {
    pub fn empty(w: &Word, kind: TraceKind) -> Trace {
        Trace { source: w.clone(), target: w.clone(), steps: Vec::new(), kind }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn reverse(&self) -> Trace {
        Trace {
            source: self.target.clone(),
            target: self.source.clone(),
            steps: self
                .steps
                .iter()
                .rev()
                .map(|s| Step { redex: s.redex.clone(), direction: s.direction.flip() })
                .collect(),
            kind: if self.steps.is_empty() { self.kind } else { TraceKind::Derivation },
        }
    }

    /// Concatenation; the target of `self` must be the source of `other`.
    pub fn then(&self, other: &Trace) -> Trace {
        debug_assert_eq!(self.target, other.source);
        let mut steps = self.steps.clone();
        steps.extend(other.steps.iter().cloned());
        let kind = if self.kind == TraceKind::Reduction && other.kind == TraceKind::Reduction {
            TraceKind::Reduction
        } else {
            TraceKind::Derivation
        };
        Trace { source: self.source.clone(), target: other.target.clone(), steps, kind }
    }

    /// The same steps performed inside `left · _ · right`.
    pub fn whisker(&self, left: &Word, right: &Word) -> Result<Trace, CoreError> {
        let wrap = |w: &Word| left.compose(w)?.compose(right);
        let steps = self
            .steps
            .iter()
            .map(|s| {
                Ok(Step {
                    redex: Redex {
                        rule: s.redex.rule,
                        position: s.redex.position + left.len(),
                        left: left.compose(&s.redex.left)?,
                        right: s.redex.right.compose(right)?,
                    },
                    direction: s.direction,
                })
            })
            .collect::<Result<Vec<_>, CoreError>>()?;
        Ok(Trace { source: wrap(&self.source)?, target: wrap(&self.target)?, steps, kind: self.kind })
    }

    /// Re-executes every step from `source`; returns the reached word or a
    /// description of the first inconsistency.
    pub fn replay(&self, sys: &StringSystem) -> Result<Word, String> {
        let mut cur = self.source.clone();
        for (i, s) in self.steps.iter().enumerate() {
            if s.direction == Direction::Backward && self.kind == TraceKind::Reduction {
                return Err(format!("step {i}: backward step in a reduction trace"));
            }
            let rule = sys.rules.get(s.redex.rule).ok_or_else(|| format!("step {i}: no rule {}", s.redex.rule))?;
            let (from, to) = match s.direction {
                Direction::Forward => (&rule.lhs, &rule.rhs),
                Direction::Backward => (&rule.rhs, &rule.lhs),
            };
            let expected = s.redex.left.compose(from).and_then(|x| x.compose(&s.redex.right));
            if expected.as_ref() != Ok(&cur) || s.redex.position != s.redex.left.len() {
                return Err(format!("step {i}: redex does not match the current word"));
            }
            cur = s.redex.left.compose(to).and_then(|x| x.compose(&s.redex.right)).map_err(|e| e.to_string())?;
        }
        if cur != self.target {
            return Err("trace does not end at its target".into());
        }
        Ok(cur)
    }
}

impl StringSystem {
    pub fn new(rules: Vec<SetRule>) -> Self {
        StringSystem { rules }
    }

    pub fn from_polygraph(pg: &Polygraph) -> Result<Self, CoreError> {
        pg.require_set_level()?;
        let rules = pg
            .rules
            .iter()
            .map(|r| match &r.rhs {
                Rhs::Word(w) => Ok(SetRule { name: r.name.clone(), lhs: r.lhs.clone(), rhs: w.clone() }),
                Rhs::Lin(_) => Err(CoreError::Unsupported(format!("rule `{}` has a linear right-hand side", r.name))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(StringSystem { rules })
    }

    /// All occurrences of left-hand sides in `w`, by position then rule order.
    pub fn find_redexes(&self, w: &Word) -> Vec<Redex> {
        let mut out = Vec::new();
        for pos in 0..=w.len() {
            for (i, r) in self.rules.iter().enumerate() {
                if !r.lhs.is_identity() && w.occurs_at(&r.lhs, pos) {
                    out.push(Redex::at(self, w, i, pos));
                }
            }
        }
        out
    }

    pub fn is_normal(&self, w: &Word) -> bool {
        (0..=w.len()).all(|pos| self.rules.iter().all(|r| r.lhs.is_identity() || !w.occurs_at(&r.lhs, pos)))
    }

    fn pick(&self, w: &Word, strategy: Strategy) -> Option<Redex> {
        let positions: Box<dyn Iterator<Item = usize>> = match strategy {
            Strategy::Leftmost => Box::new(0..=w.len()),
            Strategy::Rightmost => Box::new((0..=w.len()).rev()),
        };
        for pos in positions {
            for (i, r) in self.rules.iter().enumerate() {
                if !r.lhs.is_identity() && w.occurs_at(&r.lhs, pos) {
                    return Some(Redex::at(self, w, i, pos));
                }
            }
        }
        None
    }

    /// Applies a forward step at `redex`.
    pub fn apply(&self, redex: &Redex) -> Word {
        let r = &self.rules[redex.rule];
        redex.left.compose(&r.rhs).and_then(|x| x.compose(&redex.right)).expect("redex contexts are typed")
    }

    fn apply_backward(&self, redex: &Redex) -> Word {
        let r = &self.rules[redex.rule];
        redex.left.compose(&r.lhs).and_then(|x| x.compose(&redex.right)).expect("redex contexts are typed")
    }

    pub fn step(&self, w: &Word, rule: usize, position: usize) -> Trace {
        let redex = Redex::at(self, w, rule, position);
        let target = self.apply(&redex);
        Trace {
            source: w.clone(),
            target,
            steps: vec![Step { redex, direction: Direction::Forward }],
            kind: TraceKind::Reduction,
        }
    }

    pub fn normalize(&self, w: &Word, strategy: Strategy, budget: usize) -> Result<(Word, Trace), BudgetExceeded> {
        let mut trace = Trace::empty(w, TraceKind::Reduction);
        let mut cur = w.clone();
        while let Some(redex) = self.pick(&cur, strategy) {
            if trace.steps.len() >= budget {
                return Err(BudgetExceeded { partial: trace });
            }
            cur = self.apply(&redex);
            trace.steps.push(Step { redex, direction: Direction::Forward });
            trace.target = cur.clone();
        }
        Ok((cur, trace))
    }

    /// One-step forward neighbours.
    pub fn successors(&self, w: &Word) -> Vec<(Redex, Word)> {
        self.find_redexes(w).into_iter().map(|r| (r.clone(), self.apply(&r))).collect()
    }

    /// One-step neighbours in both directions.
    fn neighbours(&self, w: &Word) -> Vec<(Step, Word)> {
        let mut out: Vec<(Step, Word)> = self
            .successors(w)
            .into_iter()
            .map(|(redex, v)| (Step { redex, direction: Direction::Forward }, v))
            .collect();
        for pos in 0..=w.len() {
            for (i, r) in self.rules.iter().enumerate() {
                if w.occurs_at(&r.rhs, pos) {
                    let redex = Redex {
                        rule: i,
                        position: pos,
                        left: w.slice(0, pos),
                        right: w.slice(pos + r.rhs.len(), w.len()),
                    };
                    let v = self.apply_backward(&redex);
                    out.push((Step { redex, direction: Direction::Backward }, v));
                }
            }
        }
        out
    }

    pub fn critical_branchings(&self) -> Vec<CriticalBranching> {
        let mut seen = BTreeSet::new();
        for (i, ri) in self.rules.iter().enumerate() {
            for (j, rj) in self.rules.iter().enumerate() {
                let (li, lj) = (&ri.lhs, &rj.lhs);
                if li.is_identity() || lj.is_identity() {
                    continue;
                }
                // suffix of li equal to prefix of lj
                for k in 1..li.len().min(lj.len()) {
                    let start = li.len() - k;
                    if li.letters()[start..] == lj.letters()[..k] {
                        let overlap = li.compose(&lj.slice(k, lj.len())).expect("shared letters fix typing");
                        let a = Redex::at(self, &overlap, i, 0);
                        let b = Redex::at(self, &overlap, j, start);
                        seen.insert(canonical(overlap, a, b));
                    }
                }
                // lj inside li
                if i != j && lj.len() <= li.len() {
                    for p in li.occurrences(lj) {
                        if lj.len() == li.len() && j < i {
                            continue;
                        }
                        let a = Redex::at(self, li, i, 0);
                        let b = Redex::at(self, li, j, p);
                        seen.insert(canonical(li.clone(), a, b));
                    }
                }
            }
        }
        seen.into_iter().collect()
    }

    /// Per-rule comparison against `order`.
    pub fn check_termination(&self, order: &ReductionOrder) -> Verdict<Vec<(String, Ordering)>> {
        let cert: Vec<(String, Ordering)> =
            self.rules.iter().map(|r| (r.name.clone(), order.compare(&r.lhs, &r.rhs))).collect();
        let budget = Budget { steps: self.rules.len(), ..Budget::default() };
        if cert.iter().all(|(_, o)| *o == Ordering::Greater) {
            Verdict::yes(cert, budget)
        } else {
            let failing: Vec<&str> =
                cert.iter().filter(|(_, o)| *o != Ordering::Greater).map(|(n, _)| n.as_str()).collect();
            let mut v = Verdict::unknown(budget, format!("not decreasing: {}", failing.join(", ")));
            v.witness = Some(cert);
            v
        }
    }

    fn leg(&self, w: &Word, r: &Redex, budget: usize) -> Result<Trace, BudgetExceeded> {
        let first = self.step(w, r.rule, r.position);
        let (_, rest) = self.normalize(&first.target, Strategy::Leftmost, budget)?;
        Ok(first.then(&rest))
    }

    /// Newman's lemma under `order`, or a bounded search otherwise.
    pub fn check_confluence(&self, order: &ReductionOrder, join_depth: usize) -> Verdict<Vec<BranchingJoin>> {
        let branchings = self.critical_branchings();
        let terminating = self.check_termination(order).is_yes();
        let mut budget = Budget::default();
        if terminating {
            let joins: Vec<Result<BranchingJoin, ()>> = branchings
                .par_iter()
                .map(|b| {
                    let left = self.leg(&b.overlap, &b.a, DEFAULT_BUDGET).map_err(|_| ())?;
                    let right = self.leg(&b.overlap, &b.b, DEFAULT_BUDGET).map_err(|_| ())?;
                    let joined = left.target == right.target;
                    Ok(BranchingJoin { branching: b.clone(), left, right, joined })
                })
                .collect();
            let mut done = Vec::new();
            for j in joins {
                match j {
                    Ok(j) => {
                        budget.steps += j.left.len() + j.right.len();
                        done.push(j)
                    }
                    Err(()) => {
                        budget.exhausted = true;
                        return Verdict::unknown(budget, "normalization budget exceeded");
                    }
                }
            }
            budget.nodes = done.len();
            if let Some(bad) = done.iter().find(|j| !j.joined) {
                return Verdict::no(vec![bad.clone()], budget);
            }
            return Verdict::yes(done, budget).with_note("terminating and all critical branchings join");
        }
        let mut done = Vec::new();
        let mut all_joined = true;
        for b in &branchings {
            let ua = self.apply(&b.a);
            let ub = self.apply(&b.b);
            let v = self.joinable(&ua, &ub, join_depth, JoinMode::Reduction);
            budget.absorb(&v.budget);
            match v.status {
                Status::Yes => {
                    let (l, r) = match v.witness.expect("yes carries witness") {
                        JoinWitness::Meet { left, right } => (left, right),
                        JoinWitness::Path(_) => unreachable!("reduction mode meets"),
                    };
                    let left = self.step(&b.overlap, b.a.rule, b.a.position).then(&l);
                    let right = self.step(&b.overlap, b.b.rule, b.b.position).then(&r);
                    done.push(BranchingJoin { branching: b.clone(), left, right, joined: true });
                }
                Status::No => {
                    let left = self.step(&b.overlap, b.a.rule, b.a.position);
                    let right = self.step(&b.overlap, b.b.rule, b.b.position);
                    return Verdict::no(vec![BranchingJoin { branching: b.clone(), left, right, joined: false }], budget)
                        .with_note("the reducts have disjoint finite reachable sets");
                }
                Status::Unknown => all_joined = false,
            }
        }
        let note = if all_joined {
            "locally confluent; no termination certificate"
        } else {
            "some branchings did not join within depth"
        };
        let mut v = Verdict::unknown(budget, note);
        v.witness = Some(done);
        v
    }

    /// Bounded forward exploration from `seeds`: `reached` maps each word
    /// to its BFS parent.
    fn explore(&self, seeds: &[Word], depth: usize, max_nodes: usize) -> Exploration {
        let mut ex = Exploration { order: Vec::new(), index: HashMap::new(), parent: Vec::new(), edges: Vec::new(), closed: true, depth: 0, embedding: None };
        let mut queue = VecDeque::new();
        for s in seeds {
            if !ex.index.contains_key(s) {
                ex.index.insert(s.clone(), ex.order.len());
                ex.order.push(s.clone());
                ex.parent.push(None);
                ex.edges.push(Vec::new());
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
            for (redex, v) in succ {
                let id = match ex.index.get(&v) {
                    Some(&id) => id,
                    None => {
                        let id = ex.order.len();
                        ex.index.insert(v.clone(), id);
                        ex.order.push(v.clone());
                        ex.parent.push(Some((u, redex.clone())));
                        ex.edges.push(Vec::new());
                        queue.push_back((id, d + 1));
                        if ex.embedding.is_none() {
                            ex.embedding = ex.find_embedding(id);
                        }
                        id
                    }
                };
                ex.edges[u].push(id);
            }
        }
        ex
    }

    /// Region-based quasi-termination from `seeds`.
    pub fn quasi_termination_region(&self, seeds: &[Word], depth: usize) -> Result<Verdict<Trace>, CoreError> {
        if seeds.is_empty() {
            return Err(CoreError::Unsupported("empty seed set".into()));
        }
        let ex = self.explore(seeds, depth, DEFAULT_NODES);
        let budget = Budget { nodes: ex.order.len(), depth: ex.depth, steps: ex.edges.iter().map(Vec::len).sum(), exhausted: !ex.closed };
        if let Some((anc, node)) = ex.embedding {
            let t = ex.path(anc, node);
            return Ok(Verdict::no(t, budget).with_note(format!(
                "a word rewrites into a strictly larger word containing it (length {} to {})",
                ex.order[anc].len(),
                ex.order[node].len()
            )));
        }
        if ex.closed {
            let seed = &ex.order[0];
            return Ok(Verdict::yes(Trace::empty(seed, TraceKind::Reduction), budget)
                .with_note("reachable region is finite; every infinite path revisits a cell"));
        }
        Ok(Verdict::unknown(budget, "region did not close within depth"))
    }

    /// Sink strongly connected components of the bounded rewrite graph.
    pub fn quasi_normal_forms(&self, w: &Word, depth: usize) -> (Vec<Word>, Verdict<()>) {
        let ex = self.explore(std::slice::from_ref(w), depth, DEFAULT_NODES);
        let mut g = DiGraph::<(), ()>::new();
        let nodes: Vec<_> = ex.order.iter().map(|_| g.add_node(())).collect();
        for (u, out) in ex.edges.iter().enumerate() {
            for &v in out {
                g.add_edge(nodes[u], nodes[v], ());
            }
        }
        let mut result = Vec::new();
        for comp in tarjan_scc(&g) {
            let members: HashSet<usize> = comp.iter().map(|n| n.index()).collect();
            let sink = members.iter().all(|&u| ex.edges[u].iter().all(|v| members.contains(v)));
            // nodes cut off by the depth bound are not known to be sinks
            let expanded = members.iter().all(|&u| ex.edges[u].len() == self.successors(&ex.order[u]).len());
            if sink && expanded {
                result.extend(members.iter().map(|&u| ex.order[u].clone()));
            }
        }
        result.sort();
        let budget = Budget { nodes: ex.order.len(), depth: ex.depth, steps: 0, exhausted: !ex.closed };
        let v = if ex.closed {
            Verdict::yes((), budget)
        } else {
            Verdict::unknown(budget, "rewrite graph did not close within depth")
        };
        (result, v)
    }

    /// Searches for a common reduct (reduction mode) or a zig-zag of steps
    /// (derivation mode) between parallel words.
    pub fn joinable(&self, u: &Word, v: &Word, depth: usize, mode: JoinMode) -> Verdict<JoinWitness> {
        if u.src() != v.src() || u.tgt() != v.tgt() {
            return Verdict::unknown(Budget::default(), "words are not parallel");
        }
        match mode {
            JoinMode::Reduction => self.join_reduction(u, v, depth),
            JoinMode::Derivation => self.join_derivation(u, v, depth, DEFAULT_NODES),
        }
    }

    fn join_reduction(&self, u: &Word, v: &Word, depth: usize) -> Verdict<JoinWitness> {
        let eu = self.explore(std::slice::from_ref(u), depth, DEFAULT_NODES);
        let ev = self.explore(std::slice::from_ref(v), depth, DEFAULT_NODES);
        let budget = Budget {
            nodes: eu.order.len() + ev.order.len(),
            depth: eu.depth.max(ev.depth),
            steps: 0,
            exhausted: !(eu.closed && ev.closed),
        };
        let meet = eu
            .order
            .iter()
            .enumerate()
            .filter_map(|(i, w)| ev.index.get(w).map(|&j| (eu.distance(i) + ev.distance(j), i, j)))
            .min();
        if let Some((_, i, j)) = meet {
            return Verdict::yes(JoinWitness::Meet { left: eu.path(0, i), right: ev.path(0, j) }, budget);
        }
        if eu.closed && ev.closed {
            return Verdict {
                status: Status::No,
                witness: None,
                budget,
                note: "both reachable sets are finite and disjoint".into(),
            };
        }
        Verdict::unknown(budget, "no common reduct within depth")
    }

    fn join_derivation(&self, u: &Word, v: &Word, depth: usize, max_nodes: usize) -> Verdict<JoinWitness> {
        // meet-in-the-middle BFS over the undirected rewrite graph
        type Back = HashMap<Word, Option<(Word, Step)>>;
        let mut seen: [Back; 2] = [HashMap::new(), HashMap::new()];
        seen[0].insert(u.clone(), None);
        seen[1].insert(v.clone(), None);
        let mut frontier = [vec![u.clone()], vec![v.clone()]];
        let mut budget = Budget::default();
        let mut meet = if u == v { Some(u.clone()) } else { None };
        let mut radius = [0usize, 0usize];
        while meet.is_none() && radius[0] + radius[1] < depth {
            // ties go to the smaller seed so that swapping u and v mirrors the search
            let side = if (frontier[0].len(), u) <= (frontier[1].len(), v) { 0 } else { 1 };
            if frontier[side].is_empty() {
                break;
            }
            let mut next = Vec::new();
            'outer: for w in &frontier[side] {
                for (step, x) in self.neighbours(w) {
                    budget.steps += 1;
                    if seen[side].contains_key(&x) {
                        continue;
                    }
                    seen[side].insert(x.clone(), Some((w.clone(), step)));
                    if seen[1 - side].contains_key(&x) {
                        meet = Some(x);
                        break 'outer;
                    }
                    next.push(x);
                }
            }
            radius[side] += 1;
            frontier[side] = next;
            budget.nodes = seen[0].len() + seen[1].len();
            if budget.nodes > max_nodes {
                budget.exhausted = true;
                break;
            }
        }
        budget.depth = radius[0] + radius[1];
        let Some(m) = meet else {
            if frontier[0].is_empty() || frontier[1].is_empty() {
                return Verdict {
                    status: Status::No,
                    witness: None,
                    budget,
                    note: "equivalence class is finite and does not contain the other word".into(),
                };
            }
            budget.exhausted = true;
            return Verdict::unknown(budget, "no derivation within depth");
        };
        let half = |side: usize| -> Trace {
            // steps from the seed of `side` to m
            let mut steps = Vec::new();
            let mut cur = m.clone();
            while let Some(Some((prev, step))) = seen[side].get(&cur) {
                steps.push(step.clone());
                cur = prev.clone();
            }
            steps.reverse();
            Trace { source: cur, target: m.clone(), steps, kind: TraceKind::Derivation }
        };
        let path = half(0).then(&half(1).reverse());
        let path = Trace { kind: TraceKind::Derivation, ..path };
        Verdict::yes(JoinWitness::Path(path), budget)
    }

    /// A Squier homotopy basis: one cell per critical branching.
    pub fn squier_basis(&self, pg: &Polygraph, order: &ReductionOrder) -> Result<Vec<CoherenceCell>, CoreError> {
        if !self.check_termination(order).is_yes() {
            return Err(CoreError::Unsupported("system is not certified terminating".into()));
        }
        let conf = self.check_confluence(order, 0);
        if !conf.is_yes() {
            return Err(CoreError::Unsupported("system is not confluent".into()));
        }
        let mut out = Vec::new();
        for (k, j) in conf.witness.expect("yes carries joins").into_iter().enumerate() {
            // the leg starting further right is the source
            let (src, tgt) = if j.branching.b.position >= j.branching.a.position {
                (&j.right, &j.left)
            } else {
                (&j.left, &j.right)
            };
            out.push(CoherenceCell {
                name: format!("A{}", k + 1),
                source: trace_expr(pg, src)?,
                target: trace_expr(pg, tgt)?,
            });
        }
        Ok(out)
    }
}

fn canonical(overlap: Word, a: Redex, b: Redex) -> CriticalBranching {
    let (a, b) = if (a.position, a.rule) <= (b.position, b.rule) { (a, b) } else { (b, a) };
    CriticalBranching { overlap, a, b }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum JoinMode {
    Reduction,
    Derivation,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum JoinWitness {
    /// Two reductions with a common target.
    Meet { left: Trace, right: Trace },
    /// A single derivation from the first word to the second.
    Path(Trace),
}

impl JoinWitness {
    /// The witness as one derivation from the first word to the second.
    pub fn as_path(&self) -> Trace {
        match self {
            JoinWitness::Meet { left, right } => left.then(&right.reverse()),
            JoinWitness::Path(p) => p.clone(),
        }
    }
}

/// A 3-cell between two composites of rewriting steps.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoherenceCell {
    pub name: String,
    pub source: CellExpr,
    pub target: CellExpr,
}

impl CoherenceCell {
    pub fn show(&self, pg: &Polygraph) -> String {
        format!("{} : {} => {}", self.name, pg.show_expr(&self.source), pg.show_expr(&self.target))
    }

    /// First layer of each side, e.g. `a b alpha` and `alpha b a`.
    pub fn labels(&self, pg: &Polygraph) -> (String, String) {
        let first = |e: &CellExpr| pg.show_expr(&CellExpr(vec![e.0[0].clone()]));
        (first(&self.source), first(&self.target))
    }
}

/// The whiskered rule `left · r · right` as a one-layer expression.
pub fn whisker_layer(rule: usize, left: &Word, right: &Word) -> Layer {
    let mut atoms: Vec<Atom> = left.letters().iter().map(|&a| Atom::Arrow(a)).collect();
    atoms.push(Atom::Rule(rule));
    atoms.extend(right.letters().iter().map(|&a| Atom::Arrow(a)));
    Layer(vec![Term { coef: num_traits::One::one(), atoms }])
}

/// A forward trace as a vertical composite of whiskered rules.
pub fn trace_expr(pg: &Polygraph, t: &Trace) -> Result<CellExpr, CoreError> {
    if t.steps.iter().any(|s| s.direction == Direction::Backward) {
        return Err(CoreError::Unsupported("backward steps have no expression form".into()));
    }
    if t.steps.is_empty() {
        return Err(CoreError::Unsupported("empty trace".into()));
    }
    let _ = pg;
    Ok(CellExpr(t.steps.iter().map(|s| whisker_layer(s.redex.rule, &s.redex.left, &s.redex.right)).collect()))
}

struct Exploration {
    order: Vec<Word>,
    index: HashMap<Word, usize>,
    parent: Vec<Option<(usize, Redex)>>,
    edges: Vec<Vec<usize>>,
    closed: bool,
    depth: usize,
    /// (ancestor, node) with the ancestor a proper factor of the node.
    embedding: Option<(usize, usize)>,
}

impl Exploration {
    fn distance(&self, mut i: usize) -> usize {
        let mut d = 0;
        while let Some((p, _)) = &self.parent[i] {
            i = *p;
            d += 1;
        }
        d
    }

    fn find_embedding(&self, node: usize) -> Option<(usize, usize)> {
        let w = &self.order[node];
        let mut cur = self.parent[node].as_ref().map(|(p, _)| *p);
        while let Some(a) = cur {
            let x = &self.order[a];
            if x.len() < w.len() && !x.is_identity() && w.find(x).is_some() {
                return Some((a, node));
            }
            cur = self.parent[a].as_ref().map(|(p, _)| *p);
        }
        None
    }

    /// Reduction trace along BFS parents from ancestor `from` to `to`.
    fn path(&self, from: usize, to: usize) -> Trace {
        let mut steps = Vec::new();
        let mut cur = to;
        while cur != from {
            let (p, redex) = self.parent[cur].as_ref().expect("from is an ancestor of to");
            steps.push(Step { redex: redex.clone(), direction: Direction::Forward });
            cur = *p;
        }
        steps.reverse();
        Trace { source: self.order[from].clone(), target: self.order[to].clone(), steps, kind: TraceKind::Reduction }
    }
}

/// Output of Knuth-Bendix completion.
#[derive(Clone, Debug)]
pub struct Completion {
    pub polygraph: Polygraph,
    /// For each rule of `polygraph`, a derivation from its left-hand side
    /// to its right-hand side using only the input rules.
    pub witnesses: Vec<Trace>,
    pub verdict: Verdict<()>,
}

struct KbRule {
    rule: SetRule,
    witness: Trace,
}

/// Knuth-Bendix completion under `order`.
pub fn kb_complete(pg: &Polygraph, order: &ReductionOrder, max_rules: usize, max_rounds: usize) -> Result<Completion, CoreError> {
    let input = StringSystem::from_polygraph(pg)?;
    let mut rules: Vec<KbRule> = Vec::new();
    for (i, r) in input.rules.iter().enumerate() {
        let fwd = input.step(&r.lhs, i, 0);
        match order.compare(&r.lhs, &r.rhs) {
            Ordering::Greater => rules.push(KbRule { rule: r.clone(), witness: fwd }),
            Ordering::Less if !r.rhs.is_identity() => {
                rules.push(KbRule {
                    rule: SetRule { name: r.name.clone(), lhs: r.rhs.clone(), rhs: r.lhs.clone() },
                    witness: fwd.reverse(),
                });
            }
            _ => {
                return Err(CoreError::Unsupported(format!("rule `{}` cannot be oriented by the order", r.name)));
            }
        }
    }
    let mut fresh = 0usize;
    let mut pending: Vec<(Word, Word, Trace)> = Vec::new();
    let mut budget = Budget::default();
    let sys_of = |rules: &[KbRule]| StringSystem::new(rules.iter().map(|r| r.rule.clone()).collect());
    let expand = |sys: &StringSystem, rules: &[KbRule], t: &Trace| -> Result<Trace, CoreError> {
        let mut out = Trace::empty(&t.source, TraceKind::Derivation);
        let mut cur = t.source.clone();
        for s in &t.steps {
            let w = rules[s.redex.rule].witness.whisker(&s.redex.left, &s.redex.right)?;
            let w = if s.direction == Direction::Forward { w } else { w.reverse() };
            debug_assert_eq!(w.source, cur);
            cur = w.target.clone();
            out = out.then(&w);
        }
        let _ = sys;
        Ok(Trace { kind: TraceKind::Derivation, ..out })
    };
    for round in 0..max_rounds {
        budget.depth = round + 1;
        let sys = sys_of(&rules);
        let mut equations: Vec<(Word, Word, Trace)> = std::mem::take(&mut pending);
        for b in sys.critical_branchings() {
            let ta = sys.step(&b.overlap, b.a.rule, b.a.position);
            let tb = sys.step(&b.overlap, b.b.rule, b.b.position);
            let w = expand(&sys, &rules, &ta.reverse().then(&tb))?;
            equations.push((ta.target.clone(), tb.target.clone(), w));
        }
        let mut added = false;
        for (x, y, w) in equations {
            let sys = sys_of(&rules);
            let (nx, tx) = sys.normalize(&x, Strategy::Leftmost, DEFAULT_BUDGET).map_err(|e| CoreError::Unsupported(e.to_string()))?;
            let (ny, ty) = sys.normalize(&y, Strategy::Leftmost, DEFAULT_BUDGET).map_err(|e| CoreError::Unsupported(e.to_string()))?;
            budget.steps += tx.len() + ty.len();
            if nx == ny {
                continue;
            }
            // nx <- x ~ y -> ny
            let witness = expand(&sys, &rules, &tx.reverse())?.then(&w).then(&expand(&sys, &rules, &ty)?);
            let (lhs, rhs, witness) = match order.compare(&nx, &ny) {
                Ordering::Greater => (nx, ny, witness),
                Ordering::Less => (ny, nx, witness.reverse()),
                Ordering::Equal => return Err(CoreError::Unsupported("incomparable critical pair".into())),
            };
            fresh += 1;
            rules.push(KbRule { rule: SetRule { name: format!("kb{fresh}"), lhs, rhs }, witness });
            added = true;
            if rules.len() > max_rules {
                budget.exhausted = true;
                return Ok(finish(pg, &input, rules, Verdict::unknown(budget, "rule budget exhausted")));
            }
        }
        // drop rules whose left-hand side is reducible by another rule
        let mut k = 0;
        while k < rules.len() {
            let lk = &rules[k].rule.lhs;
            let reducible = rules.iter().enumerate().any(|(m, r)| {
                m != k && lk.find(&r.rule.lhs).is_some() && (r.rule.lhs.len() < lk.len() || m < k)
            });
            if reducible {
                let r = rules.remove(k);
                pending.push((r.rule.lhs.clone(), r.rule.rhs.clone(), r.witness));
            } else {
                k += 1;
            }
        }
        // normalize right-hand sides
        for k in 0..rules.len() {
            let sys = sys_of(&rules);
            let (nr, tr) = sys
                .normalize(&rules[k].rule.rhs, Strategy::Leftmost, DEFAULT_BUDGET)
                .map_err(|e| CoreError::Unsupported(e.to_string()))?;
            if !tr.is_empty() {
                let ext = expand(&sys, &rules, &tr)?;
                rules[k].witness = rules[k].witness.then(&ext);
                rules[k].rule.rhs = nr;
            }
        }
        if !added && pending.is_empty() {
            let sys = sys_of(&rules);
            let conf = sys.check_confluence(order, 0);
            let verdict = if conf.is_yes() {
                Verdict::yes((), budget).with_note("completed system is terminating and confluent")
            } else {
                Verdict::unknown(budget, "final confluence check failed")
            };
            return Ok(finish(pg, &input, rules, verdict));
        }
    }
    budget.exhausted = true;
    Ok(finish(pg, &input, rules, Verdict::unknown(budget, "round budget exhausted")))
}

fn finish(pg: &Polygraph, input: &StringSystem, rules: Vec<KbRule>, verdict: Verdict<()>) -> Completion {
    let mut out = Polygraph::new(pg.name.clone(), pg.ring);
    out.objects = pg.objects.clone();
    out.arrows = pg.arrows.clone();
    let mut witnesses = Vec::new();
    for r in rules {
        debug_assert!(r.witness.replay(input).is_ok());
        out.rules.push(crate::polygraph::Rule { name: r.rule.name, lhs: r.rule.lhs, rhs: Rhs::Word(r.rule.rhs) });
        witnesses.push(r.witness);
    }
    Completion { polygraph: out, witnesses, verdict }
}

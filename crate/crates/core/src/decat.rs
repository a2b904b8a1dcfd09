//! Grothendieck decategorification of linear presentations: isomorphism and
//! direct-sum proof search, the ℤ-linear system on 0-cell classes, unique
//! decomposition checking and the Grothendieck group.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;

use crate::cell::{Coef, LinComb, ObjId, Word};
use crate::error::CoreError;
use crate::linear::{LinRule, LinTrace, LinearSystem};
use crate::polygraph::{Polygraph, Rhs, Ring};
use crate::rewrite::TraceKind;
use crate::verdict::{Budget, Status, Verdict};

pub const DEFAULT_WORD_BOUND: usize = 4;
pub const DEFAULT_DEPTH: usize = 8;

/// Two reductions with a common target: `(x ->* m, y ->* m)`.
pub type Join = (LinTrace, LinTrace);

fn replay_join(sys: &LinearSystem, j: &Join, x: &LinComb, y: &LinComb) -> Result<(), String> {
    if &j.0.source != x || &j.1.source != y {
        return Err("join does not start at the expected combinations".into());
    }
    if j.0.target != j.1.target {
        return Err("join legs end at different combinations".into());
    }
    j.0.replay(sys)?;
    j.1.replay(sys)?;
    Ok(())
}

/// Rule names used by a join, sorted and deduplicated.
pub fn join_rules(pg: &Polygraph, j: &Join) -> Vec<String> {
    let mut names: Vec<String> =
        j.0.steps.iter().chain(&j.1.steps).map(|(s, _)| pg.rules[s.rule].name.clone()).collect();
    names.sort();
    names.dedup();
    names
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IsoProof {
    pub u: ObjId,
    pub v: ObjId,
    pub a_u: Word,
    pub a_v: Word,
    /// `a_u·a_v ~ id(u)`
    pub alpha_u: Join,
    /// `a_v·a_u ~ id(v)`
    pub alpha_v: Join,
}

impl IsoProof {
    pub fn replay(&self, sys: &LinearSystem) -> Result<(), String> {
        let c = |a: &Word, b: &Word| a.compose(b).map(|w| LinComb::from_word(&w)).map_err(|e| e.to_string());
        replay_join(sys, &self.alpha_u, &c(&self.a_u, &self.a_v)?, &LinComb::identity(self.u))?;
        replay_join(sys, &self.alpha_v, &c(&self.a_v, &self.a_u)?, &LinComb::identity(self.v))
    }

    pub fn show(&self, pg: &Polygraph) -> String {
        format!("{} ~ {} via {} / {}", pg.objects[self.u], pg.objects[self.v], pg.show_word(&self.a_u), pg.show_word(&self.a_v))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DirectSumProof {
    pub a: ObjId,
    pub b: ObjId,
    pub c: ObjId,
    pub p_b: LinComb,
    pub i_b: LinComb,
    pub p_c: LinComb,
    pub i_c: LinComb,
    /// `p_b·i_b + p_c·i_c ~ id(a)`
    pub alpha_a: Join,
    /// `i_b·p_b ~ id(b)`
    pub alpha_b: Join,
    /// `i_c·p_c ~ id(c)`
    pub alpha_c: Join,
}

impl DirectSumProof {
    pub fn replay(&self, sys: &LinearSystem) -> Result<(), String> {
        let c = |a: &LinComb, b: &LinComb| a.compose(b).map_err(|e| e.to_string());
        let sum = c(&self.p_b, &self.i_b)?.add(&c(&self.p_c, &self.i_c)?).map_err(|e| e.to_string())?;
        replay_join(sys, &self.alpha_a, &sum, &LinComb::identity(self.a))?;
        replay_join(sys, &self.alpha_b, &c(&self.i_b, &self.p_b)?, &LinComb::identity(self.b))?;
        replay_join(sys, &self.alpha_c, &c(&self.i_c, &self.p_c)?, &LinComb::identity(self.c))
    }

    pub fn is_degenerate(&self) -> bool {
        self.a == self.b || self.a == self.c
    }

    pub fn has_zero_witness(&self) -> bool {
        [&self.p_b, &self.i_b, &self.p_c, &self.i_c].iter().any(|w| w.is_zero())
    }

    pub fn show(&self, pg: &Polygraph) -> String {
        format!(
            "{} ~ {} (+) {} via p = {}, i = {}; p = {}, i = {}",
            pg.objects[self.a],
            pg.objects[self.b],
            pg.objects[self.c],
            pg.show_lin(&self.p_b),
            pg.show_lin(&self.i_b),
            pg.show_lin(&self.p_c),
            pg.show_lin(&self.i_c)
        )
    }
}

/// Certificate that a 0-cell is a zero object.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ZeroProof {
    /// `id(z) ->* 0`.
    Reduces(LinTrace),
    /// `f·g ~ id(z)` and `g·f ~ 0`, hence `id(z) = f·g·f·g = 0`.
    Retract { f: Word, g: Word, fg: Join, gf: Join },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ZeroObject {
    pub object: ObjId,
    pub proof: ZeroProof,
}

impl ZeroObject {
    pub fn replay(&self, sys: &LinearSystem) -> Result<(), String> {
        let z = self.object;
        match &self.proof {
            ZeroProof::Reduces(t) => {
                if t.source != LinComb::identity(z) || !t.target.is_zero() {
                    return Err("trace does not reduce the identity to zero".into());
                }
                t.replay(sys).map(|_| ())
            }
            ZeroProof::Retract { f, g, fg, gf } => {
                let fg_w = f.compose(g).map_err(|e| e.to_string())?;
                let gf_w = g.compose(f).map_err(|e| e.to_string())?;
                replay_join(sys, fg, &LinComb::from_word(&fg_w), &LinComb::identity(z))?;
                replay_join(sys, gf, &LinComb::from_word(&gf_w), &LinComb::zero(g.src(), f.tgt()))
            }
        }
    }
}

/// Irreducible words by endpoints, up to a length bound.
struct Candidates {
    by_ends: BTreeMap<(ObjId, ObjId), Vec<Word>>,
}

impl Candidates {
    fn new(pg: &Polygraph, sys: &LinearSystem, bound: usize) -> Self {
        let mut by_ends: BTreeMap<(ObjId, ObjId), Vec<Word>> = BTreeMap::new();
        for w in pg.words_up_to(bound) {
            if sys.is_normal(&LinComb::from_word(&w)) {
                by_ends.entry((w.src(), w.tgt())).or_default().push(w);
            }
        }
        Candidates { by_ends }
    }

    fn get(&self, from: ObjId, to: ObjId) -> &[Word] {
        self.by_ends.get(&(from, to)).map(|v| v.as_slice()).unwrap_or(&[])
    }
}

fn joins(sys: &LinearSystem, x: &LinComb, y: &LinComb, depth: usize) -> Option<Join> {
    let v = sys.lin_joinable(x, y, depth);
    if v.status == Status::Yes {
        v.witness
    } else {
        None
    }
}

fn common_prefix(a: &Word, b: &Word) -> usize {
    a.letters().iter().zip(b.letters()).take_while(|(x, y)| x == y).count()
}

fn common_suffix(a: &Word, b: &Word) -> usize {
    a.letters().iter().rev().zip(b.letters().iter().rev()).take_while(|(x, y)| x == y).count()
}

/// Zero objects: `id(z)` reduces to zero, or `z` is a retract of some
/// 0-cell through a composite equal to zero.
pub fn find_zero_objects(pg: &Polygraph, word_bound: usize, depth: usize) -> Result<Vec<ZeroObject>, CoreError> {
    pg.require_linear()?;
    let sys = LinearSystem::from_polygraph(pg)?;
    let cands = Candidates::new(pg, &sys, word_bound);
    let found: Vec<Option<ZeroObject>> = (0..pg.objects.len())
        .into_par_iter()
        .map(|z| {
            let id = LinComb::identity(z);
            if let Ok((nf, t)) = sys.lin_normalize(&id, crate::rewrite::DEFAULT_BUDGET) {
                if nf.is_zero() {
                    return Some(ZeroObject { object: z, proof: ZeroProof::Reduces(t) });
                }
            }
            for x in 0..pg.objects.len() {
                for f in cands.get(z, x) {
                    for g in cands.get(x, z) {
                        let (Ok(fg_w), Ok(gf_w)) = (f.compose(g), g.compose(f)) else { continue };
                        if fg_w.is_identity() {
                            continue;
                        }
                        let Some(gf) = joins(&sys, &LinComb::from_word(&gf_w), &LinComb::zero(x, x), depth) else { continue };
                        let Some(fg) = joins(&sys, &LinComb::from_word(&fg_w), &id, depth) else { continue };
                        return Some(ZeroObject { object: z, proof: ZeroProof::Retract { f: f.clone(), g: g.clone(), fg, gf } });
                    }
                }
            }
            None
        })
        .collect();
    Ok(found.into_iter().flatten().collect())
}

/// Retract pairs `(p, i)` with `p : a -> b`, `i : b -> a` and `i·p ~ id(b)`.
/// Witnesses are irreducible words or zero.
fn retracts(
    sys: &LinearSystem,
    cands: &Candidates,
    a: ObjId,
    b: ObjId,
    depth: usize,
) -> Vec<(LinComb, LinComb, Join)> {
    let mut ps: Vec<LinComb> = cands.get(a, b).iter().map(LinComb::from_word).collect();
    let mut is: Vec<LinComb> = cands.get(b, a).iter().map(LinComb::from_word).collect();
    ps.push(LinComb::zero(a, b));
    is.push(LinComb::zero(b, a));
    let id = LinComb::identity(b);
    let mut out = Vec::new();
    for p in &ps {
        for i in &is {
            let ip = i.compose(p).expect("typed by construction");
            if let Some(j) = joins(sys, &ip, &id, depth) {
                out.push((p.clone(), i.clone(), j));
            }
        }
    }
    out
}

fn sum_proof(
    sys: &LinearSystem,
    a: ObjId,
    (b, rb): (ObjId, &(LinComb, LinComb, Join)),
    (c, rc): (ObjId, &(LinComb, LinComb, Join)),
    depth: usize,
) -> Option<DirectSumProof> {
    let sum = rb.0.compose(&rb.1).ok()?.add(&rc.0.compose(&rc.1).ok()?).ok()?;
    let alpha_a = joins(sys, &sum, &LinComb::identity(a), depth)?;
    Some(DirectSumProof {
        a,
        b,
        c,
        p_b: rb.0.clone(),
        i_b: rb.1.clone(),
        p_c: rc.0.clone(),
        i_c: rc.1.clone(),
        alpha_a,
        alpha_b: rb.2.clone(),
        alpha_c: rc.2.clone(),
    })
}

/// True when no shared outer context can be stripped from the witnesses
/// leaving a valid proof.
fn sum_is_minimal(sys: &LinearSystem, pr: &DirectSumProof, depth: usize) -> bool {
    let words = [&pr.p_b, &pr.i_b, &pr.p_c, &pr.i_c].map(|x| x.as_word().cloned());
    let [Some(pb), Some(ib), Some(pc), Some(ic)] = words else { return true };
    let pre = common_prefix(&pb, &pc);
    let suf = common_suffix(&ib, &ic);
    for k in 1..=pre {
        for l in 1..=suf {
            let strip_p = |w: &Word| LinComb::from_word(&w.slice(k, w.len()));
            let strip_i = |w: &Word| LinComb::from_word(&w.slice(0, w.len() - l));
            let (pb2, pc2, ib2, ic2) = (strip_p(&pb), strip_p(&pc), strip_i(&ib), strip_i(&ic));
            if pb2.src() != ib2.tgt() {
                continue;
            }
            let a2 = pb2.src();
            let ok = (|| {
                let sum = pb2.compose(&ib2).ok()?.add(&pc2.compose(&ic2).ok()?).ok()?;
                joins(sys, &sum, &LinComb::identity(a2), depth)?;
                joins(sys, &ib2.compose(&pb2).ok()?, &LinComb::identity(pr.b), depth)?;
                joins(sys, &ic2.compose(&pc2).ok()?, &LinComb::identity(pr.c), depth)
            })();
            if ok.is_some() {
                return false;
            }
        }
    }
    true
}

/// Minimal direct-sum proofs `a ~ b (+) c`, one entry per witness choice,
/// deduplicated up to swapping `b` and `c`.
pub fn find_direct_sum_proofs(pg: &Polygraph, word_bound: usize, depth: usize) -> Result<Vec<DirectSumProof>, CoreError> {
    pg.require_linear()?;
    let sys = LinearSystem::from_polygraph(pg)?;
    let cands = Candidates::new(pg, &sys, word_bound);
    let n = pg.objects.len();
    let pairs: Vec<(ObjId, ObjId)> = (0..n).flat_map(|a| (0..n).map(move |b| (a, b))).collect();
    let rets: Vec<Vec<(LinComb, LinComb, Join)>> =
        pairs.par_iter().map(|&(a, b)| retracts(&sys, &cands, a, b, depth)).collect();
    let triples: Vec<(ObjId, ObjId, ObjId)> =
        (0..n).flat_map(|a| (0..n).flat_map(move |b| (b..n).map(move |c| (a, b, c)))).collect();
    let found: Vec<Vec<DirectSumProof>> = triples
        .par_iter()
        .map(|&(a, b, c)| {
            let (rb, rc) = (&rets[a * n + b], &rets[a * n + c]);
            let mut out = Vec::new();
            for (x, pb) in rb.iter().enumerate() {
                for (y, pc) in rc.iter().enumerate() {
                    if b == c && y < x {
                        continue;
                    }
                    if let Some(pr) = sum_proof(&sys, a, (b, pb), (c, pc), depth) {
                        if sum_is_minimal(&sys, &pr, depth) {
                            out.push(pr);
                        }
                    }
                }
            }
            out
        })
        .collect();
    Ok(found.into_iter().flatten().collect())
}

/// Minimal isomorphism proofs between distinct 0-cells `u < v`.
pub fn find_iso_proofs(pg: &Polygraph, word_bound: usize, depth: usize) -> Result<Vec<IsoProof>, CoreError> {
    pg.require_linear()?;
    let sys = LinearSystem::from_polygraph(pg)?;
    let cands = Candidates::new(pg, &sys, word_bound);
    let n = pg.objects.len();
    let pairs: Vec<(ObjId, ObjId)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
    let found: Vec<Vec<IsoProof>> = pairs
        .par_iter()
        .map(|&(u, v)| {
            let mut out = Vec::new();
            for a_u in cands.get(u, v) {
                for a_v in cands.get(v, u) {
                    let (Ok(uv), Ok(vu)) = (a_u.compose(a_v), a_v.compose(a_u)) else { continue };
                    let Some(alpha_u) = joins(&sys, &LinComb::from_word(&uv), &LinComb::identity(u), depth) else { continue };
                    let Some(alpha_v) = joins(&sys, &LinComb::from_word(&vu), &LinComb::identity(v), depth) else { continue };
                    let pr = IsoProof { u, v, a_u: a_u.clone(), a_v: a_v.clone(), alpha_u, alpha_v };
                    if iso_is_minimal(&sys, &pr, depth) {
                        out.push(pr);
                    }
                }
            }
            out
        })
        .collect();
    Ok(found.into_iter().flatten().collect())
}

fn iso_is_minimal(sys: &LinearSystem, pr: &IsoProof, depth: usize) -> bool {
    let (au, av) = (&pr.a_u, &pr.a_v);
    // context on the u side: prefix of a_u and suffix of a_v
    let u_side = common_prefix_any(au, av, true);
    let v_side = common_prefix_any(au, av, false);
    let valid = |x: &Word, y: &Word| {
        if x.is_identity() || y.is_identity() || x.src() == x.tgt() {
            return false;
        }
        let (Ok(xy), Ok(yx)) = (x.compose(y), y.compose(x)) else { return false };
        joins(sys, &LinComb::from_word(&xy), &LinComb::identity(x.src()), depth).is_some()
            && joins(sys, &LinComb::from_word(&yx), &LinComb::identity(x.tgt()), depth).is_some()
    };
    for k in 1..=u_side {
        if valid(&au.slice(k, au.len()), &av.slice(0, av.len() - k)) {
            return false;
        }
    }
    for k in 1..=v_side {
        if valid(&au.slice(0, au.len() - k), &av.slice(k, av.len())) {
            return false;
        }
    }
    true
}

/// Length of the longest context that could be stripped from both
/// witnesses on one side.
fn common_prefix_any(au: &Word, av: &Word, u_side: bool) -> usize {
    let (x, y) = if u_side { (au, av) } else { (av, au) };
    let mut k = 0;
    while k < x.len() && k < y.len() && x.letters()[..=k] == y.letters()[y.len() - k - 1..] {
        k += 1;
    }
    k
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecatRule {
    pub name: String,
    pub lhs: usize,
    /// Integer combination of generators; empty means zero.
    pub rhs: Vec<(BigInt, usize)>,
}

/// The ℤ-linear rewriting system on 0-cell classes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecatSystem {
    pub name: String,
    pub generators: Vec<String>,
    pub rules: Vec<DecatRule>,
    pub relation_matrix: Vec<Vec<BigInt>>,
}

impl DecatSystem {
    pub fn new(name: impl Into<String>, generators: Vec<String>, rules: Vec<DecatRule>) -> Self {
        let n = generators.len();
        let relation_matrix = rules
            .iter()
            .map(|r| {
                let mut row = vec![BigInt::zero(); n];
                row[r.lhs] += 1;
                for (c, g) in &r.rhs {
                    row[*g] -= c;
                }
                row
            })
            .collect();
        DecatSystem { name: name.into(), generators, rules, relation_matrix }
    }

    pub fn show_class_sum(&self, rhs: &[(BigInt, usize)]) -> String {
        if rhs.is_empty() {
            return "0".into();
        }
        let mut s = String::new();
        for (k, (c, g)) in rhs.iter().enumerate() {
            let name = format!("[{}]", self.generators[*g]);
            let mag = c.abs();
            let body = if mag.is_one() { name } else { format!("{mag}{name}") };
            match (k, c.is_negative()) {
                (0, false) => s.push_str(&body),
                (0, true) => s.push_str(&format!("-{body}")),
                (_, false) => s.push_str(&format!(" + {body}")),
                (_, true) => s.push_str(&format!(" - {body}")),
            }
        }
        s
    }

    pub fn show_rule(&self, r: &DecatRule) -> String {
        format!("[{}] => {}", self.generators[r.lhs], self.show_class_sum(&r.rhs))
    }

    /// 0-cell `pt` and one 1-cell per class, without rules.
    pub fn skeleton(&self) -> Result<Polygraph, CoreError> {
        let mut pg = Polygraph::new(self.name.clone(), Ring::Integers);
        let pt = pg.add_object("pt")?;
        for g in &self.generators {
            pg.add_arrow(g, pt, pt)?;
        }
        Ok(pg)
    }

    fn rule_sides(&self, pg: &Polygraph, r: &DecatRule) -> Result<(Word, LinComb), CoreError> {
        let lhs = pg.word_from_ids(&[r.lhs])?;
        let terms = r
            .rhs
            .iter()
            .map(|(c, g)| Ok((Coef::from_integer(c.clone()), pg.word_from_ids(&[*g])?)))
            .collect::<Result<Vec<_>, CoreError>>()?;
        Ok((lhs, LinComb::from_terms(0, 0, terms)?))
    }

    /// The rewriting system on the skeleton. Unlike `to_polygraph` this
    /// accepts rules such as `[N] => 2[N]`.
    pub fn linear_system(&self) -> Result<(Polygraph, LinearSystem), CoreError> {
        let pg = self.skeleton()?;
        let mut rules = Vec::new();
        for r in &self.rules {
            let (lhs, rhs) = self.rule_sides(&pg, r)?;
            rules.push(LinRule { name: r.name.clone(), lhs, rhs });
        }
        Ok((pg, LinearSystem::new(rules)))
    }

    /// The system as a polygraph over ℤ with one 0-cell `pt`.
    pub fn to_polygraph(&self) -> Result<Polygraph, CoreError> {
        let mut pg = self.skeleton()?;
        for r in &self.rules {
            let (lhs, rhs) = self.rule_sides(&pg, r)?;
            pg.add_rule(&r.name, lhs, Rhs::Lin(rhs))?;
        }
        Ok(pg)
    }

    /// Reads a system back from its polygraph form.
    pub fn from_polygraph(pg: &Polygraph) -> Result<Self, CoreError> {
        if pg.ring != Ring::Integers || pg.objects.len() != 1 {
            return Err(CoreError::Unsupported("expected a polygraph over Z with a single 0-cell".into()));
        }
        let mut rules = Vec::new();
        for r in &pg.rules {
            let [lhs] = r.lhs.letters() else {
                return Err(CoreError::BadRule(r.name.clone(), "left-hand side must be one class".into()));
            };
            let mut rhs = Vec::new();
            for (w, c) in r.rhs_lin().terms() {
                let [g] = w.letters() else {
                    return Err(CoreError::BadRule(r.name.clone(), "right-hand side must be a sum of classes".into()));
                };
                rhs.push((c.to_integer(), *g));
            }
            rules.push(DecatRule { name: r.name.clone(), lhs: *lhs, rhs });
        }
        Ok(DecatSystem::new(pg.name.clone(), pg.arrows.iter().map(|a| a.name.clone()).collect(), rules))
    }
}

impl fmt::Display for DecatSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.to_polygraph() {
            Ok(pg) => write!(f, "{pg}"),
            Err(e) => write!(f, "# {e}"),
        }
    }
}

/// Builds the ℤ-linear system from certified proofs. Degenerate proofs
/// (`a` among the summands, or a zero witness) are dropped, and each zero
/// object `z` contributes `[z] => 0`.
pub fn build_decat(
    pg: &Polygraph,
    isos: &[IsoProof],
    sums: &[DirectSumProof],
    zeros: &[ZeroObject],
) -> Result<DecatSystem, CoreError> {
    let sys = LinearSystem::from_polygraph(pg)?;
    let uncertified = |m: String| CoreError::Unsupported(format!("uncertified proof: {m}"));
    let mut rules = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    let is_zero = |o: ObjId| zeros.iter().any(|z| z.object == o);
    for z in zeros {
        z.replay(&sys).map_err(uncertified)?;
    }
    for p in isos {
        p.replay(&sys).map_err(uncertified)?;
        let rhs = vec![(BigInt::one(), p.v)];
        if seen.insert((p.u, rhs.clone())) {
            rules.push(DecatRule { name: format!("iso{}", rules.len() + 1), lhs: p.u, rhs });
        }
    }
    for p in sums {
        p.replay(&sys).map_err(uncertified)?;
        if p.is_degenerate() || p.has_zero_witness() || is_zero(p.a) {
            continue;
        }
        let rhs = if p.b == p.c { vec![(BigInt::from(2), p.b)] } else { vec![(BigInt::one(), p.b), (BigInt::one(), p.c)] };
        if seen.insert((p.a, rhs.clone())) {
            rules.push(DecatRule { name: format!("sum{}", rules.len() + 1), lhs: p.a, rhs });
        }
    }
    for z in zeros {
        rules.push(DecatRule { name: format!("zero{}", rules.len() + 1), lhs: z.object, rhs: Vec::new() });
    }
    Ok(DecatSystem::new(format!("K_{}", pg.name), pg.objects.clone(), rules))
}

/// Runs the proof searches with the given bounds and builds the system.
pub fn decategorify(pg: &Polygraph, word_bound: usize, depth: usize) -> Result<DecatSystem, CoreError> {
    let isos = find_iso_proofs(pg, word_bound, depth)?;
    let sums = find_direct_sum_proofs(pg, word_bound, depth)?;
    let zeros = find_zero_objects(pg, word_bound, depth)?;
    build_decat(pg, &isos, &sums, &zeros)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum KsWitness {
    /// Every critical branching joins.
    Joins(Vec<Join>),
    /// Two rewritings of one class to distinct irreducible decompositions.
    Decompositions { left: LinTrace, right: LinTrace },
    /// A class rewrites into a multiple of itself.
    Growth(LinTrace),
}

/// Uniqueness of decompositions, decided as quasi-convergence of `K`.
pub fn krull_schmidt_check(k: &DecatSystem, depth: usize) -> Result<Verdict<KsWitness>, CoreError> {
    let (_, sys) = k.linear_system()?;
    if k.rules.is_empty() {
        return Ok(Verdict::yes(KsWitness::Joins(Vec::new()), Budget::default()).with_note("no rules"));
    }
    let seeds: Vec<LinComb> = sys.rules.iter().map(|r| LinComb::from_word(&r.lhs)).collect();
    let q = sys.lin_quasi_termination_region(&seeds, depth)?;
    let mut budget = q.budget;
    match q.status {
        Status::No => {
            let t = q.witness.expect("growth carries a trace");
            return Ok(Verdict::no(KsWitness::Growth(t), budget).with_note(q.note));
        }
        Status::Unknown => return Ok(Verdict::unknown(budget, format!("quasi-termination: {}", q.note))),
        Status::Yes => {}
    }
    let mut joined = Vec::new();
    for b in sys.lin_critical_branchings() {
        let (sa, sb) = (sys.branch_step(&b, true), sys.branch_step(&b, false));
        let v = sys.lin_joinable(&sa.target, &sb.target, depth);
        budget.absorb(&v.budget);
        match (v.status, v.witness) {
            (Status::Yes, Some((l, r))) => joined.push((sa.then(&l), sb.then(&r))),
            (Status::No, w) => {
                let extend = |s: LinTrace, tail: Option<LinTrace>| match tail {
                    Some(t) if t.source == s.target => s.then(&t),
                    _ => s,
                };
                let (l, r) = match w {
                    Some((l, r)) => (Some(l), Some(r)),
                    None => (None, None),
                };
                let left = extend(sa, l);
                let right = extend(sb, r);
                return Ok(Verdict::no(KsWitness::Decompositions { left, right }, budget)
                    .with_note("a class has two distinct irreducible decompositions"));
            }
            _ => return Ok(Verdict::unknown(budget, "a branching did not join within depth")),
        }
    }
    Ok(Verdict::yes(KsWitness::Joins(joined), budget).with_note("quasi-terminating and every branching joins"))
}

/// `U·A·V = D` with `U`, `V` unimodular and `D` diagonal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SmithDecomposition {
    pub u: Vec<Vec<BigInt>>,
    pub v: Vec<Vec<BigInt>>,
    pub d: Vec<Vec<BigInt>>,
}

impl SmithDecomposition {
    /// Nonzero diagonal entries, in order.
    pub fn invariant_factors(&self) -> Vec<BigInt> {
        (0..self.d.len().min(self.v.len())).map(|k| self.d[k][k].clone()).take_while(|x| !x.is_zero()).collect()
    }
}

pub fn identity_matrix(n: usize) -> Vec<Vec<BigInt>> {
    (0..n).map(|i| (0..n).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }).collect()).collect()
}

pub fn mat_mul(a: &[Vec<BigInt>], b: &[Vec<BigInt>], inner: usize, cols: usize) -> Vec<Vec<BigInt>> {
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| (0..inner).fold(BigInt::zero(), |acc, k| acc + &row[k] * &b[k][j]))
                .collect()
        })
        .collect()
}

/// Determinant by fraction-free elimination.
pub fn determinant(m: &[Vec<BigInt>]) -> BigInt {
    let n = m.len();
    if n == 0 {
        return BigInt::one();
    }
    let mut a = m.to_vec();
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n - 1 {
        if a[k][k].is_zero() {
            let Some(p) = (k + 1..n).find(|&i| !a[i][k].is_zero()) else { return BigInt::zero() };
            a.swap(k, p);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (&a[i][j] * &a[k][k] - &a[i][k] * &a[k][j]) / &prev;
            }
        }
        prev = a[k][k].clone();
    }
    sign * &a[n - 1][n - 1]
}

/// Smith normal form of an `rows × cols` integer matrix.
pub fn smith_normal_form(a: &[Vec<BigInt>], cols: usize) -> SmithDecomposition {
    let rows = a.len();
    let mut d = a.to_vec();
    let mut u = identity_matrix(rows);
    let mut v = identity_matrix(cols);
    let swap_cols = |m: &mut Vec<Vec<BigInt>>, i: usize, j: usize| m.iter_mut().for_each(|r| r.swap(i, j));
    // row_i -= q * row_j
    fn row_axpy(m: &mut [Vec<BigInt>], i: usize, j: usize, q: &BigInt) {
        let src = m[j].clone();
        for (x, y) in m[i].iter_mut().zip(src) {
            *x -= q * y;
        }
    }
    fn col_axpy(m: &mut [Vec<BigInt>], i: usize, j: usize, q: &BigInt) {
        for r in m.iter_mut() {
            let y = r[j].clone();
            r[i] -= q * y;
        }
    }
    for t in 0..rows.min(cols) {
        loop {
            // pivot: smallest nonzero magnitude in the remaining block
            let pivot = (t..rows)
                .flat_map(|i| (t..cols).map(move |j| (i, j)))
                .filter(|&(i, j)| !d[i][j].is_zero())
                .min_by(|&(i, j), &(k, l)| d[i][j].abs().cmp(&d[k][l].abs()).then((i, j).cmp(&(k, l))));
            let Some((pi, pj)) = pivot else { break };
            d.swap(t, pi);
            u.swap(t, pi);
            swap_cols(&mut d, t, pj);
            swap_cols(&mut v, t, pj);
            let mut clean = true;
            for i in t + 1..rows {
                let q = d[i][t].div_floor(&d[t][t]);
                if !q.is_zero() {
                    row_axpy(&mut d, i, t, &q);
                    row_axpy(&mut u, i, t, &q);
                }
                clean &= d[i][t].is_zero();
            }
            for j in t + 1..cols {
                let q = d[t][j].div_floor(&d[t][t]);
                if !q.is_zero() {
                    col_axpy(&mut d, j, t, &q);
                    col_axpy(&mut v, j, t, &q);
                }
                clean &= d[t][j].is_zero();
            }
            if !clean {
                continue;
            }
            let bad = (t + 1..rows).flat_map(|i| (t + 1..cols).map(move |j| (i, j))).find(|&(i, j)| !d[i][j].is_multiple_of(&d[t][t]));
            match bad {
                Some((i, _)) => {
                    let minus_one = -BigInt::one();
                    row_axpy(&mut d, t, i, &minus_one);
                    row_axpy(&mut u, t, i, &minus_one);
                }
                None => break,
            }
        }
        if d[t][t].is_negative() {
            for x in d[t].iter_mut() {
                *x = -x.clone();
            }
            for x in u[t].iter_mut() {
                *x = -x.clone();
            }
        }
    }
    SmithDecomposition { u, v, d }
}

/// The cokernel `ℤ^g / rows(A)` as rank plus invariant factors above one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupInfo {
    pub rank: usize,
    pub torsion: Vec<BigInt>,
    pub smith: SmithDecomposition,
}

impl GroupInfo {
    /// Canonical coordinates of the class of a row vector `x`: `x·V`, with
    /// the first coordinates reduced modulo the invariant factors.
    pub fn class_of(&self, x: &[BigInt]) -> Vec<BigInt> {
        let n = x.len();
        let mut y = mat_mul(&[x.to_vec()], &self.smith.v, n, n).remove(0);
        for (k, f) in self.smith.invariant_factors().iter().enumerate() {
            y[k] = y[k].mod_floor(f);
        }
        y
    }
}

impl fmt::Display for GroupInfo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let torsion = if self.torsion.is_empty() {
            "none".to_string()
        } else {
            self.torsion.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(", ")
        };
        write!(f, "rank {}, torsion: {torsion}", self.rank)
    }
}

pub fn grothendieck_group(k: &DecatSystem) -> GroupInfo {
    let g = k.generators.len();
    let smith = smith_normal_form(&k.relation_matrix, g);
    let factors = smith.invariant_factors();
    let torsion = factors.iter().filter(|f| !f.is_one()).cloned().collect();
    GroupInfo { rank: g - factors.len(), torsion, smith }
}

/// Integer row vector of a combination of generators.
pub fn class_vector(k: &DecatSystem, terms: &[(BigInt, usize)]) -> Vec<BigInt> {
    let mut row = vec![BigInt::zero(); k.generators.len()];
    for (c, g) in terms {
        row[*g] += c;
    }
    row
}

/// Shows a combination of generators from the polygraph form, e.g. `[X1] + [X2]`.
pub fn show_classes(k: &DecatSystem, x: &LinComb) -> String {
    let terms: Vec<(BigInt, usize)> = x.terms().filter_map(|(w, c)| w.letters().first().map(|g| (c.to_integer(), *g))).collect();
    k.show_class_sum(&terms)
}

/// A reduction trace of `K` is always an integer-coefficient trace.
pub fn integral_trace(t: &LinTrace) -> bool {
    t.kind == TraceKind::Reduction && t.source.is_integral() && t.target.is_integral()
}

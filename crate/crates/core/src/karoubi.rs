//! Idempotents, Karoubi envelopes of presentations and lifted coherence.

use std::collections::BTreeSet;

use num_traits::{One, Signed, Zero};

use crate::cell::{ArrowId, Coef, LinComb, ObjId, Word};
use crate::error::CoreError;
use crate::expr::{Atom, CellExpr, Layer, Term};
use crate::linear::{LinTrace, LinearSystem};
use crate::polygraph::{Polygraph, Rhs};
use crate::rewrite::{
    CoherenceCell, Direction, JoinMode, ReductionOrder, Strategy, StringSystem, Trace, TraceKind, DEFAULT_BUDGET,
};
use crate::verdict::{Budget, Status, Verdict};

/// A 1-cell of the presented category: a word, or a combination of words.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Cell {
    Word(Word),
    Lin(LinComb),
}

impl Cell {
    pub fn src(&self) -> ObjId {
        match self {
            Cell::Word(w) => w.src(),
            Cell::Lin(l) => l.src(),
        }
    }

    pub fn tgt(&self) -> ObjId {
        match self {
            Cell::Word(w) => w.tgt(),
            Cell::Lin(l) => l.tgt(),
        }
    }

    pub fn to_lin(&self) -> LinComb {
        match self {
            Cell::Word(w) => LinComb::from_word(w),
            Cell::Lin(l) => l.clone(),
        }
    }

    pub fn is_identity(&self) -> bool {
        match self {
            Cell::Word(w) => w.is_identity(),
            Cell::Lin(l) => l.as_word().is_some_and(|w| w.is_identity()),
        }
    }

    pub fn show(&self, pg: &Polygraph) -> String {
        match self {
            Cell::Word(w) => pg.show_word(w),
            Cell::Lin(l) => pg.show_lin(l),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum IdempotencyProof {
    /// A derivation from `e·e` to `e`.
    Set(Trace),
    /// Reductions of `e·e` and of `e` to a common combination.
    Lin(LinTrace, LinTrace),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdempotentCert {
    pub cell: Cell,
    pub proof: IdempotencyProof,
}

impl IdempotentCert {
    /// Checks that the proof replays and concerns `e·e` and `e`.
    pub fn replay(&self, pg: &Polygraph) -> Result<(), String> {
        match (&self.cell, &self.proof) {
            (Cell::Word(e), IdempotencyProof::Set(t)) => {
                let sys = StringSystem::from_polygraph(pg).map_err(|e| e.to_string())?;
                let ee = e.compose(e).map_err(|e| e.to_string())?;
                if t.source != ee || &t.target != e {
                    return Err("proof does not go from e·e to e".into());
                }
                t.replay(&sys).map(|_| ())
            }
            (Cell::Lin(e), IdempotencyProof::Lin(a, b)) => {
                let sys = LinearSystem::from_polygraph(pg).map_err(|e| e.to_string())?;
                let ee = e.compose(e).map_err(|e| e.to_string())?;
                if a.source != ee || &b.source != e || a.target != b.target {
                    return Err("proof does not join e·e and e".into());
                }
                a.replay(&sys)?;
                b.replay(&sys).map(|_| ())
            }
            _ => Err("proof kind does not match the cell".into()),
        }
    }

    /// The proof as a single trace from `e·e` to `e` (set level only).
    pub fn set_trace(&self) -> Option<&Trace> {
        match &self.proof {
            IdempotencyProof::Set(t) => Some(t),
            IdempotencyProof::Lin(..) => None,
        }
    }
}

fn check_candidate(e: &Cell) -> Result<(), CoreError> {
    if e.src() != e.tgt() {
        return Err(CoreError::IllTyped("an idempotent must be an endo-cell".into()));
    }
    if e.is_identity() {
        return Err(CoreError::Unsupported("identities are excluded as idempotents".into()));
    }
    Ok(())
}

fn set_convergent(sys: &StringSystem, arrows: usize) -> bool {
    let order = ReductionOrder::lenlex(arrows);
    sys.check_termination(&order).is_yes() && sys.check_confluence(&order, 0).is_yes()
}

/// Certifies `e·e ~ e` by a bounded search.
pub fn verify_idempotent(pg: &Polygraph, e: &Cell, depth: usize) -> Result<Verdict<IdempotentCert>, CoreError> {
    check_candidate(e)?;
    match e {
        Cell::Word(w) => {
            let sys = StringSystem::from_polygraph(pg)?;
            let ww = w.compose(w)?;
            let mut budget = Budget::default();
            for mode in [JoinMode::Reduction, JoinMode::Derivation] {
                let v = sys.joinable(&ww, w, depth, mode);
                budget.absorb(&v.budget);
                if let (Status::Yes, Some(wit)) = (v.status, v.witness) {
                    let cert = IdempotentCert { cell: e.clone(), proof: IdempotencyProof::Set(wit.as_path()) };
                    return Ok(Verdict::yes(cert, budget));
                }
            }
            if set_convergent(&sys, pg.arrows.len()) {
                return Ok(Verdict { status: Status::No, witness: None, budget, note: "e·e and e have distinct normal forms".into() });
            }
            Ok(Verdict::unknown(budget, "no proof of e·e = e within depth"))
        }
        Cell::Lin(l) => {
            let sys = LinearSystem::from_polygraph(pg)?;
            let ll = l.compose(l)?;
            let v = sys.lin_joinable(&ll, l, depth);
            match (v.status, v.witness) {
                (Status::Yes, Some((a, b))) => {
                    let cert = IdempotentCert { cell: e.clone(), proof: IdempotencyProof::Lin(a, b) };
                    Ok(Verdict::yes(cert, v.budget))
                }
                (status, _) => Ok(Verdict { status, witness: None, budget: v.budget, note: v.note }),
            }
        }
    }
}

/// Non-identity idempotent normal-form words of length at most `max_len`.
pub fn enumerate_idempotents(pg: &Polygraph, max_len: usize) -> Result<Vec<IdempotentCert>, CoreError> {
    let sys = StringSystem::from_polygraph(pg)?;
    let order = ReductionOrder::lenlex(pg.arrows.len());
    if !sys.check_termination(&order).is_yes() {
        return Err(CoreError::Unsupported("no lenlex termination certificate".into()));
    }
    let mut out = Vec::new();
    for w in pg.words_up_to(max_len) {
        if w.is_identity() || !w.is_endo() || !sys.is_normal(&w) {
            continue;
        }
        let ww = w.compose(&w)?;
        let (nf, t) = sys.normalize(&ww, Strategy::Leftmost, DEFAULT_BUDGET).map_err(|e| CoreError::Unsupported(e.to_string()))?;
        if nf == w {
            out.push(IdempotentCert { cell: Cell::Word(w), proof: IdempotencyProof::Set(t) });
        }
    }
    Ok(out)
}

/// Irreducible endo-monomials at `obj`, or an error past `bound`.
pub fn normal_basis(pg: &Polygraph, sys: &LinearSystem, obj: ObjId, bound: usize) -> Result<Vec<Word>, CoreError> {
    let mut basis = Vec::new();
    let mut level = vec![Word::identity(obj)];
    while !level.is_empty() {
        let irreducible: Vec<Word> = level.into_iter().filter(|w| sys.is_normal(&LinComb::from_word(w))).collect();
        basis.extend(irreducible.iter().filter(|w| w.tgt() == obj).cloned());
        if basis.len() > bound {
            return Err(CoreError::Unsupported(format!("normal-form basis at `{}` exceeds {bound}", pg.objects[obj])));
        }
        // words extending irreducible ones; anything else has a reducible prefix
        let mut next = Vec::new();
        for w in &irreducible {
            for (a, arrow) in pg.arrows.iter().enumerate() {
                if arrow.src == w.tgt() {
                    next.push(w.compose(&pg.word_from_ids(&[a])?)?);
                }
            }
        }
        if next.len() > 64 * (bound + 1) {
            return Err(CoreError::Unsupported("normal forms do not stabilise".into()));
        }
        level = next;
    }
    basis.sort();
    Ok(basis)
}

/// Rationals `p/q` with `|p| <= h` and `1 <= q <= h`.
pub fn height_rationals(h: i64) -> Vec<Coef> {
    let mut set = BTreeSet::new();
    for q in 1..=h.max(1) {
        for p in -h..=h {
            set.insert(crate::cell::ratio(p, q));
        }
    }
    set.into_iter().collect()
}

/// Solves `e·e = e` over each endo-hom by exhaustive search on the
/// normal-form basis. The zero cell is always included, identities never.
pub fn solve_idempotents_linear(pg: &Polygraph, basis_bound: usize, height: i64) -> Result<Vec<IdempotentCert>, CoreError> {
    let sys = LinearSystem::from_polygraph(pg)?;
    if !sys.is_convergent() {
        return Err(CoreError::Unsupported("no convergence certificate".into()));
    }
    let values = height_rationals(height);
    let mut out = Vec::new();
    for obj in 0..pg.objects.len() {
        let basis = normal_basis(pg, &sys, obj, basis_bound)?;
        let mut found = Vec::new();
        let mut coords = vec![0usize; basis.len()];
        loop {
            let e = LinComb::from_terms(obj, obj, basis.iter().zip(&coords).map(|(w, &k)| (values[k].clone(), w.clone())))?;
            let is_identity = e.as_word().is_some_and(|w| w.is_identity());
            if !is_identity {
                let ee = e.compose(&e)?;
                let (nf, t) = sys.lin_normalize(&ee, DEFAULT_BUDGET).map_err(|e| CoreError::Unsupported(e.to_string()))?;
                if nf == e {
                    found.push(IdempotentCert {
                        cell: Cell::Lin(e.clone()),
                        proof: IdempotencyProof::Lin(t, LinTrace::empty(&e, TraceKind::Reduction)),
                    });
                }
            }
            // odometer over coordinate values
            let mut k = 0;
            while k < coords.len() {
                coords[k] += 1;
                if coords[k] < values.len() {
                    break;
                }
                coords[k] = 0;
                k += 1;
            }
            if k == coords.len() {
                break;
            }
        }
        found.sort_by(|a, b| a.cell.cmp(&b.cell));
        out.extend(found);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub label: String,
    pub cert: IdempotentCert,
    pub object: ObjId,
    pub p: ArrowId,
    pub i: ArrowId,
    pub pi: usize,
    pub iota: usize,
}

/// A presentation of the Karoubi envelope together with its base.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KaroubiEnvelope {
    pub polygraph: Polygraph,
    pub base: Polygraph,
    pub splits: Vec<Split>,
}

/// Adds, for each labelled idempotent `e`, an object `A_e`, arrows `p_A`,
/// `i_A` and rules `pi_A : p_A i_A => e`, `iota_A : i_A p_A => id(A)`.
/// Higher cells of the base are dropped.
pub fn build_karoubi(pg: &Polygraph, idempotents: &[(String, IdempotentCert)]) -> Result<KaroubiEnvelope, CoreError> {
    let mut k = pg.clone();
    k.name = format!("karoubi_{}", pg.name);
    k.higher.clear();
    let mut splits = Vec::new();
    for (label, cert) in idempotents {
        cert.replay(pg).map_err(|m| CoreError::Unsupported(format!("idempotent `{label}` is not certified: {m}")))?;
        check_candidate(&cert.cell)?;
        let base = cert.cell.src();
        let object = k.add_object(label)?;
        let p = k.add_arrow(&format!("p_{label}"), base, object)?;
        let i = k.add_arrow(&format!("i_{label}"), object, base)?;
        let pi_word = k.word_from_ids(&[p, i])?;
        let ip_word = k.word_from_ids(&[i, p])?;
        let rhs = match &cert.cell {
            Cell::Word(w) => Rhs::Word(w.clone()),
            Cell::Lin(l) => Rhs::Lin(l.clone()),
        };
        let pi = k.add_rule(&format!("pi_{label}"), pi_word, rhs)?;
        let iota = k.add_rule(&format!("iota_{label}"), ip_word, Rhs::Word(Word::identity(object)))?;
        splits.push(Split { label: label.clone(), cert: cert.clone(), object, p, i, pi, iota });
    }
    Ok(KaroubiEnvelope { polygraph: k, base: pg.clone(), splits })
}

/// Split data of one idempotent: `p·i => e` and `i·p => id`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SplitProof {
    Set(Trace),
    Lin(LinTrace),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitWitness {
    pub p: Word,
    pub i: Word,
    pub proof_pi: SplitProof,
    pub proof_ip: SplitProof,
}

impl SplitWitness {
    pub fn replay(&self, env: &KaroubiEnvelope) -> Result<(), String> {
        for proof in [&self.proof_pi, &self.proof_ip] {
            match proof {
                SplitProof::Set(t) => {
                    let sys = StringSystem::from_polygraph(&env.polygraph).map_err(|e| e.to_string())?;
                    t.replay(&sys)?;
                }
                SplitProof::Lin(t) => {
                    let sys = LinearSystem::from_polygraph(&env.polygraph).map_err(|e| e.to_string())?;
                    t.replay(&sys)?;
                }
            }
        }
        Ok(())
    }
}

impl KaroubiEnvelope {
    pub fn split_of(&self, e: &Cell) -> Option<&Split> {
        self.splits.iter().find(|s| &s.cert.cell == e)
    }

    fn split_of_object(&self, obj: ObjId) -> Option<&Split> {
        self.splits.iter().find(|s| s.object == obj)
    }

    fn split_of_arrow(&self, a: ArrowId) -> Option<&Split> {
        self.splits.iter().find(|s| s.p == a || s.i == a)
    }

    pub fn cs_object(&self, obj: ObjId) -> Result<ObjId, CoreError> {
        if obj < self.base.objects.len() {
            return Ok(obj);
        }
        self.split_of_object(obj).map(|s| s.cert.cell.src()).ok_or_else(|| CoreError::UnknownName(format!("0-cell #{obj}")))
    }

    /// Image of a word in the base, as a combination. The identity of
    /// `A_e` goes to `e`; other words map letter by letter.
    pub fn cs_lin_word(&self, w: &Word) -> Result<LinComb, CoreError> {
        if w.is_identity() {
            return match self.split_of_object(w.src()) {
                Some(s) => Ok(s.cert.cell.to_lin()),
                None => Ok(LinComb::identity(self.cs_object(w.src())?)),
            };
        }
        let mut acc = LinComb::identity(self.cs_object(w.src())?);
        for &a in w.letters() {
            let img = self.cs_letter(a)?;
            acc = acc.compose(&img.to_lin())?;
        }
        Ok(acc)
    }

    fn cs_letter(&self, a: ArrowId) -> Result<Cell, CoreError> {
        if a < self.base.arrows.len() {
            return Ok(Cell::Word(self.base.word_from_ids(&[a])?));
        }
        self.split_of_arrow(a).map(|s| s.cert.cell.clone()).ok_or_else(|| CoreError::UnknownName(format!("1-cell #{a}")))
    }

    /// Image of a context word: letters only, no identity special case.
    fn cs_context(&self, w: &Word) -> Result<Word, CoreError> {
        let mut acc = Word::identity(self.cs_object(w.src())?);
        for &a in w.letters() {
            match self.cs_letter(a)? {
                Cell::Word(x) => acc = acc.compose(&x)?,
                Cell::Lin(_) => return Err(CoreError::Unsupported("linear idempotent in a word context".into())),
            }
        }
        Ok(acc)
    }

    /// Image of a word at set level.
    pub fn cs_word(&self, w: &Word) -> Result<Word, CoreError> {
        if w.is_identity() {
            if let Some(s) = self.split_of_object(w.src()) {
                return match &s.cert.cell {
                    Cell::Word(e) => Ok(e.clone()),
                    Cell::Lin(_) => Err(CoreError::Unsupported("linear idempotent".into())),
                };
            }
        }
        self.cs_context(w)
    }

    pub fn cs_lin(&self, x: &LinComb) -> Result<LinComb, CoreError> {
        let mut out = LinComb::zero(self.cs_object(x.src())?, self.cs_object(x.tgt())?);
        for (w, c) in x.terms() {
            out = LinComb::combine(&Coef::one(), &out, c, &self.cs_lin_word(w)?)?;
        }
        Ok(out)
    }

    /// Image of a set-level trace: base steps are kept, `pi_e` and `iota_e`
    /// steps become whiskered copies of the idempotency proof of `e`.
    pub fn cs_trace(&self, t: &Trace) -> Result<Trace, CoreError> {
        if self.base.is_linear() {
            return Err(CoreError::Unsupported("images of linear traces are compared through normal forms".into()));
        }
        let mut out = Trace::empty(&self.cs_word(&t.source)?, TraceKind::Derivation);
        for s in &t.steps {
            let r = &s.redex;
            let l = self.cs_context(&r.left)?;
            let rt = self.cs_context(&r.right)?;
            let piece = if r.rule < self.base.rules.len() {
                let redex = crate::rewrite::Redex { rule: r.rule, position: l.len(), left: l, right: rt };
                let sys = StringSystem::from_polygraph(&self.base)?;
                let target = match s.direction {
                    Direction::Forward => sys.apply(&redex),
                    Direction::Backward => {
                        let rule = &sys.rules[r.rule];
                        redex.left.compose(&rule.lhs)?.compose(&redex.right)?
                    }
                };
                let source = match s.direction {
                    Direction::Forward => redex.left.compose(&sys.rules[r.rule].lhs)?.compose(&redex.right)?,
                    Direction::Backward => redex.left.compose(&sys.rules[r.rule].rhs)?.compose(&redex.right)?,
                };
                Trace { source, target, steps: vec![crate::rewrite::Step { redex, direction: s.direction }], kind: TraceKind::Derivation }
            } else {
                let split = self
                    .splits
                    .iter()
                    .find(|x| x.pi == r.rule || x.iota == r.rule)
                    .ok_or_else(|| CoreError::UnknownName(format!("2-cell #{}", r.rule)))?;
                let proof = split.cert.set_trace().ok_or_else(|| CoreError::Unsupported("linear idempotent".into()))?;
                let forward = if r.rule == split.pi || (r.left.is_identity() && r.right.is_identity()) {
                    proof.whisker(&l, &rt)?
                } else {
                    // i p inside a longer word: e e e e -> e e needs two applications
                    let first = proof.whisker(&l, &rt)?;
                    let second = if !r.left.is_identity() {
                        let pre = l.slice(0, l.len() - proof.target.len());
                        proof.whisker(&pre, &rt)?
                    } else {
                        let post = rt.slice(proof.target.len(), rt.len());
                        proof.whisker(&l, &post)?
                    };
                    first.then(&second)
                };
                if s.direction == Direction::Forward {
                    forward
                } else {
                    forward.reverse()
                }
            };
            if piece.source != out.target {
                return Err(CoreError::Unsupported("trace image is not composable".into()));
            }
            out = out.then(&piece);
        }
        Ok(Trace { kind: TraceKind::Derivation, ..out })
    }

    /// `p_e`, `i_e` and the one-step proofs of `p·i => e`, `i·p => id`.
    pub fn split_witness(&self, e: &Cell) -> Result<SplitWitness, CoreError> {
        let s = self.split_of(e).ok_or_else(|| CoreError::Unsupported("idempotent is not split in this envelope".into()))?;
        let k = &self.polygraph;
        let p = k.word_from_ids(&[s.p])?;
        let i = k.word_from_ids(&[s.i])?;
        let pi = p.compose(&i)?;
        let ip = i.compose(&p)?;
        let (proof_pi, proof_ip) = if k.is_linear() {
            let sys = LinearSystem::from_polygraph(k)?;
            let one = |w: &Word, rule: usize| sys.step_at(&LinComb::from_word(w), w, rule, 0);
            (SplitProof::Lin(one(&pi, s.pi)), SplitProof::Lin(one(&ip, s.iota)))
        } else {
            let sys = StringSystem::from_polygraph(k)?;
            (SplitProof::Set(sys.step(&pi, s.pi, 0)), SplitProof::Set(sys.step(&ip, s.iota, 0)))
        };
        Ok(SplitWitness { p, i, proof_pi, proof_ip })
    }

    /// Lifts of one whisker factor `f` (a word over the base) to 2-cells of
    /// the envelope with the same target.
    fn factor_lifts(&self, f: &Word) -> Result<Vec<Atom>, CoreError> {
        let mut out = Vec::new();
        for s in &self.splits {
            if s.cert.cell.src() != f.src() || f.src() != f.tgt() {
                continue;
            }
            match &s.cert.cell {
                Cell::Word(e) => {
                    if e == f {
                        out.push(Atom::Rule(s.pi));
                    }
                }
                Cell::Lin(e) => {
                    if let Some((lambda, mu)) = self.solve_span(f, e)? {
                        let mut terms = Vec::new();
                        if !lambda.is_zero() {
                            terms.push(Term { coef: lambda, atoms: vec![Atom::Identity(f.src())] });
                        }
                        terms.push(Term { coef: mu.clone(), atoms: vec![Atom::Rule(s.pi)] });
                        if terms.len() == 1 && mu.is_one() {
                            out.push(Atom::Rule(s.pi));
                        } else {
                            out.push(Atom::Group(Layer(terms)));
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// `(λ, μ)` with `λ·id + μ·e = f` modulo the base rules and `μ != 0`.
    fn solve_span(&self, f: &Word, e: &LinComb) -> Result<Option<(Coef, Coef)>, CoreError> {
        let sys = LinearSystem::from_polygraph(&self.base)?;
        let nf = |x: &LinComb| sys.normal_form(x);
        let id = nf(&LinComb::identity(f.src()))?;
        let e = nf(e)?;
        let target = nf(&LinComb::from_word(f))?;
        let monomials: BTreeSet<Word> =
            id.terms().chain(e.terms()).chain(target.terms()).map(|(w, _)| w.clone()).collect();
        let rows: Vec<[Coef; 3]> =
            monomials.iter().map(|m| [id.coefficient(m), e.coefficient(m), target.coefficient(m)]).collect();
        Ok(solve_two(&rows).filter(|(_, mu)| !mu.is_zero()))
    }

    /// One layer's lifts: each maximal run of letters may have up to
    /// `size_bound` factors replaced by lifted cells.
    fn layer_lifts(&self, layer: &Layer, size_bound: usize) -> Result<Vec<Layer>, CoreError> {
        if layer.0.len() != 1 {
            return Ok(vec![layer.clone()]);
        }
        let term = &layer.0[0];
        let mut results: Vec<(Vec<Atom>, usize)> = vec![(Vec::new(), 0)];
        let mut k = 0;
        while k < term.atoms.len() {
            if !matches!(term.atoms[k], Atom::Arrow(_)) {
                for r in results.iter_mut() {
                    r.0.push(term.atoms[k].clone());
                }
                k += 1;
                continue;
            }
            let start = k;
            while k < term.atoms.len() && matches!(term.atoms[k], Atom::Arrow(_)) {
                k += 1;
            }
            let ids: Vec<ArrowId> = term.atoms[start..k]
                .iter()
                .map(|a| match a {
                    Atom::Arrow(x) => *x,
                    _ => unreachable!(),
                })
                .collect();
            let run = self.base.word_from_ids(&ids)?;
            let mut next = Vec::new();
            for (prefix, used) in &results {
                for (atoms, n) in self.run_lifts(&run, 0, size_bound - used.min(&size_bound))? {
                    let mut p = prefix.clone();
                    p.extend(atoms);
                    next.push((p, used + n));
                }
            }
            results = next;
        }
        Ok(results.into_iter().map(|(atoms, _)| Layer(vec![Term { coef: term.coef.clone(), atoms }])).collect())
    }

    /// Rewritings of `run[from..]` with at most `left` lifted factors.
    fn run_lifts(&self, run: &Word, from: usize, left: usize) -> Result<Vec<(Vec<Atom>, usize)>, CoreError> {
        if from == run.len() {
            return Ok(vec![(Vec::new(), 0)]);
        }
        let mut out = Vec::new();
        for (tail, n) in self.run_lifts(run, from + 1, left)? {
            let mut atoms = vec![Atom::Arrow(run.letters()[from])];
            atoms.extend(tail);
            out.push((atoms, n));
        }
        if left > 0 {
            for end in from + 1..=run.len() {
                let f = run.slice(from, end);
                for lift in self.factor_lifts(&f)? {
                    for (tail, n) in self.run_lifts(run, end, left - 1)? {
                        let mut atoms = vec![lift.clone()];
                        atoms.extend(tail);
                        out.push((atoms, n + 1));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Lifts each basis cell `f => g` to all pairs `(f', g')` whose first
    /// layers replace whisker factors by split cells; later layers are kept
    /// since the lifted first layer has the same target.
    pub fn lift_coherence(&self, basis: &[CoherenceCell], size_bound: usize) -> Result<Vec<LiftedCell>, CoreError> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        for cell in basis {
            let side_lifts = |e: &CellExpr| -> Result<Vec<CellExpr>, CoreError> {
                let first = self.layer_lifts(&e.0[0], size_bound)?;
                Ok(first
                    .into_iter()
                    .map(|l| {
                        let mut layers = vec![l];
                        layers.extend(e.0[1..].iter().cloned());
                        CellExpr(layers)
                    })
                    .collect())
            };
            for s in side_lifts(&cell.source)? {
                for t in side_lifts(&cell.target)? {
                    let key = (self.polygraph.show_expr(&s), self.polygraph.show_expr(&t));
                    if !seen.insert(key) {
                        continue;
                    }
                    let verified = self.check_lift(cell, &s, &t)?;
                    out.push(LiftedCell {
                        cell: CoherenceCell { name: format!("K{}", out.len() + 1), source: s.clone(), target: t.clone() },
                        basis: cell.name.clone(),
                        verified,
                    });
                }
            }
        }
        Ok(out)
    }

    /// Both sides are parallel modulo the envelope's relations and their
    /// images are equal, modulo the base, to the basis cell's sides.
    fn check_lift(&self, basis: &CoherenceCell, s: &CellExpr, t: &CellExpr) -> Result<bool, CoreError> {
        let k = &self.polygraph;
        let (bs, bt) = (basis.source.boundary(&self.base)?, basis.target.boundary(&self.base)?);
        let (ls, lt) = (s.boundary(k)?, t.boundary(k)?);
        if ls.0.src() != lt.0.src() || ls.0.tgt() != lt.0.tgt() {
            return Ok(false);
        }
        let pairs = [(&ls.0, &bs.0), (&ls.1, &bs.1), (&lt.0, &bt.0), (&lt.1, &bt.1)];
        if self.base.is_linear() {
            let sys = LinearSystem::from_polygraph(&self.base)?;
            for (lifted, orig) in pairs {
                if sys.normal_form(&self.cs_lin(lifted)?)? != sys.normal_form(orig)? {
                    return Ok(false);
                }
            }
            Ok(true)
        } else {
            let sys = StringSystem::from_polygraph(&self.base)?;
            for (lifted, orig) in pairs {
                let (Some(l), Some(o)) = (lifted.as_word(), orig.as_word()) else { return Ok(false) };
                if !sys.joinable(&self.cs_word(l)?, o, 8, JoinMode::Derivation).is_yes() {
                    return Ok(false);
                }
            }
            let ksys = StringSystem::from_polygraph(k)?;
            let (Some(a), Some(b)) = (ls.0.as_word(), lt.0.as_word()) else { return Ok(false) };
            Ok(ksys.joinable(a, b, 8, JoinMode::Derivation).is_yes())
        }
    }
}

/// A lifted coherence cell and the basis cell it comes from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LiftedCell {
    pub cell: CoherenceCell,
    pub basis: String,
    pub verified: bool,
}

/// Unique solution `(x, y)` of `a·x + b·y = c` for rows `[a, b, c]`.
fn solve_two(rows: &[[Coef; 3]]) -> Option<(Coef, Coef)> {
    let mut m: Vec<[Coef; 3]> = rows.to_vec();
    let mut pivots = Vec::new();
    let mut r = 0;
    for col in 0..2 {
        let Some(p) = (r..m.len()).find(|&i| !m[i][col].is_zero()) else { continue };
        m.swap(r, p);
        let inv = Coef::one() / &m[r][col];
        for c in 0..3 {
            m[r][c] = &m[r][c] * &inv;
        }
        for i in 0..m.len() {
            if i != r && !m[i][col].is_zero() {
                let f = m[i][col].clone();
                for c in 0..3 {
                    let v = &m[r][c] * &f;
                    m[i][c] = &m[i][c] - v;
                }
            }
        }
        pivots.push(col);
        r += 1;
    }
    if m[r..].iter().any(|row| !row[2].is_zero()) || pivots.len() < 2 {
        return None;
    }
    Some((m[0][2].clone(), m[1][2].clone()))
}

/// Bounds a coefficient's height; used to report candidate sizes.
pub fn coef_height(c: &Coef) -> i64 {
    let n = c.numer().abs();
    let d = c.denom().abs();
    let h = if n > d { n } else { d };
    h.to_string().parse().unwrap_or(i64::MAX)
}

#[cfg(test)]
mod tests {
    use super::*;

    const PART1: &str = "polygraph \"part1\"\n0-cell O\n1-cell a : O -> O\n1-cell b : O -> O\n2-cell alpha : a b a => a\n";
    const S2: &str = "polygraph \"S2\"\nring Q\n0-cell O\n1-cell s : O -> O\n2-cell alpha : s s => id(O)\n";

    #[test]
    fn monoid_idempotents_are_ab_and_ba() {
        let pg = Polygraph::parse(PART1).unwrap();
        let found: Vec<String> = enumerate_idempotents(&pg, 4).unwrap().iter().map(|c| c.cell.show(&pg)).collect();
        assert_eq!(found, vec!["a b", "b a"]);
    }

    #[test]
    fn aa_is_not_idempotent() {
        let pg = Polygraph::parse(PART1).unwrap();
        let aa = Cell::Word(pg.parse_word("a a").unwrap());
        assert_ne!(verify_idempotent(&pg, &aa, 4).unwrap().status, Status::Yes);
        let ab = Cell::Word(pg.parse_word("a b").unwrap());
        let v = verify_idempotent(&pg, &ab, 4).unwrap();
        v.witness.unwrap().replay(&pg).unwrap();
    }

    #[test]
    fn group_algebra_idempotents() {
        let pg = Polygraph::parse(S2).unwrap();
        let found: Vec<String> = solve_idempotents_linear(&pg, 8, 2).unwrap().iter().map(|c| c.cell.show(&pg)).collect();
        assert_eq!(found, vec!["0", "1/2 * id(O) - 1/2 * s", "1/2 * id(O) + 1/2 * s"]);
    }

    #[test]
    fn third_of_identity_is_rejected() {
        let pg = Polygraph::parse(S2).unwrap();
        let e = Cell::Lin(pg.parse_lin("1/3 * id(O)", None).unwrap());
        assert_eq!(verify_idempotent(&pg, &e, 4).unwrap().status, Status::No);
    }

    #[test]
    fn solve_two_unique() {
        let r = |a: i64, b: i64, c: i64| [crate::cell::coef(a), crate::cell::coef(b), crate::cell::coef(c)];
        assert_eq!(solve_two(&[r(1, 1, 3), r(1, -1, 1)]), Some((crate::cell::coef(2), crate::cell::coef(1))));
        assert_eq!(solve_two(&[r(1, 1, 3)]), None);
    }

    fn labels(env: &KaroubiEnvelope, lifted: &[LiftedCell]) -> Vec<String> {
        lifted
            .iter()
            .map(|l| {
                let (a, b) = l.cell.labels(&env.polygraph);
                format!("{a} => {b}")
            })
            .collect()
    }

    fn part1_envelope() -> (Polygraph, KaroubiEnvelope) {
        let pg = Polygraph::parse(PART1).unwrap();
        let certs = enumerate_idempotents(&pg, 4).unwrap();
        let labelled: Vec<(String, IdempotentCert)> = ["X", "Y"].iter().map(|s| s.to_string()).zip(certs).collect();
        let env = build_karoubi(&pg, &labelled).unwrap();
        (pg, env)
    }

    #[test]
    fn envelope_of_monoid() {
        let (pg, env) = part1_envelope();
        let k = &env.polygraph;
        assert_eq!(k.objects, vec!["O", "X", "Y"]);
        let arrows: Vec<&str> = k.arrows.iter().map(|a| a.name.as_str()).collect();
        assert_eq!(arrows, vec!["a", "b", "p_X", "i_X", "p_Y", "i_Y"]);
        let rules: Vec<String> = k.rules.iter().map(|r| k.show_rule(r)).collect();
        assert_eq!(
            rules,
            vec![
                "alpha : a b a => a",
                "pi_X : p_X i_X => a b",
                "iota_X : i_X p_X => id(X)",
                "pi_Y : p_Y i_Y => b a",
                "iota_Y : i_Y p_Y => id(Y)"
            ]
        );
        let basis = StringSystem::from_polygraph(&pg).unwrap().squier_basis(&pg, &ReductionOrder::lenlex(2)).unwrap();
        let lifted = env.lift_coherence(&basis, 1).unwrap();
        assert_eq!(
            labels(&env, &lifted),
            vec![
                "a b alpha => alpha b a",
                "a b alpha => alpha pi_Y",
                "pi_X alpha => alpha b a",
                "pi_X alpha => alpha pi_Y"
            ]
        );
        assert!(lifted.iter().all(|l| l.verified));
    }

    #[test]
    fn surjection_maps_iota_with_contexts() {
        let (pg, env) = part1_envelope();
        let k = &env.polygraph;
        let ksys = StringSystem::from_polygraph(k).unwrap();
        let sys = StringSystem::from_polygraph(&pg).unwrap();
        let w = k.parse_word("p_X i_X p_X i_X").unwrap();
        for pos in 0..3 {
            for r in 0..k.rules.len() {
                if !w.occurs_at(&ksys.rules[r].lhs, pos) {
                    continue;
                }
                let t = ksys.step(&w, r, pos);
                let img = env.cs_trace(&t).unwrap();
                assert_eq!(img.source, env.cs_word(&t.source).unwrap());
                assert_eq!(img.target, env.cs_word(&t.target).unwrap());
                img.replay(&sys).unwrap();
            }
        }
        let id_x = Word::identity(k.object("X").unwrap());
        assert_eq!(pg.show_word(&env.cs_word(&id_x).unwrap()), "a b");
        let sw = env.split_witness(&Cell::Word(pg.parse_word("a b").unwrap())).unwrap();
        sw.replay(&env).unwrap();
    }

    #[test]
    fn envelope_of_group_algebra() {
        let pg = Polygraph::parse(S2).unwrap();
        let certs = solve_idempotents_linear(&pg, 8, 2).unwrap();
        let labelled: Vec<(String, IdempotentCert)> = ["N", "X", "Y"].iter().map(|s| s.to_string()).zip(certs).collect();
        let env = build_karoubi(&pg, &labelled).unwrap();
        let basis = LinearSystem::from_polygraph(&pg).unwrap().lin_squier_basis().unwrap();
        assert_eq!(basis.len(), 1);
        assert_eq!(basis[0].labels(&pg), ("s alpha".to_string(), "alpha s".to_string()));
        let lifted = env.lift_coherence(&basis, 1).unwrap();
        let got = labels(&env, &lifted);
        assert_eq!(got.len(), 9);
        assert!(got.contains(&"(id(O) - 2 * pi_X) alpha => alpha (-id(O) + 2 * pi_Y)".to_string()), "{got:?}");
        assert!(lifted.iter().all(|l| l.verified));
    }
}

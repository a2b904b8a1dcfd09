//! Resolved polygraphs: generators indexed by declaration order.

use std::fmt;

use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::cell::{ArrowId, Coef, LinComb, ObjId, Word};
use crate::error::CoreError;
use crate::expr::CellExpr;
use crate::validate::IssueKind;
use crate::syntax::{self, ArrowDecl, Document, HigherDecl, LinSyntax, RuleDecl, WordSyntax};

/// Coefficient ring of the top-dimensional rules.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Ring {
    /// Set-level rewriting: each rule rewrites a word into a word.
    #[default]
    None,
    Rationals,
    Integers,
}

impl fmt::Display for Ring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ring::None => "none",
            Ring::Rationals => "Q",
            Ring::Integers => "Z",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Arrow {
    pub name: String,
    pub src: ObjId,
    pub tgt: ObjId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Rhs {
    Word(Word),
    Lin(LinComb),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rule {
    pub name: String,
    pub lhs: Word,
    pub rhs: Rhs,
}

impl Rule {
    pub fn rhs_lin(&self) -> LinComb {
        match &self.rhs {
            Rhs::Word(w) => LinComb::from_word(w),
            Rhs::Lin(l) => l.clone(),
        }
    }

    pub fn rhs_word(&self) -> Option<&Word> {
        match &self.rhs {
            Rhs::Word(w) => Some(w),
            Rhs::Lin(_) => None,
        }
    }
}

/// A cell of dimension 3 or more, kept with its boundary expressions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HigherCell {
    pub dim: usize,
    pub name: String,
    pub source: CellExpr,
    pub target: CellExpr,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Polygraph {
    pub name: String,
    pub ring: Ring,
    pub objects: Vec<String>,
    pub arrows: Vec<Arrow>,
    pub rules: Vec<Rule>,
    pub higher: Vec<HigherCell>,
}

impl Polygraph {
    pub fn new(name: impl Into<String>, ring: Ring) -> Self {
        Polygraph {
            name: name.into(),
            ring,
            objects: Vec::new(),
            arrows: Vec::new(),
            rules: Vec::new(),
            higher: Vec::new(),
        }
    }

    /// Parses and validates DSL text.
    pub fn parse(text: &str) -> Result<Polygraph, crate::validate::ValidationReport> {
        match syntax::parse(text) {
            Ok(doc) => crate::validate::resolve(&doc),
            Err(e) => Err(crate::validate::ValidationReport::from_syntax(e)),
        }
    }

    pub fn is_linear(&self) -> bool {
        self.ring != Ring::None
    }

    /// Highest dimension that has a generator.
    pub fn dimension(&self) -> usize {
        if let Some(d) = self.higher.iter().map(|h| h.dim).max() {
            d
        } else if !self.rules.is_empty() {
            2
        } else if !self.arrows.is_empty() {
            1
        } else {
            0
        }
    }

    pub fn object(&self, name: &str) -> Option<ObjId> {
        self.objects.iter().position(|o| o == name)
    }

    pub fn arrow(&self, name: &str) -> Option<ArrowId> {
        self.arrows.iter().position(|a| a.name == name)
    }

    pub fn rule(&self, name: &str) -> Option<usize> {
        self.rules.iter().position(|r| r.name == name)
    }

    pub fn higher_cell(&self, name: &str) -> Option<usize> {
        self.higher.iter().position(|h| h.name == name)
    }

    fn check_new_name(&self, dim: usize, name: &str) -> Result<(), CoreError> {
        if !syntax::is_identifier(name) {
            return Err(CoreError::InvalidName(name.to_string()));
        }
        let taken = match dim {
            0 => self.object(name).is_some(),
            1 => self.arrow(name).is_some(),
            2 => self.rule(name).is_some(),
            _ => self.higher.iter().any(|h| h.dim == dim && h.name == name),
        };
        if taken {
            return Err(CoreError::DuplicateName { dim, name: name.to_string() });
        }
        Ok(())
    }

    pub fn add_object(&mut self, name: &str) -> Result<ObjId, CoreError> {
        self.check_new_name(0, name)?;
        self.objects.push(name.to_string());
        Ok(self.objects.len() - 1)
    }

    pub fn add_arrow(&mut self, name: &str, src: ObjId, tgt: ObjId) -> Result<ArrowId, CoreError> {
        self.check_new_name(1, name)?;
        for o in [src, tgt] {
            if o >= self.objects.len() {
                return Err(CoreError::UnknownName(format!("0-cell #{o}")));
            }
        }
        self.arrows.push(Arrow { name: name.to_string(), src, tgt });
        Ok(self.arrows.len() - 1)
    }

    /// Every rule-shape constraint violated by `lhs => rhs`.
    pub(crate) fn rule_problems(&self, lhs: &Word, rhs: &Rhs) -> Vec<IssueKind> {
        let mut out = Vec::new();
        let rhs_lin = match rhs {
            Rhs::Word(w) => LinComb::from_word(w),
            Rhs::Lin(l) => l.clone(),
        };
        if lhs.src() != rhs_lin.src() || lhs.tgt() != rhs_lin.tgt() {
            out.push(IssueKind::NotParallel);
        }
        match (self.ring, rhs) {
            (Ring::None, Rhs::Lin(_)) => out.push(IssueKind::LinearRhs),
            (Ring::Integers, Rhs::Lin(l)) if !l.is_integral() => out.push(IssueKind::NonInteger),
            _ => {}
        }
        if lhs.is_identity() && !(self.is_linear() && rhs_lin.is_zero()) {
            out.push(IssueKind::IdentityLhs);
        }
        if self.is_linear() && rhs_lin.contains(lhs) {
            out.push(IssueKind::LhsInRhs);
        }
        out
    }

    pub fn add_rule(&mut self, name: &str, lhs: Word, rhs: Rhs) -> Result<usize, CoreError> {
        self.check_new_name(2, name)?;
        let rhs = match (self.ring, rhs) {
            (Ring::None, Rhs::Lin(l)) => match l.as_word() {
                Some(w) => Rhs::Word(w.clone()),
                None => Rhs::Lin(l),
            },
            (Ring::Rationals | Ring::Integers, Rhs::Word(w)) => Rhs::Lin(LinComb::from_word(&w)),
            (_, r) => r,
        };
        if let Some(problem) = self.rule_problems(&lhs, &rhs).first() {
            return Err(CoreError::BadRule(name.to_string(), problem.to_string()));
        }
        self.rules.push(Rule { name: name.to_string(), lhs, rhs });
        Ok(self.rules.len() - 1)
    }

    /// Adds a higher cell after checking its boundary expressions.
    pub fn add_higher(&mut self, dim: usize, name: &str, source: CellExpr, target: CellExpr) -> Result<usize, CoreError> {
        self.check_new_name(dim, name)?;
        if dim == 3 {
            let (s0, t0) = source.endpoints(self)?;
            let (s1, t1) = target.endpoints(self)?;
            if (s0, t0) != (s1, t1) {
                return Err(CoreError::BadRule(name.to_string(), IssueKind::CellNotParallel.to_string()));
            }
        }
        self.higher.push(HigherCell { dim, name: name.to_string(), source, target });
        Ok(self.higher.len() - 1)
    }

    pub fn word(&self, w: &WordSyntax) -> Result<Word, CoreError> {
        match w {
            WordSyntax::Identity(o) => {
                let obj = self.object(o).ok_or_else(|| CoreError::UnknownName(o.clone()))?;
                Ok(Word::identity(obj))
            }
            WordSyntax::Letters(names) => {
                let ids = names
                    .iter()
                    .map(|n| self.arrow(n).ok_or_else(|| CoreError::UnknownName(n.clone())))
                    .collect::<Result<Vec<_>, _>>()?;
                self.word_from_ids(&ids)
            }
        }
    }

    /// Builds a word from arrow indices, checking composability.
    pub fn word_from_ids(&self, ids: &[ArrowId]) -> Result<Word, CoreError> {
        let first = ids.first().ok_or_else(|| CoreError::IllTyped("empty word without an object".into()))?;
        let mut path = vec![self.arrows[*first].src];
        for (i, &a) in ids.iter().enumerate() {
            let arrow = &self.arrows[a];
            let here = *path.last().unwrap();
            if arrow.src != here {
                return Err(CoreError::IllTyped(format!(
                    "`{}` starts at {} but letter {} ends at {}",
                    arrow.name,
                    self.objects[arrow.src],
                    i,
                    self.objects[here]
                )));
            }
            path.push(arrow.tgt);
        }
        Ok(Word::from_parts(ids.to_vec(), path))
    }

    /// Resolves a linear combination. `endpoints` supplies the type of the
    /// zero combination and is checked against nonempty ones.
    pub fn lin(&self, l: &LinSyntax, endpoints: Option<(ObjId, ObjId)>) -> Result<LinComb, CoreError> {
        let words = l.iter().map(|(c, w)| Ok((c.clone(), self.word(w)?))).collect::<Result<Vec<_>, CoreError>>()?;
        let (src, tgt) = match (endpoints, words.first()) {
            (Some(e), _) => e,
            (None, Some((_, w))) => (w.src(), w.tgt()),
            (None, None) => return Err(CoreError::IllTyped("zero combination without endpoints".into())),
        };
        LinComb::from_terms(src, tgt, words)
    }

    pub fn parse_word(&self, text: &str) -> Result<Word, CoreError> {
        self.word(&syntax::parse_word(text)?)
    }

    pub fn parse_lin(&self, text: &str, endpoints: Option<(ObjId, ObjId)>) -> Result<LinComb, CoreError> {
        self.lin(&syntax::parse_lin(text)?, endpoints)
    }

    pub fn word_syntax(&self, w: &Word) -> WordSyntax {
        if w.is_identity() {
            WordSyntax::Identity(self.objects[w.src()].clone())
        } else {
            WordSyntax::Letters(w.letters().iter().map(|&a| self.arrows[a].name.clone()).collect())
        }
    }

    pub fn lin_syntax(&self, l: &LinComb) -> LinSyntax {
        l.terms().map(|(w, c)| (c.clone(), self.word_syntax(w))).collect()
    }

    pub fn show_word(&self, w: &Word) -> String {
        self.word_syntax(w).to_string()
    }

    pub fn show_lin(&self, l: &LinComb) -> String {
        syntax::fmt_lin(&self.lin_syntax(l))
    }

    pub fn show_rhs(&self, r: &Rhs) -> String {
        match r {
            Rhs::Word(w) => self.show_word(w),
            Rhs::Lin(l) => self.show_lin(l),
        }
    }

    pub fn show_rule(&self, r: &Rule) -> String {
        format!("{} : {} => {}", r.name, self.show_word(&r.lhs), self.show_rhs(&r.rhs))
    }

    pub fn show_expr(&self, e: &CellExpr) -> String {
        e.to_syntax(self).to_string()
    }

    pub fn to_document(&self) -> Document {
        let mut doc = Document::new(self.name.clone(), self.ring);
        doc.objects = self.objects.clone();
        doc.arrows = self
            .arrows
            .iter()
            .map(|a| ArrowDecl {
                name: a.name.clone(),
                source: self.objects[a.src].clone(),
                target: self.objects[a.tgt].clone(),
            })
            .collect();
        doc.rules = self
            .rules
            .iter()
            .map(|r| RuleDecl {
                name: r.name.clone(),
                lhs: self.word_syntax(&r.lhs),
                rhs: match &r.rhs {
                    Rhs::Word(w) => vec![(Coef::one(), self.word_syntax(w))],
                    Rhs::Lin(l) => self.lin_syntax(l),
                },
            })
            .collect();
        doc.higher = self
            .higher
            .iter()
            .map(|h| HigherDecl {
                dim: h.dim,
                name: h.name.clone(),
                source: h.source.to_syntax(self),
                target: h.target.to_syntax(self),
            })
            .collect();
        doc
    }

    /// Rejects inputs outside the set-level engine.
    pub fn require_set_level(&self) -> Result<(), CoreError> {
        if self.is_linear() {
            return Err(CoreError::Unsupported(format!(
                "`{}` is linear (ring {}); this operation needs a set-level 2-polygraph",
                self.name, self.ring
            )));
        }
        Ok(())
    }

    /// Rejects inputs outside the linear engine.
    pub fn require_linear(&self) -> Result<(), CoreError> {
        if !self.is_linear() {
            return Err(CoreError::Unsupported(format!(
                "`{}` is set-level; this operation needs a linear polygraph (ring Q or Z)",
                self.name
            )));
        }
        Ok(())
    }

    /// Every word of the free category with length at most `max_len`, in
    /// deglex order. Identities are included.
    pub fn words_up_to(&self, max_len: usize) -> Vec<Word> {
        let mut out: Vec<Word> = (0..self.objects.len()).map(Word::identity).collect();
        let mut frontier: Vec<Word> = Vec::new();
        for a in 0..self.arrows.len() {
            frontier.push(self.word_from_ids(&[a]).expect("single letters are well typed"));
        }
        for _ in 0..max_len {
            out.extend(frontier.iter().cloned());
            let mut next = Vec::new();
            for w in &frontier {
                for (a, arrow) in self.arrows.iter().enumerate() {
                    if arrow.src == w.tgt() {
                        let mut ids = w.letters().to_vec();
                        ids.push(a);
                        let mut path: Vec<ObjId> = (0..=w.len()).map(|i| w.object_at(i)).collect();
                        path.push(arrow.tgt);
                        next.push(Word::from_parts(ids, path));
                    }
                }
            }
            frontier = next;
        }
        out.sort();
        out
    }
}

impl fmt::Display for Polygraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.to_document().fmt(f)
    }
}

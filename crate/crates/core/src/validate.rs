//! Well-formedness checks for parsed documents.
//!
//! | check                         | applies to                          |
//! |-------------------------------|-------------------------------------|
//! | invalid name                  | every declaration                   |
//! | duplicate name                | names within one dimension          |
//! | unknown cell reference        | 1-cell endpoints, words, cell exprs |
//! | ill-typed word                | rule sides                          |
//! | rule sides not parallel       | 2-cells                             |
//! | identity left-hand side       | 2-cells (allowed as `id => 0`)      |
//! | left-hand side occurs in rhs  | 2-cells of linear polygraphs        |
//! | linear rhs in set-level ring  | 2-cells of ring `none`              |
//! | non-integer coefficient       | 2-cells of ring `Z`                 |
//! | ill-typed cell expression     | 3-cell boundaries                   |
//! | cell sides not parallel       | 3-cell boundaries (0-cell endpoints)|
//!
//! Cells of dimension 4 and above get the name and reference checks only.

use std::fmt;

use serde::Serialize;

use crate::cell::LinComb;
use crate::error::{CoreError, SyntaxError};
use crate::expr::CellExpr;
use crate::polygraph::{Arrow, HigherCell, Polygraph, Rhs, Ring, Rule};
use crate::syntax::{is_identifier, Document};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum IssueKind {
    Syntax,
    InvalidName,
    DuplicateName,
    UnknownReference,
    IllTypedWord,
    NotParallel,
    IdentityLhs,
    LhsInRhs,
    LinearRhs,
    NonInteger,
    IllTypedExpr,
    CellNotParallel,
}

impl fmt::Display for IssueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IssueKind::Syntax => "syntax error",
            IssueKind::InvalidName => "invalid name",
            IssueKind::DuplicateName => "duplicate name",
            IssueKind::UnknownReference => "unknown cell reference",
            IssueKind::IllTypedWord => "ill-typed word",
            IssueKind::NotParallel => "rule sides not parallel",
            IssueKind::IdentityLhs => "identity left-hand side",
            IssueKind::LhsInRhs => "left-hand side occurs in right-hand side",
            IssueKind::LinearRhs => "linear right-hand side in a set-level polygraph",
            IssueKind::NonInteger => "non-integer coefficient in a Z-linear polygraph",
            IssueKind::IllTypedExpr => "ill-typed cell expression",
            IssueKind::CellNotParallel => "cell sides not parallel",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Issue {
    pub kind: IssueKind,
    /// `dim-cell name` of the offending declaration.
    pub cell: String,
    pub detail: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.cell)?;
        if !self.detail.is_empty() {
            write!(f, " ({})", self.detail)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn has(&self, kind: IssueKind) -> bool {
        self.issues.iter().any(|i| i.kind == kind)
    }

    pub fn from_syntax(e: SyntaxError) -> Self {
        ValidationReport {
            issues: vec![Issue { kind: IssueKind::Syntax, cell: format!("{}:{}", e.line, e.column), detail: e.message }],
        }
    }

    fn push(&mut self, kind: IssueKind, dim: usize, name: &str, detail: impl Into<String>) {
        self.issues.push(Issue { kind, cell: format!("{dim}-cell {name}"), detail: detail.into() });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in &self.issues {
            writeln!(f, "{i}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationReport {}

fn word_issue(e: &CoreError) -> (IssueKind, String) {
    match e {
        CoreError::UnknownName(n) => (IssueKind::UnknownReference, format!("`{n}`")),
        other => (IssueKind::IllTypedWord, other.to_string()),
    }
}

/// Lists every violated constraint; empty iff the document is well formed.
pub fn validate(doc: &Document) -> ValidationReport {
    check(doc).1
}

/// Builds the polygraph, or returns the full report when any check fails.
pub fn resolve(doc: &Document) -> Result<Polygraph, ValidationReport> {
    let (pg, report) = check(doc);
    if report.is_empty() {
        Ok(pg)
    } else {
        Err(report)
    }
}

fn check(doc: &Document) -> (Polygraph, ValidationReport) {
    let mut report = ValidationReport::default();
    let mut pg = Polygraph::new(doc.name.clone(), doc.ring);
    let name_ok = |report: &mut ValidationReport, dim: usize, name: &str, taken: bool| -> bool {
        if !is_identifier(name) {
            report.push(IssueKind::InvalidName, dim, name, "");
            return false;
        }
        if taken {
            report.push(IssueKind::DuplicateName, dim, name, "");
            return false;
        }
        true
    };

    for o in &doc.objects {
        if name_ok(&mut report, 0, o, pg.object(o).is_some()) {
            pg.objects.push(o.clone());
        }
    }

    for a in &doc.arrows {
        let fresh = name_ok(&mut report, 1, &a.name, pg.arrow(&a.name).is_some());
        let mut ends = Vec::new();
        for o in [&a.source, &a.target] {
            match pg.object(o) {
                Some(id) => ends.push(id),
                None => report.push(IssueKind::UnknownReference, 1, &a.name, format!("`{o}`")),
            }
        }
        if fresh && ends.len() == 2 {
            pg.arrows.push(Arrow { name: a.name.clone(), src: ends[0], tgt: ends[1] });
        }
    }

    for r in &doc.rules {
        let fresh = name_ok(&mut report, 2, &r.name, pg.rule(&r.name).is_some());
        let lhs = match pg.word(&r.lhs) {
            Ok(w) => Some(w),
            Err(e) => {
                let (kind, detail) = word_issue(&e);
                report.push(kind, 2, &r.name, format!("left-hand side: {detail}"));
                None
            }
        };
        let mut words = Vec::new();
        let mut rhs_ok = true;
        for (c, w) in &r.rhs {
            match pg.word(w) {
                Ok(w) => words.push((c.clone(), w)),
                Err(e) => {
                    let (kind, detail) = word_issue(&e);
                    report.push(kind, 2, &r.name, format!("right-hand side: {detail}"));
                    rhs_ok = false;
                }
            }
        }
        let Some(lhs) = lhs else { continue };
        if !rhs_ok {
            continue;
        }
        let rhs = if doc.ring == Ring::None && words.len() == 1 && num_traits::One::is_one(&words[0].0) {
            Rhs::Word(words.pop().unwrap().1)
        } else {
            let ends = words.first().map(|(_, w)| (w.src(), w.tgt())).unwrap_or((lhs.src(), lhs.tgt()));
            if words.iter().any(|(_, w)| (w.src(), w.tgt()) != ends) {
                report.push(IssueKind::IllTypedWord, 2, &r.name, "right-hand side mixes non-parallel words");
                continue;
            }
            Rhs::Lin(LinComb::from_terms(ends.0, ends.1, words).expect("parallel terms"))
        };
        let problems = pg.rule_problems(&lhs, &rhs);
        for p in &problems {
            report.push(*p, 2, &r.name, "");
        }
        if fresh && problems.is_empty() {
            pg.rules.push(Rule { name: r.name.clone(), lhs, rhs });
        }
    }

    for h in &doc.higher {
        let taken = pg.higher.iter().any(|x| x.dim == h.dim && x.name == h.name);
        let fresh = name_ok(&mut report, h.dim, &h.name, taken);
        let sides = [&h.source, &h.target].map(|s| CellExpr::resolve(&pg, h.dim, s));
        let mut resolved = Vec::new();
        for side in sides {
            match side {
                Ok(e) => resolved.push(e),
                Err(e) => {
                    let (_, detail) = word_issue(&e);
                    report.push(IssueKind::UnknownReference, h.dim, &h.name, detail);
                }
            }
        }
        if resolved.len() != 2 {
            continue;
        }
        let target = resolved.pop().unwrap();
        let source = resolved.pop().unwrap();
        if h.dim == 3 {
            let ends: Vec<_> = [&source, &target].iter().map(|e| e.endpoints(&pg)).collect();
            match (&ends[0], &ends[1]) {
                (Ok(a), Ok(b)) if a != b => {
                    report.push(IssueKind::CellNotParallel, 3, &h.name, "");
                    continue;
                }
                (Ok(_), Ok(_)) => {}
                (Err(e), _) | (_, Err(e)) => {
                    report.push(IssueKind::IllTypedExpr, 3, &h.name, e.to_string());
                    continue;
                }
            }
        }
        if fresh {
            pg.higher.push(HigherCell { dim: h.dim, name: h.name.clone(), source, target });
        }
    }
    (pg, report)
}

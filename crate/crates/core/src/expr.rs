//! Formal composites of cells used as boundaries of higher cells.
//!
//! A layer is a sum of scaled horizontal products of atoms; an expression
//! stacks layers with `;`. Vertical composites are stored as written: their
//! middle boundaries are only required to agree on 0-cells, since lifted
//! coherence cells are parallel modulo the relations, not on the nose.

use num_traits::One;

use crate::cell::{ArrowId, Coef, LinComb, ObjId};
use crate::error::CoreError;
use crate::polygraph::{Polygraph, Ring};
use crate::syntax::{AtomSyntax, ExprSyntax, LayerSyntax, TermSyntax};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Atom {
    Arrow(ArrowId),
    Identity(ObjId),
    Rule(usize),
    /// Index into `Polygraph::higher`.
    Higher(usize),
    Group(Layer),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Term {
    pub coef: Coef,
    pub atoms: Vec<Atom>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Layer(pub Vec<Term>);

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CellExpr(pub Vec<Layer>);

impl CellExpr {
    /// Resolves names for the boundary of a `dim`-cell: identifiers are
    /// looked up among cells of dimension `dim - 1`, then downwards.
    pub fn resolve(pg: &Polygraph, dim: usize, e: &ExprSyntax) -> Result<CellExpr, CoreError> {
        let layers = e.0.iter().map(|l| resolve_layer(pg, dim, l)).collect::<Result<Vec<_>, _>>()?;
        Ok(CellExpr(layers))
    }

    pub fn parse(pg: &Polygraph, dim: usize, text: &str) -> Result<CellExpr, CoreError> {
        Self::resolve(pg, dim, &crate::syntax::parse_expr(text)?)
    }

    /// A single 2-cell atom, whiskered by words on both sides.
    pub fn atom(a: Atom) -> CellExpr {
        CellExpr(vec![Layer(vec![Term { coef: Coef::one(), atoms: vec![a] }])])
    }

    /// Source and target 0-cells, after checking that every composite is
    /// well typed.
    pub fn endpoints(&self, pg: &Polygraph) -> Result<(ObjId, ObjId), CoreError> {
        let mut out = None;
        for layer in &self.0 {
            let e = layer_endpoints(pg, layer)?;
            match out {
                None => out = Some(e),
                Some(prev) if prev != e => {
                    return Err(CoreError::IllTyped("vertical composite changes its 0-cell boundary".into()))
                }
                _ => {}
            }
        }
        out.ok_or_else(|| CoreError::IllTyped("empty cell expression".into()))
    }

    /// 1-dimensional source and target of a composite of 2-cells, as
    /// combinations of words.
    pub fn boundary(&self, pg: &Polygraph) -> Result<(LinComb, LinComb), CoreError> {
        self.endpoints(pg)?;
        let first = self.0.first().expect("endpoints checked nonempty");
        let last = self.0.last().expect("endpoints checked nonempty");
        Ok((layer_boundary(pg, first)?.0, layer_boundary(pg, last)?.1))
    }

    pub fn to_syntax(&self, pg: &Polygraph) -> ExprSyntax {
        ExprSyntax(self.0.iter().map(|l| layer_syntax(pg, l)).collect())
    }

    /// Every rule referenced anywhere in the expression.
    pub fn rules(&self) -> Vec<usize> {
        fn walk(l: &Layer, out: &mut Vec<usize>) {
            for t in &l.0 {
                for a in &t.atoms {
                    match a {
                        Atom::Rule(r) => out.push(*r),
                        Atom::Group(g) => walk(g, out),
                        _ => {}
                    }
                }
            }
        }
        let mut out = Vec::new();
        for l in &self.0 {
            walk(l, &mut out);
        }
        out
    }
}

fn lookup(pg: &Polygraph, dim: usize, name: &str) -> Option<Atom> {
    for d in (1..dim).rev() {
        let hit = match d {
            1 => pg.arrow(name).map(Atom::Arrow),
            2 => pg.rule(name).map(Atom::Rule),
            _ => pg.higher.iter().position(|h| h.dim == d && h.name == name).map(Atom::Higher),
        };
        if hit.is_some() {
            return hit;
        }
    }
    None
}

fn resolve_layer(pg: &Polygraph, dim: usize, l: &LayerSyntax) -> Result<Layer, CoreError> {
    let mut terms = Vec::new();
    for t in &l.0 {
        let mut atoms = Vec::new();
        for a in &t.atoms {
            atoms.push(match a {
                AtomSyntax::Name(n) => lookup(pg, dim, n).ok_or_else(|| CoreError::UnknownName(n.clone()))?,
                AtomSyntax::Identity(o) => Atom::Identity(pg.object(o).ok_or_else(|| CoreError::UnknownName(o.clone()))?),
                AtomSyntax::Group(g) => Atom::Group(resolve_layer(pg, dim, g)?),
            });
        }
        terms.push(Term { coef: t.coef.clone(), atoms });
    }
    Ok(Layer(terms))
}

fn atom_endpoints(pg: &Polygraph, a: &Atom) -> Result<(ObjId, ObjId), CoreError> {
    Ok(match a {
        Atom::Arrow(x) => (pg.arrows[*x].src, pg.arrows[*x].tgt),
        Atom::Identity(o) => (*o, *o),
        Atom::Rule(r) => (pg.rules[*r].lhs.src(), pg.rules[*r].lhs.tgt()),
        Atom::Higher(h) => pg.higher[*h].source.endpoints(pg)?,
        Atom::Group(l) => layer_endpoints(pg, l)?,
    })
}

fn layer_endpoints(pg: &Polygraph, l: &Layer) -> Result<(ObjId, ObjId), CoreError> {
    if pg.ring == Ring::None && (l.0.len() != 1 || !l.0[0].coef.is_one()) {
        return Err(CoreError::IllTyped("sums and scalars need a linear polygraph".into()));
    }
    let mut out = None;
    for t in &l.0 {
        let mut ends: Option<(ObjId, ObjId)> = None;
        for a in &t.atoms {
            let (s, e) = atom_endpoints(pg, a)?;
            ends = Some(match ends {
                None => (s, e),
                Some((s0, e0)) if e0 == s => (s0, e),
                Some((_, e0)) => {
                    return Err(CoreError::EndpointMismatch { left_target: e0, right_source: s });
                }
            });
        }
        let ends = ends.ok_or_else(|| CoreError::IllTyped("empty term".into()))?;
        match out {
            None => out = Some(ends),
            Some(prev) if prev != ends => return Err(CoreError::NotParallel),
            _ => {}
        }
    }
    out.ok_or_else(|| CoreError::IllTyped("empty sum".into()))
}

fn atom_boundary(pg: &Polygraph, a: &Atom) -> Result<(LinComb, LinComb), CoreError> {
    Ok(match a {
        Atom::Arrow(x) => {
            let w = LinComb::from_word(&pg.word_from_ids(&[*x])?);
            (w.clone(), w)
        }
        Atom::Identity(o) => (LinComb::identity(*o), LinComb::identity(*o)),
        Atom::Rule(r) => (LinComb::from_word(&pg.rules[*r].lhs), pg.rules[*r].rhs_lin()),
        Atom::Higher(_) => {
            return Err(CoreError::Unsupported("boundaries of cells above dimension 2 are not evaluated".into()))
        }
        Atom::Group(l) => layer_boundary(pg, l)?,
    })
}

fn layer_boundary(pg: &Polygraph, l: &Layer) -> Result<(LinComb, LinComb), CoreError> {
    let (s, t) = layer_endpoints(pg, l)?;
    let mut src = LinComb::zero(s, t);
    let mut tgt = LinComb::zero(s, t);
    for term in &l.0 {
        let mut acc: Option<(LinComb, LinComb)> = None;
        for a in &term.atoms {
            let (x, y) = atom_boundary(pg, a)?;
            acc = Some(match acc {
                None => (x, y),
                Some((x0, y0)) => (x0.compose(&x)?, y0.compose(&y)?),
            });
        }
        let (x, y) = acc.expect("terms are nonempty");
        src = LinComb::combine(&Coef::one(), &src, &term.coef, &x)?;
        tgt = LinComb::combine(&Coef::one(), &tgt, &term.coef, &y)?;
    }
    Ok((src, tgt))
}

fn layer_syntax(pg: &Polygraph, l: &Layer) -> LayerSyntax {
    LayerSyntax(
        l.0.iter()
            .map(|t| TermSyntax {
                coef: t.coef.clone(),
                atoms: t
                    .atoms
                    .iter()
                    .map(|a| match a {
                        Atom::Arrow(x) => AtomSyntax::Name(pg.arrows[*x].name.clone()),
                        Atom::Identity(o) => AtomSyntax::Identity(pg.objects[*o].clone()),
                        Atom::Rule(r) => AtomSyntax::Name(pg.rules[*r].name.clone()),
                        Atom::Higher(h) => AtomSyntax::Name(pg.higher[*h].name.clone()),
                        Atom::Group(g) => AtomSyntax::Group(layer_syntax(pg, g)),
                    })
                    .collect(),
            })
            .collect(),
    )
}

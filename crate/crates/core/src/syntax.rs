//! Line-oriented text format for polygraphs.
//!
//! ```text
//! polygraph "part1"
//! ring none
//! 0-cell O
//! 1-cell a : O -> O
//! 1-cell b : O -> O
//! 2-cell alpha : a b a => a
//! 3-cell A : a b alpha => alpha b a
//! ```
//!
//! A [`Document`] is the unresolved form: names are kept as written and
//! nothing is checked beyond the grammar. Semantic problems are reported by
//! [`crate::validate`].

use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::cell::Coef;
use crate::error::SyntaxError;
use crate::polygraph::Ring;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum WordSyntax {
    Identity(String),
    Letters(Vec<String>),
}

/// Right-hand side of a 2-cell: a list of scaled words, empty for `0`.
/// A plain word is the single term `(1, word)`.
pub type LinSyntax = Vec<(Coef, WordSyntax)>;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum AtomSyntax {
    Name(String),
    Identity(String),
    Group(LayerSyntax),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TermSyntax {
    pub coef: Coef,
    pub atoms: Vec<AtomSyntax>,
}

/// A sum of horizontally composed atoms.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LayerSyntax(pub Vec<TermSyntax>);

/// Vertical composite of layers, separated by `;`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ExprSyntax(pub Vec<LayerSyntax>);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArrowDecl {
    pub name: String,
    pub source: String,
    pub target: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RuleDecl {
    pub name: String,
    pub lhs: WordSyntax,
    pub rhs: LinSyntax,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HigherDecl {
    pub dim: usize,
    pub name: String,
    pub source: ExprSyntax,
    pub target: ExprSyntax,
}

/// Parsed but unresolved polygraph. Declaration order inside each
/// dimension is preserved; it fixes the monomial order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Document {
    pub name: String,
    pub ring: Ring,
    pub objects: Vec<String>,
    pub arrows: Vec<ArrowDecl>,
    pub rules: Vec<RuleDecl>,
    pub higher: Vec<HigherDecl>,
}

impl Document {
    pub fn new(name: impl Into<String>, ring: Ring) -> Self {
        Document {
            name: name.into(),
            ring,
            objects: Vec::new(),
            arrows: Vec::new(),
            rules: Vec::new(),
            higher: Vec::new(),
        }
    }
}

pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_alphabetic() || c == '_' => {}
        _ => return false,
    }
    s != "id" && chars.all(|c| c.is_alphanumeric() || c == '_')
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Num(BigInt),
    Str(String),
    Slash,
    Star,
    Plus,
    Minus,
    LParen,
    RParen,
    To,
    Rewrites,
    Colon,
    Semi,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Num(n) => write!(f, "number `{n}`"),
            Tok::Str(s) => write!(f, "string \"{s}\""),
            Tok::Slash => f.write_str("`/`"),
            Tok::Star => f.write_str("`*`"),
            Tok::Plus => f.write_str("`+`"),
            Tok::Minus => f.write_str("`-`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::To => f.write_str("`->`"),
            Tok::Rewrites => f.write_str("`=>`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::Semi => f.write_str("`;`"),
        }
    }
}

fn lex(line: usize, text: &str, offset: usize) -> Result<Vec<(Tok, usize)>, SyntaxError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = offset + i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '#' {
            break;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), col));
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let digits: String = chars[start..i].iter().collect();
            let n = digits.parse::<BigInt>().map_err(|e| SyntaxError::new(line, col, e.to_string()))?;
            out.push((Tok::Num(n), col));
            continue;
        }
        if c == '"' {
            let start = i + 1;
            i += 1;
            while i < chars.len() && chars[i] != '"' {
                i += 1;
            }
            if i == chars.len() {
                return Err(SyntaxError::new(line, col, "unterminated string"));
            }
            out.push((Tok::Str(chars[start..i].iter().collect()), col));
            i += 1;
            continue;
        }
        let next = chars.get(i + 1).copied();
        let tok = match (c, next) {
            ('-', Some('>')) => {
                i += 1;
                Tok::To
            }
            ('=', Some('>')) => {
                i += 1;
                Tok::Rewrites
            }
            ('-', _) => Tok::Minus,
            ('+', _) => Tok::Plus,
            ('*', _) => Tok::Star,
            ('/', _) => Tok::Slash,
            ('(', _) => Tok::LParen,
            (')', _) => Tok::RParen,
            (':', _) => Tok::Colon,
            (';', _) => Tok::Semi,
            _ => return Err(SyntaxError::new(line, col, format!("unexpected character `{c}`"))),
        };
        out.push((tok, col));
        i += 1;
    }
    Ok(out)
}

struct Cursor {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    line: usize,
    end_col: usize,
}

impl Cursor {
    fn new(line: usize, text: &str, offset: usize) -> Result<Self, SyntaxError> {
        let end_col = offset + text.chars().count() + 1;
        Ok(Cursor { toks: lex(line, text, offset)?, pos: 0, line, end_col })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|(t, _)| t)
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map(|(_, c)| *c).unwrap_or(self.end_col)
    }

    fn err(&self, msg: impl Into<String>) -> SyntaxError {
        SyntaxError::new(self.line, self.col(), msg)
    }

    fn unexpected(&self, wanted: &str) -> SyntaxError {
        match self.peek() {
            Some(t) => self.err(format!("expected {wanted}, found {t}")),
            None => self.err(format!("expected {wanted}, found end of line")),
        }
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &Tok) -> Result<(), SyntaxError> {
        if self.eat(tok) {
            Ok(())
        } else {
            Err(self.unexpected(&tok.to_string()))
        }
    }

    fn ident(&mut self) -> Result<String, SyntaxError> {
        match self.peek() {
            Some(Tok::Ident(s)) if s != "id" => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    fn finish(&self) -> Result<(), SyntaxError> {
        if self.pos < self.toks.len() {
            Err(self.unexpected("end of line"))
        } else {
            Ok(())
        }
    }

    fn at_identity(&self) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == "id") && self.peek_at(1) == Some(&Tok::LParen)
    }

    fn identity(&mut self) -> Result<String, SyntaxError> {
        self.pos += 1;
        self.expect(&Tok::LParen)?;
        let obj = self.ident()?;
        self.expect(&Tok::RParen)?;
        Ok(obj)
    }

    fn at_word_start(&self) -> bool {
        matches!(self.peek(), Some(Tok::Ident(_)))
    }

    fn word(&mut self) -> Result<WordSyntax, SyntaxError> {
        if self.at_identity() {
            return Ok(WordSyntax::Identity(self.identity()?));
        }
        let mut letters = Vec::new();
        while matches!(self.peek(), Some(Tok::Ident(s)) if s != "id") {
            letters.push(self.ident()?);
        }
        if letters.is_empty() {
            return Err(self.unexpected("word"));
        }
        Ok(WordSyntax::Letters(letters))
    }

    fn rational(&mut self) -> Result<Coef, SyntaxError> {
        let num = match self.bump() {
            Some(Tok::Num(n)) => n,
            _ => {
                self.pos -= 1;
                return Err(self.unexpected("number"));
            }
        };
        if self.eat(&Tok::Slash) {
            let col = self.col();
            let den = match self.bump() {
                Some(Tok::Num(d)) => d,
                _ => {
                    self.pos -= 1;
                    return Err(self.unexpected("denominator"));
                }
            };
            if den.is_zero() {
                return Err(SyntaxError::new(self.line, col, "zero denominator"));
            }
            Ok(Coef::new(num, den))
        } else {
            Ok(Coef::from_integer(num))
        }
    }

    /// Leading sign of the first term, or the operator between terms.
    fn sign(&mut self, first: bool) -> Option<bool> {
        if self.eat(&Tok::Minus) {
            Some(true)
        } else if self.eat(&Tok::Plus) || first {
            Some(false)
        } else {
            None
        }
    }

    fn lin(&mut self) -> Result<LinSyntax, SyntaxError> {
        if matches!(self.peek(), Some(Tok::Num(n)) if n.is_zero()) && self.peek_at(1).is_none() {
            self.pos += 1;
            return Ok(Vec::new());
        }
        let mut terms = Vec::new();
        let mut first = true;
        while let Some(negative) = self.sign(first) {
            let mut c = if matches!(self.peek(), Some(Tok::Num(_))) {
                let c = self.rational()?;
                self.eat(&Tok::Star);
                c
            } else {
                Coef::one()
            };
            if negative {
                c = -c;
            }
            terms.push((c, self.word()?));
            first = false;
            if self.peek().is_none() {
                break;
            }
        }
        Ok(terms)
    }

    fn layer(&mut self) -> Result<LayerSyntax, SyntaxError> {
        let mut terms = Vec::new();
        let mut first = true;
        while let Some(negative) = self.sign(first) {
            let mut c = if matches!(self.peek(), Some(Tok::Num(_))) {
                let c = self.rational()?;
                self.eat(&Tok::Star);
                c
            } else {
                Coef::one()
            };
            if negative {
                c = -c;
            }
            let mut atoms = Vec::new();
            loop {
                if self.at_identity() {
                    atoms.push(AtomSyntax::Identity(self.identity()?));
                } else if self.at_word_start() {
                    atoms.push(AtomSyntax::Name(self.ident()?));
                } else if self.eat(&Tok::LParen) {
                    let inner = self.layer()?;
                    self.expect(&Tok::RParen)?;
                    atoms.push(AtomSyntax::Group(inner));
                } else {
                    break;
                }
            }
            if atoms.is_empty() {
                return Err(self.unexpected("cell expression"));
            }
            terms.push(TermSyntax { coef: c, atoms });
            first = false;
        }
        Ok(LayerSyntax(terms))
    }

    fn expr(&mut self) -> Result<ExprSyntax, SyntaxError> {
        let mut layers = vec![self.layer()?];
        while self.eat(&Tok::Semi) {
            layers.push(self.layer()?);
        }
        Ok(ExprSyntax(layers))
    }
}

fn cell_dimension(keyword: &str) -> Option<usize> {
    keyword.strip_suffix("-cell")?.parse().ok()
}

/// Parses DSL text into a [`Document`].
pub fn parse(text: &str) -> Result<Document, SyntaxError> {
    let mut doc: Option<Document> = None;
    let mut pending_ring: Option<(Ring, usize)> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let trimmed = content.trim_start();
        if trimmed.trim().is_empty() {
            continue;
        }
        let indent = content.chars().count() - trimmed.chars().count();
        let keyword: String = trimmed.chars().take_while(|c| !c.is_whitespace()).collect();
        let rest_offset = indent + keyword.chars().count();
        let rest = &trimmed[keyword.len()..];
        let mut cur = Cursor::new(line, rest, rest_offset)?;
        match keyword.as_str() {
            "polygraph" => {
                if doc.is_some() {
                    return Err(SyntaxError::new(line, indent + 1, "second polygraph declaration"));
                }
                let name = match cur.bump() {
                    Some(Tok::Str(s)) | Some(Tok::Ident(s)) => s,
                    _ => {
                        cur.pos = 0;
                        return Err(cur.unexpected("polygraph name"));
                    }
                };
                cur.finish()?;
                let mut d = Document::new(name, Ring::None);
                if let Some((ring, _)) = pending_ring.take() {
                    d.ring = ring;
                }
                doc = Some(d);
            }
            "ring" => {
                let ring = match cur.bump() {
                    Some(Tok::Ident(s)) if s == "Q" => Ring::Rationals,
                    Some(Tok::Ident(s)) if s == "Z" => Ring::Integers,
                    Some(Tok::Ident(s)) if s == "none" => Ring::None,
                    _ => {
                        cur.pos = 0;
                        return Err(cur.unexpected("`Q`, `Z` or `none`"));
                    }
                };
                cur.finish()?;
                match doc.as_mut() {
                    Some(d) => d.ring = ring,
                    None => pending_ring = Some((ring, line)),
                }
            }
            kw => {
                let dim = cell_dimension(kw)
                    .ok_or_else(|| SyntaxError::new(line, indent + 1, format!("unknown declaration `{kw}`")))?;
                let d = doc
                    .as_mut()
                    .ok_or_else(|| SyntaxError::new(line, indent + 1, "cell declared before `polygraph`"))?;
                match dim {
                    0 => {
                        let mut any = false;
                        while cur.peek().is_some() {
                            d.objects.push(cur.ident()?);
                            any = true;
                        }
                        if !any {
                            return Err(cur.unexpected("0-cell name"));
                        }
                    }
                    1 => {
                        let name = cur.ident()?;
                        cur.expect(&Tok::Colon)?;
                        let source = cur.ident()?;
                        cur.expect(&Tok::To)?;
                        let target = cur.ident()?;
                        cur.finish()?;
                        d.arrows.push(ArrowDecl { name, source, target });
                    }
                    2 => {
                        let name = cur.ident()?;
                        cur.expect(&Tok::Colon)?;
                        let lhs = cur.word()?;
                        cur.expect(&Tok::Rewrites)?;
                        let rhs = cur.lin()?;
                        cur.finish()?;
                        d.rules.push(RuleDecl { name, lhs, rhs });
                    }
                    _ => {
                        let name = cur.ident()?;
                        cur.expect(&Tok::Colon)?;
                        let source = cur.expr()?;
                        cur.expect(&Tok::Rewrites)?;
                        let target = cur.expr()?;
                        cur.finish()?;
                        d.higher.push(HigherDecl { dim, name, source, target });
                    }
                }
            }
        }
    }
    doc.ok_or_else(|| SyntaxError::new(1, 1, "no polygraph declared"))
}

/// Parses a standalone word such as `a b a` or `id(O)`.
pub fn parse_word(text: &str) -> Result<WordSyntax, SyntaxError> {
    let mut cur = Cursor::new(1, text, 0)?;
    let w = cur.word()?;
    cur.finish()?;
    Ok(w)
}

/// Parses a standalone combination such as `1/2 * id(O) - 1/2 * s` or `0`.
pub fn parse_lin(text: &str) -> Result<LinSyntax, SyntaxError> {
    let mut cur = Cursor::new(1, text, 0)?;
    let l = cur.lin()?;
    cur.finish()?;
    Ok(l)
}

/// Parses a standalone 2-cell expression.
pub fn parse_expr(text: &str) -> Result<ExprSyntax, SyntaxError> {
    let mut cur = Cursor::new(1, text, 0)?;
    let e = cur.expr()?;
    cur.finish()?;
    Ok(e)
}

pub(crate) fn fmt_coef(c: &Coef) -> String {
    if c.is_integer() {
        c.numer().to_string()
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

/// Writes `c·body` as one term of a sum.
pub(crate) fn fmt_term(out: &mut String, first: bool, c: &Coef, body: &str) {
    let negative = c.is_negative();
    let abs = c.abs();
    match (first, negative) {
        (true, false) => {}
        (true, true) => out.push('-'),
        (false, false) => out.push_str(" + "),
        (false, true) => out.push_str(" - "),
    }
    if !abs.is_one() {
        out.push_str(&fmt_coef(&abs));
        out.push_str(" * ");
    }
    out.push_str(body);
}

impl fmt::Display for WordSyntax {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WordSyntax::Identity(o) => write!(f, "id({o})"),
            WordSyntax::Letters(ls) => f.write_str(&ls.join(" ")),
        }
    }
}

pub fn fmt_lin(terms: &LinSyntax) -> String {
    if terms.is_empty() {
        return "0".to_string();
    }
    let mut out = String::new();
    for (i, (c, w)) in terms.iter().enumerate() {
        fmt_term(&mut out, i == 0, c, &w.to_string());
    }
    out
}

impl fmt::Display for AtomSyntax {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AtomSyntax::Name(n) => f.write_str(n),
            AtomSyntax::Identity(o) => write!(f, "id({o})"),
            AtomSyntax::Group(l) => write!(f, "({l})"),
        }
    }
}

impl fmt::Display for LayerSyntax {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        for (i, t) in self.0.iter().enumerate() {
            let body: Vec<String> = t.atoms.iter().map(|a| a.to_string()).collect();
            fmt_term(&mut out, i == 0, &t.coef, &body.join(" "));
        }
        f.write_str(&out)
    }
}

impl fmt::Display for ExprSyntax {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|l| l.to_string()).collect();
        f.write_str(&parts.join(" ; "))
    }
}

impl fmt::Display for Document {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "polygraph \"{}\"", self.name)?;
        writeln!(f, "ring {}", self.ring)?;
        for o in &self.objects {
            writeln!(f, "0-cell {o}")?;
        }
        for a in &self.arrows {
            writeln!(f, "1-cell {} : {} -> {}", a.name, a.source, a.target)?;
        }
        for r in &self.rules {
            writeln!(f, "2-cell {} : {} => {}", r.name, r.lhs, fmt_lin(&r.rhs))?;
        }
        for h in &self.higher {
            writeln!(f, "{}-cell {} : {} => {}", h.dim, h.name, h.source, h.target)?;
        }
        Ok(())
    }
}

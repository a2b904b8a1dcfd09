//! Free-category words and formal linear combinations of parallel words.

use std::cmp::Ordering;
use std::collections::btree_map::Entry;
use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::CoreError;

/// Exact coefficient type shared by every linear engine.
pub type Coef = BigRational;

pub type ObjId = usize;
pub type ArrowId = usize;

pub fn coef(n: i64) -> Coef {
    BigRational::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> Coef {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// A 1-cell of the free category: a typed path of generators.
///
/// `path` lists the 0-cells visited, so `path.len() == letters.len() + 1`;
/// an empty `letters` is the identity on `path[0]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Word {
    letters: Vec<ArrowId>,
    path: Vec<ObjId>,
}

impl Word {
    pub fn identity(obj: ObjId) -> Self {
        Word { letters: Vec::new(), path: vec![obj] }
    }

    /// Builds a word from letters and the visited 0-cells. The caller
    /// guarantees the path is consistent with the generators' typing.
    pub(crate) fn from_parts(letters: Vec<ArrowId>, path: Vec<ObjId>) -> Self {
        debug_assert_eq!(letters.len() + 1, path.len());
        Word { letters, path }
    }

    pub fn src(&self) -> ObjId {
        self.path[0]
    }

    pub fn tgt(&self) -> ObjId {
        *self.path.last().expect("path is never empty")
    }

    pub fn letters(&self) -> &[ArrowId] {
        &self.letters
    }

    /// 0-cell sitting between letter `pos - 1` and letter `pos`.
    pub fn object_at(&self, pos: usize) -> ObjId {
        self.path[pos]
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn is_endo(&self) -> bool {
        self.src() == self.tgt()
    }

    pub fn compose(&self, other: &Word) -> Result<Word, CoreError> {
        if self.tgt() != other.src() {
            return Err(CoreError::EndpointMismatch { left_target: self.tgt(), right_source: other.src() });
        }
        let mut letters = self.letters.clone();
        letters.extend_from_slice(&other.letters);
        let mut path = self.path.clone();
        path.extend_from_slice(&other.path[1..]);
        Ok(Word { letters, path })
    }

    /// Factor between letter positions `start` and `end` (exclusive).
    pub fn slice(&self, start: usize, end: usize) -> Word {
        Word { letters: self.letters[start..end].to_vec(), path: self.path[start..=end].to_vec() }
    }

    /// True when `pattern` occurs as a factor starting at `pos`. An identity
    /// pattern occurs wherever the word visits its 0-cell.
    pub fn occurs_at(&self, pattern: &Word, pos: usize) -> bool {
        if pos + pattern.len() > self.len() {
            return false;
        }
        if pattern.is_identity() {
            return self.path[pos] == pattern.src();
        }
        self.letters[pos..pos + pattern.len()] == pattern.letters[..]
    }

    pub fn occurrences(&self, pattern: &Word) -> Vec<usize> {
        (0..=self.len()).filter(|&p| self.occurs_at(pattern, p)).collect()
    }

    /// Replaces the factor of length `len` at `pos` by `by`.
    pub fn splice(&self, pos: usize, len: usize, by: &Word) -> Word {
        debug_assert_eq!(self.path[pos], by.src());
        debug_assert_eq!(self.path[pos + len], by.tgt());
        let mut letters = self.letters[..pos].to_vec();
        letters.extend_from_slice(&by.letters);
        letters.extend_from_slice(&self.letters[pos + len..]);
        let mut path = self.path[..pos].to_vec();
        path.extend_from_slice(&by.path);
        path.extend_from_slice(&self.path[pos + len + 1..]);
        Word { letters, path }
    }

    /// Position of the first occurrence of `inner` as a factor, if any.
    pub fn find(&self, inner: &Word) -> Option<usize> {
        (0..=self.len()).find(|&p| self.occurs_at(inner, p))
    }
}

/// Degree-lexicographic order: shorter words first, then letters compared
/// by declaration index.
impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.letters
            .len()
            .cmp(&other.letters.len())
            .then_with(|| self.letters.cmp(&other.letters))
            .then_with(|| self.path.cmp(&other.path))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A formal combination of parallel words with nonzero exact coefficients.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinComb {
    src: ObjId,
    tgt: ObjId,
    terms: BTreeMap<Word, Coef>,
}

impl LinComb {
    pub fn zero(src: ObjId, tgt: ObjId) -> Self {
        LinComb { src, tgt, terms: BTreeMap::new() }
    }

    pub fn from_word(w: &Word) -> Self {
        Self::monomial(Coef::one(), w)
    }

    pub fn monomial(c: Coef, w: &Word) -> Self {
        let mut out = Self::zero(w.src(), w.tgt());
        if !c.is_zero() {
            out.terms.insert(w.clone(), c);
        }
        out
    }

    pub fn identity(obj: ObjId) -> Self {
        Self::from_word(&Word::identity(obj))
    }

    /// Builds a combination from possibly repeated terms, summing duplicates.
    pub fn from_terms<I>(src: ObjId, tgt: ObjId, terms: I) -> Result<Self, CoreError>
    where
        I: IntoIterator<Item = (Coef, Word)>,
    {
        let mut out = Self::zero(src, tgt);
        for (c, w) in terms {
            if w.src() != src || w.tgt() != tgt {
                return Err(CoreError::NotParallel);
            }
            out.add_term(c, w);
        }
        Ok(out)
    }

    fn add_term(&mut self, c: Coef, w: Word) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(w) {
            Entry::Vacant(slot) => {
                slot.insert(c);
            }
            Entry::Occupied(mut slot) => {
                *slot.get_mut() += c;
                if slot.get().is_zero() {
                    slot.remove();
                }
            }
        }
    }

    pub fn src(&self) -> ObjId {
        self.src
    }

    pub fn tgt(&self) -> ObjId {
        self.tgt
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms in strictly increasing deglex order.
    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Word, &Coef)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, w: &Word) -> Coef {
        self.terms.get(w).cloned().unwrap_or_else(Coef::zero)
    }

    pub fn contains(&self, w: &Word) -> bool {
        self.terms.contains_key(w)
    }

    /// The single word when this is `1·w`.
    pub fn as_word(&self) -> Option<&Word> {
        match self.terms.iter().next() {
            Some((w, c)) if self.terms.len() == 1 && c.is_one() => Some(w),
            _ => None,
        }
    }

    pub fn is_parallel(&self, other: &LinComb) -> bool {
        self.src == other.src && self.tgt == other.tgt
    }

    /// `c1·x + c2·y` in canonical form.
    pub fn combine(c1: &Coef, x: &LinComb, c2: &Coef, y: &LinComb) -> Result<LinComb, CoreError> {
        if !x.is_parallel(y) {
            return Err(CoreError::NotParallel);
        }
        let mut out = LinComb::zero(x.src, x.tgt);
        for (w, c) in &x.terms {
            out.add_term(c1 * c, w.clone());
        }
        for (w, c) in &y.terms {
            out.add_term(c2 * c, w.clone());
        }
        Ok(out)
    }

    pub fn add(&self, other: &LinComb) -> Result<LinComb, CoreError> {
        Self::combine(&Coef::one(), self, &Coef::one(), other)
    }

    pub fn sub(&self, other: &LinComb) -> Result<LinComb, CoreError> {
        Self::combine(&Coef::one(), self, &-Coef::one(), other)
    }

    pub fn scale(&self, c: &Coef) -> LinComb {
        let mut out = LinComb::zero(self.src, self.tgt);
        if c.is_zero() {
            return out;
        }
        for (w, v) in &self.terms {
            out.terms.insert(w.clone(), v * c);
        }
        out
    }

    /// Bilinear extension of word composition.
    pub fn compose(&self, other: &LinComb) -> Result<LinComb, CoreError> {
        if self.tgt != other.src {
            return Err(CoreError::EndpointMismatch { left_target: self.tgt, right_source: other.src });
        }
        let mut out = LinComb::zero(self.src, other.tgt);
        for (u, a) in &self.terms {
            for (v, b) in &other.terms {
                out.add_term(a * b, u.compose(v)?);
            }
        }
        Ok(out)
    }

    /// Whiskers every monomial by `left` and `right`.
    pub fn whisker(&self, left: &Word, right: &Word) -> Result<LinComb, CoreError> {
        LinComb::from_word(left).compose(self)?.compose(&LinComb::from_word(right))
    }

    pub fn is_integral(&self) -> bool {
        self.terms.values().all(|c| c.is_integer())
    }

    pub fn max_abs_coefficient(&self) -> Coef {
        self.terms.values().map(|c| c.abs()).max().unwrap_or_else(Coef::zero)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // one object, generators a (0), b (1), all loops
    fn w(letters: &[ArrowId]) -> Word {
        Word::from_parts(letters.to_vec(), vec![0; letters.len() + 1])
    }

    #[test]
    fn compose_concatenates_and_identity_is_neutral() {
        let ab = w(&[0, 1]);
        let a = w(&[0]);
        assert_eq!(ab.compose(&a).unwrap(), w(&[0, 1, 0]));
        assert_eq!(Word::identity(0).compose(&a).unwrap(), a);
        assert_eq!(a.compose(&Word::identity(0)).unwrap(), a);
    }

    #[test]
    fn compose_rejects_mismatched_endpoints() {
        // p : 0 -> 1, a : 0 -> 0
        let p = Word::from_parts(vec![2], vec![0, 1]);
        let a = w(&[0]);
        assert!(matches!(p.compose(&a), Err(CoreError::EndpointMismatch { .. })));
    }

    #[test]
    fn deglex_orders_by_length_then_letters() {
        assert!(w(&[1]) < w(&[0, 0]));
        assert!(w(&[0, 1]) < w(&[1, 0]));
        assert!(Word::identity(0) < w(&[0]));
    }

    #[test]
    fn half_s_plus_half_s_is_s() {
        let s = LinComb::from_word(&w(&[0]));
        let half = ratio(1, 2);
        assert_eq!(LinComb::combine(&half, &s, &half, &s).unwrap(), s);
    }

    #[test]
    fn s_minus_s_is_zero() {
        let s = LinComb::from_word(&w(&[0]));
        assert!(s.sub(&s).unwrap().is_zero());
    }

    #[test]
    fn square_of_half_sum_expands_bilinearly() {
        let id = LinComb::identity(0);
        let s = LinComb::from_word(&w(&[0]));
        let e = LinComb::combine(&ratio(1, 2), &id, &ratio(1, 2), &s).unwrap();
        let sq = e.compose(&e).unwrap();
        let expected = LinComb::from_terms(
            0,
            0,
            vec![(ratio(1, 4), Word::identity(0)), (ratio(1, 2), w(&[0])), (ratio(1, 4), w(&[0, 0]))],
        )
        .unwrap();
        assert_eq!(sq, expected);
    }

    #[test]
    fn combine_rejects_non_parallel() {
        let a = LinComb::from_word(&w(&[0]));
        let p = LinComb::from_word(&Word::from_parts(vec![2], vec![0, 1]));
        assert!(matches!(a.add(&p), Err(CoreError::NotParallel)));
    }

    #[test]
    fn splice_replaces_factor() {
        let ababa = w(&[0, 1, 0, 1, 0]);
        assert_eq!(ababa.splice(2, 3, &w(&[0])), w(&[0, 1, 0]));
        assert_eq!(ababa.occurrences(&w(&[0, 1, 0])), vec![0, 2]);
    }
}

#![allow(dead_code)]

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, Zero};
use polykar::cell::{ArrowId, ObjId};
use polykar::{Polygraph, Word};
use rand::Rng;

pub fn data(name: &str) -> String {
    let path = format!("{}/../../data/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

pub fn load(name: &str) -> Polygraph {
    Polygraph::parse(&data(name)).unwrap_or_else(|r| panic!("{name}: {r}"))
}

/// A random path of at most `max_len` letters starting at `from`.
pub fn random_word(pg: &Polygraph, from: ObjId, max_len: usize, rng: &mut impl Rng) -> Word {
    let len = rng.gen_range(0..=max_len);
    let mut ids: Vec<ArrowId> = Vec::new();
    let mut at = from;
    for _ in 0..len {
        let out: Vec<ArrowId> = (0..pg.arrows.len()).filter(|&a| pg.arrows[a].src == at).collect();
        if out.is_empty() {
            break;
        }
        let a = out[rng.gen_range(0..out.len())];
        ids.push(a);
        at = pg.arrows[a].tgt;
    }
    if ids.is_empty() {
        Word::identity(from)
    } else {
        pg.word_from_ids(&ids).unwrap()
    }
}

/// Key of a critical branching: overlap letters and both redexes as
/// (position, rule), smaller first.
pub type BranchingKey = (Vec<ArrowId>, (usize, usize), (usize, usize));

/// Critical branchings by definition: two distinct redexes in a word that
/// overlap and together cover it. Any such word starts with a left-hand
/// side, and is no longer than the sum of both lengths minus one.
pub fn overlap_oracle(lhss: &[Vec<ArrowId>], letters: usize) -> BTreeSet<BranchingKey> {
    let max_extra = lhss.iter().map(|l| l.len()).max().unwrap_or(0);
    let mut out = BTreeSet::new();
    let occurs = |w: &[ArrowId], l: &[ArrowId], p: usize| p + l.len() <= w.len() && &w[p..p + l.len()] == l;
    for l in lhss {
        for extra in 0..max_extra {
            for code in 0..letters.pow(extra as u32) {
                let mut w = l.clone();
                let mut c = code;
                for _ in 0..extra {
                    w.push(c % letters);
                    c /= letters;
                }
                let mut occ = Vec::new();
                for p in 0..w.len() {
                    for (r, lr) in lhss.iter().enumerate() {
                        if occurs(&w, lr, p) {
                            occ.push((p, r));
                        }
                    }
                }
                for (i, &(p1, r1)) in occ.iter().enumerate() {
                    for &(p2, r2) in &occ[i + 1..] {
                        let (e1, e2) = (p1 + lhss[r1].len(), p2 + lhss[r2].len());
                        let overlap = p1.max(p2) < e1.min(e2);
                        let covers = p1.min(p2) == 0 && e1.max(e2) == w.len();
                        if overlap && covers {
                            let (a, b) = if (p1, r1) <= (p2, r2) { ((p1, r1), (p2, r2)) } else { ((p2, r2), (p1, r1)) };
                            out.insert((w.clone(), a, b));
                        }
                    }
                }
            }
        }
    }
    out
}

fn minors(m: &[Vec<i64>], k: usize) -> Vec<BigInt> {
    fn choose(n: usize, k: usize) -> Vec<Vec<usize>> {
        if k == 0 {
            return vec![vec![]];
        }
        if n < k {
            return vec![];
        }
        let mut out = choose(n - 1, k);
        for mut c in choose(n - 1, k - 1) {
            c.push(n - 1);
            out.push(c);
        }
        out
    }
    fn det(m: &[Vec<i64>]) -> i64 {
        match m.len() {
            0 => 1,
            1 => m[0][0],
            n => (0..n)
                .map(|j| {
                    let sub: Vec<Vec<i64>> = m[1..].iter().map(|r| r.iter().enumerate().filter(|&(c, _)| c != j).map(|(_, &x)| x).collect()).collect();
                    let sign = if j % 2 == 0 { 1 } else { -1 };
                    sign * m[0][j] * det(&sub)
                })
                .sum(),
        }
    }
    let (r, c) = (m.len(), m.first().map_or(0, |x| x.len()));
    let mut out = Vec::new();
    for rows in choose(r, k) {
        for cols in choose(c, k) {
            let sub: Vec<Vec<i64>> = rows.iter().map(|&i| cols.iter().map(|&j| m[i][j]).collect()).collect();
            out.push(BigInt::from(det(&sub)));
        }
    }
    out
}

/// Invariant factors from determinantal divisors: `d_k` is the gcd of all
/// `k × k` minors and the factors are `d_k / d_{k-1}` while nonzero.
pub fn invariant_factors_oracle(m: &[Vec<i64>]) -> Vec<BigInt> {
    let (r, c) = (m.len(), m.first().map_or(0, |x| x.len()));
    let mut out = Vec::new();
    let mut prev = BigInt::from(1);
    for k in 1..=r.min(c) {
        let g = minors(m, k).into_iter().fold(BigInt::zero(), |acc, x| acc.gcd(&x));
        if g.is_zero() {
            break;
        }
        out.push((&g / &prev).abs());
        prev = g;
    }
    out
}

pub fn big(m: &[Vec<i64>]) -> Vec<Vec<BigInt>> {
    m.iter().map(|r| r.iter().map(|&x| BigInt::from(x)).collect()).collect()
}

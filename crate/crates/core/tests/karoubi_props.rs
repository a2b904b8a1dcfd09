mod common;

use std::cmp::Ordering;
use std::collections::BTreeSet;

use polykar::karoubi::{build_karoubi, enumerate_idempotents, solve_idempotents_linear, IdempotentCert, KaroubiEnvelope};
use polykar::linear::LinearSystem;
use polykar::rewrite::{JoinMode, ReductionOrder, StringSystem};
use polykar::{LinComb, Polygraph, Rhs, Word};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{load, random_word};

/// Leftmost-first rewriting on raw letter vectors, independent of the engine.
fn naive_nf(rules: &[(Vec<usize>, Vec<usize>)], w: &[usize]) -> Vec<usize> {
    let mut w = w.to_vec();
    'again: loop {
        for p in 0..w.len() {
            for (l, r) in rules {
                if w.len() >= p + l.len() && &w[p..p + l.len()] == l.as_slice() {
                    w.splice(p..p + l.len(), r.iter().copied());
                    continue 'again;
                }
            }
        }
        return w;
    }
}

fn letter_rules(pg: &Polygraph) -> Vec<(Vec<usize>, Vec<usize>)> {
    pg.rules
        .iter()
        .map(|r| match &r.rhs {
            Rhs::Word(w) => (r.lhs.letters().to_vec(), w.letters().to_vec()),
            Rhs::Lin(_) => panic!("set-level rules only"),
        })
        .collect()
}

/// Idempotents by brute force: normal forms of endo-words `w` of length at
/// most `max_len` with `nf(w w) = nf(w)`, identities excluded.
fn idempotents_oracle(pg: &Polygraph, max_len: usize) -> BTreeSet<Word> {
    let rules = letter_rules(pg);
    let mut out = BTreeSet::new();
    for w in pg.words_up_to(max_len) {
        if w.is_identity() || !w.is_endo() {
            continue;
        }
        let ww: Vec<usize> = w.letters().iter().chain(w.letters()).copied().collect();
        let n = naive_nf(&rules, w.letters());
        if naive_nf(&rules, &ww) == n && !n.is_empty() {
            out.insert(pg.word_from_ids(&n).unwrap());
        }
    }
    out
}

fn random_convergent(seed: u64) -> Option<Polygraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = Polygraph::parse("polygraph \"ab\"\n0-cell O\n1-cell a : O -> O\n1-cell b : O -> O\n").unwrap();
    let order = ReductionOrder::lenlex(2);
    let mut text = base.to_string();
    for i in 0..rng.gen_range(1..=2) {
        let x = random_word(&base, 0, 4, &mut rng);
        let y = random_word(&base, 0, 3, &mut rng);
        let (l, r) = match order.compare(&x, &y) {
            Ordering::Greater => (x, y),
            Ordering::Less => (y, x),
            Ordering::Equal => continue,
        };
        text += &format!("2-cell r{i} : {} => {}\n", base.show_word(&l), base.show_word(&r));
    }
    let pg = Polygraph::parse(&text).ok()?;
    let sys = StringSystem::from_polygraph(&pg).ok()?;
    sys.check_confluence(&order, 6).is_yes().then_some(pg)
}

fn labelled(certs: &[IdempotentCert], mask: u32) -> Vec<(String, IdempotentCert)> {
    certs
        .iter()
        .enumerate()
        .filter(|(k, _)| mask >> k & 1 == 1)
        .map(|(k, c)| (format!("E{k}"), c.clone()))
        .collect()
}

fn check_counts(pg: &Polygraph, env: &KaroubiEnvelope, m: usize) -> Result<(), TestCaseError> {
    let k = &env.polygraph;
    prop_assert_eq!(k.objects.len(), pg.objects.len() + m);
    prop_assert_eq!(k.arrows.len(), pg.arrows.len() + 2 * m);
    prop_assert_eq!(k.rules.len(), pg.rules.len() + 2 * m);
    prop_assert_eq!(env.splits.len(), m);
    Ok(())
}

/// CS of each rule's sides are derivation-joinable over the base.
fn check_rules_descend(env: &KaroubiEnvelope) -> Result<(), TestCaseError> {
    let (pg, k) = (&env.base, &env.polygraph);
    if pg.is_linear() {
        let sys = LinearSystem::from_polygraph(pg).unwrap();
        for r in &k.rules {
            let l = env.cs_lin(&LinComb::from_word(&r.lhs)).unwrap();
            let rr = env.cs_lin(&r.rhs_lin()).unwrap();
            let v = sys.lin_joinable(&l, &rr, 8);
            prop_assert!(v.is_yes(), "rule {} does not descend", r.name);
            let (a, b) = v.witness.unwrap();
            prop_assert_eq!(a.replay(&sys).unwrap(), b.replay(&sys).unwrap());
        }
    } else {
        let sys = StringSystem::from_polygraph(pg).unwrap();
        for r in &k.rules {
            let l = env.cs_word(&r.lhs).unwrap();
            let rr = env.cs_word(r.rhs_word().unwrap()).unwrap();
            let v = sys.joinable(&l, &rr, 8, JoinMode::Derivation);
            prop_assert!(v.is_yes(), "rule {} does not descend", r.name);
            prop_assert_eq!(v.witness.unwrap().as_path().replay(&sys).unwrap(), rr);
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn enumeration_matches_brute_force(seed in any::<u64>()) {
        let Some(pg) = random_convergent(seed) else { return Ok(()) };
        let got: BTreeSet<Word> = enumerate_idempotents(&pg, 4).unwrap().into_iter().map(|c| match c.cell {
            polykar::karoubi::Cell::Word(w) => w,
            polykar::karoubi::Cell::Lin(_) => unreachable!(),
        }).collect();
        prop_assert_eq!(got, idempotents_oracle(&pg, 4));
    }

    #[test]
    fn envelopes_have_the_expected_shape(seed in any::<u64>(), mask in 0u32..8) {
        let pg = match random_convergent(seed) { Some(p) => p, None => load("part1.pg") };
        let certs = enumerate_idempotents(&pg, 4).unwrap();
        for c in &certs {
            c.replay(&pg).map_err(TestCaseError::fail)?;
        }
        let chosen = labelled(&certs, mask);
        let env = build_karoubi(&pg, &chosen).unwrap();
        check_counts(&pg, &env, chosen.len())?;
        check_rules_descend(&env)?;
        for s in &env.splits {
            env.split_witness(&s.cert.cell).unwrap().replay(&env).map_err(TestCaseError::fail)?;
        }
    }

    #[test]
    fn cs_fixes_base_words(seed in any::<u64>()) {
        let pg = load("part1_conv.pg");
        let base = load("part1.pg");
        let env = build_karoubi(&base, &labelled(&enumerate_idempotents(&base, 4).unwrap(), 3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = random_word(&base, 0, 10, &mut rng);
        let lifted = env.polygraph.parse_word(&base.show_word(&w)).unwrap();
        prop_assert_eq!(env.cs_word(&lifted).unwrap(), w.clone());
        prop_assert_eq!(env.cs_lin(&LinComb::from_word(&lifted)).unwrap(), LinComb::from_word(&w));
        // words through the new objects land on the base object
        let u = random_word(&pg, rng.gen_range(0..pg.objects.len()), 8, &mut rng);
        if let Ok(k) = env.polygraph.parse_word(&pg.show_word(&u)) {
            let image = env.cs_word(&k).unwrap();
            prop_assert_eq!(image.src(), 0);
            prop_assert_eq!(image.tgt(), 0);
        }
    }
}

#[test]
fn linear_envelopes_have_the_expected_shape() {
    let pg = load("s2.pg");
    let certs = solve_idempotents_linear(&pg, 8, 2).unwrap();
    assert_eq!(certs.len(), 3);
    for c in &certs {
        c.replay(&pg).unwrap();
    }
    for mask in 0..8 {
        let chosen = labelled(&certs, mask);
        let env = build_karoubi(&pg, &chosen).unwrap();
        check_counts(&pg, &env, chosen.len()).unwrap();
        check_rules_descend(&env).unwrap();
    }
}

#[test]
fn lifted_cells_are_parallel_and_descend() {
    for name in ["part1.pg", "s2.pg"] {
        let pg = load(name);
        let (certs, basis) = if pg.is_linear() {
            let c = solve_idempotents_linear(&pg, 8, 2).unwrap();
            (c, LinearSystem::from_polygraph(&pg).unwrap().lin_squier_basis().unwrap())
        } else {
            let sys = StringSystem::from_polygraph(&pg).unwrap();
            (enumerate_idempotents(&pg, 4).unwrap(), sys.squier_basis(&pg, &ReductionOrder::lenlex(pg.arrows.len())).unwrap())
        };
        let env = build_karoubi(&pg, &labelled(&certs, 7)).unwrap();
        let k = &env.polygraph;
        let lifted = env.lift_coherence(&basis, 1).unwrap();
        assert!(!lifted.is_empty());
        let descends = |x: &LinComb, y: &LinComb| -> bool {
            let x = env.cs_lin(x).unwrap();
            if pg.is_linear() {
                LinearSystem::from_polygraph(&pg).unwrap().lin_joinable(&x, y, 8).is_yes()
            } else {
                let sys = StringSystem::from_polygraph(&pg).unwrap();
                sys.joinable(x.as_word().unwrap(), y.as_word().unwrap(), 8, JoinMode::Derivation).is_yes()
            }
        };
        for l in &lifted {
            assert!(l.verified, "{name}: {}", l.cell.show(k));
            let (s0, s1) = l.cell.source.boundary(k).unwrap();
            let (t0, t1) = l.cell.target.boundary(k).unwrap();
            // parallel modulo the envelope's relations
            for (x, y) in [(&s0, &t0), (&s1, &t1)] {
                let joined = if k.is_linear() {
                    LinearSystem::from_polygraph(k).unwrap().lin_joinable(x, y, 8).is_yes()
                } else {
                    let ksys = StringSystem::from_polygraph(k).unwrap();
                    ksys.joinable(x.as_word().unwrap(), y.as_word().unwrap(), 8, JoinMode::Derivation).is_yes()
                };
                assert!(joined, "{name}: {} is not parallel", l.cell.show(k));
            }
            let b = basis.iter().find(|b| b.name == l.basis).unwrap();
            let (b0, b1) = b.source.boundary(&pg).unwrap();
            for (x, y) in [(&s0, &b0), (&s1, &b1)] {
                assert!(descends(x, y), "{name}: {} does not descend", l.cell.show(k));
            }
        }
    }
}

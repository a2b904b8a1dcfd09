mod common;

use std::cmp::Ordering;

use num_traits::Zero;
use polykar::cell::ratio;
use polykar::rewrite::{ReductionOrder, StringSystem};
use polykar::{LinComb, Polygraph, Rhs, Ring, Word};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{load, random_word};

/// A random polygraph built through the API: objects, arrows with random
/// endpoints, rules whose sides are random parallel words.
fn random_polygraph(seed: u64, linear: bool) -> Polygraph {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pg = Polygraph::new("rand", if linear { Ring::Rationals } else { Ring::None });
    let n_obj = rng.gen_range(1..=3);
    for i in 0..n_obj {
        pg.add_object(&format!("O{i}")).unwrap();
    }
    for i in 0..rng.gen_range(1..=4) {
        let (s, t) = (rng.gen_range(0..n_obj), rng.gen_range(0..n_obj));
        pg.add_arrow(&format!("x{i}"), s, t).unwrap();
    }
    for i in 0..rng.gen_range(0..=4) {
        let from = rng.gen_range(0..n_obj);
        let lhs = random_word(&pg, from, 4, &mut rng);
        if lhs.is_identity() {
            continue;
        }
        let words: Vec<Word> = (0..6).map(|_| random_word(&pg, from, 4, &mut rng)).filter(|w| w.tgt() == lhs.tgt() && *w != lhs).collect();
        let rhs = if linear {
            let mut x = LinComb::zero(lhs.src(), lhs.tgt());
            for w in words.iter().take(3) {
                x = x.add(&LinComb::monomial(ratio(rng.gen_range(-3..=3), rng.gen_range(1..=4)), w)).unwrap();
            }
            Rhs::Lin(x)
        } else {
            match words.first() {
                Some(w) => Rhs::Word(w.clone()),
                None => continue,
            }
        };
        let _ = pg.add_rule(&format!("r{i}"), lhs, rhs);
    }
    pg
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn print_then_parse_is_identity(seed in any::<u64>(), linear in any::<bool>()) {
        let pg = random_polygraph(seed, linear);
        let text = pg.to_string();
        let back = Polygraph::parse(&text).map_err(|r| TestCaseError::fail(format!("{text}\n{r}")))?;
        prop_assert_eq!(back, pg);
    }

    #[test]
    fn compose_is_associative_and_unital(seed in any::<u64>()) {
        let pg = load("part1_conv.pg");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_word(&pg, rand::Rng::gen_range(&mut rng, 0..pg.objects.len()), 6, &mut rng);
        let v = random_word(&pg, u.tgt(), 6, &mut rng);
        let w = random_word(&pg, v.tgt(), 6, &mut rng);
        let left = u.compose(&v).unwrap().compose(&w).unwrap();
        let right = u.compose(&v.compose(&w).unwrap()).unwrap();
        prop_assert_eq!(&left, &right);
        prop_assert_eq!(left.len(), u.len() + v.len() + w.len());
        prop_assert_eq!(Word::identity(u.src()).compose(&u).unwrap(), u.clone());
        prop_assert_eq!(u.compose(&Word::identity(u.tgt())).unwrap(), u.clone());
        // mismatched endpoints are refused
        if u.tgt() != w.src() {
            prop_assert!(u.compose(&w).is_err());
        }
    }

    #[test]
    fn combinations_are_canonical(
        seed in any::<u64>(),
        coefs in prop::collection::vec((-4i64..=4, 1i64..=3), 1..8),
    ) {
        let pg = load("s2_conv.pg");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = LinComb::zero(0, 0);
        let mut y = LinComb::zero(0, 0);
        for (k, &(n, d)) in coefs.iter().enumerate() {
            let w = random_word(&pg, 0, 4, &mut rng);
            if w.tgt() != 0 {
                continue;
            }
            let m = LinComb::monomial(ratio(n, d), &w);
            if k % 2 == 0 { x = x.add(&m).unwrap() } else { y = y.sub(&m).unwrap() }
        }
        let c1 = ratio(coefs[0].0, coefs[0].1);
        let z = LinComb::combine(&c1, &x, &ratio(1, 2), &y).unwrap();
        for l in [&x, &y, &z] {
            let terms: Vec<_> = l.terms().collect();
            prop_assert!(terms.iter().all(|(_, c)| !c.is_zero()));
            prop_assert!(terms.windows(2).all(|p| p[0].0.cmp(p[1].0) == Ordering::Less));
        }
        prop_assert!(x.sub(&x).unwrap().is_empty());
        // the text form parses back to the same combination
        let back = pg.parse_lin(&pg.show_lin(&z), Some((0, 0))).unwrap();
        prop_assert_eq!(back, z);
    }
}

#[test]
fn data_files_round_trip() {
    for name in ["part1.pg", "part1_conv.pg", "s2.pg", "s2_conv.pg", "notks.pg", "notKS.decat"] {
        let pg = load(name);
        assert_eq!(Polygraph::parse(&pg.to_string()).unwrap(), pg, "{name}");
    }
}

#[test]
fn higher_cells_round_trip() {
    let mut pg = load("part1.pg");
    let sys = StringSystem::from_polygraph(&pg).unwrap();
    for c in sys.squier_basis(&pg, &ReductionOrder::lenlex(2)).unwrap() {
        pg.add_higher(3, &c.name, c.source, c.target).unwrap();
    }
    assert_eq!(pg.higher.len(), 1);
    assert_eq!(Polygraph::parse(&pg.to_string()).unwrap(), pg);
}

/// Acceptance oracle for the small-case sweep: objects are declared, words
/// type-check letter by letter, sides are parallel, no identity lhs.
fn expect_valid(objects: &[&str], arrows: &[(&str, &str, &str)], rules: &[(&str, &str)]) -> bool {
    let declared = |o: &str| objects.contains(&o);
    if !arrows.iter().all(|(_, s, t)| declared(s) && declared(t)) {
        return false;
    }
    let names: Vec<&str> = arrows.iter().map(|a| a.0).collect();
    if names.len() == 2 && names[0] == names[1] {
        return false;
    }
    let typed = |w: &str| -> Option<(String, String, bool)> {
        if let Some(o) = w.strip_prefix("id(").and_then(|r| r.strip_suffix(')')) {
            return declared(o).then(|| (o.to_string(), o.to_string(), true));
        }
        let mut ends: Option<(String, String)> = None;
        for letter in w.split(' ') {
            let (_, s, t) = arrows.iter().find(|a| a.0 == letter)?;
            ends = match ends {
                None => Some((s.to_string(), t.to_string())),
                Some((a, b)) if b == *s => Some((a, t.to_string())),
                Some(_) => return None,
            };
        }
        ends.map(|(a, b)| (a, b, false))
    };
    rules.iter().all(|(l, r)| match (typed(l), typed(r)) {
        (Some((ls, lt, lid)), Some((rs, rt, _))) => !lid && ls == rs && lt == rt,
        _ => false,
    })
}

fn document(objects: &[&str], arrows: &[(&str, &str, &str)], rules: &[(&str, &str)]) -> String {
    let mut s = String::from("polygraph \"small\"\n");
    for o in objects {
        s += &format!("0-cell {o}\n");
    }
    for (n, a, b) in arrows {
        s += &format!("1-cell {n} : {a} -> {b}\n");
    }
    for (i, (l, r)) in rules.iter().enumerate() {
        s += &format!("2-cell r{i} : {l} => {r}\n");
    }
    s
}

#[test]
fn validation_matches_oracle_on_small_cases() {
    let object_sets: [&[&str]; 2] = [&["O"], &["O", "P"]];
    let ends = ["O", "P", "Q"];
    let mut arrow_sets: Vec<Vec<(&str, &str, &str)>> = vec![vec![]];
    for &s in &ends {
        for &t in &ends {
            arrow_sets.push(vec![("a", s, t)]);
            for &s2 in &ends {
                for &t2 in &ends {
                    arrow_sets.push(vec![("a", s, t), ("b", s2, t2)]);
                }
            }
        }
    }
    arrow_sets.push(vec![("a", "O", "O"), ("a", "O", "O")]);
    let sides = ["a", "b", "c", "a a", "a b", "b a", "b b", "a c", "id(O)", "id(P)"];
    let mut checked = 0;
    for objects in object_sets {
        for arrows in &arrow_sets {
            let mut rule_sets: Vec<Vec<(&str, &str)>> = vec![vec![]];
            for &l in &sides {
                for &r in &sides {
                    rule_sets.push(vec![(l, r)]);
                }
            }
            // two rules over a smaller pool keeps the sweep quick
            for &l in &sides[..4] {
                for &r in &sides[7..] {
                    rule_sets.push(vec![("a b", "id(O)"), (l, r)]);
                }
            }
            for rules in &rule_sets {
                let text = document(objects, arrows, rules);
                let got = Polygraph::parse(&text);
                let want = expect_valid(objects, arrows, rules);
                assert_eq!(got.is_ok(), want, "{text}{:?}", got.err().map(|r| r.to_string()));
                if let Err(r) = got {
                    assert!(!r.issues.is_empty());
                }
                checked += 1;
            }
        }
    }
    assert!(checked > 10_000, "{checked}");
}

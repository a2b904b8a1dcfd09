//! Acceptance criteria. Prints one line per criterion and fails if any does.

mod common;

use std::collections::BTreeSet;
use std::time::Instant;

use num_bigint::BigInt;
use num_traits::One;
use polykar::decat::{
    build_decat, decategorify, determinant, find_direct_sum_proofs, find_iso_proofs, find_zero_objects, grothendieck_group,
    join_rules, krull_schmidt_check, mat_mul, show_classes, smith_normal_form, DecatRule, DecatSystem, KsWitness,
};
use polykar::karoubi::{build_karoubi, enumerate_idempotents, solve_idempotents_linear, IdempotentCert, KaroubiEnvelope};
use polykar::linear::LinearSystem;
use polykar::rewrite::{JoinMode, ReductionOrder, SetRule, Strategy, StringSystem, Trace};
use polykar::verdict::Status;
use polykar::{LinComb, Polygraph, Word};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{big, invariant_factors_oracle, load, overlap_oracle, random_word};

type Outcome = Result<(), String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Outcome {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn labelled(names: &[&str], certs: Vec<IdempotentCert>) -> Vec<(String, IdempotentCert)> {
    names.iter().map(|s| s.to_string()).zip(certs).collect()
}

fn part1_envelope() -> Result<(Polygraph, KaroubiEnvelope), String> {
    let pg = load("part1.pg");
    let certs = enumerate_idempotents(&pg, 4).map_err(|e| e.to_string())?;
    let env = build_karoubi(&pg, &labelled(&["X", "Y"], certs)).map_err(|e| e.to_string())?;
    Ok((pg, env))
}

fn s2_envelope() -> Result<(Polygraph, KaroubiEnvelope), String> {
    let pg = load("s2.pg");
    let certs = solve_idempotents_linear(&pg, 8, 2).map_err(|e| e.to_string())?;
    let env = build_karoubi(&pg, &labelled(&["N", "X", "Y"], certs)).map_err(|e| e.to_string())?;
    Ok((pg, env))
}

fn label_set(env: &KaroubiEnvelope, basis: &[polykar::rewrite::CoherenceCell]) -> Result<Vec<String>, String> {
    let lifted = env.lift_coherence(basis, 1).map_err(|e| e.to_string())?;
    ensure(lifted.iter().all(|l| l.verified), || "a lifted cell failed verification".into())?;
    let mut out: Vec<String> = lifted
        .iter()
        .map(|l| {
            let (a, b) = l.cell.labels(&env.polygraph);
            format!("{a} => {b}")
        })
        .collect();
    out.sort();
    Ok(out)
}

fn sorted(v: &[&str]) -> Vec<String> {
    let mut v: Vec<String> = v.iter().map(|s| s.to_string()).collect();
    v.sort();
    v
}

fn criterion_1() -> Outcome {
    let (pg, env) = part1_envelope()?;
    let found: Vec<String> = enumerate_idempotents(&pg, 4).map_err(|e| e.to_string())?.iter().map(|c| c.cell.show(&pg)).collect();
    ensure(found == ["a b", "b a"], || format!("idempotents {found:?}"))?;
    let k = &env.polygraph;
    ensure(k.objects.len() == 3 && k.arrows.len() == 6 && k.rules.len() == 5, || "cell counts".into())?;
    let arrows: Vec<String> = k.arrows.iter().map(|a| format!("{} : {} -> {}", a.name, k.objects[a.src], k.objects[a.tgt])).collect();
    let want_arrows = ["a : O -> O", "b : O -> O", "p_X : O -> X", "i_X : X -> O", "p_Y : O -> Y", "i_Y : Y -> O"];
    ensure(arrows == want_arrows, || format!("1-cells {arrows:?}"))?;
    let rules: Vec<String> = k.rules.iter().map(|r| k.show_rule(r)).collect();
    let want_rules = [
        "alpha : a b a => a",
        "pi_X : p_X i_X => a b",
        "iota_X : i_X p_X => id(X)",
        "pi_Y : p_Y i_Y => b a",
        "iota_Y : i_Y p_Y => id(Y)",
    ];
    ensure(rules == want_rules, || format!("2-cells {rules:?}"))
}

fn criterion_2() -> Outcome {
    let (pg, env) = part1_envelope()?;
    let sys = StringSystem::from_polygraph(&pg).map_err(|e| e.to_string())?;
    let basis = sys.squier_basis(&pg, &ReductionOrder::lenlex(pg.arrows.len())).map_err(|e| e.to_string())?;
    ensure(basis.len() == 1, || format!("{} basis cells", basis.len()))?;
    let labels = basis[0].labels(&pg);
    ensure(labels == ("a b alpha".into(), "alpha b a".into()), || format!("labels {labels:?}"))?;
    let got = label_set(&env, &basis)?;
    let want = sorted(&[
        "a b alpha => alpha b a",
        "a b alpha => alpha pi_Y",
        "pi_X alpha => alpha b a",
        "pi_X alpha => alpha pi_Y",
    ]);
    ensure(got == want, || format!("lifted labels {got:?}"))?;

    let conv = load("part1_conv.pg");
    let csys = StringSystem::from_polygraph(&conv).map_err(|e| e.to_string())?;
    let order = ReductionOrder::lenlex(conv.arrows.len());
    ensure(csys.check_termination(&order).is_yes(), || "Conv termination".into())?;
    ensure(csys.check_confluence(&order, 0).is_yes(), || "Conv confluence".into())?;

    // Tietze witnesses in both directions
    let k = &env.polygraph;
    let ksys = StringSystem::from_polygraph(k).map_err(|e| e.to_string())?;
    let across = |from: &Polygraph, to: &Polygraph, tsys: &StringSystem| -> Outcome {
        for r in &from.rules {
            let lhs = to.parse_word(&from.show_word(&r.lhs)).map_err(|e| e.to_string())?;
            let rhs = to.parse_word(&from.show_rhs(&r.rhs)).map_err(|e| e.to_string())?;
            let v = tsys.joinable(&lhs, &rhs, 6, JoinMode::Derivation);
            let w = v.witness.ok_or_else(|| format!("rule {} not derivable in {}", r.name, to.name))?;
            w.as_path().replay(tsys)?;
        }
        Ok(())
    };
    across(&conv, k, &ksys)?;
    across(k, &conv, &csys)
}

fn criterion_3() -> Outcome {
    let (pg, env) = s2_envelope()?;
    let found: Vec<String> =
        solve_idempotents_linear(&pg, 8, 2).map_err(|e| e.to_string())?.iter().map(|c| c.cell.show(&pg)).collect();
    ensure(found == ["0", "1/2 * id(O) - 1/2 * s", "1/2 * id(O) + 1/2 * s"], || format!("idempotents {found:?}"))?;
    let k = &env.polygraph;
    ensure(k.objects.len() == 4 && k.arrows.len() == 7 && k.rules.len() == 7, || "cell counts".into())?;
    let pi_n = k.rule("pi_N").map(|r| k.show_rule(&k.rules[r]));
    ensure(pi_n.as_deref() == Some("pi_N : p_N i_N => 0"), || format!("{pi_n:?}"))?;
    let basis = LinearSystem::from_polygraph(&pg).map_err(|e| e.to_string())?.lin_squier_basis().map_err(|e| e.to_string())?;
    let got = label_set(&env, &basis)?;
    let sources = ["s alpha", "(id(O) - 2 * pi_X) alpha", "(-id(O) + 2 * pi_Y) alpha"];
    let targets = ["alpha s", "alpha (id(O) - 2 * pi_X)", "alpha (-id(O) + 2 * pi_Y)"];
    let mut want: Vec<String> = sources.iter().flat_map(|s| targets.iter().map(move |t| format!("{s} => {t}"))).collect();
    want.sort();
    ensure(got == want, || format!("lifted labels {got:?}"))?;
    let conv = load("s2_conv.pg");
    let v = LinearSystem::from_polygraph(&conv).map_err(|e| e.to_string())?.lin_confluence(8);
    ensure(v.is_yes(), || format!("Conv confluence {}", v.status))
}

fn criterion_4() -> Outcome {
    let pg = load("notks.pg");
    let sys = LinearSystem::from_polygraph(&pg).map_err(|e| e.to_string())?;
    let sums = find_direct_sum_proofs(&pg, 4, 8).map_err(|e| e.to_string())?;
    let mut got: Vec<(String, Vec<String>, Vec<String>, Vec<String>)> = Vec::new();
    for p in &sums {
        p.replay(&sys)?;
        got.push((p.show(&pg), join_rules(&pg, &p.alpha_a), join_rules(&pg, &p.alpha_b), join_rules(&pg, &p.alpha_c)));
    }
    let v = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let want = vec![
        (
            "O ~ X1 (+) X2 via p = p_X1, i = i_X1; p = p_X2, i = i_X2".to_string(),
            v(&["pi_X1", "pi_X2"]),
            v(&["iota_X1"]),
            v(&["iota_X2"]),
        ),
        (
            "O ~ Y1 (+) Y2 via p = p_Y1, i = i_Y1; p = p_Y2, i = i_Y2".to_string(),
            v(&["pi_Y1", "pi_Y2"]),
            v(&["iota_Y1"]),
            v(&["iota_Y2"]),
        ),
    ];
    ensure(got == want, || format!("direct sums {got:?}"))?;
    let isos = find_iso_proofs(&pg, 4, 8).map_err(|e| e.to_string())?;
    ensure(isos.is_empty(), || format!("{} iso proofs", isos.len()))?;
    let zeros = find_zero_objects(&pg, 4, 8).map_err(|e| e.to_string())?;
    let k = build_decat(&pg, &isos, &sums, &zeros).map_err(|e| e.to_string())?;
    let rules: Vec<String> = k.rules.iter().map(|r| k.show_rule(r)).collect();
    ensure(k.generators.len() == 5 && rules == ["[O] => [X1] + [X2]", "[O] => [Y1] + [Y2]"], || format!("K rules {rules:?}"))?;
    let ks = krull_schmidt_check(&k, 8).map_err(|e| e.to_string())?;
    let Some(KsWitness::Decompositions { left, right }) = ks.witness.filter(|_| ks.status == Status::No) else {
        return Err(format!("Krull-Schmidt verdict {}", ks.status));
    };
    let (_, ksys) = k.linear_system().map_err(|e| e.to_string())?;
    left.replay(&ksys)?;
    right.replay(&ksys)?;
    let pair: BTreeSet<String> = [show_classes(&k, &left.target), show_classes(&k, &right.target)].into();
    ensure(pair == BTreeSet::from(["[X1] + [X2]".to_string(), "[Y1] + [Y2]".to_string()]), || format!("witness {pair:?}"))?;
    let g = grothendieck_group(&k);
    ensure(g.to_string() == "rank 3, torsion: none", || g.to_string())
}

fn criterion_5() -> Outcome {
    let pg = load("s2.pg");
    let k = decategorify(&pg, 4, 8).map_err(|e| e.to_string())?;
    let g = grothendieck_group(&k);
    ensure(g.rank == 1 && g.torsion.is_empty(), || format!("K(S2): {g}"))?;
    let (_, env) = s2_envelope()?;
    let kk = decategorify(&env.polygraph, 4, 8).map_err(|e| e.to_string())?;
    let rules: Vec<String> = kk.rules.iter().map(|r| kk.show_rule(r)).collect();
    ensure(rules == ["[O] => [X] + [Y]", "[N] => 0"], || format!("K rules {rules:?}"))?;
    let g = grothendieck_group(&kk);
    ensure(g.rank == 2 && g.torsion.is_empty(), || format!("K(karoubi S2): {g}"))?;
    let ks = krull_schmidt_check(&kk, 8).map_err(|e| e.to_string())?;
    ensure(ks.is_yes(), || format!("Krull-Schmidt on karoubi S2: {}", ks.status))
}

fn criterion_6() -> Outcome {
    for env in [part1_envelope()?.1, s2_envelope()?.1] {
        for s in &env.splits {
            let w = env.split_witness(&s.cert.cell).map_err(|e| e.to_string())?;
            w.replay(&env)?;
        }
    }
    Ok(())
}

fn replay_runs(rng: &mut ChaCha8Rng) -> Outcome {
    let (_, env) = part1_envelope()?;
    let set_systems = [load("part1.pg"), load("part1_conv.pg"), env.polygraph.clone()];
    let lin_systems = [load("s2.pg"), load("s2_conv.pg"), load("notks.pg")];
    let mut traces = 0usize;
    for run in 0..1000 {
        if run % 2 == 0 {
            let pg = &set_systems[rng.gen_range(0..set_systems.len())];
            let sys = StringSystem::from_polygraph(pg).map_err(|e| e.to_string())?;
            let w = random_word(pg, rng.gen_range(0..pg.objects.len()), 12, rng);
            let strategy = if rng.gen_bool(0.5) { Strategy::Leftmost } else { Strategy::Rightmost };
            let (_, t) = sys.normalize(&w, strategy, 10_000).map_err(|e| e.to_string())?;
            t.replay(&sys)?;
            // a derivation u <- w -> v built from two random walks
            let walk = |rng: &mut ChaCha8Rng| -> Trace {
                let mut t = Trace::empty(&w, polykar::rewrite::TraceKind::Reduction);
                for _ in 0..rng.gen_range(0..6) {
                    let succ = sys.successors(&t.target);
                    if succ.is_empty() {
                        break;
                    }
                    let (r, _) = &succ[rng.gen_range(0..succ.len())];
                    t = t.then(&sys.step(&t.target, r.rule, r.position));
                }
                t
            };
            let d = walk(rng).reverse().then(&walk(rng));
            d.replay(&sys)?;
            traces += 2;
        } else {
            let pg = &lin_systems[rng.gen_range(0..lin_systems.len())];
            let sys = LinearSystem::from_polygraph(pg).map_err(|e| e.to_string())?;
            let o = rng.gen_range(0..pg.objects.len());
            let mut x = LinComb::zero(o, o);
            for _ in 0..rng.gen_range(1..4) {
                let w = random_word(pg, o, 8, rng);
                if w.tgt() != o {
                    continue;
                }
                let c = polykar::cell::ratio(rng.gen_range(-3..=3), rng.gen_range(1..=3));
                x = LinComb::combine(&One::one(), &x, &c, &LinComb::from_word(&w)).map_err(|e| e.to_string())?;
            }
            let (_, t) = sys.lin_normalize(&x, 10_000).map_err(|e| e.to_string())?;
            t.replay(&sys)?;
            traces += 1;
        }
    }
    ensure(traces >= 1000, || "too few traces".into())
}

fn strategy_runs(rng: &mut ChaCha8Rng) -> Outcome {
    for pg in [load("part1.pg"), load("part1_conv.pg")] {
        let sys = StringSystem::from_polygraph(&pg).map_err(|e| e.to_string())?;
        for _ in 0..500 {
            let w = random_word(&pg, rng.gen_range(0..pg.objects.len()), 12, rng);
            let (l, _) = sys.normalize(&w, Strategy::Leftmost, 10_000).map_err(|e| e.to_string())?;
            let (r, _) = sys.normalize(&w, Strategy::Rightmost, 10_000).map_err(|e| e.to_string())?;
            ensure(l == r, || format!("{} normalizes to {} and {}", pg.show_word(&w), pg.show_word(&l), pg.show_word(&r)))?;
        }
    }
    Ok(())
}

fn overlap_runs() -> Outcome {
    let pg = load("part1.pg");
    let words: Vec<Word> = pg.words_up_to(6).into_iter().filter(|w| !w.is_identity()).collect();
    let id = Word::identity(0);
    let branchings = |lhss: &[&Word]| {
        let sys = StringSystem::new(
            lhss.iter().enumerate().map(|(i, l)| SetRule { name: format!("r{i}"), lhs: (*l).clone(), rhs: id.clone() }).collect(),
        );
        sys.critical_branchings()
            .into_iter()
            .map(|b| (b.overlap.letters().to_vec(), (b.a.position, b.a.rule), (b.b.position, b.b.rule)))
            .collect::<BTreeSet<_>>()
    };
    let mut systems = 0;
    for (i, l1) in words.iter().enumerate() {
        let one = [l1];
        ensure(branchings(&one) == overlap_oracle(&[l1.letters().to_vec()], 2), || format!("system {:?}", l1.letters()))?;
        for l2 in &words[i..] {
            let lhss = [l1, l2];
            let want = overlap_oracle(&[l1.letters().to_vec(), l2.letters().to_vec()], 2);
            ensure(branchings(&lhss) == want, || format!("system {:?} {:?}", l1.letters(), l2.letters()))?;
            systems += 1;
        }
    }
    ensure(systems > 8000, || format!("only {systems} systems"))
}

fn smith_runs(rng: &mut ChaCha8Rng) -> Outcome {
    for _ in 0..10_000 {
        let m: Vec<Vec<i64>> = (0..3).map(|_| (0..3).map(|_| rng.gen_range(-3..=3)).collect()).collect();
        let a = big(&m);
        let s = smith_normal_form(&a, 3);
        ensure(mat_mul(&mat_mul(&s.u, &a, 3, 3), &s.v, 3, 3) == s.d, || format!("U·A·V != D for {m:?}"))?;
        ensure(determinant(&s.u).magnitude().is_one() && determinant(&s.v).magnitude().is_one(), || format!("not unimodular for {m:?}"))?;
        let diag = s.invariant_factors();
        ensure(diag.windows(2).all(|w| (&w[1] % &w[0]) == BigInt::from(0)), || format!("divisibility for {m:?}"))?;
        ensure(diag == invariant_factors_oracle(&m), || format!("oracle disagrees for {m:?}"))?;
        let off = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).filter(|(i, j)| i != j).all(|(i, j)| s.d[i][j] == BigInt::from(0));
        ensure(off, || format!("D not diagonal for {m:?}"))?;
    }
    Ok(())
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    replay_runs(&mut rng)?;
    strategy_runs(&mut rng)?;
    overlap_runs()?;
    smith_runs(&mut rng)
}

fn criterion_8() -> Outcome {
    let grow = Polygraph::parse("polygraph \"grow\"\n0-cell O\n1-cell a : O -> O\n2-cell r : a => a a\n").map_err(|e| e.to_string())?;
    let sys = StringSystem::from_polygraph(&grow).map_err(|e| e.to_string())?;
    let a = grow.parse_word("a").map_err(|e| e.to_string())?;
    let q = sys.quasi_termination_region(&[a], 8).map_err(|e| e.to_string())?;
    ensure(q.is_no(), || format!("a => a a: {}", q.status))?;

    let fork = Polygraph::parse(
        "polygraph \"fork\"\n0-cell O\n1-cell a : O -> O\n1-cell b : O -> O\n1-cell c : O -> O\n2-cell r1 : a => b\n2-cell r2 : a => c\n",
    )
    .map_err(|e| e.to_string())?;
    let sys = StringSystem::from_polygraph(&fork).map_err(|e| e.to_string())?;
    let v = sys.check_confluence(&ReductionOrder::lenlex(3), 8);
    let w = v.witness.as_ref().and_then(|w| w.first().cloned());
    ensure(v.is_no() && w.as_ref().is_some_and(|j| !j.joined), || format!("a => b, a => c: {}", v.status))?;
    let j = w.expect("checked");
    j.left.replay(&sys)?;
    j.right.replay(&sys)?;

    let k = DecatSystem::new("K", vec!["N".into()], vec![DecatRule { name: "r".into(), lhs: 0, rhs: vec![(BigInt::from(2), 0)] }]);
    let ks = krull_schmidt_check(&k, 8).map_err(|e| e.to_string())?;
    ensure(ks.is_no() && matches!(ks.witness, Some(KsWitness::Growth(_))), || format!("[N] => 2[N]: {}", ks.status))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("idempotents and Karoubi envelope of aba = a", criterion_1),
        ("coherence lifting and Tietze witnesses for aba = a", criterion_2),
        ("linear idempotents and lifting for the group algebra of S2", criterion_3),
        ("decategorification of the two-decomposition example", criterion_4),
        ("Grothendieck groups of S2 and its Karoubi envelope", criterion_5),
        ("split witnesses replay", criterion_6),
        ("engine property suite", criterion_7),
        ("negative controls", criterion_8),
    ];
    let mut failed = 0;
    for (n, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(()) => println!("criterion {}: pass ({name}) [{secs:.2}s]", n + 1),
            Err(e) => {
                failed += 1;
                println!("criterion {}: FAIL ({name}) [{secs:.2}s]: {e}", n + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

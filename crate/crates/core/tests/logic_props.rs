use std::collections::HashMap;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use urysohn_core::generate::{build_approximation, sequential_random_space, ApproximationParams};
use urysohn_core::logic::{
    evaluate, make_extension_axiom, make_kind_sentence, parse_formula, x_var, y_var, Env, ExtensionAxiomSpec, Formula,
    KindSentenceSpec,
};
use urysohn_core::metric::{extend_space, extract_substructure};
use urysohn_core::{ExtensionVector, FiniteMetricSpace, Mode};
use urysohn_oracles::{line_space, naive_eval, naive_sentence, random_qf, random_sentence, rng};

fn random_space(seed: u64, n: usize) -> FiniteMetricSpace {
    match seed % 3 {
        0 => sequential_random_space(n, 0, seed).unwrap(),
        1 => build_approximation(&ApproximationParams::new(n, seed)).unwrap(),
        _ => line_space(&mut rng(seed), n),
    }
}

/// A random Katětov vector over `space`, built coordinate by coordinate.
fn random_katetov(space: &FiniteMetricSpace, r: &mut impl Rng) -> ExtensionVector {
    let mut v: Vec<f64> = Vec::new();
    for t in 0..space.size() {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for (i, &a) in v.iter().enumerate() {
            lo = lo.max((a - space.d(i, t)).abs());
            hi = hi.min(a + space.d(i, t));
        }
        v.push(if hi > lo { r.gen_range(lo..=hi) } else { hi });
    }
    ExtensionVector::new(v)
}

#[test]
fn range_closure() {
    let mut r = rng(1);
    for case in 0..10_000u64 {
        let n = r.gen_range(1..=5);
        let space = random_space(case, n);
        let depth = r.gen_range(1..=6);
        let f = random_sentence(&mut r, depth, 3);
        let v = evaluate(&f, &space, &Env::new()).unwrap();
        assert!((0.0..=1.0).contains(&v), "{f} -> {v}");
    }
}

#[test]
fn oracle_equivalence_small() {
    let mut r = rng(2);
    for case in 0..300u64 {
        let n = r.gen_range(1..=5);
        let space = random_space(case, n);
        let f = random_sentence(&mut r, 6, 4);
        let got = evaluate(&f, &space, &Env::new()).unwrap();
        let want = naive_sentence(&f, &space);
        assert!((got - want).abs() <= 1e-12, "{f}: {got} vs {want}");
    }
}

#[test]
fn extension_axiom_on_three_points_matches_enumeration() {
    // Every point has another at distance exactly 0.5.
    let space = FiniteMetricSpace::from_upper_triangle(3, &[0.5, 0.5, 0.8], Mode::Metric).unwrap();
    let f = make_extension_axiom(&ExtensionAxiomSpec::single(0.5)).unwrap();
    let got = evaluate(&f, &space, &Env::new()).unwrap();
    assert_eq!(got, naive_sentence(&f, &space));
    assert_eq!(got, 0.0);

    // A two-point target with the third point equidistant from both.
    let target = FiniteMetricSpace::from_upper_triangle(2, &[0.5], Mode::Metric).unwrap();
    let spec = ExtensionAxiomSpec::new(target, ExtensionVector::new(vec![0.5, 0.5]));
    let f = make_extension_axiom(&spec).unwrap();
    let equilateral = FiniteMetricSpace::from_upper_triangle(3, &[0.5, 0.5, 0.5], Mode::Metric).unwrap();
    let got = evaluate(&f, &equilateral, &Env::new()).unwrap();
    assert_eq!(got, naive_sentence(&f, &equilateral));
    assert!(got.abs() < 1e-12);
}

/// Binds `vars` to random points of `space`.
fn random_env(vars: &[&str], n: usize, r: &mut impl Rng) -> Env {
    vars.iter().map(|v| (v.to_string(), r.gen_range(0..n))).collect()
}

#[test]
fn inf_does_not_increase_and_sup_does_not_decrease_under_extension() {
    let mut r = rng(3);
    for case in 0..2_000u64 {
        let n = r.gen_range(1..=5);
        let space = random_space(case, n);
        let body = random_qf(&mut r, &["a", "b", "y"], 5);
        let env = random_env(&["a", "b"], n, &mut r);
        let ext = extend_space(&space, &random_katetov(&space, &mut r)).unwrap();
        let inf = Formula::inf("y", body.clone());
        let sup = Formula::sup("y", body);
        let (i0, i1) = (evaluate(&inf, &space, &env).unwrap(), evaluate(&inf, &ext, &env).unwrap());
        let (s0, s1) = (evaluate(&sup, &space, &env).unwrap(), evaluate(&sup, &ext, &env).unwrap());
        assert!(i1 <= i0 + 1e-12, "{inf}: {i0} -> {i1}");
        assert!(s1 >= s0 - 1e-12, "{sup}: {s0} -> {s1}");
    }
}

#[test]
fn inner_inf_of_kind_sentence_shrinks_in_superstructure() {
    let mut r = rng(4);
    for case in 0..1_000u64 {
        let big_n = r.gen_range(3..=7);
        let big = random_space(case, big_n);
        let n = r.gen_range(1..=2);
        let k = r.gen_range(1..=2);
        let vars: Vec<String> = (0..n).map(x_var).chain((0..k).map(y_var)).collect();
        let refs: Vec<&str> = vars.iter().map(String::as_str).collect();
        let spec = KindSentenceSpec::new(n, k, random_qf(&mut r, &refs, 4)).unwrap();
        let sentence = make_kind_sentence(&spec).unwrap();
        // Strip the sup block to get the inner inf with free x's.
        let (prefix, _) = sentence.prenex_split();
        let mut inner = &sentence;
        for _ in 0..prefix.iter().filter(|(q, _)| matches!(q, urysohn_core::logic::Quantifier::Sup)).count() {
            match inner {
                Formula::Sup(_, b) => inner = b,
                _ => unreachable!(),
            }
        }
        // A is a random subset containing the witness tuple.
        let mut idx: Vec<usize> = (0..big_n).collect();
        idx.shuffle(&mut r);
        let small_n = r.gen_range(n.max(1)..=big_n);
        idx.truncate(small_n);
        let small = extract_substructure(&big, &idx).unwrap();
        let env_small: Env = (0..n).map(|i| (x_var(i), i.min(small_n - 1))).collect();
        let env_big: Env = env_small.iter().map(|(v, &p)| (v.clone(), idx[p])).collect();
        let in_small = evaluate(inner, &small, &env_small).unwrap();
        let in_big = evaluate(inner, &big, &env_big).unwrap();
        assert!(in_big <= in_small + 1e-12, "{inner}: {in_small} vs {in_big}");
    }
}

#[test]
fn isometry_invariance() {
    let mut r = rng(5);
    for case in 0..500u64 {
        let n = r.gen_range(1..=6);
        let space = random_space(case, n);
        let f = random_sentence(&mut r, 5, 3);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut r);
        let a = evaluate(&f, &space, &Env::new()).unwrap();
        let b = evaluate(&f, &space.permuted(&perm).unwrap(), &Env::new()).unwrap();
        assert!((a - b).abs() <= 1e-12, "{f}: {a} vs {b}");
    }
}

#[test]
fn free_variable_formulas_match_oracle() {
    let mut r = rng(6);
    for case in 0..500u64 {
        let n = r.gen_range(1..=5);
        let space = random_space(case, n);
        let f = random_qf(&mut r, &["p", "q"], 6);
        let env = random_env(&["p", "q"], n, &mut r);
        let mut naive_env: HashMap<String, usize> = env.clone().into_iter().collect();
        let got = evaluate(&f, &space, &env).unwrap();
        assert!((got - naive_eval(&f, &space, &mut naive_env)).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn print_parse_round_trip(seed in any::<u64>(), depth in 1usize..7) {
        let mut r = rng(seed);
        let f = random_sentence(&mut r, depth, 3);
        let text = f.to_string();
        let back = parse_formula(&text).unwrap();
        prop_assert_eq!(&back, &f, "{}", text);
        let space = random_space(seed, 4);
        let a = evaluate(&f, &space, &Env::new()).unwrap();
        let b = evaluate(&back, &space, &Env::new()).unwrap();
        prop_assert!((a - b).abs() <= 1e-12, "{}: {} vs {}", text, a, b);
    }
}

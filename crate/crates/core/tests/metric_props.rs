use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::Rng;
use urysohn_core::generate::{build_approximation, sequential_random_space, ApproximationParams};
use urysohn_core::metric::{
    admissible_interval, extend_space, extract_substructure, is_katetov, validate_space, Katetov,
};
use urysohn_core::{ExtensionVector, FiniteMetricSpace, Interval, Mode};
use urysohn_oracles::{brute_force_is_metric, line_space, rng};

/// Builds a Katětov vector by sampling each coordinate from its admissible
/// interval in turn, computing the interval by grid scan.
fn katetov_by_scan(space: &FiniteMetricSpace, rng: &mut impl Rng) -> ExtensionVector {
    let n = space.size();
    let mut r: Vec<f64> = Vec::with_capacity(n);
    for t in 0..n {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for (i, &v) in r.iter().enumerate() {
            lo = lo.max((v - space.d(i, t)).abs());
            hi = hi.min(v + space.d(i, t));
        }
        r.push(if hi > lo { rng.gen_range(lo..=hi) } else { hi });
    }
    ExtensionVector::new(r)
}

/// Smallest and largest grid values consistent with `assigned`, by checking
/// every Katětov inequality directly on the candidate.
fn scan_interval(
    space: &FiniteMetricSpace,
    assigned: &BTreeMap<usize, f64>,
    target: usize,
    steps: usize,
) -> Option<(f64, f64)> {
    let ok = |v: f64| {
        assigned.iter().all(|(&i, &a)| {
            let d = space.d(i, target);
            (a - v).abs() <= d + 1e-12 && d <= a + v + 1e-12
        })
    };
    let grid: Vec<f64> = (0..=steps).map(|s| s as f64 / steps as f64).filter(|&v| ok(v)).collect();
    Some((*grid.first()?, *grid.last()?))
}

fn random_space(seed: u64, n: usize) -> FiniteMetricSpace {
    match seed % 3 {
        0 => sequential_random_space(n, 0, seed).unwrap(),
        1 => build_approximation(&ApproximationParams::new(n, seed)).unwrap(),
        _ => line_space(&mut rng(seed), n),
    }
}

#[test]
fn extension_by_katetov_vector_is_a_metric_space() {
    let mut r = rng(17);
    let mut checked = 0;
    for seed in 0..10_000u64 {
        let n = 1 + (seed % 8) as usize;
        let space = random_space(seed, n);
        let v = katetov_by_scan(&space, &mut r);
        assert_eq!(is_katetov(&space, &v).unwrap(), Katetov::Admissible);
        let ext = extend_space(&space, &v).unwrap();
        assert!(brute_force_is_metric(&ext.to_rows(), true), "seed {seed}");
        checked += 1;
    }
    assert!(checked >= 10_000);
}

#[test]
fn documented_interval_example() {
    // Two points at distance 0.4, one assigned at 0.3: target admits [0.1, 0.7].
    let space = FiniteMetricSpace::from_upper_triangle(2, &[0.4], Mode::Metric).unwrap();
    let assigned = BTreeMap::from([(0usize, 0.3)]);
    let got = admissible_interval(&space, &assigned, 1).unwrap();
    let (lo, hi) = got.bounds().unwrap();
    assert!((lo - 0.1).abs() < 1e-12 && (hi - 0.7).abs() < 1e-12, "{got:?}");
    let (slo, shi) = scan_interval(&space, &assigned, 1, 10_000).unwrap();
    assert!((slo - lo).abs() <= 1e-4 && (shi - hi).abs() <= 1e-4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn interval_matches_grid_scan(seed in any::<u64>(), n in 2usize..7, assigned_count in 1usize..6) {
        let space = random_space(seed, n);
        let mut r = rng(seed ^ 0xabcd);
        let v = katetov_by_scan(&space, &mut r);
        let target = r.gen_range(0..n);
        let assigned: BTreeMap<usize, f64> = (0..n)
            .filter(|&i| i != target)
            .take(assigned_count)
            .map(|i| (i, v.values()[i]))
            .collect();
        let got = admissible_interval(&space, &assigned, target).unwrap();
        // A consistent partial assignment extends, so the interval is nonempty.
        let (lo, hi) = got.bounds().expect("nonempty");
        prop_assert!(got.contains(v.values()[target]));
        if let Some((slo, shi)) = scan_interval(&space, &assigned, target, 2_000) {
            prop_assert!(slo >= lo - 1e-9 && shi <= hi + 1e-9);
            prop_assert!(slo - lo <= 1.0 / 2_000.0 + 1e-9 && hi - shi <= 1.0 / 2_000.0 + 1e-9);
        } else {
            prop_assert!(hi - lo < 1.0 / 2_000.0);
        }
    }

    #[test]
    fn extraction_commutes_with_permutation(seed in any::<u64>(), n in 2usize..9) {
        let space = random_space(seed, n);
        let mut r = rng(seed);
        let mut perm: Vec<usize> = (0..n).collect();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut r);
        let k = r.gen_range(1..=n);
        let idx: Vec<usize> = rand::seq::index::sample(&mut r, n, k).into_vec();
        // perm[i] is the old index of new point i; invert to relabel idx.
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let permuted = space.permuted(&perm).unwrap();
        let relabeled: Vec<usize> = idx.iter().map(|&i| inv[i]).collect();
        let a = extract_substructure(&space, &idx).unwrap();
        let b = extract_substructure(&permuted, &relabeled).unwrap();
        prop_assert_eq!(a.as_slice(), b.as_slice());
    }

    #[test]
    fn validation_agrees_with_brute_force(seed in any::<u64>(), n in 1usize..7, noise in 0usize..3) {
        let mut r = rng(seed);
        let mut rows = random_space(seed, n).to_rows();
        for _ in 0..noise {
            let i = r.gen_range(0..n);
            let j = r.gen_range(0..n);
            let v = r.gen_range(0.0..1.0);
            rows[i][j] = v;
            rows[j][i] = v;
        }
        let brute = brute_force_is_metric(&rows, false);
        prop_assert_eq!(validate_space(&rows, Mode::Metric).is_ok(), brute);
        let brute = brute_force_is_metric(&rows, true);
        prop_assert_eq!(validate_space(&rows, Mode::Pseudometric).is_ok(), brute);
    }
}

#[test]
fn small_sequential_space_is_valid() {
    let s = sequential_random_space(5, 0, 1).unwrap();
    assert!(brute_force_is_metric(&s.to_rows(), false));
    assert!(validate_space(&s.to_rows(), Mode::Metric).is_ok());
}

#[test]
fn intervals_from_generators_are_nonempty() {
    for seed in 0..200u64 {
        let space = random_space(seed, 6);
        let assigned = BTreeMap::from([(0usize, space.d(0, 5))]);
        let iv = admissible_interval(&space, &assigned, 3).unwrap();
        assert!(!matches!(iv, Interval::Empty));
    }
}

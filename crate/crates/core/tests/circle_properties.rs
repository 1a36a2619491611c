mod common;

use num_rational::Rational64;
use parabolica::circle::{
    are_equivalent, difference_table, search_equivalence, is_non_synchronized, shift_set, validate_marked_set, CharacteristicPair,
    CircleError, MarkedSet,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn interleaved(a: &[usize], b: &[usize]) -> bool {
    let (i, j) = (a[0].min(a[1]), a[0].max(a[1]));
    let inside = |p: usize| i < p && p < j;
    inside(b[0]) != inside(b[1])
}

proptest! {
    #[test]
    fn joint_rotation_keeps_differences(seed in any::<u64>(), alpha in 0.0f64..1.0) {
        let pair = common::random_non_synchronized(&mut rng(seed), 4, 0.0);
        let rotated = CharacteristicPair::new(pair.plus.shifted(alpha), pair.minus.shifted(alpha));
        let (a, b) = (difference_table(&pair), difference_table(&rotated));
        let mut x: Vec<f64> = a.iter().map(|(_, v)| v).collect();
        let mut y: Vec<f64> = b.iter().map(|(_, v)| v).collect();
        x.sort_by(f64::total_cmp);
        y.sort_by(f64::total_cmp);
        for (p, q) in x.iter().zip(&y) {
            let d = (p - q).rem_euclid(1.0);
            prop_assert!(d.min(1.0 - d) < 1e-12);
        }
    }

    #[test]
    fn plus_shift_adds_to_differences(seed in any::<u64>(), alpha in 0.0f64..1.0) {
        let pair = common::random_non_synchronized(&mut rng(seed), 4, 0.0);
        let shifted = CharacteristicPair::new(shift_set(&pair.plus, alpha), pair.minus.clone());
        let before: Vec<f64> = difference_table(&pair).iter().map(|(_, v)| (v + alpha).rem_euclid(1.0)).collect();
        let after: Vec<f64> = difference_table(&shifted).iter().map(|(_, v)| v).collect();
        for x in &before {
            let near = |y: &f64| {
                let d = (x - y).rem_euclid(1.0);
                d.min(1.0 - d) < 1e-12
            };
            prop_assert!(after.iter().any(near));
        }
    }

    #[test]
    fn equivalence_is_reflexive_and_symmetric(seed in any::<u64>()) {
        let mut r = rng(seed);
        let a = common::random_non_synchronized(&mut r, 3, 1e-6);
        prop_assert_eq!(are_equivalent(&a, &a, 1e-12).unwrap(), Some(0.0));
        let (k, m) = a.sizes();
        let b = loop {
            let b = common::singletons(&common::uniform_points(&mut r, k, 1e-3), &common::uniform_points(&mut r, m, 1e-3));
            if is_non_synchronized(&b, 1e-9).non_synchronized { break b; }
        };
        let ab = are_equivalent(&a, &b, 1e-12).unwrap().is_some();
        let ba = are_equivalent(&b, &a, 1e-12).unwrap().is_some();
        prop_assert_eq!(ab, ba);
        prop_assert_eq!(ab, common::grid_equivalent(&a, &b));
    }

    #[test]
    fn equivalence_is_transitive_along_orbits(seed in any::<u64>(), s in 0.0f64..1.0, t in 0.0f64..1.0) {
        let a = common::random_non_synchronized(&mut rng(seed), 4, 1e-6);
        let b = CharacteristicPair::new(a.plus.shifted(s), a.minus.clone());
        let c = CharacteristicPair::new(a.plus.clone(), a.minus.shifted(t));
        // rotating one circle re-sorts its points, so the numbering moves cyclically
        prop_assert!(search_equivalence(&a, &b, 1e-12).unwrap().is_some());
        prop_assert!(search_equivalence(&b, &c, 1e-12).unwrap().is_some());
        prop_assert!(search_equivalence(&a, &c, 1e-12).unwrap().is_some());
    }

    #[test]
    fn sync_decision_matches_lattice_oracle(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (k, m) = (r.gen_range(1..=4), r.gen_range(1..=4));
        let pair = common::singletons(&common::lattice_points(&mut r, k, 24), &common::lattice_points(&mut r, m, 24));
        prop_assert_eq!(is_non_synchronized(&pair, 1e-12).non_synchronized, common::grid_non_synchronized(&pair, 24));
    }

    #[test]
    fn exact_and_float_equivalence_agree(seed in any::<u64>()) {
        let mut r = rng(seed);
        let draw = |r: &mut ChaCha8Rng, n: usize| -> Vec<i64> {
            let pts = common::lattice_points(r, n, 30);
            pts.iter().map(|p| (p * 30.0).round() as i64).collect()
        };
        let (k, m) = (r.gen_range(1..=3), r.gen_range(1..=3));
        let (ap, am, bp, bm) = (draw(&mut r, k), draw(&mut r, m), draw(&mut r, k), draw(&mut r, m));
        let exact = |p: &[i64], q: &[i64]| CharacteristicPair::new(
            MarkedSet::singletons(&p.iter().map(|&x| Rational64::new(x, 30)).collect::<Vec<_>>()).unwrap(),
            MarkedSet::singletons(&q.iter().map(|&x| Rational64::new(x, 30)).collect::<Vec<_>>()).unwrap());
        let (a, b) = (exact(&ap, &am), exact(&bp, &bm));
        let zero = Rational64::new(0, 1);
        if !is_non_synchronized(&a, zero).non_synchronized || !is_non_synchronized(&b, zero).non_synchronized {
            return Ok(());
        }
        let e = are_equivalent(&a, &b, zero).unwrap().is_some();
        let f = are_equivalent(&a.to_f64(), &b.to_f64(), 1e-12).unwrap().is_some();
        prop_assert_eq!(e, f);
    }

    #[test]
    fn validation_accepts_exactly_non_crossing(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(2..=8);
        let points = common::uniform_points(&mut r, n, 1e-3);
        let mut idx: Vec<usize> = (0..n).collect();
        use rand::seq::SliceRandom;
        idx.shuffle(&mut r);
        let pairs = r.gen_range(0..=n / 2);
        let classes: Vec<Vec<usize>> = (0..pairs).map(|c| vec![idx[2 * c], idx[2 * c + 1]]).collect();
        let crossing = classes.iter().enumerate().any(|(i, a)| classes[i + 1..].iter().any(|b| interleaved(a, b)));
        let result = validate_marked_set(&points, &classes, 1e-12);
        prop_assert_eq!(result.is_ok(), !crossing);
        if crossing {
            let is_intermingled = matches!(result, Err(CircleError::Intermingled { .. }));
            prop_assert!(is_intermingled);
        }
    }
}

#[test]
fn non_equivalent_fixture() {
    let a = common::singletons(&[0.0, 0.1], &[0.0, 0.3]);
    let b = common::singletons(&[0.0, 0.5], &[0.0, 0.1]);
    assert!(is_non_synchronized(&a, 1e-12).non_synchronized);
    assert!(is_non_synchronized(&b, 1e-12).non_synchronized);
    assert!(!common::grid_equivalent(&a, &b));
    assert_eq!(are_equivalent(&a, &b, 1e-12).unwrap(), None);
}

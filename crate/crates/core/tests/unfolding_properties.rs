mod common;

use parabolica::unfolding::{
    renumber_cyclic_shift, scenario, solve_connection, tau, time_function_eps, ModelUnfolding, Side,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tau_decreases(e in 1e-6f64..1.0, f in 1.01f64..3.0, a in -0.5f64..0.5) {
        let model = ModelUnfolding::standard(a);
        prop_assert!(tau(&model, e * f).unwrap() < tau(&model, e).unwrap());
    }

    #[test]
    fn time_functions_chain(eps in 1e-4f64..0.5, b in -0.9f64..0.9) {
        let model = ModelUnfolding::default();
        let from_minus = time_function_eps(&model, eps, Side::Minus, b).unwrap();
        let to_plus = -time_function_eps(&model, eps, Side::Plus, b).unwrap();
        let total = tau(&model, eps).unwrap();
        prop_assert!((from_minus + to_plus - total).abs() < 1e-10 * total);
    }

    #[test]
    fn connection_roots_solve_the_equation(t in 0.001f64..0.999, n in 3i64..60) {
        let model = ModelUnfolding::default();
        let eps = solve_connection(&model, |_| t, n, 10.0).unwrap();
        prop_assert!((t + tau(&model, eps).unwrap() - n as f64).abs() < 1e-9);
    }

    #[test]
    fn scenario_events_are_ordered(seed in any::<u64>()) {
        let pair = common::random_non_synchronized(&mut ChaCha8Rng::seed_from_u64(seed), 3, 1e-9);
        let s = scenario(&ModelUnfolding::default(), &pair, 5, 15).unwrap();
        let (k, m) = pair.sizes();
        prop_assert_eq!(s.events().len(), 11 * k * m);
        prop_assert!(s.check_order().passed());
        prop_assert!(s.events().windows(2).all(|w| w[0].epsilon >= w[1].epsilon));
    }

    #[test]
    fn renumbering_keeps_parameters(seed in any::<u64>(), shift in -3i64..3) {
        let pair = common::random_non_synchronized(&mut ChaCha8Rng::seed_from_u64(seed), 3, 1e-9);
        let s = scenario(&ModelUnfolding::default(), &pair, 5, 12).unwrap();
        let r = renumber_cyclic_shift(&s, (0, 0), shift).unwrap();
        let mut a: Vec<f64> = s.events().iter().map(|e| e.epsilon).collect();
        let mut b: Vec<f64> = r.events().iter().map(|e| e.epsilon).collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        prop_assert_eq!(a, b);
        for e in r.events() {
            let orig = s.events().iter().find(|f| f.k == e.k && f.m == e.m && f.epsilon == e.epsilon).unwrap();
            prop_assert!(e.n - orig.n == shift || e.n - orig.n == shift - 1);
        }
    }
}

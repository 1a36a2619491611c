use parabolica::germ::{
    abel_solution, generator, rectify, time_function, unrectify, ParabolicGerm, RectifiedGerm, TSide,
};
use proptest::prelude::*;

fn perturbed(delta: f64) -> ParabolicGerm {
    ParabolicGerm::new(move |x| x / (1.0 - x) + delta * x.powi(4), 0.5)
        .with_derivative(move |x| 1.0 / ((1.0 - x) * (1.0 - x)) + 4.0 * delta * x.powi(3))
}

proptest! {
    #[test]
    fn chart_round_trip(x in prop_oneof![-0.3f64..-1e-3, 1e-3f64..0.3], a in -0.5f64..0.5) {
        let t = rectify(x, a).unwrap();
        let back = unrectify(t, a).unwrap();
        prop_assert!((back - x).abs() <= 1e-12 * x.abs().max(1e-3), "{} vs {}", back, x);
    }

    #[test]
    fn time_function_is_additive(b in -0.4f64..-0.05, c in -0.4f64..-0.05) {
        let u = |x: f64| x * x * (1.0 + 0.3 * x);
        let whole = time_function(&u, -0.5, c).unwrap();
        let split = time_function(&u, -0.5, b).unwrap() + time_function(&u, b, c).unwrap();
        prop_assert!((whole - split).abs() < 1e-10 * whole.abs().max(1.0));
    }
}

#[test]
fn abel_residual_is_within_tolerance() {
    let rectified = RectifiedGerm::from_germ(perturbed(1e-3)).unwrap();
    for (side, t0) in [(TSide::Positive, 8.0), (TSide::Negative, -8.0)] {
        let sol = abel_solution(&rectified, side, t0, 1e-8).unwrap();
        for k in 0..10 {
            let t = t0 + side_sign(side) * k as f64;
            assert!(sol.residual(t).unwrap().abs() < 1e-8, "{side:?} {t}");
        }
    }
}

fn side_sign(side: TSide) -> f64 {
    match side {
        TSide::Positive => 1.0,
        TSide::Negative => -1.0,
    }
}

#[test]
fn generator_flow_conjugates_germ_on_both_sides() {
    let germ = perturbed(1e-3);
    let u = generator(&germ, 1e-9).unwrap();
    for x in [-0.15, -0.05, 0.05, 0.15] {
        let t = time_function(&u, x, germ.eval(x)).unwrap();
        assert!((t - 1.0).abs() < 1e-8, "{x}: {t}");
    }
}

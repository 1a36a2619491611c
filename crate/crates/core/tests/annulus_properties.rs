use parabolica::annulus::{
    canonical_coordinate, detect_sparkling_connections, first_hit, transition_map, AnnulusField, LoopPoint,
};
use parabolica::circle::Coordinate;
use parabolica::unfolding::{self, Side};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn crossing_is_a_rotation(eps in 2e-3f64..0.3, theta in 0.0f64..1.0, a in -0.4f64..0.4) {
        let field = AnnulusField::new(eps).with_coefficient(a);
        let tau = unfolding::tau(&field.model(), eps).unwrap();
        let p = LoopPoint::minus(theta);
        let before = canonical_coordinate(&field, p).unwrap().phi;
        let after = canonical_coordinate(&field, transition_map(&field, p).unwrap().landing).unwrap().phi;
        let d = (after - before + tau).frac();
        prop_assert!(d.min(1.0 - d) < 1e-8, "{}", d);
    }

    #[test]
    fn first_hits_stay_on_their_side(eps in 0.0f64..0.3, theta in 0.0f64..1.0) {
        let field = AnnulusField::new(eps);
        let b = first_hit(&field, LoopPoint::minus(theta)).unwrap();
        prop_assert!((-1.0..0.0).contains(&b) || eps > 0.0 && b < 1.0);
        let c = first_hit(&field, LoopPoint::plus(theta)).unwrap();
        prop_assert!(c <= 1.0 && (c > 0.0 || eps > 0.0));
    }

    #[test]
    fn canonical_coordinate_of_loop_angle(eps in 1e-3f64..0.3, theta in 0.0f64..1.0) {
        // base points at -1 and 1 make phi the loop angle itself
        let field = AnnulusField::new(eps);
        for side in [Side::Minus, Side::Plus] {
            let phi = canonical_coordinate(&field, LoopPoint::new(side, theta)).unwrap().phi;
            let d = (phi - theta).frac();
            prop_assert!(d.min(1.0 - d) < 1e-9);
        }
    }
}

#[test]
fn reversal_symmetry_of_detected_roots() {
    let template = AnnulusField::new(0.1);
    let (minus, plus) = (0.15, 0.6);
    let forward =
        detect_sparkling_connections(&template, LoopPoint::minus(minus), LoopPoint::plus(plus), (0.03, 0.2), 48).unwrap();
    let reversed =
        detect_sparkling_connections(&template, LoopPoint::minus(-plus), LoopPoint::plus(-minus), (0.03, 0.2), 48).unwrap();
    assert_eq!(forward.len(), reversed.len());
    for (f, r) in forward.iter().zip(&reversed) {
        assert_eq!(f.n, r.n);
        assert!(((f.epsilon - r.epsilon) / f.epsilon).abs() < 1e-9);
    }
}

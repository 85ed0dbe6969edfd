//! Randomised invariants of the spaces, the group law and the dilations.

use dilwalk::dilation::DilationStructure;
use dilwalk::heisenberg;
use dilwalk::space::triangle_realization;
use dilwalk::{Dd, Point, Real, Space, SpaceKind};
use proptest::prelude::*;

fn coord() -> impl Strategy<Value = f64> {
    -2.0..2.0f64
}

fn point(dim: usize) -> impl Strategy<Value = Point> {
    prop::collection::vec(coord(), dim).prop_map(|c| Point::new(c).unwrap())
}

fn spaces() -> impl Strategy<Value = Space> {
    prop_oneof![
        (1usize..4).prop_map(|n| Space::euclidean(n).unwrap()),
        Just(Space::heisenberg()),
        (0.1..1.0f64, 1usize..3).prop_map(|(a, n)| Space::snowflake(a, n).unwrap()),
    ]
}

fn triple_in(space: Space) -> impl Strategy<Value = (Space, Point, Point, Point)> {
    let n = space.ambient_dim();
    (Just(space), point(n), point(n), point(n))
}

fn dd(p: &Point) -> Point<Dd> {
    p.cast()
}

fn max_gap(p: &Point<Dd>, q: &Point<Dd>) -> f64 {
    p.coords()
        .iter()
        .zip(q.coords())
        .map(|(a, b)| (*a - *b).abs().to_f64())
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn metric_axioms((space, x, y, z) in spaces().prop_flat_map(triple_in)) {
        let d = |p: &Point, q: &Point| space.distance(p, q);
        prop_assert_eq!(d(&x, &x), 0.0);
        prop_assert!((d(&x, &y) - d(&y, &x)).abs() <= 1e-12 * d(&x, &y).max(1.0));
        prop_assert!(d(&x, &z) <= d(&x, &y) + d(&y, &z) + 1e-12);
        if x != y {
            prop_assert!(d(&x, &y) > 0.0);
        }
    }

    #[test]
    fn heisenberg_law_is_associative(p in point(3), q in point(3), r in point(3)) {
        let (p, q, r) = (dd(&p), dd(&q), dd(&r));
        let left = heisenberg::mul(&heisenberg::mul(&p, &q), &r);
        let right = heisenberg::mul(&p, &heisenberg::mul(&q, &r));
        prop_assert!(max_gap(&left, &right) <= 1e-28);
        let e = heisenberg::mul(&p, &heisenberg::inv(&p));
        prop_assert!(max_gap(&e, &Point::origin(3)) <= 1e-28);
    }

    #[test]
    fn heisenberg_dilations_are_automorphisms(p in point(3), q in point(3), eps in 1e-3..4.0f64) {
        let (p, q, e) = (dd(&p), dd(&q), Dd::new(eps));
        let left = heisenberg::dil(e, &heisenberg::mul(&p, &q));
        let right = heisenberg::mul(&heisenberg::dil(e, &p), &heisenberg::dil(e, &q));
        prop_assert!(max_gap(&left, &right) <= 1e-27);
        // Homogeneity of the gauge.
        let g = heisenberg::gauge(&heisenberg::dil(e, &p)) - e * heisenberg::gauge(&p);
        prop_assert!(g.abs().to_f64() <= 1e-24);
    }

    #[test]
    fn left_translations_are_isometries(p in point(3), q in point(3), r in point(3)) {
        let (p, q, r) = (dd(&p), dd(&q), dd(&r));
        let before = heisenberg::distance(&q, &r);
        let after = heisenberg::distance(&heisenberg::mul(&p, &q), &heisenberg::mul(&p, &r));
        // The gauge is only half-Hölder in the vertical coordinate.
        prop_assert!((before - after).abs().to_f64() <= 1e-13);
    }

    #[test]
    fn triangle_realization_round_trips((space, x, y, z) in spaces().prop_flat_map(triple_in)) {
        let (a, b, c) = (space.distance(&x, &y), space.distance(&y, &z), space.distance(&z, &x));
        let t = triangle_realization(a, b, c).unwrap();
        let (ab, bc, ca) = t.side_lengths();
        let tol = 1e-9 * a.max(b).max(c).max(1.0);
        prop_assert!((ab - a).abs() <= tol);
        prop_assert!((bc - b).abs() <= tol, "{} vs {}", bc, b);
        prop_assert!((ca - c).abs() <= tol, "{} vs {}", ca, c);
        prop_assert!(t.c[1] >= 0.0);
    }

    #[test]
    fn snowflake_is_a_power_of_euclidean(alpha in 0.05..1.0f64, x in point(2), y in point(2), z in point(2)) {
        let s = Space::snowflake(alpha, 2).unwrap();
        let e = Space::euclidean(2).unwrap();
        let d = s.distance(&x, &y);
        prop_assert!((d - e.distance(&x, &y).powf(alpha)).abs() <= 1e-12);
        prop_assert!(s.distance(&x, &z) <= d + s.distance(&y, &z) + 1e-12);
    }

    #[test]
    fn dilations_fix_base_and_contract(space in spaces(), seed in any::<u64>(), eps in 1e-3..1.0f64) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let x = space.sample_base_point(&mut rng);
        let u = space.sample_ball(&x, 1.0, &mut rng).unwrap();
        let ds = DilationStructure::new(space.clone());
        let (xd, ud) = (dd(&x), dd(&u));
        let image = ds.dilate(&xd, Dd::new(eps), &ud);
        prop_assert!(max_gap(&ds.dilate(&xd, Dd::new(eps), &xd), &xd) <= 1e-28);
        // Every built-in continuous dilation scales distances to the base by ε.
        let ratio = space.distance(&xd, &image) / space.distance(&xd, &ud);
        prop_assert!((ratio.to_f64() - eps).abs() <= 1e-12);
    }

    #[test]
    fn space_kind_text_round_trips(kind in prop_oneof![
        (1usize..6).prop_map(|dim| SpaceKind::Euclidean { dim }),
        Just(SpaceKind::Heisenberg),
        (0.01..1.0f64, 1usize..4).prop_map(|(alpha, dim)| SpaceKind::Snowflake { alpha, dim }),
    ]) {
        let text = kind.to_string();
        prop_assert_eq!(text.parse::<SpaceKind>().unwrap(), kind);
    }
}

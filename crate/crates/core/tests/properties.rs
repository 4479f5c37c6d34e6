use std::f64::consts::{PI, TAU};

use domeforge::confmetric::qh_density;
use domeforge::dome::shoot;
use domeforge::formulas::{f, f_loggap, g, g_loggap, F_SUP};
use domeforge::geom::{circle_angle, circle_through, from_sphere, h3_distance, horoball_radius, to_sphere};
use domeforge::hull::validate;
use domeforge::suites::with_point_at_infinity;
use domeforge::{gen_config, DomePoint, Domain, ExtPoint, Family, FiniteDomain, GenCircle, H3Point, MobiusMap, C64};
use proptest::prelude::*;

fn c64() -> impl Strategy<Value = C64> {
    (-3.0..3.0f64, -3.0..3.0f64).prop_map(|(x, y)| C64::new(x, y))
}

fn mobius() -> impl Strategy<Value = MobiusMap> {
    (c64(), c64(), c64(), c64())
        .prop_filter("well conditioned", |(a, b, c, d)| (a * d - b * c).norm() > 0.2)
        .prop_map(|(a, b, c, d)| MobiusMap::new(a, b, c, d).unwrap())
}

fn point_on(c: &GenCircle, t: f64) -> ExtPoint {
    match *c {
        GenCircle::Circle { center, radius, .. } => ExtPoint::Finite(center + C64::from_polar(radius, t)),
        GenCircle::Line { normal, offset } => {
            let base = normal * offset;
            ExtPoint::Finite(base + normal * C64::i() * (3.0 * (t - PI)))
        }
    }
}

fn sorted_thetas(d: &FiniteDomain) -> Vec<f64> {
    let mut t: Vec<f64> = d.hull.edges.iter().map(|e| e.theta).collect();
    t.sort_by(f64::total_cmp);
    t
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn sphere_round_trip(z in c64()) {
        let back = from_sphere(to_sphere(ExtPoint::Finite(z)));
        prop_assert!(back.chordal(&ExtPoint::Finite(z)) < 1e-12);
    }

    #[test]
    fn circle_through_is_natural(a in c64(), b in c64(), c in c64(), m in mobius(), t in 0.1..6.2f64) {
        let (a, b, c) = (ExtPoint::Finite(a), ExtPoint::Finite(b), ExtPoint::Finite(c));
        prop_assume!(a.chordal(&b) > 0.05 && b.chordal(&c) > 0.05 && a.chordal(&c) > 0.05);
        let Ok(k) = circle_through(a, b, c) else { return Ok(()) };
        let Ok(mk) = circle_through(m.apply(a), m.apply(b), m.apply(c)) else { return Ok(()) };
        let d = point_on(&k, t);
        prop_assume!(m.apply(d).finite().map_or(false, |w| w.norm() < 1e6));
        prop_assert!(mk.residual(m.apply(d)) < 1e-8);
        // Orientation preserving maps keep the disk side.
        prop_assert!(mk.contains(m.apply(k.to_cap().pole())));
    }

    #[test]
    fn circle_angle_is_invariant(p in prop::array::uniform4(c64()), q in c64(), m in mobius()) {
        let e = |z: C64| ExtPoint::Finite(z);
        let Ok(k1) = circle_through(e(p[0]), e(p[1]), e(p[2])) else { return Ok(()) };
        let Ok(k2) = circle_through(e(p[0]), e(p[3]), e(q)) else { return Ok(()) };
        let Ok(a) = circle_angle(&k1, &k2) else { return Ok(()) };
        prop_assume!(a > 0.01 && a < PI - 0.01);
        let Ok(m1) = circle_through(m.apply(e(p[0])), m.apply(e(p[1])), m.apply(e(p[2]))) else { return Ok(()) };
        let Ok(m2) = circle_through(m.apply(e(p[0])), m.apply(e(p[3])), m.apply(e(q))) else { return Ok(()) };
        let b = circle_angle(&m1, &m2).unwrap();
        prop_assert!((a - b).abs() < 1e-7, "{a} vs {b}");
    }

    #[test]
    fn h3_triangle_inequality(x in prop::array::uniform3(c64()), t in prop::array::uniform3(0.01..5.0f64)) {
        let p: Vec<H3Point> = (0..3).map(|i| H3Point::new(x[i], t[i])).collect();
        let d = |i: usize, j: usize| h3_distance(&p[i], &p[j]);
        prop_assert!(d(0, 2) <= d(0, 1) + d(1, 2) + 1e-9);
        prop_assert!((d(0, 1) - d(1, 0)).abs() < 1e-12);
        prop_assert!(d(0, 0) == 0.0);
    }

    #[test]
    fn f_and_g_are_inverse(x in 0.01..5.0f64, big in 5.0..1e4f64, y in 0.01..(F_SUP - 1e-3)) {
        prop_assert!((f(g(x)).unwrap() - x).abs() <= 1e-9 * x.max(1.0));
        // F is steep near 2 asinh 1, so large x goes through the logarithm of the gap.
        prop_assert!((f_loggap(g_loggap(big)) - big).abs() <= 1e-9 * big);
        prop_assert!((g(f(y).unwrap()) - y).abs() <= 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn hull_is_mobius_natural(seed in 0u64..10_000, n in 4usize..10, m in mobius()) {
        let d = gen_config(&Family::RandomN { n }, seed).unwrap();
        let moved: Vec<ExtPoint> = d.points.iter().map(|&p| m.apply(p)).collect();
        prop_assume!(moved.iter().all(|p| p.finite().map_or(true, |z| z.norm() < 1e6)));
        let Ok(md) = FiniteDomain::new(moved) else { return Ok(()) };
        let (t0, t1) = (sorted_thetas(&d), sorted_thetas(&md));
        prop_assert_eq!(t0.len(), t1.len());
        for (a, b) in t0.iter().zip(&t1) {
            prop_assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn bending_sums(seed in 0u64..10_000, n in 3usize..14) {
        let d = gen_config(&Family::RandomN { n }, seed).unwrap();
        let diag = validate(&d.hull);
        prop_assert!(diag.euler_ok && diag.theta_ok);
        prop_assert!(diag.max_vertex_residual < 1e-8);
        let total: f64 = d.hull.edges.iter().map(|e| e.theta).sum();
        prop_assert!((total - PI * n as f64).abs() < 1e-7);
    }

    #[test]
    fn tau_brackets_quasihyperbolic(seed in 0u64..10_000, n in 3usize..10, z in c64()) {
        let d = gen_config(&Family::RandomN { n }, seed).unwrap();
        let d = with_point_at_infinity(&d).unwrap();
        prop_assume!(d.chordal_gap(ExtPoint::Finite(z)) > 1e-3);
        let dom = Domain::from_finite(d).unwrap();
        let tau = dom.tau(z).unwrap();
        let q = qh_density(dom.points(), z).unwrap();
        let slack = 1e-9 * tau.max(1.0);
        prop_assert!(0.5 * tau <= q + slack, "q={q} tau={tau}");
        prop_assert!(q <= tau + slack, "q={q} tau={tau}");
    }

    #[test]
    fn retraction_is_the_global_horoball_minimum(seed in 0u64..10_000, n in 3usize..9, z in c64(), dirs in prop::collection::vec((0.0..TAU, 0.0..4.0f64), 40)) {
        let dom = Domain::new(gen_config(&Family::RandomN { n }, seed).unwrap().points).unwrap();
        prop_assume!(dom.finite.chordal_gap(ExtPoint::Finite(z)) > 1e-3);
        let r = dom.retract(ExtPoint::Finite(z)).unwrap();
        let s = &dom.surface;
        prop_assert!(s.contains(r.foot.face, r.foot.w, 1e-9));
        prop_assert!((horoball_radius(z, &r.ambient) - r.h).abs() <= 1e-9 * r.h);
        // Every other dome point lies outside the horoball.
        for f in 0..s.n_faces() {
            let c = DomePoint { face: f, w: s.face_centre(f) };
            for &(dir, len) in &dirs {
                let p = shoot(s, &c, dir, len).end();
                prop_assert!(horoball_radius(z, &s.ambient(&p)) >= r.h * (1.0 - 1e-10));
            }
        }
        for &(dir, len) in &dirs {
            let p = shoot(s, &r.foot, dir, 0.01 * len).end();
            prop_assert!(horoball_radius(z, &s.ambient(&p)) >= r.h * (1.0 - 1e-10));
        }
    }
}

use foldtorus::autos::{AutoWord, Autos, GenName, Letter};
use foldtorus::billiard::{build_cross_scene, trace_ray, Orientation, RayTermination};
use foldtorus::cover::{lift_trace, lifted_eval, project_trace, CoverPoint, CoverTermination, Shore};
use foldtorus::flow::{density_coverage, trace_leaf, Termination, TraceOptions};
use foldtorus::qfield::eigen_directions;
use foldtorus::{canonical_t, FieldElem, Point, SurfacePoint, Vec2};
use proptest::prelude::*;
use std::sync::OnceLock;

fn autos() -> &'static Autos {
    static A: OnceLock<Autos> = OnceLock::new();
    A.get_or_init(|| Autos::new().unwrap())
}

fn elem() -> impl Strategy<Value = FieldElem> {
    (-20i64..=20, 1i64..=12, -6i64..=6, 1i64..=6).prop_map(|(p, q, r, s)| FieldElem::from_parts(p, q, r, s))
}

fn rational_in(lo: i64, hi: i64) -> impl Strategy<Value = FieldElem> {
    (1i64..=96).prop_map(move |k| FieldElem::int(lo) + FieldElem::rational(k * (hi - lo), 97))
}

/// Interior point of the chart of T, off every diagonal cut line.
fn chart_point() -> impl Strategy<Value = SurfacePoint> {
    (rational_in(-1, 2), rational_in(0, 1), 0i64..=3).prop_map(|(x, y, k)| {
        let nudge = FieldElem::from_parts(0, 1, k, 1000);
        let y = &y + &nudge;
        let y = if y <= FieldElem::zero() || y >= FieldElem::one() { FieldElem::rational(1, 3) } else { y };
        SurfacePoint::new(0, Vec2::new(x, y))
    })
}

fn direction() -> impl Strategy<Value = Point> {
    (-3i64..=3, -2i64..=2, -3i64..=3)
        .prop_map(|(a, b, c)| Vec2::new(FieldElem::from_parts(a, 1, b, 1), FieldElem::int(c)))
        .prop_filter("nonzero", |d| !d.x.is_zero() || !d.y.is_zero())
}

fn word() -> impl Strategy<Value = AutoWord> {
    prop::collection::vec((prop::bool::ANY, prop::bool::ANY), 0..4).prop_map(|v| {
        AutoWord::from_letters(v.into_iter().map(|(h, inv)| Letter { gen: if h { GenName::H } else { GenName::V }, inverse: inv }))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn field_ring_laws(a in elem(), b in elem(), c in elem()) {
        prop_assert_eq!(&(&a + &b) * &c, &(&a * &c) + &(&b * &c));
        prop_assert_eq!(&a * &b, &b * &a);
        prop_assert_eq!((&a * &b).conj(), &a.conj() * &b.conj());
        prop_assert_eq!((&a * &b).norm(), a.norm() * b.norm());
        if !a.is_zero() {
            prop_assert_eq!(&a * &a.recip().unwrap(), FieldElem::one());
        }
    }

    #[test]
    fn field_order_and_literals(a in elem(), b in elem()) {
        if (a.to_f64() - b.to_f64()).abs() > 1e-9 {
            prop_assert_eq!(a < b, a.to_f64() < b.to_f64());
        }
        prop_assert_eq!(a.to_string().parse::<FieldElem>().unwrap(), a.clone());
        let f = FieldElem::from_rational(a.floor().into());
        prop_assert!(f <= a && a < &f + &FieldElem::one());
    }

    #[test]
    fn field_sign_matches_float(a in elem()) {
        let f = a.to_f64();
        if f.abs() > 2f64.powi(-20) {
            prop_assert_eq!(a.sign(), if f > 0.0 { 1 } else { -1 });
        }
    }

    #[test]
    fn eigenpairs_of_hyperbolic_conjugates(w in word(), k in 1i64..=3) {
        let a = autos();
        let m = *a.derivative(&w.then(&"vHv".parse::<AutoWord>().unwrap().pow(k)).then(&w.inverse())).representative();
        let e = eigen_directions(&m).unwrap();
        for pair in [&e.expanding, &e.contracting] {
            prop_assert_eq!(m.apply(&pair.vector), pair.vector.scale(&pair.value));
        }
        prop_assert_eq!(&e.expanding.value * &e.contracting.value, FieldElem::int(m.det()));
        prop_assert!(e.expanding.value.abs() > e.contracting.value.abs());
    }

    #[test]
    fn torus_traces_are_reversible(p in chart_point(), d in direction(), k in 1i64..=12) {
        let s = canonical_t();
        let budget = FieldElem::rational(k, 2);
        let opts = TraceOptions { detect_closure: false, ..TraceOptions::default() };
        let fwd = trace_leaf::<FieldElem>(&s, &p, &d, &budget, &opts).unwrap();
        prop_assume!(fwd.termination == Termination::BudgetExhausted);
        let end = fwd.end().unwrap();
        let back = trace_leaf::<FieldElem>(&s, &end, &-fwd.final_direction.clone(), &budget, &opts).unwrap();
        prop_assert_eq!(back.termination, Termination::BudgetExhausted);
        prop_assert!(s.same_point(&back.end().unwrap(), &p));
        prop_assert_eq!(back.segments.len(), fwd.segments.len());
    }

    #[test]
    fn coverage_grows_with_budget(p in chart_point(), d in direction(), k in 1i64..=10) {
        let s = canonical_t();
        let opts = TraceOptions { detect_closure: false, ..TraceOptions::default() };
        let short = trace_leaf::<FieldElem>(&s, &p, &d, &FieldElem::int(k), &opts).unwrap();
        let long = trace_leaf::<FieldElem>(&s, &p, &d, &FieldElem::int(2 * k), &opts).unwrap();
        let eps = 1.0 / 8.0;
        prop_assert!(density_coverage(&short, &s, eps).unwrap() <= density_coverage(&long, &s, eps).unwrap());
    }

    #[test]
    fn eval_inverse_laws(w in word(), p in chart_point()) {
        let a = autos();
        let s = &a.surface;
        prop_assert!(s.same_point(&a.eval(&w.then(&w.inverse()), &p).unwrap(), &p));
        let there = a.eval(&w.inverse(), &p).unwrap();
        prop_assert!(s.same_point(&a.eval(&w, &there).unwrap(), &p));
    }

    #[test]
    fn eval_is_a_homomorphism(w1 in word(), w2 in word(), p in chart_point()) {
        let a = autos();
        let both = a.eval(&w1.then(&w2), &p).unwrap();
        let step = a.eval(&w1, &a.eval(&w2, &p).unwrap()).unwrap();
        prop_assert!(a.surface.same_point(&both, &step));
        prop_assert_eq!(a.derivative(&w1.then(&w2)), foldtorus::qfield::ProjMat2(a.derivative(&w1).0.mul(&a.derivative(&w2).0)));
        prop_assert_eq!(a.h1_action(&w1.then(&w2)).unwrap(), a.h1_action(&w1).unwrap().mul(&a.h1_action(&w2).unwrap()));
    }

    #[test]
    fn eval_respects_gluings(w in word(), x in rational_in(-1, 2), top in prop::bool::ANY) {
        let a = autos();
        let s = &a.surface;
        let p = SurfacePoint::new(0, Vec2::new(x, if top { FieldElem::one() } else { FieldElem::zero() }));
        let images: Vec<SurfacePoint> = s.representatives(&p).unwrap().iter().map(|r| a.eval_raw(&w, r).unwrap()).collect();
        for im in &images[1..] {
            prop_assert!(s.same_point(im, &images[0]));
        }
    }

    #[test]
    fn leaves_map_to_leaves(w in word(), p in chart_point(), d in direction()) {
        let a = autos();
        let s = &a.surface;
        let opts = TraceOptions { detect_closure: false, ..TraceOptions::default() };
        let t = trace_leaf::<FieldElem>(s, &p, &d, &FieldElem::int(3), &opts).unwrap();
        let image_dir = a.derivative(&w).0.apply(&d);
        for seg in a.push_path(&w, &t.segments).unwrap() {
            prop_assert!((seg.b.clone() - seg.a.clone()).cross(&image_dir).is_zero());
        }
    }

    #[test]
    fn lifted_traces_project_to_torus_traces(p in chart_point(), d in direction(), k in 1i64..=30) {
        let s = canonical_t();
        let budget = FieldElem::int(k);
        let cp = CoverPoint::new(p.p.clone(), None);
        let up = lift_trace::<FieldElem>(&cp, &d, &budget, 0.0).unwrap();
        let opts = TraceOptions { detect_closure: false, ..TraceOptions::default() };
        let down = trace_leaf::<FieldElem>(&s, &p, &d, &budget, &opts).unwrap();
        prop_assert_eq!(project_trace(&up), down.segments);
        prop_assert_eq!(up.termination == CoverTermination::BudgetExhausted, down.termination == Termination::BudgetExhausted);
    }

    #[test]
    fn lifted_traces_are_deck_equivariant(p in chart_point(), d in direction(), m in -3i64..=3, n in -3i64..=3) {
        let cp = CoverPoint::new(p.p.clone(), None);
        let budget = FieldElem::int(20);
        let a = lift_trace::<FieldElem>(&cp, &d, &budget, 0.0).unwrap();
        let b = lift_trace::<FieldElem>(&cp.translate(m, n), &d, &budget, 0.0).unwrap();
        let shift = Vec2::ints(3 * m, n);
        prop_assert_eq!(a.segments.len(), b.segments.len());
        for (sa, sb) in a.segments.iter().zip(&b.segments) {
            prop_assert_eq!(&(sa.0.clone() + shift.clone()), &sb.0);
            prop_assert_eq!(&(sa.1.clone() + shift.clone()), &sb.1);
        }
    }

    #[test]
    fn lifts_intertwine_deck_translations(w in word(), p in chart_point(), m in -2i64..=2, n in -2i64..=2) {
        let a = autos();
        let cp = CoverPoint::new(p.p.clone(), None);
        let h = a.h1_action(&w).unwrap();
        let (m2, n2) = h.apply_ints((m, n));
        let lhs = lifted_eval(a, &w, &cp.translate(m, n)).unwrap();
        let rhs = lifted_eval(a, &w, &cp).unwrap().translate(m2, n2);
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn slit_points_lift_consistently(w in word(), x in rational_in(-1, 1), plus in prop::bool::ANY, m in -2i64..=2, n in -2i64..=2) {
        let a = autos();
        let shore = if plus { Shore::Plus } else { Shore::Minus };
        let cp = CoverPoint::new(Vec2::new(x, FieldElem::zero()), Some(shore));
        let (m2, n2) = a.h1_action(&w).unwrap().apply_ints((m, n));
        let lhs = lifted_eval(a, &w, &cp.translate(m, n)).unwrap();
        let rhs = lifted_eval(a, &w, &cp).unwrap().translate(m2, n2);
        prop_assert_eq!(lhs.canonical(), rhs.canonical());
    }

    #[test]
    fn billiard_rays_are_reversible_and_periodic(k in 1i64..=40, j in 1i64..=40, i in -3i64..=3, l in -3i64..=3) {
        let scene = build_cross_scene(FieldElem::rational(1, 4), Orientation::Axis).unwrap();
        let start = Vec2::new(FieldElem::from_parts(k, 97, 1, 50), FieldElem::rational(j, 41));
        let dir = Vec2::ints(1, 1);
        let budget = FieldElem::int(30);
        let fwd = trace_ray(&scene, &start, &dir, &budget, 0.0).unwrap();
        prop_assume!(fwd.termination == RayTermination::BudgetExhausted);
        let back = trace_ray(&scene, fwd.end(), &-fwd.final_direction().clone(), &budget, 0.0).unwrap();
        prop_assert_eq!(back.end(), &start);
        prop_assert_eq!(back.bounces, fwd.bounces);
        let shift = Vec2::ints(i, l);
        let moved = trace_ray(&scene, &(start.clone() + shift.clone()), &dir, &budget, 0.0).unwrap();
        prop_assert_eq!(moved.end(), &(fwd.end().clone() + shift));
        prop_assert_eq!(moved.directions, fwd.directions);
    }
}

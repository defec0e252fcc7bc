//! End-to-end acceptance run: one line per criterion, nonzero exit on failure.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use foldtorus::autos::{AutoWord, Autos};
use foldtorus::billiard::{bisectrix, build_cross_scene, trace_ray, Orientation, RayTermination};
use foldtorus::cover::{
    deviation_records, deviation_series, f1_start, lemma4_sequence, lift_trace, lifted_eval, nearest_approach, project_trace, CoverPoint,
};
use foldtorus::flow::{cylinder_decomposition, saddle_connection_search, trace_leaf, CoverageGrid, TraceOptions};
use foldtorus::qfield::{eigen_directions, ProjMat2};
use foldtorus::{canonical_t, FieldElem, Mat2, SurfacePoint, Vec2};

type Check = std::result::Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn w(s: &str) -> AutoWord {
    s.parse().expect("word literal")
}

fn fe(s: &str) -> FieldElem {
    s.parse().expect("field literal")
}

fn err(e: foldtorus::Error) -> String {
    e.to_string()
}

fn census() -> Check {
    let s = canonical_t();
    let mut k: Vec<i64> = s.cone_census().iter().map(|c| c.angle_pi).collect();
    k.sort();
    ensure(k == [1, 1, 4], format!("angles {k:?} pi"))?;
    ensure(s.area() == FieldElem::int(3), format!("area {}", s.area()))?;
    let curvature: i64 = k.iter().map(|a| 2 - a).sum();
    ensure(curvature == 0 && s.euler_characteristic() == 0, format!("curvature {curvature} pi"))?;
    Ok("pi, pi, 4pi; area 3; curvature 0".into())
}

fn cylinders() -> Check {
    let s = canonical_t();
    let h = cylinder_decomposition(&s, &Vec2::ints(1, 0), &FieldElem::int(20)).map_err(err)?;
    let hc: Vec<(FieldElem, FieldElem)> = h.cylinders.iter().map(|c| (c.circumference.clone(), c.width.clone())).collect();
    ensure(hc == [(FieldElem::int(3), FieldElem::one())], format!("(1,0): {hc:?}"))?;
    let v = cylinder_decomposition(&s, &Vec2::ints(0, 1), &FieldElem::int(20)).map_err(err)?;
    let mut vc: Vec<(FieldElem, FieldElem)> = v.cylinders.iter().map(|c| (c.circumference.clone(), c.width.clone())).collect();
    vc.sort();
    ensure(vc == [(FieldElem::one(), FieldElem::one()), (FieldElem::int(2), FieldElem::one())], format!("(0,1): {vc:?}"))?;
    ensure(v.connections.len() == 3, format!("{} vertical saddle connections", v.connections.len()))?;
    Ok("(1,0): 1 x 3; (0,1): 1 x 1, 1 x 2 with 3 saddle connections".into())
}

fn derivatives(a: &Autos) -> Check {
    for (word, m) in [("h", Mat2::new(1, 3, 0, 1)), ("v", Mat2::new(1, 0, 1, 1)), ("vHv", Mat2::new(2, 3, 1, 2))] {
        let d = a.derivative(&w(word));
        ensure(d == ProjMat2(m), format!("D({word}) = {d}"))?;
    }
    let e = eigen_directions(a.derivative(&w("vHv")).representative()).map_err(err)?;
    let s3 = FieldElem::sqrt3();
    ensure(e.expanding.vector == Vec2::new(s3.clone(), FieldElem::one()), format!("expanding {}", e.expanding.vector))?;
    ensure(e.contracting.vector == Vec2::new(s3.clone(), -FieldElem::one()), format!("contracting {}", e.contracting.vector))?;
    let (l1, l2) = (e.expanding.value.abs(), e.contracting.value.abs());
    ensure(l1 == fe("2+rt3") && l2 == fe("2-rt3"), format!("eigenvalues {l1}, {l2}"))?;
    Ok("D(h), D(v), D(vHv) exact; eigenpairs (rt3,1) 2+rt3 and (rt3,-1) 2-rt3".into())
}

fn homology(a: &Autos) -> Check {
    for (word, m) in [
        ("h", Mat2::new(1, 1, 0, 1)),
        ("v", Mat2::new(1, 0, 1, 1)),
        ("vHv", Mat2::new(0, -1, 1, 0)),
        ("(vHv)^4", Mat2::IDENTITY),
    ] {
        let got = a.h1_action(&w(word)).map_err(err)?;
        ensure(got == m, format!("H1({word}) = {got}"))?;
    }
    Ok("h, v, vHv, (vHv)^4 act on H1 as expected".into())
}

fn permutations(a: &Autos) -> Check {
    let perm = |word: &str| -> std::result::Result<Vec<(String, String)>, String> {
        let mut p = a.cone_point_permutation(&w(word)).map_err(err)?;
        p.sort();
        Ok(p)
    };
    let pair = |x: &str, y: &str| (x.to_string(), y.to_string());
    let v = perm("v")?;
    ensure(v == [pair("AB", "AB"), pair("C+", "C-"), pair("C-", "C+")], format!("v: {v:?}"))?;
    let h = perm("h")?;
    ensure(h == [pair("AB", "AB"), pair("C+", "C+"), pair("C-", "C-")], format!("h: {h:?}"))?;
    Ok("v swaps the pi points and fixes 4pi; h fixes all".into())
}

fn lifts(a: &Autos) -> Check {
    let g = w("vHv");
    let img = lifted_eval(a, &g, &CoverPoint::marked(1, 0)).map_err(err)?;
    ensure(img == CoverPoint::marked(0, 1), format!("(3,0)+ -> {img}"))?;
    let cycle = [(1, 0), (0, 1), (-1, 0), (0, -1), (1, 0)];
    for p in cycle.windows(2) {
        let img = lifted_eval(a, &g, &CoverPoint::marked(p[0].0, p[0].1)).map_err(err)?;
        ensure(img == CoverPoint::marked(p[1].0, p[1].1), format!("{:?} -> {img}", p[0]))?;
    }
    let g4 = w("(vHv)^4");
    for m in -2..=2 {
        for n in -2..=2 {
            let p = CoverPoint::marked(m, n);
            let img = lifted_eval(a, &g4, &p).map_err(err)?;
            ensure(img == p, format!("{p} -> {img}"))?;
        }
    }
    let probes = [
        CoverPoint::new(Vec2::new(fe("1/2"), fe("1/3")), None),
        CoverPoint::new(Vec2::new(fe("3/2"), fe("1/2*rt3")), None),
        CoverPoint::new(Vec2::new(fe("-1/2"), fe("0")), Some(foldtorus::cover::Shore::Minus)),
    ];
    for p in &probes {
        let base = lifted_eval(a, &g4, p).map_err(err)?;
        for (m, n) in [(1, 0), (0, 1), (-2, 1), (1, -2)] {
            let moved = lifted_eval(a, &g4, &p.translate(m, n)).map_err(err)?;
            ensure(moved == base.translate(m, n), format!("deck ({m},{n}) at {p}"))?;
        }
    }
    Ok("vHv cycles (3,0)+ (0,1)+ (-3,0)+ (0,-1)+; (vHv)^4 fixes 25 marked points and commutes with deck".into())
}

fn contraction(a: &Autos) -> Check {
    let s3 = FieldElem::sqrt3();
    let ratio = &FieldElem::int(97) - &(&FieldElem::int(56) * &s3);
    let l = eigen_directions(a.derivative(&w("vHv")).representative()).map_err(err)?.contracting.value.abs();
    ensure(l.pow(4) == ratio, format!("contracting eigenvalue^4 = {}", l.pow(4)))?;
    let seq = lemma4_sequence(a, 5).map_err(err)?;
    let mut oracle = -s3.clone();
    for e in &seq {
        ensure(e.u == oracle, format!("u_{} = {} expected {}", e.k, e.u, oracle))?;
        oracle = &oracle * &ratio;
    }
    Ok(format!("u_0..u_5 exact; u_5 ~ {:.3e}", seq[5].u.to_f64()))
}

fn torus_density() -> Check {
    let s = canonical_t();
    let start = SurfacePoint::new(0, Vec2::new(fe("1/2"), fe("1/3")));
    let dir = Vec2::new(FieldElem::sqrt3(), FieldElem::one());
    let opts = TraceOptions { detect_closure: false, ..TraceOptions::default() };
    let mut last = 0.0;
    let mut report = Vec::new();
    for budget in [100, 1_000, 10_000, 100_000] {
        let t = trace_leaf::<f64>(&s, &start, &dir, &FieldElem::int(budget), &opts).map_err(err)?;
        let mut g = CoverageGrid::new(&s, 1.0 / 32.0).map_err(err)?;
        g.mark_trace(&t);
        let c = g.coverage();
        ensure(c >= last, format!("coverage fell from {last} to {c} at budget {budget}"))?;
        report.push(format!("{budget}: {c:.4}"));
        last = c;
    }
    ensure(last >= 0.99, format!("coverage {last} at budget 1e5"))?;
    let conns = saddle_connection_search(&s, &dir, &FieldElem::int(100)).map_err(err)?;
    ensure(conns.is_empty(), format!("{} saddle connections in (rt3,1)", conns.len()))?;
    Ok(format!("coverage {}; no saddle connections up to length 100", report.join(", ")))
}

fn deviation() -> Check {
    let (start, dir) = f1_start();
    let (start, dir) = (start.to_f64(), dir.to_f64());
    let rec = deviation_records(&start, &dir, 1e7, (Vec2::new(0.0, 0.0), dir.clone())).map_err(err)?;
    ensure(rec.line.windows(2).all(|p| p[1].dist_line > p[0].dist_line && p[1].arclength >= p[0].arclength), "records not increasing")?;
    let one = rec.first_exceeding(1.0).ok_or("deviation never exceeds 1")?;
    let two = rec.first_exceeding(2.0).ok_or("deviation never exceeds 2")?;
    let fit = rec.log_fit().ok_or("too few records to fit")?;
    ensure(fit.r2 >= 0.9, format!("R^2 = {:.4}", fit.r2))?;
    let control = lift_trace::<f64>(&CoverPoint::new(Vec2::new(fe("1/2"), fe("1/2")), None), &Vec2::ints(1, 0), &FieldElem::int(10_000), 1e-9)
        .map_err(err)?;
    let series = deviation_series(&control.segments, (Vec2::new(0.5, 0.5), Vec2::new(1.0, 0.0)), 10.0).map_err(err)?;
    ensure(series.samples.iter().all(|s| s.dist_line == 0.0), "control line deviates")?;
    Ok(format!(
        "{} records, max {:.3}; >1 at L={one}, >2 at L={two}; dist_origin ~ {:.3} ln L + {:.3}, R^2 = {:.4}; control 0",
        rec.line.len(),
        rec.max_line(),
        fit.slope,
        fit.intercept,
        fit.r2
    ))
}

fn plane_density(a: &Autos) -> Check {
    let (start, dir) = f1_start();
    let (start, dir) = (start.to_f64(), dir.to_f64());
    let targets = [(1, 0), (0, 1), (-1, 0), (0, -1)];
    let pts: Vec<Vec2<f64>> = targets.iter().map(|&(m, n)| Vec2::new(3.0 * m as f64, n as f64)).collect();
    let budget = 1e5;
    let near = nearest_approach(&start, &dir, budget, &pts, 0.0).map_err(err)?;
    for ap in &near {
        ensure(ap.distance < 1e-2, format!("closest to {:?} is {}", ap.target, ap.distance))?;
    }
    // p_1 and its vHv images sit on the leaf next to each target in turn
    let mut q = lemma4_sequence(a, 1).map_err(err)?[1].point.clone();
    let g = w("vHv");
    let mut out = Vec::new();
    for (j, target) in pts.iter().enumerate() {
        let qf = q.p.to_f64();
        let gap = ((qf.x - target.x).powi(2) + (qf.y - target.y).powi(2)).sqrt();
        ensure(gap < 1e-2, format!("predicted point {j} is {gap} from {target:?}"))?;
        let hit = nearest_approach(&start, &dir, budget, &[qf], 0.0).map_err(err)?;
        ensure(hit[0].distance < 1e-9, format!("leaf misses predicted point {j} by {}", hit[0].distance))?;
        out.push(format!("{:?} {:.1e} @L={}", target, near[j].distance, near[j].arclength));
        q = lifted_eval(a, &g, &q).map_err(err)?;
    }
    Ok(format!("within 1e-2 of all four by L=1e5: {}", out.join(", ")))
}

fn billiard() -> Check {
    let quarter = fe("1/4");
    let axis = build_cross_scene(quarter.clone(), Orientation::Axis).map_err(err)?;
    let diag = build_cross_scene(quarter, Orientation::Diagonal).map_err(err)?;
    let one = fe("1/2");
    let cases = [
        (&axis, Vec2::new(fe("1/16"), fe("-1/16")), Vec2::ints(1, 1), Vec2::ints(1, -1)),
        (&axis, Vec2::new(fe("-1/16"), fe("1/16")), Vec2::ints(1, 1), Vec2::ints(-1, 1)),
        (&diag, Vec2::new(fe("-1/2"), fe("1/8")), Vec2::ints(1, 0), Vec2::ints(0, -1)),
    ];
    for (scene, start, d, want) in cases {
        let t = trace_ray(scene, &start, &d, &one, 0.0).map_err(err)?;
        ensure(t.directions.get(1) == Some(&want), format!("{d} reflected to {:?}", t.directions.get(1)))?;
    }
    let start = Vec2::new(fe("1/7*rt3"), fe("1/3"));
    let budget = FieldElem::int(10_000);
    let t = trace_ray(&axis, &start, &bisectrix(), &budget, 0.0).map_err(err)?;
    ensure(t.termination == RayTermination::BudgetExhausted, format!("{:?}", t.termination))?;
    ensure(t.bounces >= 10_000, format!("only {} bounces", t.bounces))?;
    let mut dirs = t.directions.clone();
    dirs.sort_by(|a, b| (a.x.clone(), a.y.clone()).cmp(&(b.x.clone(), b.y.clone())));
    dirs.dedup();
    ensure(dirs.len() <= 4, format!("{} directions", dirs.len()))?;
    let short = FieldElem::int(2_000);
    let fwd = trace_ray(&axis, &start, &bisectrix(), &short, 0.0).map_err(err)?;
    let back = trace_ray(&axis, fwd.end(), &-fwd.final_direction().clone(), &short, 0.0).map_err(err)?;
    ensure(back.end() == &start && back.bounces == fwd.bounces, "reversed ray does not retrace")?;
    let shift = Vec2::ints(5, -3);
    let moved = trace_ray(&axis, &(start.clone() + shift.clone()), &bisectrix(), &short, 0.0).map_err(err)?;
    ensure(moved.end() == &(fwd.end().clone() + shift), "lattice translate changes the trace")?;
    Ok(format!("specular cases, reversal, Z2 shift; {} bounces with {} directions", t.bounces, dirs.len()))
}

fn round_trip() -> Check {
    let s = canonical_t();
    let opts = TraceOptions { detect_closure: false, ..TraceOptions::default() };
    let starts = [("1/2", "1/3"), ("-2/3", "5/7"), ("7/4", "1/9"), ("1/5*rt3", "2/3")];
    let dirs = [("rt3", "1"), ("-rt3", "1"), ("2", "1"), ("1", "-3"), ("1+rt3", "2"), ("0", "1")];
    let mut total = 0;
    for (x, y) in starts {
        for (dx, dy) in dirs {
            let p = Vec2::new(fe(x), fe(y));
            let d = Vec2::new(fe(dx), fe(dy));
            let budget = FieldElem::int(100);
            let up = lift_trace::<FieldElem>(&CoverPoint::new(p.clone(), None), &d, &budget, 0.0).map_err(err)?;
            let down = trace_leaf::<FieldElem>(&s, &SurfacePoint::new(0, p.clone()), &d, &budget, &opts).map_err(err)?;
            let proj = project_trace(&up);
            ensure(proj == down.segments, format!("start {p} dir {d}: {} vs {} segments", proj.len(), down.segments.len()))?;
            total += proj.len();
        }
    }
    Ok(format!("24 exact traces of length 100 agree segment by segment ({total} segments)"))
}

fn main() -> ExitCode {
    let autos = match Autos::new() {
        Ok(a) => a,
        Err(e) => {
            println!("FAIL  automorphisms unavailable: {e}");
            return ExitCode::FAILURE;
        }
    };
    let a = &autos;
    let secs = Duration::from_secs;
    let criteria: Vec<(&str, Duration, Box<dyn Fn() -> Check + '_>)> = vec![
        ("cone census", secs(1), Box::new(census)),
        ("cylinder decompositions", secs(1), Box::new(cylinders)),
        ("derivatives and eigen-directions", secs(1), Box::new(|| derivatives(a))),
        ("action on homology", secs(10), Box::new(|| homology(a))),
        ("cone point permutations", secs(1), Box::new(|| permutations(a))),
        ("lifts to the plane", secs(60), Box::new(|| lifts(a))),
        ("contraction sequence", secs(60), Box::new(|| contraction(a))),
        ("torus density", secs(600), Box::new(torus_density)),
        ("unbounded deviation", secs(600), Box::new(deviation)),
        ("plane density", secs(600), Box::new(|| plane_density(a))),
        ("billiard sanity", secs(60), Box::new(billiard)),
        ("cover round trip", secs(60), Box::new(round_trip)),
    ];
    let mut failed = 0;
    for (i, (name, limit, check)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let outcome = check();
        let dt = t0.elapsed();
        let outcome = match outcome {
            Ok(d) if dt > *limit => Err(format!("{d} (over the {}s limit)", limit.as_secs())),
            o => o,
        };
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        if outcome.is_err() {
            failed += 1;
        }
        println!("{tag}  {:>2}. {name} [{:.2}s]: {detail}", i + 1, dt.as_secs_f64());
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

//! Browser bindings: the folded torus, its planar cover and the cross billiard,
//! each returning a JSON document the page draws on a canvas.
//!
//! The functions in [`api`] do the work and are callable natively; the
//! `#[wasm_bindgen]` exports only convert their errors.

use wasm_bindgen::prelude::*;

pub mod api {
    use foldtorus::billiard::{build_cross_scene, trace_ray, Orientation, RayTermination};
    use foldtorus::cover::{deviation_records_of, lift_trace, CoverPoint, CoverTermination, Shore};
    use foldtorus::flow::{budget_param, trace_leaf, Mode, Termination, TraceOptions, SNAP_TOL};
    use foldtorus::{canonical_t, FieldElem, Point, Scalar, SurfacePoint, Vec2};
    use serde_json::{json, Value};

    /// Largest accepted budget; keeps a page responsive.
    pub const MAX_BUDGET: f64 = 20_000.0;

    type Res = Result<String, String>;

    fn elem(s: &str) -> Result<FieldElem, String> {
        s.parse().map_err(|e: foldtorus::Error| e.to_string())
    }

    fn pair(s: &str) -> Result<Point, String> {
        Vec2::parse_pair(s).map_err(|e| e.to_string())
    }

    fn budget(s: &str) -> Result<FieldElem, String> {
        let b = elem(s)?;
        if b.sign() <= 0 || b.to_f64() > MAX_BUDGET {
            return Err(format!("budget must lie in (0, {MAX_BUDGET}]"));
        }
        Ok(b)
    }

    fn mode(s: &str) -> Result<Mode, String> {
        s.parse().map_err(|e: foldtorus::Error| e.to_string())
    }

    fn xy<S: Scalar>(p: &Vec2<S>) -> [f64; 2] {
        let p = p.to_f64s();
        [p.x, p.y]
    }

    fn seg<S: Scalar>(a: &Vec2<S>, b: &Vec2<S>) -> [f64; 4] {
        let (a, b) = (a.to_f64s(), b.to_f64s());
        [a.x, a.y, b.x, b.y]
    }

    fn done(v: Value) -> Res {
        Ok(v.to_string())
    }

    /// Polygons, fold edges and cone points of the folded torus.
    pub fn surface_outline() -> Res {
        let s = canonical_t();
        let mut folds = Vec::new();
        for (i, poly) in s.polygons().iter().enumerate() {
            for e in 0..poly.len() {
                if s.is_fold_edge(i, e) {
                    let (a, b) = s.edge(i, e);
                    folds.push(seg(a, b));
                }
            }
        }
        let polygons: Vec<Vec<[f64; 2]>> = s.polygons().iter().map(|p| p.iter().map(xy).collect()).collect();
        let cones: Vec<Value> = s.cone_census().iter().map(|c| json!({ "label": c.label, "angle_pi": c.angle_pi, "point": xy(&c.representative.p) })).collect();
        done(json!({ "polygons": polygons, "folds": folds, "cones": cones }))
    }

    fn termination(t: &Termination) -> String {
        match t {
            Termination::BudgetExhausted => "budget exhausted".into(),
            Termination::Closed => "closed leaf".into(),
            Termination::HitConePoint(id) => format!("hit cone point {id}"),
        }
    }

    /// Straight-line leaf on the folded torus from a point of polygon 0.
    pub fn torus_trace(start: &str, dir: &str, budget_s: &str, mode_s: &str) -> Res {
        let s = canonical_t();
        let (start, dir, budget, mode) = (pair(start)?, pair(dir)?, budget(budget_s)?, mode(mode_s)?);
        let sp = SurfacePoint::new(0, start);
        let opts = TraceOptions::default();
        let (segments, term, length, units): (Vec<(usize, [f64; 4])>, Termination, f64, bool) = match mode {
            Mode::Exact => {
                let t = trace_leaf::<FieldElem>(&s, &sp, &dir, &budget, &opts).map_err(|e| e.to_string())?;
                (t.segments.iter().map(|g| (g.poly, seg(&g.a, &g.b))).collect(), t.termination, t.arclength_f64(), t.direction_units)
            }
            Mode::Float => {
                let t = trace_leaf::<f64>(&s, &sp, &dir, &budget, &opts).map_err(|e| e.to_string())?;
                (t.segments.iter().map(|g| (g.poly, seg(&g.a, &g.b))).collect(), t.termination, t.arclength_f64(), t.direction_units)
            }
        };
        let polys: Vec<usize> = segments.iter().map(|s| s.0).collect();
        let segs: Vec<[f64; 4]> = segments.into_iter().map(|s| s.1).collect();
        done(json!({
            "segments": segs,
            "polys": polys,
            "termination": termination(&term),
            "arclength": length,
            "direction_units": units,
        }))
    }

    fn shore(s: &str) -> Result<Option<Shore>, String> {
        match s {
            "" => Ok(None),
            "+" => Ok(Some(Shore::Plus)),
            "-" => Ok(Some(Shore::Minus)),
            _ => Err(format!("shore `{s}` (expected +, - or empty)")),
        }
    }

    fn cover_termination(t: &CoverTermination) -> String {
        match t {
            CoverTermination::BudgetExhausted => "budget exhausted".into(),
            CoverTermination::PiPoint { m, n, shore } => format!("hit slit center ({}, {n}){shore}", 3 * m),
            CoverTermination::FourPiPoint { x, n } => format!("hit slit endpoint ({x}, {n})"),
        }
    }

    /// Lifted leaf in the slit plane, with deviation records from its
    /// initial line. An empty `start` means (0,0)+.
    pub fn cover_trace(start: &str, shore_s: &str, dir: &str, budget_s: &str, mode_s: &str) -> Res {
        let (p, sh) = if start.is_empty() { (Vec2::ints(0, 0), Some(Shore::Plus)) } else { (pair(start)?, shore(shore_s)?) };
        let (dir, budget, mode) = (pair(dir)?, budget(budget_s)?, mode(mode_s)?);
        let cp = CoverPoint::new(p, sh);
        let line = (cp.p.to_f64(), dir.to_f64());
        let (segs, term, length, rec) = match mode {
            Mode::Exact => {
                let t = lift_trace::<FieldElem>(&cp, &dir, &budget, 0.0).map_err(|e| e.to_string())?;
                let rec = deviation_records_of(&t.segments, line);
                (t.segments.iter().map(|(a, b)| seg(a, b)).collect::<Vec<_>>(), t.termination, t.arclength_f64(), rec)
            }
            Mode::Float => {
                let t = lift_trace::<f64>(&cp, &dir, &budget, SNAP_TOL).map_err(|e| e.to_string())?;
                let rec = deviation_records_of(&t.segments, line);
                (t.segments.iter().map(|(a, b)| seg(a, b)).collect::<Vec<_>>(), t.termination, t.arclength_f64(), rec)
            }
        };
        let records: Vec<[f64; 2]> = rec.line.iter().map(|r| [r.arclength, r.dist_line]).collect();
        done(json!({
            "segments": segs,
            "termination": cover_termination(&term),
            "arclength": length,
            "max_deviation": rec.max_line(),
            "records": records,
        }))
    }

    fn ray_termination(t: &RayTermination) -> String {
        match t {
            RayTermination::BudgetExhausted => "budget exhausted",
            RayTermination::HitArmEndpoint => "hit arm endpoint",
            RayTermination::HitCrossCenter => "hit cross center",
        }
        .into()
    }

    /// Directions counted up to a 1e-9 grid, so both modes agree.
    fn distinct<S: Scalar>(ds: &[Vec2<S>]) -> usize {
        let keys: std::collections::BTreeSet<(i64, i64)> = ds.iter().map(|d| {
            let d = d.to_f64s();
            ((d.x * 1e9).round() as i64, (d.y * 1e9).round() as i64)
        }).collect();
        keys.len()
    }

    /// Billiard ray among the periodic crosses of half-arm `arm`.
    pub fn billiard(arm: &str, orientation: &str, start: &str, dir: &str, budget_s: &str, mode_s: &str) -> Res {
        let orient: Orientation = orientation.parse().map_err(|e: foldtorus::Error| e.to_string())?;
        let (arm, start, dir, budget, mode) = (elem(arm)?, pair(start)?, pair(dir)?, budget(budget_s)?, mode(mode_s)?);
        let (segs, bounces, term, directions): (Vec<[f64; 4]>, usize, String, usize) = match mode {
            Mode::Exact => {
                let scene = build_cross_scene(arm.clone(), orient).map_err(|e| e.to_string())?;
                let t = trace_ray(&scene, &start, &dir, &budget, 0.0).map_err(|e| e.to_string())?;
                (t.segments.iter().map(|(a, b)| seg(a, b)).collect(), t.bounces, ray_termination(&t.termination), distinct(&t.directions))
            }
            Mode::Float => {
                let scene = build_cross_scene(arm.to_f64(), orient).map_err(|e| e.to_string())?;
                let (time, _): (f64, bool) = budget_param(&dir, &budget);
                let fdir = dir.to_f64();
                let t = trace_ray(&scene, &start.to_f64(), &fdir, &(time * fdir.length()), SNAP_TOL).map_err(|e| e.to_string())?;
                (t.segments.iter().map(|(a, b)| seg(a, b)).collect(), t.bounces, ray_termination(&t.termination), distinct(&t.directions))
            }
        };
        done(json!({
            "segments": segs,
            "bounces": bounces,
            "termination": term,
            "distinct_directions": directions,
            "arm": arm.to_f64(),
            "orientation": orient.to_string(),
        }))
    }
}

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = surfaceOutline)]
pub fn surface_outline() -> Result<String, JsError> {
    js(api::surface_outline())
}

#[wasm_bindgen(js_name = torusTrace)]
pub fn torus_trace(start: &str, dir: &str, budget: &str, mode: &str) -> Result<String, JsError> {
    js(api::torus_trace(start, dir, budget, mode))
}

#[wasm_bindgen(js_name = coverTrace)]
pub fn cover_trace(start: &str, shore: &str, dir: &str, budget: &str, mode: &str) -> Result<String, JsError> {
    js(api::cover_trace(start, shore, dir, budget, mode))
}

#[wasm_bindgen(js_name = billiardRay)]
pub fn billiard_ray(arm: &str, orientation: &str, start: &str, dir: &str, budget: &str, mode: &str) -> Result<String, JsError> {
    js(api::billiard(arm, orientation, start, dir, budget, mode))
}

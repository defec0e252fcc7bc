//! Straight-line flow on a half-translation surface.
//!
//! The tracer is generic over [`Scalar`]: on [`FieldElem`] every event is
//! decided exactly, on `f64` edge events snap within a tolerance and closure
//! is never claimed.

use std::collections::HashMap;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::qfield::{FieldElem, Point, Scalar, Vec2};
use crate::surface::{in_closed, in_half_open, Corner, Location, Surface, SurfacePoint};

pub const SNAP_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Exact,
    Float,
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Mode::Exact),
            "float" => Ok(Mode::Float),
            _ => Err(Error::InvalidParameter(format!("mode `{s}` (expected exact or float)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChartSegment<S = FieldElem> {
    pub poly: usize,
    pub a: Vec2<S>,
    pub b: Vec2<S>,
}

impl ChartSegment<FieldElem> {
    pub fn to_f64(&self) -> ChartSegment<f64> {
        ChartSegment { poly: self.poly, a: self.a.to_f64(), b: self.b.to_f64() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    BudgetExhausted,
    HitConePoint(usize),
    Closed,
}

#[derive(Clone, Debug)]
pub struct LeafTrace<S = FieldElem> {
    pub segments: Vec<ChartSegment<S>>,
    pub direction: Vec2<S>,
    pub final_direction: Vec2<S>,
    /// Total flow time in units of `|direction|`.
    pub param: S,
    /// Euclidean length, or `param` when `|direction|` is not representable.
    pub arclength: S,
    pub direction_units: bool,
    pub termination: Termination,
    pub end_corner: Option<Corner>,
}

impl<S: Scalar> LeafTrace<S> {
    pub fn arclength_f64(&self) -> f64 {
        self.param.to_f64() * self.direction.norm_sq().to_f64().sqrt()
    }

    pub fn end(&self) -> Option<SurfacePoint<S>> {
        self.segments.last().map(|s| SurfacePoint::new(s.poly, s.b.clone()))
    }
}

impl LeafTrace<FieldElem> {
    pub fn to_f64(&self) -> LeafTrace<f64> {
        LeafTrace {
            segments: self.segments.iter().map(ChartSegment::to_f64).collect(),
            direction: self.direction.to_f64(),
            final_direction: self.final_direction.to_f64(),
            param: self.param.to_f64(),
            arclength: self.arclength.to_f64(),
            direction_units: self.direction_units,
            termination: self.termination,
            end_corner: self.end_corner,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Event {
    Crossed,
    Truncated,
    Cone(usize, Corner),
}

#[derive(Clone, Debug)]
pub struct Step<S> {
    pub segment: ChartSegment<S>,
    pub param: S,
    pub event: Event,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Hit {
    Edge(usize),
    Vertex(usize),
    Midpoint(usize),
}

/// Event-by-event leaf tracer.
pub struct Tracer<'a, S: Scalar> {
    surface: &'a Surface,
    verts: Vec<Vec<Vec2<S>>>,
    tol: f64,
    dir_len: f64,
    poly: usize,
    pos: Vec2<S>,
    dir: Vec2<S>,
}

impl<'a, S: Scalar> Tracer<'a, S> {
    fn bare(surface: &'a Surface, poly: usize, pos: Vec2<S>, dir: Vec2<S>, tol: f64) -> Result<Self> {
        if dir.is_zero_tol(if S::EXACT { 0.0 } else { tol }) {
            return Err(Error::ZeroDirection);
        }
        if poly >= surface.polygons().len() {
            return Err(Error::OutsideSurface(format!("no polygon {poly}")));
        }
        let verts = surface.polygons().iter().map(|p| p.iter().map(Vec2::<S>::from_field).collect()).collect();
        let dir_len = dir.norm_sq().to_f64().sqrt();
        Ok(Tracer { surface, verts, tol: if S::EXACT { 0.0 } else { tol }, dir_len, poly, pos, dir })
    }

    /// Start at a chart point. A start on an edge pointing outward moves to
    /// the partner chart; a start at a cone point requires an outgoing prong.
    pub fn new(surface: &'a Surface, start: &SurfacePoint<S>, dir: &Vec2<S>, tol: f64) -> Result<Self> {
        let mut t = Self::bare(surface, start.poly, start.p.clone(), dir.clone(), tol)?;
        t.resolve_start()?;
        Ok(t)
    }

    pub fn at_corner(surface: &'a Surface, corner: &Corner, dir: &Vec2<S>, tol: f64) -> Result<Self> {
        let t = Self::bare(surface, corner.poly(), Vec2::from_field(&surface.corner_point(corner)), dir.clone(), tol)?;
        let (u, w) = t.sector(corner);
        if !in_closed(dir, &u, &w, t.tol) {
            return Err(Error::NotAProng(format!("{corner:?}")));
        }
        Ok(t)
    }

    pub fn poly(&self) -> usize {
        self.poly
    }

    pub fn pos(&self) -> &Vec2<S> {
        &self.pos
    }

    pub fn dir(&self) -> &Vec2<S> {
        &self.dir
    }

    fn vertex(&self, poly: usize, i: usize) -> &Vec2<S> {
        let p = &self.verts[poly];
        &p[i % p.len()]
    }

    fn sector(&self, c: &Corner) -> (Vec2<S>, Vec2<S>) {
        match *c {
            Corner::Vertex { poly, vertex } => {
                let n = self.verts[poly].len();
                let v = self.vertex(poly, vertex).clone();
                (self.vertex(poly, vertex + 1).clone() - v.clone(), self.vertex(poly, vertex + n - 1).clone() - v)
            }
            Corner::Midpoint { poly, edge } => {
                let (a, b) = (self.vertex(poly, edge).clone(), self.vertex(poly, edge + 1).clone());
                let m = a.midpoint(&b);
                (b - m.clone(), a - m)
            }
        }
    }

    fn corner_point(&self, c: &Corner) -> Vec2<S> {
        match *c {
            Corner::Vertex { poly, vertex } => self.vertex(poly, vertex).clone(),
            Corner::Midpoint { poly, edge } => self.vertex(poly, edge).midpoint(self.vertex(poly, edge + 1)),
        }
    }

    fn locate(&self, poly: usize, p: &Vec2<S>) -> Location {
        let vs = &self.verts[poly];
        let n = vs.len();
        let mut on_edge = None;
        for i in 0..n {
            let (a, b) = (&vs[i], &vs[(i + 1) % n]);
            if p.approx_eq(a, self.tol) {
                return Location::Vertex(i);
            }
            let e = b.clone() - a.clone();
            let elen = e.norm_sq().to_f64().sqrt();
            let side = e.cross(&(p.clone() - a.clone())).sign_tol(self.tol * elen);
            if side < 0 {
                return Location::Outside;
            }
            if side == 0 && on_edge.is_none() {
                let along = e.dot(&(p.clone() - a.clone()));
                if along.sign_tol(0.0) > 0 && along < e.norm_sq() {
                    on_edge = Some(i);
                }
            }
        }
        on_edge.map_or(Location::Interior, Location::Edge)
    }

    fn resolve_start(&mut self) -> Result<()> {
        let poly = self.poly;
        match self.locate(poly, &self.pos) {
            Location::Outside => Err(Error::OutsideSurface(format!("polygon {poly} {:?}", self.pos))),
            Location::Interior => Ok(()),
            Location::Edge(i) => {
                let (a, b) = (self.vertex(poly, i).clone(), self.vertex(poly, i + 1).clone());
                let e = b.clone() - a.clone();
                let outward = e.cross(&self.dir).sign_tol(self.tol * self.dir_len) < 0;
                let m = a.midpoint(&b);
                if self.surface.is_fold_edge(poly, i) && self.pos.approx_eq(&m, self.tol) {
                    if outward {
                        return Err(Error::NotAProng(format!("fold midpoint of edge {poly}:{i}")));
                    }
                    self.pos = m;
                    return Ok(());
                }
                if outward {
                    let l = self.surface.link(poly, i).ok_or_else(|| Error::InvalidSurface(format!("unglued edge {poly}:{i}")))?;
                    self.pos = l.apply(&self.pos);
                    self.dir = l.apply_dir(&self.dir);
                    self.poly = l.other.poly;
                }
                Ok(())
            }
            Location::Vertex(i) => {
                let corner = Corner::Vertex { poly, vertex: i };
                self.pos = self.vertex(poly, i).clone();
                let (u, w) = self.sector(&corner);
                if in_closed(&self.dir, &u, &w, self.tol) {
                    return Ok(());
                }
                let class = self.surface.class_of_vertex(poly, i);
                if self.surface.is_cone_class(class) {
                    return Err(Error::NotAProng(format!("vertex {poly}:{i}")));
                }
                let mut cur = corner;
                let mut sign = 1i8;
                for _ in 0..=self.surface.classes()[class].corners.len() {
                    let (c, s) = self.surface.next_ccw(&cur).ok_or_else(|| Error::InvalidSurface("unglued corner".into()))?;
                    cur = c;
                    sign *= s;
                    let d = if sign > 0 { self.dir.clone() } else { -self.dir.clone() };
                    let (u, w) = self.sector(&cur);
                    if in_closed(&d, &u, &w, self.tol) {
                        self.poly = cur.poly();
                        self.pos = self.corner_point(&cur);
                        self.dir = d;
                        return Ok(());
                    }
                }
                Err(Error::InvalidSurface(format!("no corner at vertex {poly}:{i} contains the direction")))
            }
        }
    }

    /// Continue straight through a regular vertex reached with direction `dir`.
    fn pass_vertex(&mut self, arrival: Corner) -> Result<()> {
        let back = -self.dir.clone();
        let (_, w0) = self.sector(&arrival);
        if in_half_open(&self.dir, &back, &w0, self.tol) {
            self.poly = arrival.poly();
            self.pos = self.corner_point(&arrival);
            return Ok(());
        }
        let class = self.surface.classes()[match arrival {
            Corner::Vertex { poly, vertex } => self.surface.class_of_vertex(poly, vertex),
            Corner::Midpoint { .. } => unreachable!("fold midpoints are cone points"),
        }]
        .corners
        .len();
        let mut cur = arrival;
        let mut sign = 1i8;
        for _ in 0..=class {
            let (c, s) = self.surface.next_ccw(&cur).ok_or_else(|| Error::InvalidSurface("unglued corner".into()))?;
            cur = c;
            sign *= s;
            let d = if sign > 0 { self.dir.clone() } else { -self.dir.clone() };
            let (u, w) = self.sector(&cur);
            if in_half_open(&d, &u, &w, self.tol) {
                self.poly = cur.poly();
                self.pos = self.corner_point(&cur);
                self.dir = d;
                return Ok(());
            }
        }
        Err(Error::InvalidSurface("corner walk did not close".into()))
    }

    /// Flow to the next event, or for at most `limit` units of flow time.
    pub fn advance(&mut self, limit: Option<&S>) -> Result<Step<S>> {
        let p = self.pos.clone();
        let d = self.dir.clone();
        let poly = self.poly;
        let dd = d.norm_sq();
        let n = self.verts[poly].len();
        let ttol = self.tol / self.dir_len.max(f64::MIN_POSITIVE);
        // Rank ties: points before edges containing the hit, then other edges.
        let consider = |t: S, hit: Hit, rank: u8, best: &mut Option<(S, Hit, u8)>| {
            let replace = match best {
                None => true,
                Some((bt, _, br)) => {
                    let diff = (t.clone() - bt.clone()).sign_tol(ttol);
                    diff < 0 || (diff == 0 && rank < *br)
                }
            };
            if replace {
                *best = Some((t, hit, rank));
            }
        };
        let mut best: Option<(S, Hit, u8)> = None;
        for i in 0..n {
            let a = self.vertex(poly, i).clone();
            let e = self.vertex(poly, i + 1).clone() - a.clone();
            let elen = e.norm_sq().to_f64().sqrt();
            if e.cross(&d).sign_tol(self.tol * elen * self.dir_len) < 0 {
                let mut t = (a.clone() - p.clone()).cross(&e) / d.cross(&e);
                if t.sign_tol(0.0) < 0 {
                    t = S::zero();
                }
                let along = (p.clone() + d.scale(&t) - a.clone()).dot(&e);
                let inside = along.sign_tol(self.tol * elen) >= 0 && (along - e.norm_sq()).sign_tol(self.tol * elen) <= 0;
                consider(t, Hit::Edge(i), if inside { 1 } else { 2 }, &mut best);
            }
            let rel = a - p.clone();
            if rel.cross(&d).sign_tol(self.tol * self.dir_len) == 0 {
                let t = rel.dot(&d) / dd.clone();
                if t.sign_tol(ttol) > 0 {
                    consider(t, Hit::Vertex(i), 0, &mut best);
                }
            }
            if self.surface.is_fold_edge(poly, i) {
                let rel = self.vertex(poly, i).midpoint(self.vertex(poly, i + 1)) - p.clone();
                if rel.cross(&d).sign_tol(self.tol * self.dir_len) == 0 {
                    let t = rel.dot(&d) / dd.clone();
                    if t.sign_tol(ttol) > 0 {
                        consider(t, Hit::Midpoint(i), 0, &mut best);
                    }
                }
            }
        }
        let (t, hit, _) = best.ok_or_else(|| Error::InvalidSurface(format!("no exit from polygon {poly}")))?;
        if let Some(lim) = limit {
            if *lim < t {
                let end = p.clone() + d.scale(lim);
                self.pos = end.clone();
                return Ok(Step { segment: ChartSegment { poly, a: p, b: end }, param: lim.clone(), event: Event::Truncated });
            }
        }
        let (end, event) = match hit {
            Hit::Edge(i) => {
                let end = p.clone() + d.scale(&t);
                let l = self.surface.link(poly, i).ok_or_else(|| Error::InvalidSurface(format!("unglued edge {poly}:{i}")))?;
                self.pos = l.apply(&end);
                self.dir = l.apply_dir(&d);
                self.poly = l.other.poly;
                (end, Event::Crossed)
            }
            Hit::Midpoint(i) => {
                let corner = Corner::Midpoint { poly, edge: i };
                let id = self.surface.class_of_midpoint(poly, i).expect("fold edge has a midpoint class");
                let end = self.corner_point(&corner);
                self.pos = end.clone();
                (end, Event::Cone(id, corner))
            }
            Hit::Vertex(j) => {
                let corner = Corner::Vertex { poly, vertex: j };
                let end = self.vertex(poly, j).clone();
                let id = self.surface.class_of_vertex(poly, j);
                if self.surface.is_cone_class(id) {
                    self.pos = end.clone();
                    (end, Event::Cone(id, corner))
                } else {
                    self.pass_vertex(corner)?;
                    (end, Event::Crossed)
                }
            }
        };
        Ok(Step { segment: ChartSegment { poly, a: p, b: end }, param: t, event })
    }
}

#[derive(Clone, Debug)]
pub struct TraceOptions {
    pub snap_tol: f64,
    pub detect_closure: bool,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions { snap_tol: SNAP_TOL, detect_closure: true }
    }
}

/// Flow time for `budget` length units, or `budget` itself with the flag set
/// when |dir| is not in the field. Decided exactly in both modes.
pub fn budget_param<S: Scalar>(dir: &Point, budget: &FieldElem) -> (S, bool) {
    match dir.norm_sq().sqrt() {
        Some(len) => (S::from_field(&(budget / &len)), false),
        None => (S::from_field(budget), true),
    }
}

fn closure_point<S: Scalar>(seg: &ChartSegment<S>, reps: &[SurfacePoint<S>]) -> Option<S> {
    let v = seg.b.clone() - seg.a.clone();
    let vv = v.norm_sq();
    if vv.sign_tol(0.0) == 0 {
        return None;
    }
    reps.iter().filter(|r| r.poly == seg.poly).find_map(|r| {
        let rel = r.p.clone() - seg.a.clone();
        if rel.cross(&v).sign_tol(0.0) != 0 {
            return None;
        }
        let lam = rel.dot(&v) / vv.clone();
        (lam.sign_tol(0.0) > 0 && lam <= S::one()).then_some(lam)
    })
}

fn run<S: Scalar>(mut tracer: Tracer<'_, S>, dir: &Point, budget: &FieldElem, reps: Vec<SurfacePoint<S>>) -> Result<LeafTrace<S>> {
    if budget.sign() <= 0 {
        return Err(Error::InvalidParameter("budget must be positive".into()));
    }
    let direction = tracer.dir.clone();
    let (total, direction_units): (S, bool) = budget_param(dir, budget);
    let mut param = S::zero();
    let mut segments = Vec::new();
    let (termination, end_corner) = loop {
        let left = total.clone() - param.clone();
        let step = tracer.advance(Some(&left))?;
        if let Some(lam) = closure_point(&step.segment, &reps) {
            let seg = step.segment;
            let end = seg.a.clone() + (seg.b.clone() - seg.a.clone()).scale(&lam);
            param = param + step.param * lam;
            segments.push(ChartSegment { poly: seg.poly, a: seg.a, b: end });
            break (Termination::Closed, None);
        }
        param = param + step.param;
        segments.push(step.segment);
        match step.event {
            Event::Crossed => {}
            Event::Truncated => break (Termination::BudgetExhausted, None),
            Event::Cone(id, c) => break (Termination::HitConePoint(id), Some(c)),
        }
    };
    let arclength = match direction.norm_sq().sqrt_opt() {
        Some(len) if !direction_units => param.clone() * len,
        _ => param.clone(),
    };
    Ok(LeafTrace { segments, final_direction: tracer.dir.clone(), direction, param, arclength, direction_units, termination, end_corner })
}

/// Trace the leaf through `start` in direction `dir` for `budget` length units.
pub fn trace_leaf<S: Scalar>(s: &Surface, start: &SurfacePoint, dir: &Point, budget: &FieldElem, opts: &TraceOptions) -> Result<LeafTrace<S>> {
    let sp = SurfacePoint::new(start.poly, Vec2::<S>::from_field(&start.p));
    let tracer = Tracer::new(s, &sp, &Vec2::from_field(dir), opts.snap_tol)?;
    let reps = if S::EXACT && opts.detect_closure && s.cone_at(start).is_none() {
        let first = SurfacePoint::new(tracer.poly, tracer.pos.clone());
        let mut reps: Vec<SurfacePoint<S>> = s
            .representatives(start)?
            .into_iter()
            .map(|r| SurfacePoint::new(r.poly, Vec2::from_field(&r.p)))
            .collect();
        reps.retain(|r| *r != first);
        reps.push(first);
        reps
    } else {
        Vec::new()
    };
    run(tracer, dir, budget, reps)
}

/// Trace a separatrix leaving `corner` in direction `dir`.
pub fn trace_from_corner<S: Scalar>(s: &Surface, corner: &Corner, dir: &Point, budget: &FieldElem, opts: &TraceOptions) -> Result<LeafTrace<S>> {
    let tracer = Tracer::at_corner(s, corner, &Vec2::from_field(dir), opts.snap_tol)?;
    run(tracer, dir, budget, Vec::new())
}

/// An outgoing direction at a cone point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Prong {
    pub cone: usize,
    pub corner: Corner,
    pub dir: Point,
}

/// Every outgoing prong in `±dir` at every cone point.
pub fn prongs(s: &Surface, dir: &Point) -> Vec<Prong> {
    let mut out = Vec::new();
    for cone in s.cone_census() {
        for c in &s.classes()[cone.id].corners {
            let (u, w) = s.sector(c);
            for d in [dir.clone(), -dir.clone()] {
                if in_half_open(&d, &u, &w, 0.0) {
                    out.push(Prong { cone: cone.id, corner: *c, dir: d });
                }
            }
        }
    }
    out
}

/// The prong whose leaf arrives at `corner` travelling along `final_dir`.
pub fn arrival_prong(s: &Surface, corner: &Corner, final_dir: &Point) -> Option<Prong> {
    let r = -final_dir.clone();
    let cone = match *corner {
        Corner::Vertex { poly, vertex } => s.class_of_vertex(poly, vertex),
        Corner::Midpoint { poly, edge } => s.class_of_midpoint(poly, edge)?,
    };
    let (u, w) = s.sector(corner);
    if in_half_open(&r, &u, &w, 0.0) {
        return Some(Prong { cone, corner: *corner, dir: r });
    }
    if r.same_dir(&u, 0.0) {
        let (c, sign) = s.prev_cw(corner)?;
        let d = if sign > 0 { r } else { -r };
        let (u, w) = s.sector(&c);
        return in_half_open(&d, &u, &w, 0.0).then_some(Prong { cone, corner: c, dir: d });
    }
    None
}

#[derive(Clone, Debug)]
pub struct SaddleConnection {
    pub from: Prong,
    pub to: Prong,
    pub trace: LeafTrace<FieldElem>,
}

/// Separatrices in `±dir` that end at a cone point within `budget`, one per
/// connection.
pub fn saddle_connection_search(s: &Surface, dir: &Point, budget: &FieldElem) -> Result<Vec<SaddleConnection>> {
    Ok(separatrices(s, dir, budget)?
        .into_iter()
        .filter_map(|(_, c)| c)
        .collect())
}

/// Every separatrix trace, paired with its connection when it closes up and
/// was not already reported from the other end.
fn separatrices(s: &Surface, dir: &Point, budget: &FieldElem) -> Result<Vec<(LeafTrace<FieldElem>, Option<SaddleConnection>)>> {
    if dir.x.is_zero() && dir.y.is_zero() {
        return Err(Error::ZeroDirection);
    }
    let all = prongs(s, dir);
    let opts = TraceOptions::default();
    let mut seen: Vec<(usize, usize)> = Vec::new();
    let mut out = Vec::new();
    for (i, p) in all.iter().enumerate() {
        let trace = trace_from_corner::<FieldElem>(s, &p.corner, &p.dir, budget, &opts)?;
        let mut conn = None;
        if let (Termination::HitConePoint(_), Some(c)) = (trace.termination, trace.end_corner) {
            let to = arrival_prong(s, &c, &trace.final_direction).ok_or_else(|| Error::InvalidSurface("unresolved arrival prong".into()))?;
            let j = all.iter().position(|q| *q == to).ok_or_else(|| Error::InvalidSurface("arrival is not a prong".into()))?;
            let key = (i.min(j), i.max(j));
            if !seen.contains(&key) {
                seen.push(key);
                conn = Some(SaddleConnection { from: p.clone(), to, trace: trace.clone() });
            }
        }
        out.push((trace, conn));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cylinder {
    pub direction: Point,
    pub circumference: FieldElem,
    pub width: FieldElem,
    /// Indices of the saddle connections met by a transversal, one per side.
    pub boundary: Vec<usize>,
}

impl Cylinder {
    pub fn area(&self) -> FieldElem {
        &self.circumference * &self.width
    }

    /// "width×circumference", the height-by-length convention.
    pub fn label(&self) -> String {
        format!("{}x{}", short(&self.width), short(&self.circumference))
    }
}

pub fn short(x: &FieldElem) -> String {
    if x.is_rational() {
        x.a().to_string()
    } else {
        x.to_string()
    }
}

#[derive(Clone, Debug)]
pub struct CylinderDecomposition {
    pub direction: Point,
    pub cylinders: Vec<Cylinder>,
    pub connections: Vec<SaddleConnection>,
}

struct SingularSeg {
    poly: usize,
    a: Point,
    b: Point,
    conn: usize,
}

struct Uf(Vec<usize>);

impl Uf {
    fn find(&mut self, i: usize) -> usize {
        if self.0[i] != i {
            let r = self.find(self.0[i]);
            self.0[i] = r;
        }
        self.0[i]
    }
    fn union(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        self.0[a.max(b)] = a.min(b);
    }
}

/// Chord of a convex polygon on the line `cross(d, p) = tau`.
fn chord(poly: &[Point], d: &Point, tau: &FieldElem) -> Option<(Point, Point)> {
    let n = poly.len();
    let mut pts: Vec<Point> = Vec::new();
    for i in 0..n {
        let (a, b) = (&poly[i], &poly[(i + 1) % n]);
        let (ta, tb) = (d.cross(a), d.cross(b));
        if (&ta - tau).sign() * (&tb - tau).sign() < 0 {
            let lam = (tau - &ta) / (&tb - &ta);
            pts.push(a.clone() + (b.clone() - a.clone()).scale(&lam));
        }
    }
    (pts.len() == 2).then(|| (pts[0].clone(), pts[1].clone()))
}

/// Exact decomposition of a periodic direction into cylinders.
pub fn cylinder_decomposition(s: &Surface, dir: &Point, budget: &FieldElem) -> Result<CylinderDecomposition> {
    let len = dir
        .norm_sq()
        .sqrt()
        .ok_or_else(|| Error::Unsupported(format!("|{dir}| is not in Q(sqrt 3)")))?;
    let traces = separatrices(s, dir, budget)?;
    let mut connections = Vec::new();
    let mut singular: Vec<SingularSeg> = Vec::new();
    let mut conn_of_trace = Vec::new();
    for (trace, conn) in &traces {
        if !matches!(trace.termination, Termination::HitConePoint(_)) {
            return Err(Error::NotPeriodic(format!("separatrix exhausted budget {budget} in direction {dir}")));
        }
        if let Some(c) = conn {
            conn_of_trace.push(connections.len());
            connections.push(c.clone());
        } else {
            conn_of_trace.push(usize::MAX);
        }
    }
    for (k, (trace, _)) in traces.iter().enumerate() {
        let conn = conn_of_trace[k];
        for seg in &trace.segments {
            singular.push(SingularSeg { poly: seg.poly, a: seg.a.clone(), b: seg.b.clone(), conn });
            if let Location::Edge(e) = s.locate(&SurfacePoint::new(seg.poly, seg.a.midpoint(&seg.b))) {
                if let Some(l) = s.link(seg.poly, e) {
                    singular.push(SingularSeg { poly: l.other.poly, a: l.apply(&seg.a), b: l.apply(&seg.b), conn });
                }
            }
        }
    }

    // Strips between consecutive critical levels of cross(dir, ·).
    let mut levels: Vec<Vec<FieldElem>> = Vec::new();
    let mut singular_levels: Vec<Vec<FieldElem>> = Vec::new();
    let mut strip_base = Vec::new();
    let mut strip_count = 0;
    for (pi, poly) in s.polygons().iter().enumerate() {
        let mut lv: Vec<FieldElem> = poly.iter().map(|v| dir.cross(v)).collect();
        let sl: Vec<FieldElem> = singular.iter().filter(|g| g.poly == pi).map(|g| dir.cross(&g.a)).collect();
        lv.extend(sl.iter().cloned());
        lv.sort();
        lv.dedup();
        strip_base.push(strip_count);
        strip_count += lv.len() - 1;
        levels.push(lv);
        singular_levels.push(sl);
    }
    let mut uf = Uf((0..strip_count).collect());
    for pi in 0..levels.len() {
        for k in 1..levels[pi].len() - 1 {
            if !singular_levels[pi].contains(&levels[pi][k]) {
                uf.union(strip_base[pi] + k - 1, strip_base[pi] + k);
            }
        }
    }
    let strips_at = |pi: usize, tau: &FieldElem| -> Vec<usize> {
        let lv = &levels[pi];
        match lv.binary_search(tau) {
            Ok(k) => [k.checked_sub(1), (k + 1 < lv.len()).then_some(k)].into_iter().flatten().map(|j| strip_base[pi] + j).collect(),
            Err(k) if k > 0 && k < lv.len() => vec![strip_base[pi] + k - 1],
            Err(_) => Vec::new(),
        }
    };

    let opts = TraceOptions::default();
    let mut visited = vec![false; strip_count];
    let mut samples: Vec<(usize, SurfacePoint)> = Vec::new();
    let mut circumference: HashMap<usize, FieldElem> = HashMap::new();
    for pi in 0..levels.len() {
        for k in 0..levels[pi].len() - 1 {
            let id = strip_base[pi] + k;
            let tau = (&levels[pi][k] + &levels[pi][k + 1]) / FieldElem::int(2);
            let (a, b) = chord(s.polygon(pi), dir, &tau).ok_or_else(|| Error::InvalidSurface("empty strip".into()))?;
            let sample = SurfacePoint::new(pi, a.midpoint(&b));
            samples.push((id, sample.clone()));
            if visited[id] {
                continue;
            }
            let leaf = trace_leaf::<FieldElem>(s, &sample, dir, budget, &opts)?;
            if leaf.termination != Termination::Closed {
                return Err(Error::NotPeriodic(format!("leaf through {} did not close within {budget}", sample.p)));
            }
            let mut members = vec![id];
            for seg in &leaf.segments {
                members.extend(strips_at(seg.poly, &dir.cross(&seg.a)));
            }
            for m in members {
                visited[m] = true;
                uf.union(id, m);
            }
            circumference.insert(id, leaf.arclength.clone());
        }
    }

    let mut by_root: Vec<(usize, Vec<usize>)> = Vec::new();
    for id in 0..strip_count {
        let r = uf.find(id);
        match by_root.iter_mut().find(|(root, _)| *root == r) {
            Some((_, v)) => v.push(id),
            None => by_root.push((r, vec![id])),
        }
    }
    let mut cylinders = Vec::new();
    for (_, members) in by_root {
        let circ = members
            .iter()
            .find_map(|m| circumference.get(m))
            .cloned()
            .ok_or_else(|| Error::InvalidSurface("cylinder without a traced leaf".into()))?;
        for m in &members {
            if let Some(c) = circumference.get(m) {
                if *c != circ {
                    return Err(Error::InvalidSurface(format!("inconsistent circumferences {c} and {circ}")));
                }
            }
        }
        if singular.is_empty() {
            // A surface without cone points is one cylinder closed up on itself.
            let width = s.area() / circ.clone();
            cylinders.push(Cylinder { direction: dir.clone(), circumference: circ, width, boundary: Vec::new() });
            continue;
        }
        let sample = &samples.iter().find(|(id, _)| *id == members[0]).expect("sampled").1;
        let n = dir.perp();
        let (up, c1) = transversal(s, sample, &n, dir, &singular, budget)?;
        let (down, c2) = transversal(s, sample, &-n, dir, &singular, budget)?;
        let mut boundary = vec![c1, c2];
        boundary.sort();
        boundary.dedup();
        boundary.retain(|&c| c != usize::MAX);
        cylinders.push(Cylinder { direction: dir.clone(), circumference: circ, width: (up + down) * len.clone(), boundary });
    }
    Ok(CylinderDecomposition { direction: dir.clone(), cylinders, connections })
}

/// Flow time along `n` from `start` until the first singular segment.
fn transversal(s: &Surface, start: &SurfacePoint, n: &Point, d: &Point, singular: &[SingularSeg], budget: &FieldElem) -> Result<(FieldElem, usize)> {
    let mut tracer = Tracer::<FieldElem>::new(s, start, n, 0.0)?;
    let (limit, _): (FieldElem, bool) = budget_param(n, budget);
    let mut used = FieldElem::zero();
    loop {
        let left = &limit - &used;
        let step = tracer.advance(Some(&left))?;
        let seg = &step.segment;
        let (ta, tb) = (d.cross(&seg.a), d.cross(&seg.b));
        if ta != tb {
            let mut best: Option<(FieldElem, usize)> = None;
            for g in singular.iter().filter(|g| g.poly == seg.poly) {
                let lam = (d.cross(&g.a) - &ta) / (&tb - &ta);
                if lam.sign() <= 0 || lam > FieldElem::one() {
                    continue;
                }
                let x = seg.a.clone() + (seg.b.clone() - seg.a.clone()).scale(&lam);
                let v = g.b.clone() - g.a.clone();
                let along = (x - g.a.clone()).dot(&v);
                if along.sign() >= 0 && along <= v.norm_sq() && best.as_ref().is_none_or(|(b, _)| lam < *b) {
                    best = Some((lam, g.conn));
                }
            }
            if let Some((lam, conn)) = best {
                return Ok((used + step.param * lam, conn));
            }
        }
        used = used + step.param;
        match step.event {
            Event::Crossed => {}
            Event::Truncated => return Err(Error::NotPeriodic("transversal met no singular leaf".into())),
            Event::Cone(..) => return Err(Error::InvalidSurface("transversal reached a cone point off the singular leaves".into())),
        }
    }
}

/// ε-grid over each polygon's bounding box; each cell weighs its area inside
/// the polygon.
#[derive(Clone, Debug)]
pub struct CoverageGrid {
    eps: f64,
    polys: Vec<PolyGrid>,
    total: f64,
    covered: f64,
    hits: usize,
}

#[derive(Clone, Debug)]
struct PolyGrid {
    x0: f64,
    y0: f64,
    nx: usize,
    ny: usize,
    weight: Vec<f64>,
    hit: Vec<bool>,
}

fn clip_area(poly: &[Vec2<f64>], x0: f64, y0: f64, x1: f64, y1: f64) -> f64 {
    let mut pts: Vec<(f64, f64)> = poly.iter().map(|p| (p.x, p.y)).collect();
    let planes: [(f64, f64, f64); 4] = [(1.0, 0.0, x0), (-1.0, 0.0, -x1), (0.0, 1.0, y0), (0.0, -1.0, -y1)];
    for (a, b, c) in planes {
        let inside = |p: &(f64, f64)| a * p.0 + b * p.1 >= c;
        let mut out = Vec::new();
        for i in 0..pts.len() {
            let (p, q) = (pts[i], pts[(i + 1) % pts.len()]);
            let (ip, iq) = (inside(&p), inside(&q));
            if ip {
                out.push(p);
            }
            if ip != iq {
                let fp = a * p.0 + b * p.1 - c;
                let fq = a * q.0 + b * q.1 - c;
                let t = fp / (fp - fq);
                out.push((p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1)));
            }
        }
        pts = out;
        if pts.is_empty() {
            return 0.0;
        }
    }
    let n = pts.len();
    (0..n).map(|i| pts[i].0 * pts[(i + 1) % n].1 - pts[(i + 1) % n].0 * pts[i].1).sum::<f64>().abs() / 2.0
}

impl CoverageGrid {
    pub fn new(s: &Surface, eps: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::InvalidParameter("epsilon must be positive".into()));
        }
        let mut polys = Vec::new();
        let mut total = 0.0;
        for poly in s.polygons() {
            let vs: Vec<Vec2<f64>> = poly.iter().map(|v| v.to_f64()).collect();
            let (x0, x1) = vs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v.x), hi.max(v.x)));
            let (y0, y1) = vs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v.y), hi.max(v.y)));
            let nx = (((x1 - x0) / eps) - 1e-9).ceil().max(1.0) as usize;
            let ny = (((y1 - y0) / eps) - 1e-9).ceil().max(1.0) as usize;
            let mut weight = Vec::with_capacity(nx * ny);
            for j in 0..ny {
                for i in 0..nx {
                    let cx = x0 + i as f64 * eps;
                    let cy = y0 + j as f64 * eps;
                    weight.push(clip_area(&vs, cx, cy, cx + eps, cy + eps));
                }
            }
            total += weight.iter().sum::<f64>();
            polys.push(PolyGrid { x0, y0, nx, ny, weight, hit: vec![false; nx * ny] });
        }
        Ok(CoverageGrid { eps, polys, total, covered: 0.0, hits: 0 })
    }

    pub fn cell_count(&self) -> usize {
        self.polys.iter().map(|g| g.weight.iter().filter(|w| **w > 0.0).count()).sum()
    }

    pub fn hit_count(&self) -> usize {
        self.hits
    }

    fn mark(&mut self, poly: usize, x: f64, y: f64) {
        let eps = self.eps;
        let g = &mut self.polys[poly];
        let i = (((x - g.x0) / eps).floor().max(0.0) as usize).min(g.nx - 1);
        let j = (((y - g.y0) / eps).floor().max(0.0) as usize).min(g.ny - 1);
        let k = j * g.nx + i;
        if !g.hit[k] && g.weight[k] > 0.0 {
            g.hit[k] = true;
            self.covered += g.weight[k];
            self.hits += 1;
        }
    }

    pub fn mark_segment(&mut self, poly: usize, a: Vec2<f64>, b: Vec2<f64>) {
        let eps = self.eps;
        let (x0, y0) = (self.polys[poly].x0, self.polys[poly].y0);
        let mut ts = vec![0.0, 1.0];
        for (pa, pb, o) in [(a.x, b.x, x0), (a.y, b.y, y0)] {
            if (pb - pa).abs() > 0.0 {
                let (lo, hi) = (pa.min(pb), pa.max(pb));
                let mut k = ((lo - o) / eps).ceil();
                while o + k * eps < hi {
                    ts.push((o + k * eps - pa) / (pb - pa));
                    k += 1.0;
                }
            }
        }
        ts.sort_by(f64::total_cmp);
        self.mark(poly, a.x, a.y);
        for w in ts.windows(2) {
            let t = 0.5 * (w[0] + w[1]);
            self.mark(poly, a.x + t * (b.x - a.x), a.y + t * (b.y - a.y));
        }
    }

    pub fn mark_trace<S: Scalar>(&mut self, t: &LeafTrace<S>) {
        for seg in &t.segments {
            self.mark_segment(seg.poly, seg.a.to_f64s(), seg.b.to_f64s());
        }
    }

    pub fn coverage(&self) -> f64 {
        self.covered / self.total
    }
}

/// Area-weighted fraction of ε-cells of the fundamental domain met by `t`.
pub fn density_coverage<S: Scalar>(t: &LeafTrace<S>, s: &Surface, epsilon: f64) -> Result<f64> {
    let mut g = CoverageGrid::new(s, epsilon)?;
    g.mark_trace(t);
    Ok(g.coverage())
}

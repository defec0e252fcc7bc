//! The universal cover of T: the plane folded along the horizontal slits
//! `[(3m−1, n), (3m+1, n)]`, with deck group 3Z ⊕ Z.
//!
//! The chart cell of `(m, n)` is `[3m−1, 3m+2] × [n, n+1]`; subtracting
//! `(3m, n)` projects it onto the chart of T. The upper shore of a slit
//! projects to y = 0, the lower shore to y = 1.

use std::fmt;

use crate::autos::{AutoWord, Autos};
use crate::error::{Error, Result};
use crate::flow::{budget_param, ChartSegment};
use crate::qfield::{eigen_directions, FieldElem, Point, Scalar, Vec2};
use crate::surface::{Location, SurfacePoint};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Shore {
    Plus,
    Minus,
}

impl fmt::Display for Shore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Shore::Plus => "+",
            Shore::Minus => "-",
        })
    }
}

/// Where a point sits relative to the slit lattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlitPos {
    Off,
    Gap,
    Interior { m: i64, n: i64 },
    Center { m: i64, n: i64 },
    Endpoint { x: i64, n: i64 },
}

fn nearest_int<S: Scalar>(v: &S) -> i64 {
    (v.clone() + S::one().half()).floor_i64()
}

pub fn classify<S: Scalar>(p: &Vec2<S>, tol: f64) -> SlitPos {
    let n = nearest_int(&p.y);
    if (p.y.clone() - S::from_i64(n)).sign_tol(tol) != 0 {
        return SlitPos::Off;
    }
    let m = nearest_int(&(p.x.clone() / S::from_i64(3)));
    let u = p.x.clone() - S::from_i64(3 * m);
    let au = if u.sign_tol(0.0) < 0 { -u.clone() } else { u.clone() };
    match (au - S::one()).sign_tol(tol) {
        1 => SlitPos::Gap,
        0 => SlitPos::Endpoint { x: 3 * m + u.sign_tol(0.0) as i64, n },
        _ if u.sign_tol(tol) == 0 => SlitPos::Center { m, n },
        _ => SlitPos::Interior { m, n },
    }
}

/// A point of the folded plane; the shore is set exactly on slits.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CoverPoint<S = FieldElem> {
    pub p: Vec2<S>,
    pub shore: Option<Shore>,
}

impl<S: Scalar> CoverPoint<S> {
    pub fn new(p: Vec2<S>, shore: Option<Shore>) -> Self {
        CoverPoint { p, shore }
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        let on_slit = matches!(classify(&self.p, tol), SlitPos::Interior { .. } | SlitPos::Center { .. });
        match (on_slit, self.shore) {
            (true, None) => Err(Error::InvalidParameter(format!("{:?} lies on a slit and needs a shore", self.p))),
            (false, Some(_)) => Err(Error::InvalidParameter(format!("{:?} is off the slits and takes no shore", self.p))),
            _ => Ok(()),
        }
    }

    /// The representative with `x ≥ 3m` on a slit `[(3m−1, n), (3m+1, n)]`;
    /// each shore is folded onto itself by `x ↦ 6m − x`.
    pub fn canonical(&self) -> Self {
        match classify(&self.p, 0.0) {
            SlitPos::Interior { m, .. } if (self.p.x.clone() - S::from_i64(3 * m)).sign_tol(0.0) < 0 => {
                CoverPoint { p: Vec2::new(S::from_i64(6 * m) - self.p.x.clone(), self.p.y.clone()), shore: self.shore }
            }
            _ => self.clone(),
        }
    }

    /// Lattice translate by `(3m, n)`.
    pub fn translate(&self, m: i64, n: i64) -> Self {
        CoverPoint { p: self.p.clone() + Vec2::new(S::from_i64(3 * m), S::from_i64(n)), shore: self.shore }
    }

    pub fn label(&self, tol: f64) -> Option<String> {
        match classify(&self.p, tol) {
            SlitPos::Center { m, n } => Some(format!("({},{}){}", 3 * m, n, self.shore.map_or(String::new(), |s| s.to_string()))),
            SlitPos::Endpoint { x, n } => Some(format!("({x},{n}) 4pi")),
            _ => None,
        }
    }
}

impl CoverPoint<FieldElem> {
    pub fn marked(m: i64, n: i64) -> Self {
        CoverPoint::new(Vec2::ints(3 * m, n), Some(Shore::Plus))
    }

    pub fn to_f64(&self) -> CoverPoint<f64> {
        CoverPoint { p: self.p.to_f64(), shore: self.shore }
    }

    /// The point of T below this one, in the chart of T.
    pub fn project(&self) -> SurfacePoint {
        let m = (&(&self.p.x + &FieldElem::one()) / &FieldElem::int(3)).floor_i64();
        let mut n = self.p.y.floor_i64();
        if self.shore == Some(Shore::Minus) && self.p.y == FieldElem::int(n) {
            n -= 1;
        }
        SurfacePoint::new(0, self.p.clone() - Vec2::ints(3 * m, n))
    }
}

impl fmt::Display for CoverPoint<FieldElem> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}){}", self.p, self.shore.map_or(String::new(), |s| s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoverTermination {
    BudgetExhausted,
    PiPoint { m: i64, n: i64, shore: Shore },
    FourPiPoint { x: i64, n: i64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoverEvent {
    Slit,
    Truncated,
    Stop(CoverTermination),
}

#[derive(Clone, Debug)]
pub struct CoverStep<S> {
    pub a: Vec2<S>,
    pub b: Vec2<S>,
    pub param: S,
    pub event: CoverEvent,
}

/// Straight flight in the folded plane, one slit event at a time.
#[derive(Clone, Debug)]
pub struct CoverTracer<S: Scalar> {
    pos: Vec2<S>,
    dir: Vec2<S>,
    shore: Option<Shore>,
    tol: f64,
}

impl<S: Scalar> CoverTracer<S> {
    pub fn new(start: &CoverPoint<S>, dir: &Vec2<S>, tol: f64) -> Result<Self> {
        let tol = if S::EXACT { 0.0 } else { tol };
        if dir.is_zero_tol(tol) {
            return Err(Error::ZeroDirection);
        }
        start.validate(tol)?;
        let mut t = CoverTracer { pos: start.p.clone(), dir: dir.clone(), shore: start.shore, tol };
        let into_slit = match t.shore {
            Some(Shore::Plus) => t.dir.y.sign_tol(tol) < 0,
            Some(Shore::Minus) => t.dir.y.sign_tol(tol) > 0,
            None => false,
        };
        match classify(&t.pos, tol) {
            SlitPos::Center { .. } if into_slit => return Err(Error::NotAProng(format!("{:?}", start.p))),
            SlitPos::Interior { m, .. } if into_slit => {
                t.pos = Vec2::new(S::from_i64(6 * m) - t.pos.x.clone(), t.pos.y.clone());
                t.dir = -t.dir.clone();
            }
            _ => {}
        }
        Ok(t)
    }

    pub fn pos(&self) -> &Vec2<S> {
        &self.pos
    }

    pub fn dir(&self) -> &Vec2<S> {
        &self.dir
    }

    fn horizontal(&mut self, a: Vec2<S>, limit: &S) -> CoverStep<S> {
        let on_line = classify(&self.pos, self.tol) != SlitPos::Off;
        if on_line {
            let n = nearest_int(&self.pos.y);
            let m0 = nearest_int(&(self.pos.x.clone() / S::from_i64(3)));
            let mut best: Option<(S, i64)> = None;
            for m in m0 - 1..=m0 + 1 {
                for o in -1..=1 {
                    let v = 3 * m + o;
                    let t = (S::from_i64(v) - self.pos.x.clone()) / self.dir.x.clone();
                    if t.sign_tol(self.tol) > 0 && best.as_ref().is_none_or(|(bt, _)| t < *bt) {
                        best = Some((t, v));
                    }
                }
            }
            let (t, v) = best.expect("special points on both sides");
            if t <= *limit {
                let b = Vec2::new(S::from_i64(v), S::from_i64(n));
                self.pos = b.clone();
                let stop = if v.rem_euclid(3) == 0 {
                    CoverTermination::PiPoint { m: v / 3, n, shore: self.shore.unwrap_or(Shore::Plus) }
                } else {
                    CoverTermination::FourPiPoint { x: v, n }
                };
                return CoverStep { a, b, param: t, event: CoverEvent::Stop(stop) };
            }
        }
        let b = self.pos.clone() + self.dir.scale(limit);
        self.pos = b.clone();
        CoverStep { a, b, param: limit.clone(), event: CoverEvent::Truncated }
    }

    /// Fly to the next slit event, stopping early after `limit` flow time.
    pub fn advance(&mut self, limit: &S) -> CoverStep<S> {
        let a = self.pos.clone();
        if self.dir.y.sign_tol(0.0) == 0 {
            return self.horizontal(a, limit);
        }
        let up = self.dir.y.sign_tol(0.0) > 0;
        let mut used = S::zero();
        loop {
            let n = if up { self.pos.y.floor_i64() + 1 } else { -((-self.pos.y.clone()).floor_i64()) - 1 };
            let t = (S::from_i64(n) - self.pos.y.clone()) / self.dir.y.clone();
            let left = limit.clone() - used.clone();
            if left < t {
                let b = self.pos.clone() + self.dir.scale(&left);
                self.pos = b.clone();
                return CoverStep { a, b, param: limit.clone(), event: CoverEvent::Truncated };
            }
            used = used + t.clone();
            let hit = Vec2::new(self.pos.x.clone() + self.dir.x.clone() * t, S::from_i64(n));
            let shore = if up { Shore::Minus } else { Shore::Plus };
            match classify(&hit, self.tol) {
                SlitPos::Off | SlitPos::Gap => {
                    self.pos = hit;
                }
                SlitPos::Interior { m, .. } => {
                    self.pos = Vec2::new(S::from_i64(6 * m) - hit.x.clone(), hit.y.clone());
                    self.dir = -self.dir.clone();
                    self.shore = Some(shore);
                    return CoverStep { a, b: hit, param: used, event: CoverEvent::Slit };
                }
                SlitPos::Center { m, n } => {
                    let b = Vec2::new(S::from_i64(3 * m), S::from_i64(n));
                    self.pos = b.clone();
                    return CoverStep { a, b, param: used, event: CoverEvent::Stop(CoverTermination::PiPoint { m, n, shore }) };
                }
                SlitPos::Endpoint { x, n } => {
                    let b = Vec2::new(S::from_i64(x), S::from_i64(n));
                    self.pos = b.clone();
                    return CoverStep { a, b, param: used, event: CoverEvent::Stop(CoverTermination::FourPiPoint { x, n }) };
                }
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct PlanarTrace<S = FieldElem> {
    pub start: CoverPoint<S>,
    pub direction: Vec2<S>,
    pub segments: Vec<(Vec2<S>, Vec2<S>)>,
    pub param: S,
    pub arclength: S,
    pub direction_units: bool,
    pub termination: CoverTermination,
}

impl<S: Scalar> PlanarTrace<S> {
    pub fn arclength_f64(&self) -> f64 {
        self.param.to_f64() * self.direction.norm_sq().to_f64().sqrt()
    }
}

/// Trace the lifted leaf from `start` for `budget` length units.
pub fn lift_trace<S: Scalar>(start: &CoverPoint, dir: &Point, budget: &FieldElem, tol: f64) -> Result<PlanarTrace<S>> {
    if budget.sign() <= 0 {
        return Err(Error::InvalidParameter("budget must be positive".into()));
    }
    let s_start = CoverPoint::new(Vec2::<S>::from_field(&start.p), start.shore);
    let d = Vec2::<S>::from_field(dir);
    let mut tracer = CoverTracer::new(&s_start, &d, tol)?;
    let (total, direction_units): (S, bool) = budget_param(dir, budget);
    let mut param = S::zero();
    let mut segments = Vec::new();
    let termination = loop {
        let step = tracer.advance(&(total.clone() - param.clone()));
        param = param + step.param;
        segments.push((step.a, step.b));
        match step.event {
            CoverEvent::Slit => {}
            CoverEvent::Truncated => break CoverTermination::BudgetExhausted,
            CoverEvent::Stop(t) => break t,
        }
    };
    let arclength = match d.norm_sq().sqrt_opt() {
        Some(len) if !direction_units => param.clone() * len,
        _ => param.clone(),
    };
    Ok(PlanarTrace { start: s_start, direction: d, segments, param, arclength, direction_units, termination })
}

/// Feed every planar segment of a float trace to `f` with the arclength at
/// its start, without storing the trace.
pub fn stream_trace(start: &CoverPoint<f64>, dir: &Vec2<f64>, budget: f64, tol: f64, mut f: impl FnMut(&Vec2<f64>, &Vec2<f64>, f64)) -> Result<(CoverTermination, f64)> {
    let mut tracer = CoverTracer::new(start, dir, tol)?;
    let speed = dir.length();
    let total = budget / speed;
    let mut param = 0.0;
    loop {
        let step = tracer.advance(&(total - param));
        f(&step.a, &step.b, param * speed);
        param += step.param;
        match step.event {
            CoverEvent::Slit => {}
            CoverEvent::Truncated => return Ok((CoverTermination::BudgetExhausted, param * speed)),
            CoverEvent::Stop(t) => return Ok((t, param * speed)),
        }
    }
}

/// Split a planar segment at cell walls and map each piece to the chart of T.
pub fn project_segment<S: Scalar>(a: &Vec2<S>, b: &Vec2<S>) -> Vec<ChartSegment<S>> {
    let d = b.clone() - a.clone();
    let mut ts: Vec<S> = vec![S::zero(), S::one()];
    let mut cuts = |pa: &S, pb: &S, offset: i64, period: i64| {
        let (lo, hi) = if pa < pb { (pa.clone(), pb.clone()) } else { (pb.clone(), pa.clone()) };
        if (hi.clone() - lo.clone()).sign_tol(0.0) == 0 {
            return;
        }
        let shift = |v: &S| (v.clone() - S::from_i64(offset)) / S::from_i64(period);
        let mut k = shift(&lo).floor_i64();
        loop {
            let wall = S::from_i64(k * period + offset);
            if wall >= hi {
                break;
            }
            if wall > lo {
                ts.push((wall - pa.clone()) / (pb.clone() - pa.clone()));
            }
            k += 1;
        }
    };
    cuts(&a.x, &b.x, -1, 3);
    cuts(&a.y, &b.y, 0, 1);
    ts.sort_by(|x, y| x.partial_cmp(y).expect("ordered"));
    let mut out = Vec::new();
    for w in ts.windows(2) {
        if (w[1].clone() - w[0].clone()).sign_tol(0.0) <= 0 {
            continue;
        }
        let p = a.clone() + d.scale(&w[0]);
        let q = a.clone() + d.scale(&w[1]);
        let mid = p.midpoint(&q);
        let m = ((mid.x.clone() + S::one()) / S::from_i64(3)).floor_i64();
        let n = mid.y.floor_i64();
        let off = Vec2::new(S::from_i64(3 * m), S::from_i64(n));
        out.push(ChartSegment { poly: 0, a: p - off.clone(), b: q - off });
    }
    out
}

pub fn project_trace<S: Scalar>(t: &PlanarTrace<S>) -> Vec<ChartSegment<S>> {
    t.segments.iter().flat_map(|(a, b)| project_segment(a, b)).collect()
}

/// Slit-avoiding route from (0,0)₊ to `p`: up into the strip above the
/// anchor, sideways to the gap column x = 3/2, along it to the target strip,
/// then across and straight to `p`.
fn route(p: &CoverPoint) -> Vec<Point> {
    let half = FieldElem::rational(1, 2);
    let n = p.p.y.floor_i64();
    let on_line = p.p.y == FieldElem::int(n);
    let k = if on_line && p.shore == Some(Shore::Minus) { n - 1 } else { n };
    let mid = FieldElem::int(k) + half.clone();
    let mut pts = vec![Vec2::ints(0, 0), Vec2::new(FieldElem::zero(), half.clone())];
    if k != 0 {
        pts.push(Vec2::new(FieldElem::rational(3, 2), half));
        pts.push(Vec2::new(FieldElem::rational(3, 2), mid.clone()));
    }
    pts.push(Vec2::new(p.p.x.clone(), mid));
    pts.push(p.p.clone());
    pts.dedup();
    pts
}

fn cover_point(chart: &Point, offset: Point) -> CoverPoint {
    let q = chart.clone() + offset;
    let shore = match classify(&q, 0.0) {
        SlitPos::Interior { .. } | SlitPos::Center { .. } => Some(if chart.y.is_zero() { Shore::Plus } else { Shore::Minus }),
        _ => None,
    };
    CoverPoint::new(q, shore)
}

/// Endpoint of the lift of a continuous chart path whose start is placed in
/// the cell of (0, 0).
fn lift_path(autos: &Autos, image: &[ChartSegment]) -> Result<CoverPoint> {
    let s = &autos.surface;
    let last = image.last().ok_or_else(|| Error::Lift("empty image path".into()))?;
    let mut offset = Vec2::ints(0, 0);
    for pair in image.windows(2) {
        let (e, s2) = (&pair[0].b, &pair[1].a);
        if e == s2 {
            continue;
        }
        let link = match s.locate(&SurfacePoint::new(0, e.clone())) {
            Location::Edge(i) => s.link(0, i),
            _ => None,
        }
        .filter(|l| &l.apply(e) == s2)
        .ok_or_else(|| Error::Lift(format!("image path breaks between {e} and {s2}")))?;
        if link.sign > 0 {
            offset = offset - link.t.clone();
        }
    }
    Ok(cover_point(&last.b, offset))
}

fn lift_letter(autos: &Autos, w: &AutoWord, p: &CoverPoint) -> Result<CoverPoint> {
    let pts = route(p);
    let path: Vec<ChartSegment> = pts.windows(2).flat_map(|s| project_segment(&s[0], &s[1])).collect();
    lift_path(autos, &autos.push_path(w, &path)?)
}

/// Lift of `w` to the folded plane sending (0,0)₊ to its image in the chart
/// of T, placed in the cell of (0, 0). Slit points come back canonical.
///
/// Single letters are lifted by exact path lifting; a longer word is the
/// composite of its letters corrected by the deck translation that restores
/// the anchor.
pub fn lifted_eval(autos: &Autos, w: &AutoWord, p: &CoverPoint) -> Result<CoverPoint> {
    p.validate(0.0)?;
    let anchor = CoverPoint::marked(0, 0);
    let (mut q, mut a) = (p.clone(), anchor.clone());
    for l in w.letters().iter().rev() {
        let single = AutoWord::from_letters([*l]);
        q = lift_letter(autos, &single, &q)?;
        a = lift_letter(autos, &single, &a)?;
    }
    let tiny = ChartSegment { poly: 0, a: anchor.p.clone(), b: Vec2::new(FieldElem::zero(), FieldElem::rational(1, 1024)) };
    let image = autos.push_path(w, &[tiny])?;
    let target = cover_point(&image[0].a, Vec2::ints(0, 0)).canonical();
    let a = a.canonical();
    let shift = target.p.clone() - a.p.clone();
    let lattice = shift.y.is_integer() && (&shift.x / &FieldElem::int(3)).is_integer();
    if !lattice || target.shore != a.shore {
        return Err(Error::Lift(format!("anchor lands on {a}, expected {target}")));
    }
    let out = CoverPoint::new(q.p + shift, q.shore).canonical();
    let expected = autos.eval(w, &p.project())?;
    if !autos.surface.same_point(&out.project(), &expected) {
        return Err(Error::Lift(format!("lift {out} does not project to {}", expected.p)));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lemma4Entry {
    pub k: usize,
    pub point: CoverPoint,
    /// Parameter along f̃₂: `point = (3, 0) + u·(√3, −1)/2`.
    pub u: FieldElem,
    pub expected: FieldElem,
}

impl Lemma4Entry {
    pub fn matches(&self) -> bool {
        self.u == self.expected
    }
}

/// Iterates of `(vHv)^4` on (3/2, √3/2) along the contracting leaf through
/// (3, 0)₊, against `u₀·λ^k` where λ is the contracting eigenvalue of the
/// fourth power.
pub fn lemma4_sequence(autos: &Autos, k_max: usize) -> Result<Vec<Lemma4Entry>> {
    let word: AutoWord = "(vHv)^4".parse()?;
    let lambda = eigen_directions(autos.derivative(&word).representative())?.contracting.value.abs();
    let s3 = FieldElem::sqrt3();
    let mut p = CoverPoint::new(Vec2::new(FieldElem::rational(3, 2), &s3 / &FieldElem::int(2)), None);
    let u0 = -s3.clone();
    let mut out = Vec::new();
    for k in 0..=k_max {
        let u = -(&p.p.y * &FieldElem::int(2));
        if p.p.x != FieldElem::int(3) + &u * &s3 / FieldElem::int(2) {
            return Err(Error::Lift(format!("p_{k} = {p} is off the contracting leaf")));
        }
        out.push(Lemma4Entry { k, point: p.clone(), u, expected: &u0 * &lambda.pow(k as u32) });
        if k < k_max {
            p = lifted_eval(autos, &word, &p)?;
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeviationSample {
    pub arclength: f64,
    pub dist_line: f64,
    pub dist_origin: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeviationSeries {
    pub line_point: Vec2<f64>,
    pub line_dir: Vec2<f64>,
    pub samples: Vec<DeviationSample>,
}

fn dist_line(p: &Vec2<f64>, o: &Vec2<f64>, d: &Vec2<f64>) -> f64 {
    sub(p, o).cross(d).abs() / d.length()
}

fn sub(a: &Vec2<f64>, b: &Vec2<f64>) -> Vec2<f64> {
    Vec2::new(a.x - b.x, a.y - b.y)
}

/// Distances to the reference line and to the origin every `sample_step`
/// units of arclength, and at the end of the trace.
pub fn deviation_series<S: Scalar>(segments: &[(Vec2<S>, Vec2<S>)], line: (Vec2<f64>, Vec2<f64>), sample_step: f64) -> Result<DeviationSeries> {
    if !(sample_step > 0.0) {
        return Err(Error::InvalidParameter("sample step must be positive".into()));
    }
    let (o, d) = line;
    let mut samples = Vec::new();
    let mut acc = 0.0;
    let mut next = 0.0;
    let sample = |p: Vec2<f64>, s: f64| DeviationSample { arclength: s, dist_line: dist_line(&p, &o, &d), dist_origin: p.length() };
    for (a, b) in segments {
        let (a, b) = (a.to_f64s(), b.to_f64s());
        let len = sub(&b, &a).length();
        while next <= acc + len {
            let f = if len > 0.0 { (next - acc) / len } else { 0.0 };
            samples.push(sample(Vec2::new(a.x + f * (b.x - a.x), a.y + f * (b.y - a.y)), next));
            next += sample_step;
        }
        acc += len;
    }
    if let Some((_, b)) = segments.last() {
        if samples.last().is_none_or(|s| s.arclength < acc) {
            samples.push(sample(b.to_f64s(), acc));
        }
    }
    Ok(DeviationSeries { line_point: o, line_dir: d, samples })
}

/// Running maxima of the distance to a line and to the origin, taken at
/// segment endpoints where both maxima are attained.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DeviationRecords {
    pub line: Vec<DeviationSample>,
    pub origin: Vec<DeviationSample>,
    pub arclength: f64,
}

impl DeviationRecords {
    pub fn max_line(&self) -> f64 {
        self.line.last().map_or(0.0, |s| s.dist_line)
    }

    /// First arclength at which the deviation exceeds `level`.
    pub fn first_exceeding(&self, level: f64) -> Option<f64> {
        self.line.iter().find(|s| s.dist_line > level).map(|s| s.arclength)
    }

    /// Least-squares fit of origin-distance records against log arclength.
    pub fn log_fit(&self) -> Option<LinearFit> {
        let pts: Vec<(f64, f64)> = self.origin.iter().filter(|s| s.arclength > 0.0).map(|s| (s.arclength.ln(), s.dist_origin)).collect();
        linear_fit(&pts)
    }
}

/// Accumulates [`DeviationRecords`] from consecutive segments.
#[derive(Clone, Debug)]
pub struct RecordTracker {
    origin: Vec2<f64>,
    dir: Vec2<f64>,
    rec: DeviationRecords,
}

impl RecordTracker {
    pub fn new(line: (Vec2<f64>, Vec2<f64>)) -> Self {
        RecordTracker { origin: line.0, dir: line.1, rec: DeviationRecords::default() }
    }

    fn check(&mut self, p: &Vec2<f64>, s: f64) {
        let sample = DeviationSample { arclength: s, dist_line: dist_line(p, &self.origin, &self.dir), dist_origin: p.length() };
        if self.rec.line.last().is_none_or(|r| sample.dist_line > r.dist_line) {
            self.rec.line.push(sample);
        }
        if self.rec.origin.last().is_none_or(|r| sample.dist_origin > r.dist_origin) {
            self.rec.origin.push(sample);
        }
    }

    /// `s` is the arclength at `a`.
    pub fn push(&mut self, a: &Vec2<f64>, b: &Vec2<f64>, s: f64) {
        self.check(a, s);
        let end = s + sub(b, a).length();
        self.check(b, end);
        self.rec.arclength = end;
    }

    pub fn finish(self) -> DeviationRecords {
        self.rec
    }
}

pub fn deviation_records(start: &CoverPoint<f64>, dir: &Vec2<f64>, budget: f64, line: (Vec2<f64>, Vec2<f64>)) -> Result<DeviationRecords> {
    let mut tracker = RecordTracker::new(line);
    stream_trace(start, dir, budget, crate::flow::SNAP_TOL, |a, b, s| tracker.push(a, b, s))?;
    Ok(tracker.finish())
}

/// Records along stored segments, e.g. of an exact trace or a billiard ray.
pub fn deviation_records_of<S: Scalar>(segments: &[(Vec2<S>, Vec2<S>)], line: (Vec2<f64>, Vec2<f64>)) -> DeviationRecords {
    let mut tracker = RecordTracker::new(line);
    let mut s = 0.0;
    for (a, b) in segments {
        let (a, b) = (a.to_f64s(), b.to_f64s());
        tracker.push(&a, &b, s);
        s = tracker.rec.arclength;
    }
    tracker.finish()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn linear_fit(pts: &[(f64, f64)]) -> Option<LinearFit> {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return None;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = pts.iter().map(|p| (p.1 - slope * p.0 - intercept).powi(2)).sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Some(LinearFit { slope, intercept, r2 })
}

/// Closest approach of a segment to a point.
pub fn segment_distance(a: &Vec2<f64>, b: &Vec2<f64>, p: &Vec2<f64>) -> f64 {
    let d = sub(b, a);
    let dd = d.x * d.x + d.y * d.y;
    let t = if dd > 0.0 { ((sub(p, a).x * d.x + sub(p, a).y * d.y) / dd).clamp(0.0, 1.0) } else { 0.0 };
    sub(&Vec2::new(a.x + t * d.x, a.y + t * d.y), p).length()
}

/// Smallest distance from each target reached so far, with the arclength at
/// which it was first attained.
#[derive(Clone, Debug, PartialEq)]
pub struct Approach {
    pub target: Vec2<f64>,
    pub distance: f64,
    pub arclength: f64,
}

pub fn nearest_approach(start: &CoverPoint<f64>, dir: &Vec2<f64>, budget: f64, targets: &[Vec2<f64>], within: f64) -> Result<Vec<Approach>> {
    let mut out: Vec<Approach> = targets.iter().map(|t| Approach { target: t.clone(), distance: f64::INFINITY, arclength: f64::NAN }).collect();
    stream_trace(start, dir, budget, crate::flow::SNAP_TOL, |a, b, s| {
        for ap in out.iter_mut() {
            if ap.distance < within {
                continue;
            }
            let dist = segment_distance(a, b, &ap.target);
            if dist < ap.distance {
                ap.distance = dist;
                ap.arclength = s;
            }
        }
    })?;
    Ok(out)
}

/// ε-grid over the window `[−R, R]²`.
#[derive(Clone, Debug)]
pub struct PlaneGrid {
    r: f64,
    eps: f64,
    n: usize,
    hit: Vec<bool>,
    count: usize,
}

impl PlaneGrid {
    pub fn new(r: f64, eps: f64) -> Result<Self> {
        if !(r > 0.0 && eps > 0.0) {
            return Err(Error::InvalidParameter("window and epsilon must be positive".into()));
        }
        let n = ((2.0 * r / eps) - 1e-9).ceil() as usize;
        Ok(PlaneGrid { r, eps, n, hit: vec![false; n * n], count: 0 })
    }

    pub fn cells(&self) -> usize {
        self.n * self.n
    }

    pub fn hits(&self) -> usize {
        self.count
    }

    fn mark(&mut self, x: f64, y: f64) {
        if x.abs() > self.r || y.abs() > self.r {
            return;
        }
        let i = (((x + self.r) / self.eps).floor() as usize).min(self.n - 1);
        let j = (((y + self.r) / self.eps).floor() as usize).min(self.n - 1);
        let k = j * self.n + i;
        if !self.hit[k] {
            self.hit[k] = true;
            self.count += 1;
        }
    }

    pub fn mark_segment(&mut self, a: &Vec2<f64>, b: &Vec2<f64>) {
        let (r, eps) = (self.r, self.eps);
        // clip to the window
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for (p, q) in [(a.x, b.x), (a.y, b.y)] {
            let d = q - p;
            if d == 0.0 {
                if p.abs() > r {
                    return;
                }
                continue;
            }
            let (t0, t1) = ((-r - p) / d, (r - p) / d);
            lo = lo.max(t0.min(t1));
            hi = hi.min(t0.max(t1));
        }
        if lo > hi {
            return;
        }
        let at = |t: f64| (a.x + t * (b.x - a.x), a.y + t * (b.y - a.y));
        let mut ts = vec![lo, hi];
        for (p, q) in [(a.x, b.x), (a.y, b.y)] {
            let (pl, ph) = (p + lo * (q - p), p + hi * (q - p));
            let (s, e) = (pl.min(ph), pl.max(ph));
            let mut k = ((s + r) / eps).ceil();
            while -r + k * eps < e {
                ts.push((-r + k * eps - p) / (q - p));
                k += 1.0;
            }
        }
        ts.sort_by(f64::total_cmp);
        let (x0, y0) = at(lo);
        self.mark(x0, y0);
        for w in ts.windows(2) {
            let (x, y) = at(0.5 * (w[0] + w[1]));
            self.mark(x, y);
        }
    }

    pub fn coverage(&self) -> f64 {
        self.count as f64 / self.cells() as f64
    }
}

/// Fraction of ε-cells of `[−R, R]²` met by the trace.
pub fn plane_density<S: Scalar>(t: &PlanarTrace<S>, r: f64, epsilon: f64) -> Result<f64> {
    let mut g = PlaneGrid::new(r, epsilon)?;
    for (a, b) in &t.segments {
        g.mark_segment(&a.to_f64s(), &b.to_f64s());
    }
    Ok(g.coverage())
}

/// (0,0)₊ and the direction (√3, 1) of f̃₁.
pub fn f1_start() -> (CoverPoint, Point) {
    (CoverPoint::marked(0, 0), Vec2::new(FieldElem::sqrt3(), FieldElem::one()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{trace_leaf, TraceOptions};
    use crate::surface::canonical_t;

    fn fe(s: &str) -> FieldElem {
        s.parse().unwrap()
    }

    fn cp(x: &str, y: &str, shore: Option<Shore>) -> CoverPoint {
        CoverPoint::new(Vec2::new(fe(x), fe(y)), shore)
    }

    #[test]
    fn slit_classification() {
        assert_eq!(classify(&Vec2::ints(3, 2), 0.0), SlitPos::Center { m: 1, n: 2 });
        assert_eq!(classify(&Vec2::ints(-2, 0), 0.0), SlitPos::Endpoint { x: -2, n: 0 });
        assert_eq!(classify(&Vec2::new(fe("3/2"), fe("0")), 0.0), SlitPos::Gap);
        assert_eq!(classify(&Vec2::new(fe("7/2"), fe("-1")), 0.0), SlitPos::Interior { m: 1, n: -1 });
        assert_eq!(classify(&Vec2::new(fe("1/2"), fe("1/2")), 0.0), SlitPos::Off);
        assert!(cp("1/2", "0", None).validate(0.0).is_err());
        assert!(cp("1/2", "1/3", Some(Shore::Plus)).validate(0.0).is_err());
        assert_eq!(cp("5/2", "1", Some(Shore::Minus)).canonical(), cp("7/2", "1", Some(Shore::Minus)));
    }

    #[test]
    fn f1_first_slit_event() {
        let (start, dir) = f1_start();
        let t = lift_trace::<FieldElem>(&start, &dir, &FieldElem::int(5), 0.0).unwrap();
        let s3 = FieldElem::sqrt3();
        let (a, b) = &t.segments[0];
        assert_eq!(a, &Vec2::ints(0, 0));
        assert_eq!(b, &Vec2::new(&s3 * &FieldElem::int(2), FieldElem::int(2)));
        let (c, _) = &t.segments[1];
        assert_eq!(c, &Vec2::new(FieldElem::int(6) - &s3 * &FieldElem::int(2), FieldElem::int(2)));
        let mut tr = CoverTracer::new(&start, &dir, 0.0).unwrap();
        let step = tr.advance(&FieldElem::int(10));
        assert_eq!(step.param, FieldElem::int(2));
        assert_eq!(tr.dir(), &-dir.clone());
    }

    #[test]
    fn leaf_of_f2_meets_the_intersection_point() {
        let start = CoverPoint::marked(1, 0);
        let dir = Vec2::new(-FieldElem::sqrt3(), FieldElem::one());
        let budget = FieldElem::sqrt3();
        let t = lift_trace::<FieldElem>(&start, &dir, &budget, 0.0).unwrap();
        assert_eq!(t.segments.len(), 1);
        assert_eq!(t.segments[0].1, Vec2::new(fe("3/2"), FieldElem::sqrt3() / FieldElem::int(2)));
        assert_eq!(t.termination, CoverTermination::BudgetExhausted);
    }

    #[test]
    fn horizontal_line_never_meets_a_slit() {
        let t = lift_trace::<FieldElem>(&cp("1/2", "1/2", None), &Vec2::ints(1, 0), &FieldElem::int(100), 0.0).unwrap();
        assert_eq!(t.segments.len(), 1);
        let s = deviation_series(&t.segments, (Vec2::new(0.5, 0.5), Vec2::new(1.0, 0.0)), 1.0).unwrap();
        assert!(s.samples.iter().all(|x| x.dist_line == 0.0));
        assert_eq!(s.samples.len(), 101);
    }

    #[test]
    fn deviation_jumps_after_first_slit() {
        let (start, dir) = f1_start();
        let t = lift_trace::<f64>(&start, &dir, &FieldElem::int(6), 1e-9).unwrap();
        let s = deviation_series(&t.segments, (Vec2::new(0.0, 0.0), dir.to_f64()), 0.5).unwrap();
        for x in s.samples.iter().filter(|x| x.arclength <= 4.0) {
            assert!(x.dist_line < 1e-12);
        }
        let jump = s.samples.iter().find(|x| x.arclength > 4.0 + 1e-9).unwrap();
        let expected = 2.0 * 3f64.sqrt() - 3.0;
        assert!(jump.dist_line > expected - 1e-9);
        let mut tr = CoverTracer::new(&start.to_f64(), &dir.to_f64(), 1e-9).unwrap();
        tr.advance(&10.0);
        assert!((dist_line(tr.pos(), &Vec2::new(0.0, 0.0), &dir.to_f64()) - expected).abs() < 1e-12);
    }

    #[test]
    fn projection_matches_torus_trace() {
        let s = canonical_t();
        let dir = Vec2::new(FieldElem::sqrt3(), FieldElem::one());
        let start = cp("1/2", "1/3", None);
        let budget = FieldElem::int(40);
        let lifted = lift_trace::<FieldElem>(&start, &dir, &budget, 0.0).unwrap();
        let down = trace_leaf::<FieldElem>(&s, &start.project(), &dir, &budget, &TraceOptions::default()).unwrap();
        assert_eq!(project_trace(&lifted), down.segments);
    }

    #[test]
    fn lifted_generators_fix_anchor_and_cycle_marked_points() {
        let a = Autos::new().unwrap();
        let w: AutoWord = "vHv".parse().unwrap();
        assert_eq!(lifted_eval(&a, &w, &CoverPoint::marked(0, 0)).unwrap(), CoverPoint::marked(0, 0));
        let cycle = [(1, 0), (0, 1), (-1, 0), (0, -1), (1, 0)];
        for pair in cycle.windows(2) {
            let img = lifted_eval(&a, &w, &CoverPoint::marked(pair[0].0, pair[0].1)).unwrap();
            assert_eq!(img, CoverPoint::marked(pair[1].0, pair[1].1));
        }
    }

    #[test]
    fn contraction_first_terms() {
        let a = Autos::new().unwrap();
        let seq = lemma4_sequence(&a, 2).unwrap();
        assert_eq!(seq[0].u, -FieldElem::sqrt3());
        assert_eq!(seq[1].u, fe("168-97*rt3"));
        assert!(seq.iter().all(Lemma4Entry::matches));
    }

    #[test]
    fn plane_grid_rows() {
        let mut g = PlaneGrid::new(2.0, 1.0).unwrap();
        g.mark_segment(&Vec2::new(-5.0, 0.5), &Vec2::new(5.0, 0.5));
        assert_eq!(g.hits(), 4);
        assert_eq!(g.coverage(), 0.25);
    }

    #[test]
    fn fit_of_exact_line() {
        let pts: Vec<(f64, f64)> = (1..10).map(|i| (i as f64, 2.0 * i as f64 + 1.0)).collect();
        let f = linear_fit(&pts).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.r2 - 1.0).abs() < 1e-12);
    }
}

//! Half-translation surfaces as convex polygons with `z ↦ ±z + t` edge
//! identifications, the folding operation and the cone-point census.
//!
//! An edge glued to itself with sign −1 is a fold: rotation by π about the
//! edge midpoint, which becomes a cone point of angle π.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qfield::{FieldElem, Point, Scalar, Vec2};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeRef {
    pub poly: usize,
    pub edge: usize,
}

impl EdgeRef {
    pub fn new(poly: usize, edge: usize) -> Self {
        EdgeRef { poly, edge }
    }
}

/// `z ↦ sign·z + t` carries edge `a` onto edge `b` (reversing orientation).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Gluing {
    pub a: EdgeRef,
    pub b: EdgeRef,
    pub sign: i8,
    pub t: Point,
}

impl Gluing {
    pub fn is_fold(&self) -> bool {
        self.a == self.b
    }
}

/// The partner of one edge: `z ↦ sign·z + t` maps this edge onto `other`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Link {
    pub gluing: usize,
    pub other: EdgeRef,
    pub sign: i8,
    pub t: Point,
}

impl Link {
    pub fn apply<S: Scalar>(&self, p: &Vec2<S>) -> Vec2<S> {
        let t = Vec2::<S>::from_field(&self.t);
        if self.sign > 0 {
            p.clone() + t
        } else {
            t - p.clone()
        }
    }

    pub fn apply_dir<S: Scalar>(&self, d: &Vec2<S>) -> Vec2<S> {
        if self.sign > 0 {
            d.clone()
        } else {
            -d.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mark {
    pub poly: usize,
    pub point: Point,
    pub label: String,
}

/// A place where a direction can leave a point: a polygon corner or the
/// midpoint of a folded edge (whose sector is a half-plane).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Corner {
    Vertex { poly: usize, vertex: usize },
    Midpoint { poly: usize, edge: usize },
}

impl Corner {
    pub fn poly(&self) -> usize {
        match *self {
            Corner::Vertex { poly, .. } | Corner::Midpoint { poly, .. } => poly,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VertexClass {
    pub corners: Vec<Corner>,
    /// Total angle is `angle_pi · π`.
    pub angle_pi: i64,
    pub label: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConePoint {
    /// Index of the vertex class; stable for a given surface.
    pub id: usize,
    pub representative: SurfacePoint,
    pub angle_pi: i64,
    pub label: String,
}

impl fmt::Display for ConePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({}) at poly {} {}", self.label, angle_label(self.angle_pi), self.representative.poly, self.representative.p)
    }
}

pub fn angle_label(k: i64) -> String {
    match k {
        1 => "pi".to_string(),
        _ => format!("{k}pi"),
    }
}

/// A point given in the chart of one polygon.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct SurfacePoint<S = FieldElem> {
    pub poly: usize,
    pub p: Vec2<S>,
}

impl<S> SurfacePoint<S> {
    pub fn new(poly: usize, p: Vec2<S>) -> Self {
        SurfacePoint { poly, p }
    }
}

/// A straight segment inside one polygon, used as fold input.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segment {
    pub poly: usize,
    pub a: Point,
    pub b: Point,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Location {
    Interior,
    Vertex(usize),
    Edge(usize),
    Outside,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidationReport {
    pub ok: bool,
    pub issues: Vec<String>,
    pub euler_characteristic: i64,
    /// Σ(2 − k) over vertex classes, which must equal 2χ.
    pub curvature_sum_pi: i64,
}

#[derive(Clone, Debug)]
pub struct Surface {
    polygons: Vec<Vec<Point>>,
    gluings: Vec<Gluing>,
    marks: Vec<Mark>,
    links: Vec<Vec<Option<Link>>>,
    link_issues: Vec<String>,
    classes: Vec<VertexClass>,
    vertex_class: Vec<Vec<usize>>,
    midpoint_class: HashMap<(usize, usize), usize>,
}

/// Union-find over corner indices.
struct Dsu(Vec<usize>);

impl Dsu {
    fn find(&mut self, i: usize) -> usize {
        let mut r = i;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut j = i;
        while self.0[j] != r {
            let n = self.0[j];
            self.0[j] = r;
            j = n;
        }
        r
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Whether `d` lies in the half-open counterclockwise sector `(u, w]`, whose
/// opening is at most π.
pub fn in_half_open<S: Scalar>(d: &Vec2<S>, u: &Vec2<S>, w: &Vec2<S>, tol: f64) -> bool {
    d.same_dir(w, tol) || (u.cross(d).sign_tol(tol) > 0 && d.cross(w).sign_tol(tol) > 0)
}

pub fn in_closed<S: Scalar>(d: &Vec2<S>, u: &Vec2<S>, w: &Vec2<S>, tol: f64) -> bool {
    d.same_dir(u, tol) || in_half_open(d, u, w, tol)
}

fn axis_count(u: &Point, w: &Point) -> i64 {
    [Vec2::ints(1, 0), Vec2::ints(-1, 0)]
        .iter()
        .filter(|d| in_half_open(*d, u, w, 0.0))
        .count() as i64
}

fn area2(poly: &[Point]) -> FieldElem {
    let n = poly.len();
    (0..n).fold(FieldElem::zero(), |acc, i| acc + poly[i].cross(&poly[(i + 1) % n]))
}

impl Surface {
    /// Assemble a surface without validating it; see [`Surface::validate`].
    pub fn new(polygons: Vec<Vec<Point>>, gluings: Vec<Gluing>, marks: Vec<Mark>) -> Self {
        let mut links: Vec<Vec<Option<Link>>> = polygons.iter().map(|p| vec![None; p.len()]).collect();
        let mut link_issues = Vec::new();
        let mut put = |e: EdgeRef, l: Link, issues: &mut Vec<String>| match links.get_mut(e.poly).and_then(|p| p.get_mut(e.edge)) {
            Some(slot @ None) => *slot = Some(l),
            Some(Some(_)) => issues.push(format!("edge {}:{} appears in more than one gluing", e.poly, e.edge)),
            None => issues.push(format!("gluing references missing edge {}:{}", e.poly, e.edge)),
        };
        for (gi, g) in gluings.iter().enumerate() {
            put(g.a, Link { gluing: gi, other: g.b, sign: g.sign, t: g.t.clone() }, &mut link_issues);
            if g.a != g.b {
                let inv_t = if g.sign > 0 { -g.t.clone() } else { g.t.clone() };
                put(g.b, Link { gluing: gi, other: g.a, sign: g.sign, t: inv_t }, &mut link_issues);
            }
        }
        let mut s = Surface {
            polygons,
            gluings,
            marks,
            links,
            link_issues,
            classes: Vec::new(),
            vertex_class: Vec::new(),
            midpoint_class: HashMap::new(),
        };
        s.build_classes();
        s
    }

    fn build_classes(&mut self) {
        let mut index = Vec::new();
        let mut corners = Vec::new();
        for (pi, poly) in self.polygons.iter().enumerate() {
            let mut row = Vec::new();
            for vi in 0..poly.len() {
                row.push(corners.len());
                corners.push(Corner::Vertex { poly: pi, vertex: vi });
            }
            index.push(row);
        }
        let mut dsu = Dsu((0..corners.len()).collect());
        for (pi, poly) in self.polygons.iter().enumerate() {
            let n = poly.len();
            for ei in 0..n {
                let Some(link) = &self.links[pi][ei] else { continue };
                let Some(m) = self.polygons.get(link.other.poly).map(|q| q.len()) else { continue };
                if link.other.edge >= m {
                    continue;
                }
                // start of this edge ↔ end of the partner, end ↔ start
                dsu.union(index[pi][ei], index[link.other.poly][(link.other.edge + 1) % m]);
                dsu.union(index[pi][(ei + 1) % n], index[link.other.poly][link.other.edge]);
            }
        }
        let mut root_to_class: HashMap<usize, usize> = HashMap::new();
        let mut classes: Vec<VertexClass> = Vec::new();
        let mut vertex_class: Vec<Vec<usize>> = self.polygons.iter().map(|p| vec![0; p.len()]).collect();
        for (ci, c) in corners.iter().enumerate() {
            let r = dsu.find(ci);
            let id = *root_to_class.entry(r).or_insert_with(|| {
                classes.push(VertexClass { corners: Vec::new(), angle_pi: 0, label: None });
                classes.len() - 1
            });
            classes[id].corners.push(*c);
            if let Corner::Vertex { poly, vertex } = *c {
                vertex_class[poly][vertex] = id;
            }
        }
        let mut midpoint_class = HashMap::new();
        for (pi, poly) in self.polygons.iter().enumerate() {
            for ei in 0..poly.len() {
                if let Some(l) = &self.links[pi][ei] {
                    if l.other == EdgeRef::new(pi, ei) {
                        classes.push(VertexClass {
                            corners: vec![Corner::Midpoint { poly: pi, edge: ei }],
                            angle_pi: 0,
                            label: None,
                        });
                        midpoint_class.insert((pi, ei), classes.len() - 1);
                    }
                }
            }
        }
        for class in classes.iter_mut() {
            class.angle_pi = class
                .corners
                .iter()
                .map(|c| {
                    let (u, w) = self.sector(c);
                    axis_count(&u, &w)
                })
                .sum();
        }
        self.classes = classes;
        self.vertex_class = vertex_class;
        self.midpoint_class = midpoint_class;
        for mark in &self.marks {
            if let Some(id) = self.class_at(&SurfacePoint::new(mark.poly, mark.point.clone())) {
                self.classes[id].label.get_or_insert_with(|| mark.label.clone());
            }
        }
    }

    pub fn polygons(&self) -> &[Vec<Point>] {
        &self.polygons
    }

    pub fn polygon(&self, i: usize) -> &[Point] {
        &self.polygons[i]
    }

    pub fn gluings(&self) -> &[Gluing] {
        &self.gluings
    }

    pub fn marks(&self) -> &[Mark] {
        &self.marks
    }

    pub fn classes(&self) -> &[VertexClass] {
        &self.classes
    }

    pub fn link(&self, poly: usize, edge: usize) -> Option<&Link> {
        self.links.get(poly)?.get(edge)?.as_ref()
    }

    pub fn edge(&self, poly: usize, edge: usize) -> (&Point, &Point) {
        let p = &self.polygons[poly];
        (&p[edge], &p[(edge + 1) % p.len()])
    }

    pub fn is_fold_edge(&self, poly: usize, edge: usize) -> bool {
        self.link(poly, edge).is_some_and(|l| l.other == EdgeRef::new(poly, edge))
    }

    pub fn area(&self) -> FieldElem {
        self.polygons.iter().fold(FieldElem::zero(), |acc, p| acc + area2(p)) / FieldElem::int(2)
    }

    pub fn class_of_vertex(&self, poly: usize, vertex: usize) -> usize {
        self.vertex_class[poly][vertex]
    }

    pub fn class_of_midpoint(&self, poly: usize, edge: usize) -> Option<usize> {
        self.midpoint_class.get(&(poly, edge)).copied()
    }

    pub fn is_cone_class(&self, id: usize) -> bool {
        self.classes[id].angle_pi != 2
    }

    pub fn corner_point(&self, c: &Corner) -> Point {
        match *c {
            Corner::Vertex { poly, vertex } => self.polygons[poly][vertex].clone(),
            Corner::Midpoint { poly, edge } => {
                let (a, b) = self.edge(poly, edge);
                a.midpoint(b)
            }
        }
    }

    /// Counterclockwise sector `(u, w)` of a corner, as direction vectors.
    pub fn sector(&self, c: &Corner) -> (Point, Point) {
        match *c {
            Corner::Vertex { poly, vertex } => {
                let p = &self.polygons[poly];
                let n = p.len();
                let v = &p[vertex];
                (p[(vertex + 1) % n].clone() - v.clone(), p[(vertex + n - 1) % n].clone() - v.clone())
            }
            Corner::Midpoint { poly, edge } => {
                let (a, b) = self.edge(poly, edge);
                let m = a.midpoint(b);
                (b.clone() - m.clone(), a.clone() - m)
            }
        }
    }

    /// The corner met when sweeping counterclockwise past the `w` side, and the
    /// sign relating the two charts.
    pub fn next_ccw(&self, c: &Corner) -> Option<(Corner, i8)> {
        match *c {
            Corner::Vertex { poly, vertex } => {
                let n = self.polygons[poly].len();
                let l = self.link(poly, (vertex + n - 1) % n)?;
                Some((Corner::Vertex { poly: l.other.poly, vertex: l.other.edge }, l.sign))
            }
            Corner::Midpoint { .. } => Some((*c, -1)),
        }
    }

    /// The corner met when sweeping clockwise past the `u` side.
    pub fn prev_cw(&self, c: &Corner) -> Option<(Corner, i8)> {
        match *c {
            Corner::Vertex { poly, vertex } => {
                let l = self.link(poly, vertex)?;
                let m = self.polygons[l.other.poly].len();
                Some((Corner::Vertex { poly: l.other.poly, vertex: (l.other.edge + 1) % m }, l.sign))
            }
            Corner::Midpoint { .. } => Some((*c, -1)),
        }
    }

    pub fn locate(&self, sp: &SurfacePoint) -> Location {
        let Some(poly) = self.polygons.get(sp.poly) else { return Location::Outside };
        let n = poly.len();
        let mut on_edge = None;
        for i in 0..n {
            let (a, b) = (&poly[i], &poly[(i + 1) % n]);
            if &sp.p == a {
                return Location::Vertex(i);
            }
            let side = (b.clone() - a.clone()).cross(&(sp.p.clone() - a.clone())).sign();
            if side < 0 {
                return Location::Outside;
            }
            if side == 0 && on_edge.is_none() {
                let e = b.clone() - a.clone();
                let along = e.dot(&(sp.p.clone() - a.clone()));
                if along.sign() > 0 && along < e.norm_sq() {
                    on_edge = Some(i);
                }
            }
        }
        match on_edge {
            Some(i) => Location::Edge(i),
            None => Location::Interior,
        }
    }

    /// Vertex class containing the point, if it is a vertex or fold midpoint.
    pub fn class_at(&self, sp: &SurfacePoint) -> Option<usize> {
        match self.locate(sp) {
            Location::Vertex(v) => Some(self.class_of_vertex(sp.poly, v)),
            Location::Edge(e) => {
                let id = self.class_of_midpoint(sp.poly, e)?;
                let (a, b) = self.edge(sp.poly, e);
                (a.midpoint(b) == sp.p).then_some(id)
            }
            _ => None,
        }
    }

    pub fn cone_at(&self, sp: &SurfacePoint) -> Option<usize> {
        self.class_at(sp).filter(|&id| self.is_cone_class(id))
    }

    /// All chart representatives of a point.
    pub fn representatives(&self, sp: &SurfacePoint) -> Result<Vec<SurfacePoint>> {
        let mut out = vec![sp.clone()];
        match self.locate(sp) {
            Location::Outside => return Err(Error::OutsideSurface(format!("poly {} {}", sp.poly, sp.p))),
            Location::Interior => {}
            Location::Vertex(v) => {
                let id = self.class_of_vertex(sp.poly, v);
                out = self.classes[id]
                    .corners
                    .iter()
                    .map(|c| SurfacePoint::new(c.poly(), self.corner_point(c)))
                    .collect();
            }
            Location::Edge(e) => {
                if let Some(l) = self.link(sp.poly, e) {
                    let q = SurfacePoint::new(l.other.poly, l.apply(&sp.p));
                    if q != *sp {
                        out.push(q);
                    }
                }
            }
        }
        out.sort_by(|a, b| (a.poly, &a.p.y, -a.p.x.clone()).cmp(&(b.poly, &b.p.y, -b.p.x.clone())));
        out.dedup();
        Ok(out)
    }

    /// Canonical representative: lowest polygon, then lowest y, then largest x.
    pub fn canonical(&self, sp: &SurfacePoint) -> Result<SurfacePoint> {
        Ok(self.representatives(sp)?.remove(0))
    }

    pub fn same_point(&self, a: &SurfacePoint, b: &SurfacePoint) -> bool {
        self.representatives(a).map(|r| r.contains(b)).unwrap_or(false)
    }

    /// Vertex classes whose angle differs from 2π.
    pub fn cone_census(&self) -> Vec<ConePoint> {
        self.classes
            .iter()
            .enumerate()
            .filter(|(_, c)| c.angle_pi != 2)
            .map(|(id, c)| {
                let rep = c.corners[0];
                ConePoint {
                    id,
                    representative: SurfacePoint::new(rep.poly(), self.corner_point(&rep)),
                    angle_pi: c.angle_pi,
                    label: c.label.clone().unwrap_or_else(|| format!("P{id}")),
                }
            })
            .collect()
    }

    pub fn cone_point(&self, id: usize) -> Option<ConePoint> {
        self.cone_census().into_iter().find(|c| c.id == id)
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.classes.len() as i64 - self.gluings.len() as i64 + self.polygons.len() as i64
    }

    pub fn validate(&self) -> ValidationReport {
        let mut issues = self.link_issues.clone();
        for (pi, poly) in self.polygons.iter().enumerate() {
            let n = poly.len();
            if n < 3 {
                issues.push(format!("polygon {pi} has fewer than 3 vertices"));
                continue;
            }
            for i in 0..n {
                let e0 = poly[(i + 1) % n].clone() - poly[i].clone();
                let e1 = poly[(i + 2) % n].clone() - poly[(i + 1) % n].clone();
                if e0.x.is_zero() && e0.y.is_zero() {
                    issues.push(format!("polygon {pi} edge {i} has zero length"));
                }
                if e0.cross(&e1).sign() < 0 {
                    issues.push(format!("polygon {pi} is not convex counterclockwise at vertex {}", (i + 1) % n));
                }
            }
            if area2(poly).sign() <= 0 {
                issues.push(format!("polygon {pi} has nonpositive area"));
            }
        }
        for (gi, g) in self.gluings.iter().enumerate() {
            if g.sign != 1 && g.sign != -1 {
                issues.push(format!("gluing {gi} has linear part {}·Id, not ±Id", g.sign));
                continue;
            }
            let ok_ref = |e: &EdgeRef| self.polygons.get(e.poly).is_some_and(|p| e.edge < p.len());
            if !ok_ref(&g.a) || !ok_ref(&g.b) {
                continue;
            }
            let (a0, a1) = self.edge(g.a.poly, g.a.edge);
            let (b0, b1) = self.edge(g.b.poly, g.b.edge);
            let link = Link { gluing: gi, other: g.b, sign: g.sign, t: g.t.clone() };
            if &link.apply(a0) != b1 || &link.apply(a1) != b0 {
                issues.push(format!("gluing {gi}: endpoint mismatch between edge {}:{} and {}:{}", g.a.poly, g.a.edge, g.b.poly, g.b.edge));
            }
        }
        for (pi, row) in self.links.iter().enumerate() {
            for (ei, l) in row.iter().enumerate() {
                if l.is_none() {
                    issues.push(format!("unmatched edge {pi}:{ei}"));
                }
            }
        }
        let chi = self.euler_characteristic();
        let curvature: i64 = self.classes.iter().map(|c| 2 - c.angle_pi).sum();
        if curvature != 2 * chi {
            issues.push(format!("Gauss-Bonnet mismatch: sum(2 - k) = {curvature}, 2chi = {}", 2 * chi));
        }
        ValidationReport { ok: issues.is_empty(), issues, euler_characteristic: chi, curvature_sum_pi: curvature }
    }

    pub fn to_json(&self) -> SurfaceJson {
        SurfaceJson {
            polygons: self.polygons.iter().map(|p| p.iter().map(|v| [v.x.clone(), v.y.clone()]).collect()).collect(),
            gluings: self
                .gluings
                .iter()
                .map(|g| GluingJson { a: [g.a.poly, g.a.edge], b: [g.b.poly, g.b.edge], sign: g.sign, t: [g.t.x.clone(), g.t.y.clone()] })
                .collect(),
            marks: self
                .marks
                .iter()
                .map(|m| MarkJson { poly: m.poly, point: [m.point.x.clone(), m.point.y.clone()], label: m.label.clone() })
                .collect(),
        }
    }

    pub fn from_json(j: &SurfaceJson) -> Surface {
        let polygons = j.polygons.iter().map(|p| p.iter().map(|[x, y]| Vec2::new(x.clone(), y.clone())).collect()).collect();
        let gluings = j
            .gluings
            .iter()
            .map(|g| Gluing {
                a: EdgeRef::new(g.a[0], g.a[1]),
                b: EdgeRef::new(g.b[0], g.b[1]),
                sign: g.sign,
                t: Vec2::new(g.t[0].clone(), g.t[1].clone()),
            })
            .collect();
        let marks = j.marks.iter().map(|m| Mark { poly: m.poly, point: Vec2::new(m.point[0].clone(), m.point[1].clone()), label: m.label.clone() }).collect();
        Surface::new(polygons, gluings, marks)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("surface serializes")
    }

    pub fn from_json_str(s: &str) -> Result<Surface> {
        let j: SurfaceJson = serde_json::from_str(s).map_err(|e| Error::Json(e.to_string()))?;
        Ok(Surface::from_json(&j))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GluingJson {
    pub a: [usize; 2],
    pub b: [usize; 2],
    pub sign: i8,
    pub t: [FieldElem; 2],
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkJson {
    pub poly: usize,
    pub point: [FieldElem; 2],
    pub label: String,
}

/// On-disk surface format; field literals are `p/q+r/s*rt3` strings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurfaceJson {
    pub polygons: Vec<Vec<[FieldElem; 2]>>,
    pub gluings: Vec<GluingJson>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub marks: Vec<MarkJson>,
}

/// The flat torus R²/(wZ ⊕ hZ) as the rectangle centred at the origin.
pub fn build_flat_torus(width: &FieldElem, height: &FieldElem) -> Result<Surface> {
    if width.sign() <= 0 || height.sign() <= 0 {
        return Err(Error::NonPositiveDimension);
    }
    let hw = width / &FieldElem::int(2);
    let hh = height / &FieldElem::int(2);
    let poly = vec![
        Vec2::new(-hw.clone(), -hh.clone()),
        Vec2::new(hw.clone(), -hh.clone()),
        Vec2::new(hw.clone(), hh.clone()),
        Vec2::new(-hw, hh),
    ];
    let gluings = vec![
        Gluing { a: EdgeRef::new(0, 0), b: EdgeRef::new(0, 2), sign: 1, t: Vec2::new(FieldElem::zero(), height.clone()) },
        Gluing { a: EdgeRef::new(0, 1), b: EdgeRef::new(0, 3), sign: 1, t: Vec2::new(-width.clone(), FieldElem::zero()) },
    ];
    Ok(Surface::new(vec![poly], gluings, Vec::new()))
}

/// The folded torus T: the rectangle [−1,2]×[0,1] with left↔right glued by
/// (3,0), top↔bottom over x∈[1,2] by (0,−1), and both halves of the slit
/// x∈[−1,1] folded about (0,0) and (0,1).
pub fn canonical_t() -> Surface {
    let p = |x: i64, y: i64| Vec2::ints(x, y);
    let poly = vec![p(-1, 0), p(1, 0), p(2, 0), p(2, 1), p(1, 1), p(-1, 1)];
    let gluings = vec![
        Gluing { a: EdgeRef::new(0, 0), b: EdgeRef::new(0, 0), sign: -1, t: p(0, 0) },
        Gluing { a: EdgeRef::new(0, 1), b: EdgeRef::new(0, 3), sign: 1, t: p(0, 1) },
        Gluing { a: EdgeRef::new(0, 2), b: EdgeRef::new(0, 5), sign: 1, t: p(-3, 0) },
        Gluing { a: EdgeRef::new(0, 4), b: EdgeRef::new(0, 4), sign: -1, t: p(0, 2) },
    ];
    let marks = vec![
        Mark { poly: 0, point: p(0, 0), label: "C+".into() },
        Mark { poly: 0, point: p(0, 1), label: "C-".into() },
        Mark { poly: 0, point: p(1, 0), label: "AB".into() },
    ];
    Surface::new(vec![poly], gluings, marks)
}

/// Mutable polygon list used while folding.
struct Builder {
    polygons: Vec<Vec<Point>>,
    gluings: Vec<Gluing>,
    marks: Vec<Mark>,
}

impl Builder {
    fn from(s: &Surface) -> Self {
        Builder { polygons: s.polygons.clone(), gluings: s.gluings.clone(), marks: s.marks.clone() }
    }

    fn take_gluing(&mut self, e: EdgeRef) -> Option<(Gluing, EdgeRef, i8, Point)> {
        let gi = self.gluings.iter().position(|g| g.a == e || g.b == e)?;
        let g = self.gluings.remove(gi);
        if g.a == e {
            let (o, s, t) = (g.b, g.sign, g.t.clone());
            Some((g, o, s, t))
        } else {
            let t = if g.sign > 0 { -g.t.clone() } else { g.t.clone() };
            let (o, s) = (g.a, g.sign);
            Some((g, o, s, t))
        }
    }

    /// Insert `p` after vertex `edge` of `poly`; gluing references to later
    /// edges of that polygon shift by one.
    fn insert_raw(&mut self, poly: usize, edge: usize, p: Point) {
        self.polygons[poly].insert(edge + 1, p);
        for g in self.gluings.iter_mut() {
            for r in [&mut g.a, &mut g.b] {
                if r.poly == poly && r.edge > edge {
                    r.edge += 1;
                }
            }
        }
    }

    fn apply(sign: i8, t: &Point, p: &Point) -> Point {
        if sign > 0 {
            p.clone() + t.clone()
        } else {
            t.clone() - p.clone()
        }
    }

    /// Split an edge at an interior point, splitting its partner to match.
    fn split_edge(&mut self, e: EdgeRef, p: Point) -> Result<()> {
        let (_, other, sign, t) = self
            .take_gluing(e)
            .ok_or_else(|| Error::InvalidSurface(format!("edge {}:{} is unglued", e.poly, e.edge)))?;
        let img = Self::apply(sign, &t, &p);
        if other == e {
            if img == p {
                return Err(Error::TouchesConePoint(format!("{p}")));
            }
            let start = self.polygons[e.poly][e.edge].clone();
            let dir = img.clone() - p.clone();
            let edge_dir = self.polygons[e.poly][(e.edge + 1) % self.polygons[e.poly].len()].clone() - start;
            let (p1, p2) = if dir.dot(&edge_dir).sign() > 0 { (p, img) } else { (img, p) };
            self.insert_raw(e.poly, e.edge, p1);
            self.insert_raw(e.poly, e.edge + 1, p2);
            let e0 = EdgeRef::new(e.poly, e.edge);
            self.gluings.push(Gluing { a: e0, b: EdgeRef::new(e.poly, e.edge + 2), sign, t: t.clone() });
            self.gluings.push(Gluing { a: EdgeRef::new(e.poly, e.edge + 1), b: EdgeRef::new(e.poly, e.edge + 1), sign, t });
            return Ok(());
        }
        self.insert_raw(e.poly, e.edge, p);
        let mut f = other;
        if f.poly == e.poly && f.edge > e.edge {
            f.edge += 1;
        }
        self.insert_raw(f.poly, f.edge, img);
        let mut e2 = e;
        if f.poly == e.poly && e.edge > f.edge {
            e2.edge += 1;
        }
        self.gluings.push(Gluing { a: e2, b: EdgeRef::new(f.poly, f.edge + 1), sign, t: t.clone() });
        self.gluings.push(Gluing { a: EdgeRef::new(e2.poly, e2.edge + 1), b: f, sign, t });
        Ok(())
    }

    /// Make `p` (on the boundary of `poly`) a vertex; returns its index.
    fn ensure_vertex(&mut self, poly: usize, p: &Point) -> Result<usize> {
        if let Some(i) = self.polygons[poly].iter().position(|v| v == p) {
            return Ok(i);
        }
        let s = Surface::new(self.polygons.clone(), self.gluings.clone(), Vec::new());
        match s.locate(&SurfacePoint::new(poly, p.clone())) {
            Location::Edge(e) => {
                self.split_edge(EdgeRef::new(poly, e), p.clone())?;
                Ok(self.polygons[poly].iter().position(|v| v == p).expect("inserted"))
            }
            _ => Err(Error::InvalidSegment(format!("{p} is not on the boundary"))),
        }
    }
}

/// Exit point of the ray `from + s·dir` (s > 0) from a convex polygon.
fn ray_exit(poly: &[Point], from: &Point, dir: &Point) -> Point {
    let n = poly.len();
    let mut best: Option<FieldElem> = None;
    for i in 0..n {
        let e = poly[(i + 1) % n].clone() - poly[i].clone();
        let den = dir.cross(&e);
        if den.sign() <= 0 {
            continue;
        }
        let t = (poly[i].clone() - from.clone()).cross(&e) / den;
        if best.as_ref().is_none_or(|b| &t < b) {
            best = Some(t);
        }
    }
    from.clone() + dir.scale(&best.expect("bounded polygon"))
}

/// Fold `s` along a segment: cut it open and glue each shore to itself by the
/// rotation by π about its midpoint.
pub fn fold(s: &Surface, seg: &Segment) -> Result<Surface> {
    let Segment { poly, a, b } = seg;
    let poly = *poly;
    if poly >= s.polygons.len() {
        return Err(Error::InvalidSegment(format!("no polygon {poly}")));
    }
    if a == b {
        return Err(Error::InvalidSegment("endpoints coincide".into()));
    }
    for end in [a, b] {
        let sp = SurfacePoint::new(poly, end.clone());
        if s.locate(&sp) == Location::Outside {
            return Err(Error::InvalidSegment(format!("{end} leaves polygon {poly}")));
        }
        if s.cone_at(&sp).is_some() {
            return Err(Error::TouchesConePoint(format!("{end}")));
        }
    }
    if s.locate(&SurfacePoint::new(poly, a.midpoint(b))) != Location::Interior {
        return Err(Error::InvalidSegment("segment runs along the polygon boundary".into()));
    }
    let dir = b.clone() - a.clone();
    let vertices = &s.polygons[poly];
    let p0 = ray_exit(vertices, a, &-dir.clone());
    let q0 = ray_exit(vertices, b, &dir);
    let p0 = if s.locate(&SurfacePoint::new(poly, a.clone())) == Location::Interior { p0 } else { a.clone() };
    let q0 = if s.locate(&SurfacePoint::new(poly, b.clone())) == Location::Interior { q0 } else { b.clone() };
    for end in [&p0, &q0] {
        if s.cone_at(&SurfacePoint::new(poly, end.clone())).is_some() {
            return Err(Error::InvalidSegment(format!("chord through the segment meets a cone point at {end}; subdivide first")));
        }
    }

    let mut bld = Builder::from(s);
    bld.ensure_vertex(poly, &p0)?;
    bld.ensure_vertex(poly, &q0)?;
    let ring = bld.polygons[poly].clone();
    let n = ring.len();
    let ip = ring.iter().position(|v| v == &p0).expect("vertex");
    let iq = ring.iter().position(|v| v == &q0).expect("vertex");
    let has_pa = &p0 != a;
    let has_bq = &q0 != b;

    let nl = (ip + n - iq) % n;
    let nr = (iq + n - ip) % n;
    let mut left: Vec<Point> = (0..=nl).map(|k| ring[(iq + k) % n].clone()).collect();
    if has_pa {
        left.push(a.clone());
    }
    if has_bq {
        left.push(b.clone());
    }
    let mut right: Vec<Point> = (0..=nr).map(|k| ring[(ip + k) % n].clone()).collect();
    if has_bq {
        right.push(b.clone());
    }
    if has_pa {
        right.push(a.clone());
    }
    let right_id = bld.polygons.len();
    let remap = |r: EdgeRef| -> EdgeRef {
        if r.poly != poly {
            return r;
        }
        let kl = (r.edge + n - iq) % n;
        if kl < nl {
            EdgeRef::new(poly, kl)
        } else {
            EdgeRef::new(right_id, (r.edge + n - ip) % n)
        }
    };
    for g in bld.gluings.iter_mut() {
        g.a = remap(g.a);
        g.b = remap(g.b);
    }
    let l_pa = nl;
    let l_ab = nl + usize::from(has_pa);
    let l_bq = l_ab + 1;
    let r_qb = nr;
    let r_ba = nr + usize::from(has_bq);
    let r_ap = r_ba + 1;
    let zero = Vec2::ints(0, 0);
    let around = a.clone() + b.clone();
    if has_pa {
        bld.gluings.push(Gluing { a: EdgeRef::new(poly, l_pa), b: EdgeRef::new(right_id, r_ap), sign: 1, t: zero.clone() });
    }
    if has_bq {
        bld.gluings.push(Gluing { a: EdgeRef::new(poly, l_bq), b: EdgeRef::new(right_id, r_qb), sign: 1, t: zero });
    }
    bld.gluings.push(Gluing { a: EdgeRef::new(poly, l_ab), b: EdgeRef::new(poly, l_ab), sign: -1, t: around.clone() });
    bld.gluings.push(Gluing { a: EdgeRef::new(right_id, r_ba), b: EdgeRef::new(right_id, r_ba), sign: -1, t: around });

    let left_surface = Surface::new(vec![left.clone()], Vec::new(), Vec::new());
    for m in bld.marks.iter_mut() {
        if m.poly == poly && left_surface.locate(&SurfacePoint::new(0, m.point.clone())) == Location::Outside {
            m.poly = right_id;
        }
    }
    let mid = a.midpoint(b);
    bld.marks.push(Mark { poly, point: mid.clone(), label: "C+".into() });
    bld.marks.push(Mark { poly: right_id, point: mid, label: "C-".into() });
    bld.marks.push(Mark { poly, point: a.clone(), label: "AB".into() });
    bld.polygons[poly] = left;
    bld.polygons.push(right);
    Ok(Surface::new(bld.polygons, bld.gluings, bld.marks))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fe(s: &str) -> FieldElem {
        s.parse().unwrap()
    }

    fn census_angles(s: &Surface) -> Vec<i64> {
        let mut v: Vec<i64> = s.cone_census().iter().map(|c| c.angle_pi).collect();
        v.sort();
        v
    }

    #[test]
    fn flat_torus_has_no_cone_points() {
        let t = build_flat_torus(&FieldElem::int(3), &FieldElem::one()).unwrap();
        assert_eq!(t.area(), FieldElem::int(3));
        assert!(t.cone_census().is_empty());
        assert!(t.validate().ok);
        let u = build_flat_torus(&FieldElem::one(), &FieldElem::one()).unwrap();
        assert!(u.cone_census().is_empty());
        assert_eq!(build_flat_torus(&FieldElem::zero(), &FieldElem::one()).unwrap_err(), Error::NonPositiveDimension);
    }

    #[test]
    fn canonical_t_census() {
        let t = canonical_t();
        let report = t.validate();
        assert!(report.ok, "{:?}", report.issues);
        assert_eq!(report.euler_characteristic, 0);
        assert_eq!(report.curvature_sum_pi, 0);
        assert_eq!(t.area(), FieldElem::int(3));
        assert_eq!(census_angles(&t), vec![1, 1, 4]);
        let labels: Vec<(String, i64)> = t.cone_census().into_iter().map(|c| (c.label, c.angle_pi)).collect();
        assert!(labels.contains(&("C+".into(), 1)));
        assert!(labels.contains(&("C-".into(), 1)));
        assert!(labels.contains(&("AB".into(), 4)));
    }

    #[test]
    fn fold_of_flat_3x1_matches_canonical_census() {
        let flat = build_flat_torus(&FieldElem::int(3), &FieldElem::one()).unwrap();
        let seg = Segment { poly: 0, a: Vec2::ints(-1, 0), b: Vec2::ints(1, 0) };
        let f = fold(&flat, &seg).unwrap();
        let report = f.validate();
        assert!(report.ok, "{:?}", report.issues);
        assert_eq!(f.area(), FieldElem::int(3));
        assert_eq!(census_angles(&f), vec![1, 1, 4]);
        assert_eq!(f.gluings().iter().filter(|g| g.is_fold()).count(), 2);
    }

    #[test]
    fn fold_with_endpoint_on_boundary() {
        let flat = build_flat_torus(&FieldElem::one(), &FieldElem::one()).unwrap();
        let seg = Segment { poly: 0, a: Vec2::ints(0, 0), b: Vec2::new(fe("1/2"), FieldElem::zero()) };
        let f = fold(&flat, &seg).unwrap();
        let report = f.validate();
        assert!(report.ok, "{:?}", report.issues);
        assert_eq!(census_angles(&f), vec![1, 1, 4]);
        assert_eq!(f.area(), FieldElem::one());
    }

    #[test]
    fn fold_rejects_cone_points_and_escapes() {
        let t = canonical_t();
        let seg = Segment { poly: 0, a: Vec2::ints(0, 0), b: Vec2::new(FieldElem::zero(), fe("1/2")) };
        assert!(matches!(fold(&t, &seg), Err(Error::TouchesConePoint(_))));
        let esc = Segment { poly: 0, a: Vec2::new(fe("1/2"), fe("1/2")), b: Vec2::new(fe("1/2"), FieldElem::int(3)) };
        assert!(matches!(fold(&t, &esc), Err(Error::InvalidSegment(_))));
        let along = Segment { poly: 0, a: Vec2::new(fe("3/2"), FieldElem::zero()), b: Vec2::new(fe("7/4"), FieldElem::zero()) };
        assert!(matches!(fold(&t, &along), Err(Error::InvalidSegment(_))));
    }

    #[test]
    fn double_fold_commutes() {
        let flat = build_flat_torus(&FieldElem::int(3), &FieldElem::one()).unwrap();
        let s1 = Segment { poly: 0, a: Vec2::ints(-1, 0), b: Vec2::ints(1, 0) };
        let s2 = Segment { poly: 0, a: Vec2::new(fe("-1/2"), fe("1/4")), b: Vec2::new(fe("1/2"), fe("1/4")) };
        let ab = fold(&fold(&flat, &s1).unwrap(), &s2).unwrap();
        let s1_lower = Segment { poly: 1, ..s1.clone() };
        let ba = fold(&fold(&flat, &s2).unwrap(), &s1_lower).unwrap();
        for s in [&ab, &ba] {
            assert!(s.validate().ok, "{:?}", s.validate().issues);
            assert_eq!(s.area(), FieldElem::int(3));
            assert_eq!(census_angles(s), vec![1, 1, 1, 1, 4, 4]);
        }
    }

    #[test]
    fn validate_reports_unglued_and_mismatched_edges() {
        let t = canonical_t();
        let mut gl = t.gluings().to_vec();
        gl.remove(1);
        let broken = Surface::new(t.polygons().to_vec(), gl, Vec::new());
        let r = broken.validate();
        assert!(!r.ok);
        assert!(r.issues.iter().any(|i| i.contains("unmatched edge")));

        let mut gl = t.gluings().to_vec();
        gl[2].t = Vec2::ints(-3, 1);
        let shifted = Surface::new(t.polygons().to_vec(), gl, Vec::new());
        let r = shifted.validate();
        assert!(r.issues.iter().any(|i| i.contains("endpoint mismatch")), "{:?}", r.issues);
    }

    #[test]
    fn json_round_trip() {
        let t = canonical_t();
        let s = t.to_json_string();
        assert!(s.contains("\"-1/1+0/1*rt3\""));
        let back = Surface::from_json_str(&s).unwrap();
        assert_eq!(back.polygons(), t.polygons());
        assert_eq!(back.gluings(), t.gluings());
        assert_eq!(census_angles(&back), vec![1, 1, 4]);
    }

    #[test]
    fn representatives_and_canonical_points() {
        let t = canonical_t();
        let top = SurfacePoint::new(0, Vec2::new(fe("3/2"), FieldElem::one()));
        assert_eq!(t.canonical(&top).unwrap().p, Vec2::new(fe("3/2"), FieldElem::zero()));
        let left = SurfacePoint::new(0, Vec2::new(FieldElem::int(-1), fe("1/2")));
        assert_eq!(t.canonical(&left).unwrap().p, Vec2::new(FieldElem::int(2), fe("1/2")));
        let fold_pt = SurfacePoint::new(0, Vec2::new(fe("-1/2"), FieldElem::zero()));
        assert_eq!(t.representatives(&fold_pt).unwrap().len(), 2);
        let corner = SurfacePoint::new(0, Vec2::ints(-1, 1));
        assert_eq!(t.representatives(&corner).unwrap().len(), 6);
        assert!(t.same_point(&corner, &SurfacePoint::new(0, Vec2::ints(1, 0))));
    }
}

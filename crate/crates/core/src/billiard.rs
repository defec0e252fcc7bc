//! Light rays in a Z²-periodic array of two-sided mirror crosses.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::qfield::{FieldElem, Point, Scalar, Vec2};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Orientation {
    Axis,
    Diagonal,
}

impl FromStr for Orientation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "axis" | "axis-aligned" => Ok(Orientation::Axis),
            "diagonal" => Ok(Orientation::Diagonal),
            _ => Err(Error::InvalidParameter(format!("unknown orientation {s:?}"))),
        }
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Orientation::Axis => "axis",
            Orientation::Diagonal => "diagonal",
        })
    }
}

/// A cross at every lattice point; each arm reaches `s` from the center
/// along each coordinate axis, or to `(i ± s, j ± s)` when diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossScene<S = FieldElem> {
    pub s: S,
    pub orientation: Orientation,
}

pub fn build_cross_scene<S: Scalar>(s: S, orientation: Orientation) -> Result<CrossScene<S>> {
    if s.sign_tol(0.0) <= 0 || (s.clone() - S::one().half()).sign_tol(0.0) >= 0 {
        return Err(Error::InvalidParameter(format!("arm half-length {s:?} must lie in (0, 1/2)")));
    }
    Ok(CrossScene { s, orientation })
}

/// Mirror lines of one family are `n·p = c` for integers c; along a line,
/// `a·p` measures position, centers sit at `a·p ≡ parity·c` (mod `period`),
/// and an arm covers `|a·p − center| ≤ reach`.
struct Family<S> {
    n: Vec2<S>,
    a: Vec2<S>,
    period: i64,
    parity: bool,
    reach: S,
}

impl<S: Scalar> CrossScene<S> {
    /// Endpoints of the arms of the cross at `(i, j)`.
    pub fn arms(&self, i: i64, j: i64) -> [(Vec2<S>, Vec2<S>); 2] {
        let c = Vec2::new(S::from_i64(i), S::from_i64(j));
        let s = self.s.clone();
        let (u, w) = match self.orientation {
            Orientation::Axis => (Vec2::new(s.clone(), S::zero()), Vec2::new(S::zero(), s)),
            Orientation::Diagonal => (Vec2::new(s.clone(), s.clone()), Vec2::new(s.clone(), -s)),
        };
        [(c.clone() - u.clone(), c.clone() + u), (c.clone() - w.clone(), c + w)]
    }

    fn families(&self) -> [Family<S>; 2] {
        let (o, l) = (S::zero(), S::one());
        match self.orientation {
            Orientation::Axis => [
                Family { n: Vec2::new(o.clone(), l.clone()), a: Vec2::new(l.clone(), o.clone()), period: 1, parity: false, reach: self.s.clone() },
                Family { n: Vec2::new(l.clone(), o.clone()), a: Vec2::new(o, l), period: 1, parity: false, reach: self.s.clone() },
            ],
            Orientation::Diagonal => {
                let reach = self.s.clone() + self.s.clone();
                [
                    Family { n: Vec2::new(l.clone(), -l.clone()), a: Vec2::new(l.clone(), l.clone()), period: 2, parity: true, reach: reach.clone() },
                    Family { n: Vec2::new(l.clone(), l.clone()), a: Vec2::new(l.clone(), -l), period: 2, parity: true, reach },
                ]
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Contact {
    Miss,
    Arm,
    Endpoint,
    Center,
}

fn round<S: Scalar>(v: &S) -> i64 {
    (v.clone() + S::one().half()).floor_i64()
}

impl<S: Scalar> Family<S> {
    fn contact(&self, p: &Vec2<S>, c: i64, tol: f64) -> Contact {
        let g = self.a.dot(p);
        let base = if self.parity { c.rem_euclid(self.period) } else { 0 };
        let k = round(&((g.clone() - S::from_i64(base)) / S::from_i64(self.period)));
        let off = g - S::from_i64(k * self.period + base);
        let off = if off.sign_tol(0.0) < 0 { -off } else { off };
        if off.sign_tol(tol) == 0 {
            return Contact::Center;
        }
        match (off - self.reach.clone()).sign_tol(tol) {
            1 => Contact::Miss,
            0 => Contact::Endpoint,
            _ => Contact::Arm,
        }
    }

    fn on_line(&self, p: &Vec2<S>, tol: f64) -> Option<i64> {
        let f = self.n.dot(p);
        let c = round(&f);
        ((f - S::from_i64(c)).sign_tol(tol) == 0).then_some(c)
    }

    /// Specular reflection `2(d·a)a/|a|² − d` in the mirror direction.
    fn reflect(&self, d: &Vec2<S>) -> Vec2<S> {
        let k = (self.a.dot(d) + self.a.dot(d)) / self.a.norm_sq();
        self.a.scale(&k) - d.clone()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RayTermination {
    BudgetExhausted,
    HitArmEndpoint,
    HitCrossCenter,
}

#[derive(Clone, Debug)]
pub struct RayTrace<S = FieldElem> {
    pub segments: Vec<(Vec2<S>, Vec2<S>)>,
    pub directions: Vec<Vec2<S>>,
    pub bounces: usize,
    pub param: S,
    pub direction_units: bool,
    pub termination: RayTermination,
}

impl<S: Scalar> RayTrace<S> {
    pub fn end(&self) -> &Vec2<S> {
        &self.segments.last().expect("nonempty").1
    }

    pub fn final_direction(&self) -> &Vec2<S> {
        self.directions.last().expect("nonempty")
    }
}

/// Fly from `start` for `budget` length units (direction units when |dir|
/// is not exact), reflecting off arm interiors.
pub fn trace_ray<S: Scalar>(scene: &CrossScene<S>, start: &Vec2<S>, dir: &Vec2<S>, budget: &S, tol: f64) -> Result<RayTrace<S>> {
    let tol = if S::EXACT { 0.0 } else { tol };
    if dir.is_zero_tol(tol) {
        return Err(Error::ZeroDirection);
    }
    let fams = scene.families();
    for f in &fams {
        if let Some(c) = f.on_line(start, tol) {
            if f.contact(start, c, tol) != Contact::Miss {
                return Err(Error::InvalidParameter(format!("start {start:?} lies on a mirror")));
            }
        }
    }
    let (total, direction_units) = match dir.norm_sq().sqrt_opt() {
        Some(len) => (budget.clone() / len, false),
        None => (budget.clone(), true),
    };
    let mut pos = start.clone();
    let mut d = dir.clone();
    let mut param = S::zero();
    let mut seg_start = pos.clone();
    let mut segments = Vec::new();
    let mut directions = vec![d.clone()];
    let mut bounces = 0;
    let termination = loop {
        // next line crossing of each family strictly ahead
        let mut best: Option<(S, usize, i64)> = None;
        for (i, f) in fams.iter().enumerate() {
            let v = f.n.dot(&d);
            if v.sign_tol(tol) == 0 {
                continue;
            }
            let fp = f.n.dot(&pos);
            let c = match (f.on_line(&pos, tol), v.sign_tol(0.0) > 0) {
                (Some(on), true) => on + 1,
                (Some(on), false) => on - 1,
                (None, true) => fp.floor_i64() + 1,
                (None, false) => -((-fp.clone()).floor_i64()) - 1,
            };
            let t = (S::from_i64(c) - fp) / v;
            if best.as_ref().is_none_or(|(bt, _, _)| t < *bt) {
                best = Some((t, i, c));
            }
        }
        // along a mirror line the ray meets an arm endpoint ahead or nothing
        let along = fams.iter().find_map(|f| {
            (f.n.dot(&d).sign_tol(tol) == 0).then(|| f.on_line(&pos, tol).map(|c| (f, c))).flatten()
        });
        if let Some((f, c)) = along {
            let g = f.a.dot(&pos);
            let v = f.a.dot(&d);
            let base = if f.parity { c.rem_euclid(f.period) } else { 0 };
            let k = round(&((g.clone() - S::from_i64(base)) / S::from_i64(f.period)));
            let center = S::from_i64(k * f.period + base);
            let ahead = if v.sign_tol(0.0) > 0 { center.clone() - f.reach.clone() } else { center.clone() + f.reach.clone() };
            let target = if ((ahead.clone() - g.clone()) / v.clone()).sign_tol(tol) > 0 {
                ahead
            } else {
                let next = if v.sign_tol(0.0) > 0 { center + S::from_i64(f.period) } else { center - S::from_i64(f.period) };
                if v.sign_tol(0.0) > 0 { next - f.reach.clone() } else { next + f.reach.clone() }
            };
            let t = (target - g) / v;
            if best.as_ref().is_none_or(|(bt, _, _)| t < *bt) {
                let left = total.clone() - param.clone();
                if left < t {
                    pos = pos.clone() + d.scale(&left);
                    param = total.clone();
                    segments.push((seg_start.clone(), pos.clone()));
                    break RayTermination::BudgetExhausted;
                }
                pos = pos.clone() + d.scale(&t);
                param = param + t;
                segments.push((seg_start.clone(), pos.clone()));
                break RayTermination::HitArmEndpoint;
            }
        }
        let (t, i, c) = best.expect("direction is nonzero");
        let left = total.clone() - param.clone();
        if left < t {
            pos = pos.clone() + d.scale(&left);
            param = total.clone();
            segments.push((seg_start.clone(), pos.clone()));
            break RayTermination::BudgetExhausted;
        }
        pos = pos.clone() + d.scale(&t);
        param = param + t;
        let mut hit = fams[i].contact(&pos, c, tol);
        let other = 1 - i;
        let mut mirror = i;
        if let Some(c2) = fams[other].on_line(&pos, tol) {
            let h2 = fams[other].contact(&pos, c2, tol);
            if h2 != Contact::Miss && (hit == Contact::Miss || h2 == Contact::Center) {
                hit = h2;
                mirror = other;
            }
        }
        match hit {
            Contact::Miss => {}
            Contact::Arm => {
                segments.push((seg_start.clone(), pos.clone()));
                seg_start = pos.clone();
                d = fams[mirror].reflect(&d);
                directions.push(d.clone());
                bounces += 1;
            }
            Contact::Endpoint => {
                segments.push((seg_start.clone(), pos.clone()));
                break RayTermination::HitArmEndpoint;
            }
            Contact::Center => {
                segments.push((seg_start.clone(), pos.clone()));
                break RayTermination::HitCrossCenter;
            }
        }
    };
    Ok(RayTrace { segments, directions, bounces, param, direction_units, termination })
}

/// The default launch: bisectrix direction (1, 1).
pub fn bisectrix() -> Point {
    Vec2::ints(1, 1)
}

//! Affine automorphisms of the folded torus T: the horizontal twist γ_h, the
//! vertical twist γ_v, words in them, their derivatives and their action on
//! first homology.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::flow::ChartSegment;
use crate::qfield::{FieldElem, Mat2, Point, ProjMat2, Vec2};
use crate::surface::{canonical_t, Surface, SurfacePoint};

/// An affine map `z ↦ lin·z + trans` on a convex region of one chart.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Piece {
    pub poly: usize,
    pub domain: Vec<Point>,
    pub lin: Mat2<i64>,
    pub trans: Point,
}

impl Piece {
    pub fn apply(&self, p: &Point) -> Point {
        self.lin.apply(p) + self.trans.clone()
    }

    pub fn contains(&self, p: &Point) -> bool {
        let n = self.domain.len();
        (0..n).all(|i| {
            let (a, b) = (&self.domain[i], &self.domain[(i + 1) % n]);
            (b.clone() - a.clone()).cross(&(p.clone() - a.clone())).sign() >= 0
        })
    }

    /// The inverse map, defined on the image region.
    pub fn inverse(&self) -> Piece {
        let inv = self.lin.inverse_unimodular().expect("pieces are unimodular");
        Piece {
            poly: self.poly,
            domain: self.domain.iter().map(|v| self.apply(v)).collect(),
            lin: inv,
            trans: -inv.apply(&self.trans),
        }
    }

    /// Parameter interval of `a + t(b − a)` inside the domain, if it has
    /// positive length.
    fn clip(&self, a: &Point, b: &Point) -> Option<(FieldElem, FieldElem)> {
        let (mut lo, mut hi) = (FieldElem::zero(), FieldElem::one());
        let d = b.clone() - a.clone();
        let n = self.domain.len();
        for i in 0..n {
            let (v, w) = (&self.domain[i], &self.domain[(i + 1) % n]);
            let e = w.clone() - v.clone();
            let f0 = e.cross(&(a.clone() - v.clone()));
            let fd = e.cross(&d);
            match fd.sign() {
                0 => {
                    if f0.sign() < 0 {
                        return None;
                    }
                }
                s => {
                    let t = -f0 / fd;
                    if s > 0 {
                        lo = lo.max(t);
                    } else {
                        hi = hi.min(t);
                    }
                }
            }
        }
        (lo < hi).then_some((lo, hi))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GenName {
    H,
    V,
}

impl GenName {
    pub fn letter(self) -> char {
        match self {
            GenName::H => 'h',
            GenName::V => 'v',
        }
    }
}

#[derive(Clone, Debug)]
pub struct Generator {
    pub name: GenName,
    pub pieces: Vec<Piece>,
    pub inverse_pieces: Vec<Piece>,
    pub derivative: Mat2<i64>,
}

impl Generator {
    fn new(name: GenName, pieces: Vec<Piece>) -> Self {
        let derivative = pieces[0].lin;
        let inverse_pieces = pieces.iter().map(Piece::inverse).collect();
        Generator { name, pieces, inverse_pieces, derivative }
    }

    pub fn pieces(&self, inverse: bool) -> &[Piece] {
        if inverse {
            &self.inverse_pieces
        } else {
            &self.pieces
        }
    }

    /// Image of a chart point; any piece containing it gives the same point
    /// of the surface.
    pub fn apply_point(&self, p: &SurfacePoint, inverse: bool) -> Result<SurfacePoint> {
        let piece = self
            .pieces(inverse)
            .iter()
            .find(|pc| pc.poly == p.poly && pc.contains(&p.p))
            .ok_or_else(|| Error::OutsideSurface(format!("{} is in no piece of {}", p.p, self.name.letter())))?;
        Ok(SurfacePoint::new(piece.poly, piece.apply(&p.p)))
    }

    /// Image of a chart segment as consecutive chart segments, cut exactly at
    /// piece boundaries.
    pub fn apply_segment(&self, seg: &ChartSegment, inverse: bool) -> Result<Vec<ChartSegment>> {
        let mut parts: Vec<(FieldElem, FieldElem, &Piece)> = self
            .pieces(inverse)
            .iter()
            .filter(|pc| pc.poly == seg.poly)
            .filter_map(|pc| pc.clip(&seg.a, &seg.b).map(|(lo, hi)| (lo, hi, pc)))
            .collect();
        parts.sort_by(|x, y| x.0.cmp(&y.0).then(y.1.cmp(&x.1)));
        let d = seg.b.clone() - seg.a.clone();
        let at = |t: &FieldElem| seg.a.clone() + d.scale(t);
        let mut out = Vec::new();
        let mut reached = FieldElem::zero();
        for (lo, hi, pc) in parts {
            if hi <= reached {
                continue;
            }
            if lo > reached {
                return Err(Error::Refinement(format!("gap in pieces of {} along {}..{}", self.name.letter(), seg.a, seg.b)));
            }
            out.push(ChartSegment { poly: pc.poly, a: pc.apply(&at(&reached)), b: pc.apply(&at(&hi)) });
            reached = hi;
        }
        if reached != FieldElem::one() {
            return Err(Error::Refinement(format!("segment {}..{} leaves the pieces of {}", seg.a, seg.b, self.name.letter())));
        }
        Ok(out)
    }
}

fn tri(a: (i64, i64), b: (i64, i64), c: (i64, i64)) -> Vec<Point> {
    vec![Vec2::ints(a.0, a.1), Vec2::ints(b.0, b.1), Vec2::ints(c.0, c.1)]
}

fn piece(domain: Vec<Point>, lin: Mat2<i64>, t: (i64, i64)) -> Piece {
    Piece { poly: 0, domain, lin, trans: Vec2::ints(t.0, t.1) }
}

/// γ_h and γ_v on [`canonical_t`], validated.
pub fn build_generators() -> Result<(Generator, Generator)> {
    let s = canonical_t();
    let dh = Mat2::new(1, 3, 0, 1);
    let gh = Generator::new(
        GenName::H,
        vec![
            piece(tri((-1, 0), (2, 0), (-1, 1)), dh, (0, 0)),
            piece(tri((2, 0), (2, 1), (-1, 1)), dh, (-3, 0)),
        ],
    );
    let dv = Mat2::new(1, 0, 1, 1);
    let nv = dv.neg();
    let gv = Generator::new(
        GenName::V,
        vec![
            // full twist of the unit cylinder 1 ≤ x ≤ 2, fixing x = 1
            piece(tri((1, 0), (2, 0), (1, 1)), dv, (0, -1)),
            piece(tri((2, 0), (2, 1), (1, 1)), dv, (0, -2)),
            // half twist of the length-2 cylinder, fixing x = ±1
            piece(tri((1, 0), (1, 1), (0, 1)), dv, (0, -1)),
            piece(tri((0, 0), (1, 0), (0, 1)), nv, (0, 1)),
            piece(tri((-1, 0), (0, 0), (-1, 1)), dv, (0, 1)),
            piece(tri((0, 0), (0, 1), (-1, 1)), nv, (0, 1)),
        ],
    );
    validate_generator(&s, &gh)?;
    validate_generator(&s, &gv)?;
    Ok((gh, gv))
}

fn area(poly: &[Point]) -> FieldElem {
    let n = poly.len();
    (0..n).fold(FieldElem::zero(), |acc, i| acc + poly[i].cross(&poly[(i + 1) % n])) / FieldElem::int(2)
}

/// Tiling, constant derivative and continuity across piece boundaries and
/// edge gluings.
pub fn validate_generator(s: &Surface, g: &Generator) -> Result<()> {
    let name = g.name.letter();
    let d = ProjMat2(g.derivative);
    for (inverse, pieces) in [(false, &g.pieces), (true, &g.inverse_pieces)] {
        let total = pieces.iter().fold(FieldElem::zero(), |acc, p| acc + area(&p.domain));
        if total != s.area() {
            return Err(Error::Continuity(format!("pieces of {name} cover area {total}, not {}", s.area())));
        }
        for p in pieces.iter() {
            let lin = if inverse { p.lin.inverse_unimodular().expect("unimodular") } else { p.lin };
            if ProjMat2(lin) != d {
                return Err(Error::Continuity(format!("{name} has a piece with linear part {}", p.lin)));
            }
            for v in &p.domain {
                if s.locate(&SurfacePoint::new(p.poly, p.apply(v))) == crate::surface::Location::Outside {
                    return Err(Error::Continuity(format!("{name} maps {v} outside the chart")));
                }
            }
        }
        let fractions = [FieldElem::rational(1, 4), FieldElem::rational(1, 2), FieldElem::rational(3, 4), FieldElem::zero()];
        for p in pieces.iter() {
            let n = p.domain.len();
            for i in 0..n {
                let (a, b) = (&p.domain[i], &p.domain[(i + 1) % n]);
                for f in &fractions {
                    let q = SurfacePoint::new(p.poly, a.clone() + (b.clone() - a.clone()).scale(f));
                    let reference = SurfacePoint::new(p.poly, p.apply(&q.p));
                    for r in s.representatives(&q)? {
                        for other in pieces.iter().filter(|o| o.poly == r.poly && o.contains(&r.p)) {
                            let img = SurfacePoint::new(other.poly, other.apply(&r.p));
                            if !s.same_point(&img, &reference) {
                                return Err(Error::Continuity(format!("{name}: {} has images {} and {}", q.p, reference.p, img.p)));
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Letter {
    pub gen: GenName,
    pub inverse: bool,
}

impl Letter {
    pub fn inv(self) -> Letter {
        Letter { gen: self.gen, inverse: !self.inverse }
    }
}

/// A freely reduced word; `g₁g₂…gₙ` acts as `g₁ ∘ g₂ ∘ … ∘ gₙ`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct AutoWord {
    letters: Vec<Letter>,
}

impl AutoWord {
    pub fn identity() -> Self {
        AutoWord::default()
    }

    pub fn from_letters(letters: impl IntoIterator<Item = Letter>) -> Self {
        let mut out: Vec<Letter> = Vec::new();
        for l in letters {
            if out.last() == Some(&l.inv()) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        AutoWord { letters: out }
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn inverse(&self) -> Self {
        AutoWord { letters: self.letters.iter().rev().map(|l| l.inv()).collect() }
    }

    pub fn then(&self, other: &AutoWord) -> Self {
        AutoWord::from_letters(self.letters.iter().chain(&other.letters).copied())
    }

    pub fn pow(&self, k: i64) -> Self {
        let base = if k < 0 { self.inverse() } else { self.clone() };
        (0..k.unsigned_abs()).fold(AutoWord::identity(), |acc, _| acc.then(&base))
    }
}

impl fmt::Display for AutoWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.letters {
            let c = l.gen.letter();
            write!(f, "{}", if l.inverse { c.to_ascii_uppercase() } else { c })?;
        }
        Ok(())
    }
}

struct Parser<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    src: &'a str,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.chars.peek().is_some_and(|(_, c)| c.is_whitespace()) {
            self.chars.next();
        }
    }

    fn err(&self, msg: &str) -> Error {
        Error::WordSyntax(format!("{msg} in `{}`", self.src))
    }

    fn word(&mut self, nested: bool) -> Result<Vec<Letter>> {
        let mut out = Vec::new();
        loop {
            self.skip_ws();
            let atom = match self.chars.peek().map(|&(_, c)| c) {
                None if nested => return Err(self.err("unclosed `(`")),
                None => return Ok(out),
                Some(')') if nested => {
                    self.chars.next();
                    return Ok(out);
                }
                Some('(') => {
                    self.chars.next();
                    self.word(true)?
                }
                Some(c @ ('h' | 'H' | 'v' | 'V')) => {
                    self.chars.next();
                    let gen = if c.eq_ignore_ascii_case(&'h') { GenName::H } else { GenName::V };
                    vec![Letter { gen, inverse: c.is_ascii_uppercase() }]
                }
                Some(c) => return Err(self.err(&format!("unexpected `{c}`"))),
            };
            self.skip_ws();
            let k = if self.chars.peek().is_some_and(|&(_, c)| c == '^') {
                self.chars.next();
                self.skip_ws();
                let mut digits = String::new();
                if self.chars.peek().is_some_and(|&(_, c)| c == '-') {
                    digits.push('-');
                    self.chars.next();
                }
                while let Some(&(_, c)) = self.chars.peek().filter(|(_, c)| c.is_ascii_digit()) {
                    digits.push(c);
                    self.chars.next();
                }
                digits.parse::<i64>().map_err(|_| self.err("bad exponent"))?
            } else {
                1
            };
            let w = AutoWord { letters: atom }.pow(k);
            out.extend(w.letters);
        }
    }
}

impl FromStr for AutoWord {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let mut p = Parser { chars: s.char_indices().peekable(), src: s };
        Ok(AutoWord::from_letters(p.word(false)?))
    }
}

/// γ_h, γ_v and the surface they act on.
#[derive(Clone, Debug)]
pub struct Autos {
    pub surface: Surface,
    pub h: Generator,
    pub v: Generator,
}

impl Autos {
    pub fn new() -> Result<Self> {
        let (h, v) = build_generators()?;
        Ok(Autos { surface: canonical_t(), h, v })
    }

    pub fn generator(&self, g: GenName) -> &Generator {
        match g {
            GenName::H => &self.h,
            GenName::V => &self.v,
        }
    }

    /// Image chart point, letters applied right to left, before
    /// canonicalisation.
    pub fn eval_raw(&self, w: &AutoWord, p: &SurfacePoint) -> Result<SurfacePoint> {
        if self.surface.locate(p) == crate::surface::Location::Outside {
            return Err(Error::OutsideSurface(format!("{}", p.p)));
        }
        w.letters.iter().rev().try_fold(p.clone(), |q, l| self.generator(l.gen).apply_point(&q, l.inverse))
    }

    pub fn eval(&self, w: &AutoWord, p: &SurfacePoint) -> Result<SurfacePoint> {
        self.surface.canonical(&self.eval_raw(w, p)?)
    }

    pub fn derivative(&self, w: &AutoWord) -> ProjMat2 {
        ProjMat2(w.letters.iter().fold(Mat2::IDENTITY, |acc, l| {
            let d = self.generator(l.gen).derivative;
            acc.mul(&if l.inverse { d.inverse_unimodular().expect("unimodular") } else { d })
        }))
    }

    /// Image of a chart path under `w`, as consecutive chart segments.
    pub fn push_path(&self, w: &AutoWord, path: &[ChartSegment]) -> Result<Vec<ChartSegment>> {
        let mut cur = path.to_vec();
        for l in w.letters.iter().rev() {
            let g = self.generator(l.gen);
            let mut next = Vec::new();
            for seg in &cur {
                next.extend(g.apply_segment(seg, l.inverse)?);
            }
            cur = next;
        }
        Ok(cur)
    }

    /// Matrix of the induced map on H₁(T, Z) in the basis (e₁, e₂).
    pub fn h1_action(&self, w: &AutoWord) -> Result<Mat2<i64>> {
        let (p1, q1) = h1_class(&self.push_path(w, &e1_loop())?);
        let (p2, q2) = h1_class(&self.push_path(w, &e2_loop())?);
        Ok(Mat2::new(p1, p2, q1, q2))
    }

    /// Cone-point labels and the labels of their images.
    pub fn cone_point_permutation(&self, w: &AutoWord) -> Result<Vec<(String, String)>> {
        let census = self.surface.cone_census();
        census
            .iter()
            .map(|c| {
                let img = self.eval(w, &c.representative)?;
                let target = self
                    .surface
                    .cone_at(&img)
                    .and_then(|id| census.iter().find(|k| k.id == id))
                    .ok_or_else(|| Error::Continuity(format!("{} maps {} to the regular point {}", w, c.label, img.p)))?;
                Ok((c.label.clone(), target.label.clone()))
            })
            .collect()
    }
}

/// The horizontal loop y = 1/2, representing e₁.
pub fn e1_loop() -> Vec<ChartSegment> {
    let y = FieldElem::rational(1, 2);
    vec![ChartSegment { poly: 0, a: Vec2::new(FieldElem::int(-1), y.clone()), b: Vec2::new(FieldElem::int(2), y) }]
}

/// The vertical loop x = 3/2 around the unit cylinder, representing e₂.
pub fn e2_loop() -> Vec<ChartSegment> {
    let x = FieldElem::rational(3, 2);
    vec![ChartSegment { poly: 0, a: Vec2::new(x.clone(), FieldElem::zero()), b: Vec2::new(x, FieldElem::one()) }]
}

/// Homology class of a closed chart path, read from signed crossings with the
/// loops x = √3 (dual to e₁) and y = √3 − 1 (dual to e₂).
pub fn h1_class(path: &[ChartSegment]) -> (i64, i64) {
    let r2 = FieldElem::sqrt3();
    let r1 = FieldElem::sqrt3() - FieldElem::one();
    let crossings = |a: &FieldElem, b: &FieldElem, level: &FieldElem| -> i64 {
        let (sa, sb) = ((a - level).sign(), (b - level).sign());
        if sa < 0 && sb > 0 {
            1
        } else if sa > 0 && sb < 0 {
            -1
        } else {
            0
        }
    };
    path.iter().fold((0, 0), |(p, q), s| (p + crossings(&s.a.x, &s.b.x, &r2), q + crossings(&s.a.y, &s.b.y, &r1)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fe(s: &str) -> FieldElem {
        s.parse().unwrap()
    }

    fn sp(x: &str, y: &str) -> SurfacePoint {
        SurfacePoint::new(0, Vec2::new(fe(x), fe(y)))
    }

    fn w(s: &str) -> AutoWord {
        s.parse().unwrap()
    }

    #[test]
    fn word_syntax() {
        assert_eq!(w("(vHv)^4").len(), 12);
        assert_eq!(w("vHv").to_string(), "vHv");
        assert_eq!(w("hH"), AutoWord::identity());
        assert_eq!(w("v (hv)^-1"), w("vVH"));
        assert_eq!(w("v (hv)^-1").to_string(), "H");
        assert_eq!(w(" v ^ 2 "), w("vv"));
        assert!(matches!("(vh".parse::<AutoWord>(), Err(Error::WordSyntax(_))));
        assert!(matches!("vx".parse::<AutoWord>(), Err(Error::WordSyntax(_))));
        assert!(matches!("v^".parse::<AutoWord>(), Err(Error::WordSyntax(_))));
    }

    #[test]
    fn generator_values() {
        let a = Autos::new().unwrap();
        assert_eq!(a.eval(&w("h"), &sp("1/2", "1/2")).unwrap(), sp("2", "1/2"));
        assert_eq!(a.eval(&w("v"), &sp("3/2", "1/2")).unwrap(), sp("3/2", "0"));
        for x in ["-1", "-1/2", "0", "1/3", "3/2", "2"] {
            let p = sp(x, "0");
            assert!(a.surface.same_point(&a.eval(&w("h"), &p).unwrap(), &p));
        }
        assert_eq!(a.eval(&AutoWord::identity(), &sp("1/5", "2/7")).unwrap(), sp("1/5", "2/7"));
    }

    #[test]
    fn derivatives() {
        let a = Autos::new().unwrap();
        assert_eq!(a.derivative(&w("h")), ProjMat2(Mat2::new(1, 3, 0, 1)));
        assert_eq!(a.derivative(&w("v")), ProjMat2(Mat2::new(1, 0, 1, 1)));
        assert_eq!(a.derivative(&w("vHv")), ProjMat2(Mat2::new(2, 3, 1, 2)));
        assert_eq!(a.derivative(&AutoWord::identity()), ProjMat2(Mat2::IDENTITY));
    }

    #[test]
    fn homology_action() {
        let a = Autos::new().unwrap();
        assert_eq!(a.h1_action(&AutoWord::identity()).unwrap(), Mat2::IDENTITY);
        assert_eq!(a.h1_action(&w("h")).unwrap(), Mat2::new(1, 1, 0, 1));
        assert_eq!(a.h1_action(&w("v")).unwrap(), Mat2::new(1, 0, 1, 1));
        assert_eq!(a.h1_action(&w("vHv")).unwrap(), Mat2::new(0, -1, 1, 0));
        assert_eq!(a.h1_action(&w("(vHv)^4")).unwrap(), Mat2::IDENTITY);
    }

    #[test]
    fn cone_permutations() {
        let a = Autos::new().unwrap();
        let perm = |s: &str| {
            let mut p = a.cone_point_permutation(&w(s)).unwrap();
            p.sort();
            p
        };
        let pair = |x: &str, y: &str| (x.to_string(), y.to_string());
        assert_eq!(perm("h"), vec![pair("AB", "AB"), pair("C+", "C+"), pair("C-", "C-")]);
        assert_eq!(perm("v"), vec![pair("AB", "AB"), pair("C+", "C-"), pair("C-", "C+")]);
        assert_eq!(perm("(vHv)^4"), vec![pair("AB", "AB"), pair("C+", "C+"), pair("C-", "C-")]);
    }

    #[test]
    fn generators_pass_validation_and_broken_ones_do_not() {
        let s = canonical_t();
        let (h, _) = build_generators().unwrap();
        let mut broken = h.clone();
        broken.pieces[1].trans = Vec2::ints(-2, 0);
        broken.inverse_pieces = broken.pieces.iter().map(Piece::inverse).collect();
        assert!(validate_generator(&s, &broken).is_err());
    }
}

//! Exact arithmetic in the real quadratic field Q(√3).
//!
//! [`FieldElem`] stores `a + b·√3` with arbitrary-precision rational
//! coefficients. Everything geometric in this crate (points on the folded
//! torus, slit events in the universal cover, eigen-directions of the twist
//! derivatives) is expressed over this field so that incidence predicates are
//! decided exactly.
//!
//! The [`Scalar`] trait abstracts over `FieldElem` and `f64` so tracers can run
//! in an exact mode and a fast floating-point mode from one code path.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const SQRT_3: f64 = 1.732_050_807_568_877_2;

/// |shadow| above this (relative to the coefficient scale) decides a sign
/// without touching the big integers.
const SHADOW_FILTER: f64 = 1.0 / 1_048_576.0;

/// An element `a + b·√3` of Q(√3); both coefficients are kept reduced.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct FieldElem {
    a: BigRational,
    b: BigRational,
}

fn ratio(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

fn rational_sqrt(r: &BigRational) -> Option<BigRational> {
    if r.is_negative() {
        return None;
    }
    let n = r.numer().sqrt();
    let d = r.denom().sqrt();
    if &(&n * &n) == r.numer() && &(&d * &d) == r.denom() {
        Some(BigRational::new(n, d))
    } else {
        None
    }
}

fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        if r.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

impl FieldElem {
    pub fn new(a: BigRational, b: BigRational) -> Self {
        FieldElem { a, b }
    }

    pub fn zero() -> Self {
        FieldElem::new(BigRational::zero(), BigRational::zero())
    }

    pub fn one() -> Self {
        FieldElem::int(1)
    }

    pub fn int(n: i64) -> Self {
        FieldElem::new(BigRational::from_integer(BigInt::from(n)), BigRational::zero())
    }

    /// The rational `p/q`.
    pub fn rational(p: i64, q: i64) -> Self {
        FieldElem::new(ratio(p, q), BigRational::zero())
    }

    /// `p/q + (r/s)·√3`.
    pub fn from_parts(p: i64, q: i64, r: i64, s: i64) -> Self {
        FieldElem::new(ratio(p, q), ratio(r, s))
    }

    pub fn sqrt3() -> Self {
        FieldElem::new(BigRational::zero(), BigRational::one())
    }

    pub fn from_rational(a: BigRational) -> Self {
        FieldElem::new(a, BigRational::zero())
    }

    pub fn a(&self) -> &BigRational {
        &self.a
    }

    pub fn b(&self) -> &BigRational {
        &self.b
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    pub fn is_rational(&self) -> bool {
        self.b.is_zero()
    }

    pub fn is_integer(&self) -> bool {
        self.b.is_zero() && self.a.is_integer()
    }

    /// Galois conjugate `a − b√3`.
    pub fn conj(&self) -> Self {
        FieldElem::new(self.a.clone(), -self.b.clone())
    }

    /// Field norm `a² − 3b²`.
    pub fn norm(&self) -> BigRational {
        &self.a * &self.a - BigRational::from_integer(BigInt::from(3)) * &self.b * &self.b
    }

    fn shadow(&self) -> f64 {
        let (a, b) = (rational_to_f64(&self.a), rational_to_f64(&self.b) * SQRT_3);
        if sign_of(&self.a) * sign_of(&self.b) >= 0 {
            return a + b;
        }
        // Opposite signs cancel; the conjugate a - b√3 does not.
        rational_to_f64(&self.norm()) / (a - b)
    }

    fn exact_sign(&self) -> i32 {
        let sa = sign_of(&self.a);
        let sb = sign_of(&self.b);
        if sa == 0 {
            return sb;
        }
        if sb == 0 || sa == sb {
            return sa;
        }
        let a2 = &self.a * &self.a;
        let b2 = BigRational::from_integer(BigInt::from(3)) * &self.b * &self.b;
        if a2 > b2 {
            sa
        } else {
            sb
        }
    }

    /// Sign of the real value, decided exactly. A double-precision shadow
    /// short-circuits the comparison when it is clearly away from zero.
    pub fn sign(&self) -> i32 {
        let fa = rational_to_f64(&self.a);
        let fb = rational_to_f64(&self.b);
        let approx = fa + fb * SQRT_3;
        let scale = 1.0 + fa.abs() + 2.0 * fb.abs();
        if approx.is_finite() && approx.abs() > SHADOW_FILTER * scale {
            if approx > 0.0 {
                1
            } else {
                -1
            }
        } else {
            self.exact_sign()
        }
    }

    pub fn abs(&self) -> Self {
        if self.sign() < 0 {
            -self.clone()
        } else {
            self.clone()
        }
    }

    pub fn to_f64(&self) -> f64 {
        self.shadow()
    }

    pub fn recip(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::DivisionByZero);
        }
        let n = self.norm();
        Ok(FieldElem::new(&self.a / &n, -(&self.b / &n)))
    }

    pub fn checked_div(&self, other: &Self) -> Result<Self> {
        Ok(self * &other.recip()?)
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = FieldElem::one();
        let mut base = self.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                acc = &acc * &base;
            }
            base = &base * &base;
            k >>= 1;
        }
        acc
    }

    /// Largest integer not exceeding the value.
    pub fn floor(&self) -> BigInt {
        if self.b.is_zero() {
            return self.a.floor().to_integer();
        }
        let approx = self.shadow();
        let mut k = if approx.is_finite() {
            BigInt::from(approx.floor() as i64)
        } else {
            self.a.floor().to_integer() + (&self.b * BigRational::from_integer(BigInt::from(2))).floor().to_integer()
        };
        loop {
            let kf = FieldElem::from_rational(BigRational::from_integer(k.clone()));
            if (self - &kf).sign() < 0 {
                k -= 1;
                continue;
            }
            let k1 = FieldElem::from_rational(BigRational::from_integer(&k + 1));
            if (self - &k1).sign() >= 0 {
                k += 1;
                continue;
            }
            return k;
        }
    }

    /// Exact square root inside Q(√3), when one exists.
    pub fn sqrt(&self) -> Option<Self> {
        match self.sign() {
            -1 => return None,
            0 => return Some(FieldElem::zero()),
            _ => {}
        }
        let three = BigRational::from_integer(BigInt::from(3));
        if self.b.is_zero() {
            if let Some(r) = rational_sqrt(&self.a) {
                return Some(FieldElem::from_rational(r));
            }
            return rational_sqrt(&(&self.a / &three)).map(|e| FieldElem::new(BigRational::zero(), e));
        }
        // (c + e√3)² = a + b√3  ⇒  c² = (a ± √(a² − 3b²)) / 2, e = b / 2c.
        let root = rational_sqrt(&self.norm())?;
        let two = BigRational::from_integer(BigInt::from(2));
        for c2 in [(&self.a + &root) / &two, (&self.a - &root) / &two] {
            if let Some(c) = rational_sqrt(&c2) {
                if c.is_zero() {
                    continue;
                }
                let e = &self.b / (&two * &c);
                let cand = FieldElem::new(c, e);
                let cand = if cand.sign() < 0 { -cand } else { cand };
                if &(&cand * &cand) == self {
                    return Some(cand);
                }
            }
        }
        None
    }
}

fn sign_of(r: &BigRational) -> i32 {
    if r.is_zero() {
        0
    } else if r.is_positive() {
        1
    } else {
        -1
    }
}

impl Default for FieldElem {
    fn default() -> Self {
        FieldElem::zero()
    }
}

impl From<i64> for FieldElem {
    fn from(n: i64) -> Self {
        FieldElem::int(n)
    }
}

impl PartialOrd for FieldElem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for FieldElem {
    fn cmp(&self, other: &Self) -> Ordering {
        (self - other).sign().cmp(&0)
    }
}

macro_rules! forward_binop {
    ($tr:ident, $method:ident, $body:expr) => {
        impl<'a> $tr<&'a FieldElem> for &'a FieldElem {
            type Output = FieldElem;
            fn $method(self, rhs: &'a FieldElem) -> FieldElem {
                let f: fn(&FieldElem, &FieldElem) -> FieldElem = $body;
                f(self, rhs)
            }
        }
        impl $tr<FieldElem> for FieldElem {
            type Output = FieldElem;
            fn $method(self, rhs: FieldElem) -> FieldElem {
                (&self).$method(&rhs)
            }
        }
        impl<'a> $tr<&'a FieldElem> for FieldElem {
            type Output = FieldElem;
            fn $method(self, rhs: &'a FieldElem) -> FieldElem {
                (&self).$method(rhs)
            }
        }
    };
}

forward_binop!(Add, add, |x, y| FieldElem::new(&x.a + &y.a, &x.b + &y.b));
forward_binop!(Sub, sub, |x, y| FieldElem::new(&x.a - &y.a, &x.b - &y.b));
forward_binop!(Mul, mul, |x, y| {
    let three = BigRational::from_integer(BigInt::from(3));
    FieldElem::new(&x.a * &y.a + three * &x.b * &y.b, &x.a * &y.b + &x.b * &y.a)
});
// Panics on a zero divisor; use `checked_div` when the divisor is untrusted.
forward_binop!(Div, div, |x, y| x.checked_div(y).expect("division by zero in Q(sqrt 3)"));

impl Neg for FieldElem {
    type Output = FieldElem;
    fn neg(self) -> FieldElem {
        FieldElem::new(-self.a, -self.b)
    }
}

impl Neg for &FieldElem {
    type Output = FieldElem;
    fn neg(self) -> FieldElem {
        FieldElem::new(-self.a.clone(), -self.b.clone())
    }
}

fn fmt_ratio(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

impl fmt::Display for FieldElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}+{}*rt3", fmt_ratio(&self.a), fmt_ratio(&self.b))
    }
}

impl fmt::Debug for FieldElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (~{:.6})", self, self.to_f64())
    }
}

fn parse_rational(s: &str, whole: &str) -> Result<BigRational> {
    let bad = || Error::ParseLiteral(whole.to_string());
    let (p, q) = match s.split_once('/') {
        Some((p, q)) => (p, q),
        None => (s, "1"),
    };
    let p = parse_decimal(p.trim()).ok_or_else(bad)?;
    let q = parse_decimal(q.trim()).ok_or_else(bad)?;
    if q.is_zero() {
        return Err(bad());
    }
    Ok(p / q)
}

/// Exact value of an integer, decimal or scientific literal such as `-2.5e-3`.
fn parse_decimal(s: &str) -> Option<BigRational> {
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (int, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    let (sign, int) = match int.as_bytes().first() {
        Some(b'-') => (-1, &int[1..]),
        Some(b'+') => (1, &int[1..]),
        _ => (1, int),
    };
    let digits = format!("{int}{frac}");
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) || exp.unsigned_abs() > 4096 {
        return None;
    }
    let n: BigInt = digits.parse().ok()?;
    let shift = exp - frac.len() as i32;
    let ten = BigInt::from(10);
    let scale = num_traits::pow(ten, shift.unsigned_abs() as usize);
    let v = if shift >= 0 { BigRational::from_integer(n * scale) } else { BigRational::new(n, scale) };
    Some(if sign < 0 { -v } else { v })
}

impl FromStr for FieldElem {
    type Err = Error;

    /// Accepts the canonical `p/q+r/s*rt3` form as well as the shorthands
    /// `p/q`, `p`, `r/s*rt3`, `rt3` and `p/q-r/s*rt3`.
    fn from_str(input: &str) -> Result<Self> {
        let s: String = input.chars().filter(|c| !c.is_whitespace()).collect();
        if s.is_empty() {
            return Err(Error::ParseLiteral(input.to_string()));
        }
        let Some(head) = s.strip_suffix("rt3") else {
            return Ok(FieldElem::from_rational(parse_rational(&s, input)?));
        };
        let head = head.strip_suffix('*').unwrap_or(head);
        let bytes = head.as_bytes();
        let split = (1..bytes.len())
            .rev()
            .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && bytes[i - 1].is_ascii_digit());
        let (a_part, b_part) = match split {
            Some(i) => (&head[..i], &head[i..]),
            None => ("0", head),
        };
        let b_part = b_part.strip_prefix('+').unwrap_or(b_part);
        let b_part = match b_part {
            "" => "1",
            "-" => "-1",
            other => other,
        };
        Ok(FieldElem::new(parse_rational(a_part, input)?, parse_rational(b_part, input)?))
    }
}

impl Serialize for FieldElem {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for FieldElem {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldOp {
    Add,
    Sub,
    Mul,
    Div,
    Neg,
}

/// Dispatch one field operation; `Neg` ignores `y`.
pub fn field_arith(op: FieldOp, x: &FieldElem, y: &FieldElem) -> Result<FieldElem> {
    Ok(match op {
        FieldOp::Add => x + y,
        FieldOp::Sub => x - y,
        FieldOp::Mul => x * y,
        FieldOp::Div => x.checked_div(y)?,
        FieldOp::Neg => -x,
    })
}

/// Number type a tracer can run on: exact [`FieldElem`] or `f64`.
pub trait Scalar:
    Clone
    + fmt::Debug
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    const EXACT: bool;

    fn from_field(x: &FieldElem) -> Self;
    fn from_i64(v: i64) -> Self;
    fn to_f64(&self) -> f64;
    /// Sign, treating |x| ≤ `tol` as zero in float mode; exact types ignore `tol`.
    fn sign_tol(&self, tol: f64) -> i32;
    fn floor_i64(&self) -> i64;
    fn sqrt_opt(&self) -> Option<Self>;

    fn zero() -> Self {
        Self::from_i64(0)
    }
    fn one() -> Self {
        Self::from_i64(1)
    }
    fn half(&self) -> Self {
        self.clone() / Self::from_i64(2)
    }
}

impl Scalar for FieldElem {
    const EXACT: bool = true;

    fn from_field(x: &FieldElem) -> Self {
        x.clone()
    }
    fn from_i64(v: i64) -> Self {
        FieldElem::int(v)
    }
    fn to_f64(&self) -> f64 {
        FieldElem::to_f64(self)
    }
    fn sign_tol(&self, _tol: f64) -> i32 {
        self.sign()
    }
    fn floor_i64(&self) -> i64 {
        self.floor().to_i64().expect("floor out of i64 range")
    }
    fn sqrt_opt(&self) -> Option<Self> {
        self.sqrt()
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_field(x: &FieldElem) -> Self {
        x.to_f64()
    }
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn sign_tol(&self, tol: f64) -> i32 {
        if *self > tol {
            1
        } else if *self < -tol {
            -1
        } else {
            0
        }
    }
    fn floor_i64(&self) -> i64 {
        self.floor() as i64
    }
    fn sqrt_opt(&self) -> Option<Self> {
        (*self >= 0.0).then(|| self.sqrt())
    }
}

/// A point or vector in the plane.
#[derive(Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Vec2<S = FieldElem> {
    pub x: S,
    pub y: S,
}

pub type Point = Vec2<FieldElem>;

impl<S: fmt::Debug> fmt::Debug for Vec2<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:?}, {:?})", self.x, self.y)
    }
}

impl fmt::Display for Vec2<FieldElem> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.x, self.y)
    }
}

impl<S> Vec2<S> {
    pub fn new(x: S, y: S) -> Self {
        Vec2 { x, y }
    }
}

impl Vec2<FieldElem> {
    /// Integer coordinates.
    pub fn ints(x: i64, y: i64) -> Self {
        Vec2::new(FieldElem::int(x), FieldElem::int(y))
    }

    pub fn to_f64(&self) -> Vec2<f64> {
        Vec2::new(self.x.to_f64(), self.y.to_f64())
    }

    /// Parse `X,Y` with each coordinate a field literal.
    pub fn parse_pair(s: &str) -> Result<Self> {
        let (x, y) = s.split_once(',').ok_or_else(|| Error::ParseLiteral(s.to_string()))?;
        Ok(Vec2::new(x.parse()?, y.parse()?))
    }
}

impl<S: Scalar> Vec2<S> {
    pub fn from_field(p: &Vec2<FieldElem>) -> Self {
        Vec2::new(S::from_field(&p.x), S::from_field(&p.y))
    }

    pub fn cross(&self, o: &Self) -> S {
        self.x.clone() * o.y.clone() - self.y.clone() * o.x.clone()
    }

    pub fn dot(&self, o: &Self) -> S {
        self.x.clone() * o.x.clone() + self.y.clone() * o.y.clone()
    }

    pub fn norm_sq(&self) -> S {
        self.dot(self)
    }

    pub fn scale(&self, k: &S) -> Self {
        Vec2::new(self.x.clone() * k.clone(), self.y.clone() * k.clone())
    }

    /// Quarter turn counterclockwise.
    pub fn perp(&self) -> Self {
        Vec2::new(-self.y.clone(), self.x.clone())
    }

    pub fn is_zero_tol(&self, tol: f64) -> bool {
        self.x.sign_tol(tol) == 0 && self.y.sign_tol(tol) == 0
    }

    pub fn approx_eq(&self, o: &Self, tol: f64) -> bool {
        (self.clone() - o.clone()).is_zero_tol(tol)
    }

    pub fn to_f64s(&self) -> Vec2<f64> {
        Vec2::new(self.x.to_f64(), self.y.to_f64())
    }

    pub fn midpoint(&self, o: &Self) -> Self {
        (self.clone() + o.clone()).scale(&S::one().half())
    }

    /// Same direction (parallel and pointing the same way).
    pub fn same_dir(&self, o: &Self, tol: f64) -> bool {
        self.cross(o).sign_tol(tol) == 0 && self.dot(o).sign_tol(tol) > 0
    }
}

impl Vec2<f64> {
    pub fn length(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

impl<S: Scalar> Add for Vec2<S> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl<S: Scalar> Sub for Vec2<S> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl<S: Scalar> Neg for Vec2<S> {
    type Output = Self;
    fn neg(self) -> Self {
        Vec2::new(-self.x, -self.y)
    }
}

/// 2×2 matrix `[[a, b], [c, d]]`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct Mat2<T = i64> {
    pub a: T,
    pub b: T,
    pub c: T,
    pub d: T,
}

impl<T> Mat2<T> {
    pub const fn new(a: T, b: T, c: T, d: T) -> Self {
        Mat2 { a, b, c, d }
    }
}

impl Mat2<i64> {
    pub const IDENTITY: Mat2<i64> = Mat2::new(1, 0, 0, 1);

    pub fn mul(&self, o: &Self) -> Self {
        Mat2::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }

    pub fn det(&self) -> i64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> i64 {
        self.a + self.d
    }

    pub fn neg(&self) -> Self {
        Mat2::new(-self.a, -self.b, -self.c, -self.d)
    }

    /// Inverse of a unimodular matrix.
    pub fn inverse_unimodular(&self) -> Option<Self> {
        match self.det() {
            1 => Some(Mat2::new(self.d, -self.b, -self.c, self.a)),
            -1 => Some(Mat2::new(-self.d, self.b, self.c, -self.a)),
            _ => None,
        }
    }

    pub fn pow(&self, k: u32) -> Self {
        (0..k).fold(Mat2::IDENTITY, |acc, _| acc.mul(self))
    }

    pub fn apply_ints(&self, v: (i64, i64)) -> (i64, i64) {
        (self.a * v.0 + self.b * v.1, self.c * v.0 + self.d * v.1)
    }

    pub fn apply<S: Scalar>(&self, v: &Vec2<S>) -> Vec2<S> {
        let (a, b, c, d) = (S::from_i64(self.a), S::from_i64(self.b), S::from_i64(self.c), S::from_i64(self.d));
        Vec2::new(a * v.x.clone() + b * v.y.clone(), c * v.x.clone() + d * v.y.clone())
    }
}

impl fmt::Display for Mat2<i64> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{},{}],[{},{}]]", self.a, self.b, self.c, self.d)
    }
}

/// A matrix taken up to global sign, i.e. an element of PSL(2, Z).
#[derive(Clone, Copy, Debug, Eq, Serialize, Deserialize)]
pub struct ProjMat2(pub Mat2<i64>);

impl ProjMat2 {
    pub fn representative(&self) -> &Mat2<i64> {
        &self.0
    }

    /// Representative with nonnegative trace (first nonzero entry positive on ties).
    pub fn normalized(&self) -> Mat2<i64> {
        let m = self.0;
        let key = [m.a + m.d, m.a, m.b, m.c, m.d];
        let first = key.iter().copied().find(|&v| v != 0).unwrap_or(0);
        if first < 0 {
            m.neg()
        } else {
            m
        }
    }
}

impl PartialEq for ProjMat2 {
    fn eq(&self, other: &Self) -> bool {
        self.0 == other.0 || self.0 == other.0.neg()
    }
}

impl std::hash::Hash for ProjMat2 {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.normalized().hash(state)
    }
}

impl fmt::Display for ProjMat2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "±{}", self.normalized())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EigenPair {
    pub value: FieldElem,
    pub vector: Vec2<FieldElem>,
}

/// Eigen-decomposition of a hyperbolic integer matrix; `expanding` has the
/// eigenvalue of larger absolute value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EigenDirections {
    pub expanding: EigenPair,
    pub contracting: EigenPair,
}

fn normalize_direction(v: Vec2<FieldElem>) -> Vec2<FieldElem> {
    let v = if v.y.is_zero() {
        Vec2::new(FieldElem::one(), FieldElem::zero())
    } else {
        let k = v.y.abs().recip().expect("nonzero");
        v.scale(&k)
    };
    if v.x.sign() < 0 {
        -v
    } else {
        v
    }
}

fn eigenvector(m: &Mat2<i64>, lambda: &FieldElem) -> Vec2<FieldElem> {
    let raw = if m.b != 0 {
        Vec2::new(FieldElem::int(m.b), lambda - &FieldElem::int(m.a))
    } else if m.c != 0 {
        Vec2::new(lambda - &FieldElem::int(m.d), FieldElem::int(m.c))
    } else if lambda == &FieldElem::int(m.a) {
        Vec2::ints(1, 0)
    } else {
        Vec2::ints(0, 1)
    };
    normalize_direction(raw)
}

/// Exact eigenpairs of an integer matrix whose eigenvalues lie in Q(√3).
///
/// Eigenvectors are scaled so that |y| = 1 (or `(1, 0)` when horizontal) with
/// x ≥ 0, e.g. `(√3, 1)` rather than `(3, √3)`.
pub fn eigen_directions(m: &Mat2<i64>) -> Result<EigenDirections> {
    let t = BigInt::from(m.trace());
    let det = BigInt::from(m.det());
    let disc = &t * &t - BigInt::from(4) * &det;
    if !disc.is_positive() {
        return Err(Error::NotHyperbolic);
    }
    let root = disc.sqrt();
    let s = if &root * &root == disc {
        FieldElem::from_rational(BigRational::from_integer(root))
    } else {
        let (q, r) = disc.div_rem(&BigInt::from(3));
        let k = q.sqrt();
        if r.is_zero() && &k * &k == q {
            FieldElem::new(BigRational::zero(), BigRational::from_integer(k))
        } else {
            return Err(Error::UnsupportedDiscriminant(disc.to_string()));
        }
    };
    let tf = FieldElem::from_rational(BigRational::from_integer(t.clone()));
    let two = FieldElem::int(2);
    let plus = (&tf + &s) / two.clone();
    let minus = (&tf - &s) / two;
    let (big, small) = if t.is_negative() { (minus, plus) } else { (plus, minus) };
    Ok(EigenDirections {
        expanding: EigenPair { vector: eigenvector(m, &big), value: big },
        contracting: EigenPair { vector: eigenvector(m, &small), value: small },
    })
}

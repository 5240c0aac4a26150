//! Exact arithmetic in the ring of integers `O_d` of `Q(sqrt(-d))`, 2x2
//! matrices over the field, congruence levels and group element streams.

use std::collections::HashSet;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::arith;
use crate::error::{Error, Result};

/// `(two_x + two_y * sqrt(-d)) / 2`, an element of `O_d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct QuadInt {
    pub two_x: i128,
    pub two_y: i128,
    pub d: i64,
}

fn valid_doubled(two_x: i128, two_y: i128, d: i64) -> bool {
    if d % 4 == 3 {
        (two_x - two_y) % 2 == 0
    } else {
        two_x % 2 == 0 && two_y % 2 == 0
    }
}

impl QuadInt {
    pub fn new(two_x: i128, two_y: i128, d: i64) -> Result<Self> {
        if d <= 0 {
            return Err(Error::InvalidArgument(format!("d must be positive, got {d}")));
        }
        if !valid_doubled(two_x, two_y, d) {
            return Err(Error::NotIntegral(format!("({two_x} + {two_y}*sqrt(-{d}))/2")));
        }
        Ok(QuadInt { two_x, two_y, d })
    }

    pub fn from_int(n: i128, d: i64) -> Self {
        QuadInt { two_x: 2 * n, two_y: 0, d }
    }

    pub fn zero(d: i64) -> Self {
        Self::from_int(0, d)
    }

    pub fn one(d: i64) -> Self {
        Self::from_int(1, d)
    }

    /// `sqrt(-d)`.
    pub fn sqrt_neg_d(d: i64) -> Self {
        QuadInt { two_x: 0, two_y: 2, d }
    }

    /// The ring generator `omega`: `(1 + sqrt(-d))/2` if `d = 3 (mod 4)`, else `sqrt(-d)`.
    pub fn omega(d: i64) -> Self {
        if d % 4 == 3 {
            QuadInt { two_x: 1, two_y: 1, d }
        } else {
            Self::sqrt_neg_d(d)
        }
    }

    /// `b1 + b2 * omega`.
    pub fn from_basis(b1: i128, b2: i128, d: i64) -> Self {
        if d % 4 == 3 {
            QuadInt { two_x: 2 * b1 + b2, two_y: b2, d }
        } else {
            QuadInt { two_x: 2 * b1, two_y: 2 * b2, d }
        }
    }

    /// Coordinates `(b1, b2)` in the basis `{1, omega}`.
    pub fn basis_coords(&self) -> (i128, i128) {
        if self.d % 4 == 3 {
            ((self.two_x - self.two_y) / 2, self.two_y)
        } else {
            (self.two_x / 2, self.two_y / 2)
        }
    }

    pub fn is_zero(&self) -> bool {
        self.two_x == 0 && self.two_y == 0
    }

    pub fn conj(&self) -> Self {
        QuadInt { two_y: -self.two_y, ..*self }
    }

    /// `|self|^2`.
    pub fn norm(&self) -> i128 {
        (self.two_x * self.two_x + self.d as i128 * self.two_y * self.two_y) / 4
    }

    /// Twice the real part.
    pub fn trace(&self) -> i128 {
        self.two_x
    }

    /// Rational integer value, if the imaginary part vanishes.
    pub fn as_int(&self) -> Option<i128> {
        (self.two_y == 0).then_some(self.two_x / 2)
    }

    pub fn scale(&self, k: i128) -> Self {
        QuadInt { two_x: self.two_x * k, two_y: self.two_y * k, d: self.d }
    }

    /// Exact division by a rational integer, if the quotient lies in `O_d`.
    pub fn div_int(&self, k: i128) -> Option<Self> {
        if k == 0 || self.two_x % k != 0 || self.two_y % k != 0 {
            return None;
        }
        let (x, y) = (self.two_x / k, self.two_y / k);
        valid_doubled(x, y, self.d).then_some(QuadInt { two_x: x, two_y: y, d: self.d })
    }

    /// Whether `self` divides `other` in `O_d`.
    pub fn divides(&self, other: &QuadInt) -> bool {
        if self.is_zero() {
            return other.is_zero();
        }
        (*other * self.conj()).div_int(self.norm()).is_some()
    }

    pub fn is_unit(&self) -> bool {
        self.norm() == 1
    }

    /// Gcd of the basis coordinates (the largest rational integer dividing `self`).
    pub fn content(&self) -> i128 {
        let (b1, b2) = self.basis_coords();
        b1.gcd(&b2)
    }

    /// Units of `O_d`: `{±1}`, plus `±i` for `d = 1` and the sixth roots of unity for `d = 3`.
    pub fn units(d: i64) -> Vec<QuadInt> {
        match d {
            1 => vec![(2, 0), (0, 2), (-2, 0), (0, -2)],
            3 => vec![(2, 0), (1, 1), (-1, 1), (-2, 0), (-1, -1), (1, -1)],
            _ => vec![(2, 0), (-2, 0)],
        }
        .into_iter()
        .map(|(x, y)| QuadInt { two_x: x, two_y: y, d })
        .collect()
    }
}

impl Add for QuadInt {
    type Output = QuadInt;
    fn add(self, o: QuadInt) -> QuadInt {
        debug_assert_eq!(self.d, o.d);
        QuadInt { two_x: self.two_x + o.two_x, two_y: self.two_y + o.two_y, d: self.d }
    }
}

impl Sub for QuadInt {
    type Output = QuadInt;
    fn sub(self, o: QuadInt) -> QuadInt {
        self + (-o)
    }
}

impl Neg for QuadInt {
    type Output = QuadInt;
    fn neg(self) -> QuadInt {
        QuadInt { two_x: -self.two_x, two_y: -self.two_y, d: self.d }
    }
}

impl Mul for QuadInt {
    type Output = QuadInt;
    fn mul(self, o: QuadInt) -> QuadInt {
        debug_assert_eq!(self.d, o.d);
        let d = self.d as i128;
        QuadInt {
            two_x: (self.two_x * o.two_x - d * self.two_y * o.two_y) / 2,
            two_y: (self.two_x * o.two_y + self.two_y * o.two_x) / 2,
            d: self.d,
        }
    }
}

fn fmt_quad(f: &mut fmt::Formatter<'_>, p: i128, q: i128, den: i128, d: i64) -> fmt::Result {
    let body = match (p, q) {
        (_, 0) => format!("{p}"),
        (0, _) => format!("{q}√-{d}"),
        _ if q < 0 => format!("{p}-{}√-{d}", -q),
        _ => format!("{p}+{q}√-{d}"),
    };
    if den == 1 {
        write!(f, "{body}")
    } else {
        write!(f, "({body})/{den}")
    }
}

impl fmt::Display for QuadInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (p, q, den) = if self.two_x % 2 == 0 && self.two_y % 2 == 0 {
            (self.two_x / 2, self.two_y / 2, 1)
        } else {
            (self.two_x, self.two_y, 2)
        };
        fmt_quad(f, p, q, den, self.d)
    }
}

/// `(p + q sqrt(-d)) / den` in lowest terms with `den > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FieldElem {
    pub p: i128,
    pub q: i128,
    pub den: i128,
}

impl FieldElem {
    pub fn new(p: i128, q: i128, den: i128) -> Self {
        assert!(den != 0, "zero denominator");
        let g = p.gcd(&q).gcd(&den);
        let s = den.signum();
        FieldElem { p: s * p / g, q: s * q / g, den: s * den / g }
    }

    pub fn from_int(n: i128) -> Self {
        FieldElem { p: n, q: 0, den: 1 }
    }

    pub fn zero() -> Self {
        Self::from_int(0)
    }

    pub fn is_zero(&self) -> bool {
        self.p == 0 && self.q == 0
    }

    pub fn add(&self, o: &FieldElem) -> FieldElem {
        FieldElem::new(self.p * o.den + o.p * self.den, self.q * o.den + o.q * self.den, self.den * o.den)
    }

    pub fn neg(&self) -> FieldElem {
        FieldElem { p: -self.p, q: -self.q, den: self.den }
    }

    pub fn sub(&self, o: &FieldElem) -> FieldElem {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &FieldElem, d: i64) -> FieldElem {
        let d = d as i128;
        FieldElem::new(
            self.p * o.p - d * self.q * o.q,
            self.p * o.q + self.q * o.p,
            self.den * o.den,
        )
    }

    pub fn conj(&self) -> FieldElem {
        FieldElem { q: -self.q, ..*self }
    }

    /// `|self|^2` as `(numerator, denominator)`.
    pub fn norm(&self, d: i64) -> (i128, i128) {
        let n = self.p * self.p + d as i128 * self.q * self.q;
        let den = self.den * self.den;
        let g = n.gcd(&den);
        (n / g, den / g)
    }

    pub fn inverse(&self, d: i64) -> Result<FieldElem> {
        if self.is_zero() {
            return Err(Error::Singular);
        }
        let n = self.p * self.p + d as i128 * self.q * self.q;
        Ok(FieldElem::new(self.p * self.den, -self.q * self.den, n))
    }

    pub fn to_quadint(&self, d: i64) -> Option<QuadInt> {
        if 2 % self.den != 0 {
            return None;
        }
        let k = 2 / self.den;
        QuadInt::new(self.p * k, self.q * k, d).ok()
    }

    pub fn as_rational(&self) -> Option<(i128, i128)> {
        (self.q == 0).then_some((self.p, self.den))
    }
}

impl From<QuadInt> for FieldElem {
    fn from(z: QuadInt) -> Self {
        FieldElem::new(z.two_x, z.two_y, 2)
    }
}

/// 2x2 matrix over `Q(sqrt(-d))`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Mat2 {
    pub d: i64,
    pub e: [[FieldElem; 2]; 2],
}

impl Mat2 {
    pub fn new(d: i64, e: [[FieldElem; 2]; 2]) -> Self {
        Mat2 { d, e }
    }

    pub fn from_quadints(m: [[QuadInt; 2]; 2]) -> Self {
        let d = m[0][0].d;
        Mat2 { d, e: m.map(|row| row.map(FieldElem::from)) }
    }

    pub fn from_ints(d: i64, m: [[i128; 2]; 2]) -> Self {
        Mat2 { d, e: m.map(|row| row.map(FieldElem::from_int)) }
    }

    pub fn identity(d: i64) -> Self {
        Self::from_ints(d, [[1, 0], [0, 1]])
    }

    /// `[[1, b], [0, 1]]`.
    pub fn translation(b: QuadInt) -> Self {
        let d = b.d;
        Self::from_quadints([[QuadInt::one(d), b], [QuadInt::zero(d), QuadInt::one(d)]])
    }

    /// `[[0, -1], [1, 0]]`.
    pub fn s(d: i64) -> Self {
        Self::from_ints(d, [[0, -1], [1, 0]])
    }

    pub fn diag(u: QuadInt, v: QuadInt) -> Self {
        let z = QuadInt::zero(u.d);
        Self::from_quadints([[u, z], [z, v]])
    }

    pub fn mul(&self, o: &Mat2) -> Mat2 {
        let d = self.d;
        let mut e = [[FieldElem::zero(); 2]; 2];
        for (i, row) in e.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = self.e[i][0].mul(&o.e[0][j], d).add(&self.e[i][1].mul(&o.e[1][j], d));
            }
        }
        Mat2 { d, e }
    }

    pub fn det(&self) -> FieldElem {
        let d = self.d;
        self.e[0][0].mul(&self.e[1][1], d).sub(&self.e[0][1].mul(&self.e[1][0], d))
    }

    pub fn trace(&self) -> FieldElem {
        self.e[0][0].add(&self.e[1][1])
    }

    pub fn adjugate(&self) -> Mat2 {
        let [[a, b], [c, d]] = self.e;
        Mat2 { d: self.d, e: [[d, b.neg()], [c.neg(), a]] }
    }

    pub fn scale(&self, k: &FieldElem) -> Mat2 {
        Mat2 { d: self.d, e: self.e.map(|row| row.map(|x| x.mul(k, self.d))) }
    }

    pub fn inverse(&self) -> Result<Mat2> {
        let inv = self.det().inverse(self.d)?;
        Ok(self.adjugate().scale(&inv))
    }

    pub fn conj_transpose(&self) -> Mat2 {
        let [[a, b], [c, d]] = self.e;
        Mat2 { d: self.d, e: [[a.conj(), c.conj()], [b.conj(), d.conj()]] }
    }

    pub fn neg(&self) -> Mat2 {
        Mat2 { d: self.d, e: self.e.map(|row| row.map(|x| x.neg())) }
    }

    /// Entries as elements of `O_d`, if they all lie there.
    pub fn to_quadints(&self) -> Option<[[QuadInt; 2]; 2]> {
        let mut out = [[QuadInt::zero(self.d); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = self.e[i][j].to_quadint(self.d)?;
            }
        }
        Some(out)
    }

    pub fn is_integral(&self) -> bool {
        self.to_quadints().is_some()
    }

    /// Representative of `{M, -M}`: the first nonzero coordinate in the scan
    /// order `(0,0), (0,1), (1,0), (1,1)`, real part before imaginary, is positive.
    pub fn projective_normal(&self) -> Mat2 {
        for row in &self.e {
            for x in row {
                for v in [x.p, x.q] {
                    if v != 0 {
                        return if v > 0 { *self } else { self.neg() };
                    }
                }
            }
        }
        *self
    }

    pub fn projectively_eq(&self, o: &Mat2) -> bool {
        self.projective_normal() == o.projective_normal()
    }
}

impl fmt::Display for Mat2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, row) in self.e.iter().enumerate() {
            write!(f, "{}[", if i > 0 { ", " } else { "" })?;
            for (j, x) in row.iter().enumerate() {
                if j > 0 {
                    write!(f, ", ")?;
                }
                fmt_quad(f, x.p, x.q, x.den, self.d)?;
            }
            write!(f, "]")?;
        }
        write!(f, "]")
    }
}

/// Congruence level of a subgroup of the Bianchi group.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Level {
    /// The full group `PSL(2, O_d)`.
    Full,
    /// Kernel of reduction modulo the principal ideal `(pi)`: `M = ±Id (mod pi)`.
    Principal(QuadInt),
    /// Lower-left entry divisible by the rational integer `n`.
    Gamma0(i128),
}

impl Level {
    pub fn rational(n: i128, d: i64) -> Level {
        Level::Principal(QuadInt::from_int(n, d))
    }

    fn validate(&self, d: i64) -> Result<()> {
        match self {
            Level::Full => Ok(()),
            Level::Principal(p) if p.d != d => {
                Err(Error::InvalidArgument(format!("level lives in O_{} but matrix in O_{d}", p.d)))
            }
            Level::Principal(p) if p.is_zero() => Err(Error::InvalidArgument("zero level".into())),
            Level::Gamma0(n) if *n <= 0 => Err(Error::InvalidArgument(format!("Gamma0 level {n}"))),
            _ => Ok(()),
        }
    }

    /// Membership test for an element already known to lie in `SL(2, O_d)`.
    pub fn contains(&self, m: &[[QuadInt; 2]; 2]) -> bool {
        match self {
            Level::Full => true,
            Level::Principal(p) => {
                let one = QuadInt::one(p.d);
                let off = p.divides(&m[0][1]) && p.divides(&m[1][0]);
                off && ((p.divides(&(m[0][0] - one)) && p.divides(&(m[1][1] - one)))
                    || (p.divides(&(m[0][0] + one)) && p.divides(&(m[1][1] + one))))
            }
            Level::Gamma0(n) => m[1][0].div_int(*n).is_some(),
        }
    }
}

/// Whether `m` lies in the level subgroup of `PSL(2, O_d)`: integral entries,
/// determinant exactly 1, and the level congruence.
pub fn is_in_gamma(m: &Mat2, level: &Level) -> Result<bool> {
    level.validate(m.d)?;
    let Some(q) = m.to_quadints() else {
        return Ok(false);
    };
    if m.det() != FieldElem::from_int(1) {
        return Ok(false);
    }
    Ok(level.contains(&q))
}

/// `[[1 - t x y, t y^2], [-t x^2, 1 + t x y]]`, determinant 1.
pub fn parabolic_element(x: QuadInt, y: QuadInt, t: QuadInt) -> Mat2 {
    let one = QuadInt::one(x.d);
    let txy = t * x * y;
    Mat2::from_quadints([[one - txy, t * y * y], [-(t * x * x), one + txy]])
}

/// Absolute value of the field discriminant: `d` if `d = 3 (mod 4)`, else `4d`.
pub fn field_discriminant_abs(d: i64) -> i64 {
    if d % 4 == 3 {
        d
    } else {
        4 * d
    }
}

/// `[[sqrt(-d), r], [v r, u sqrt(-d)]]` with `us - vr = 1`, `s = -d/r`, for `r | d`.
fn sigma_odd(d: i64, r: i64) -> Mat2 {
    let s = -d / r;
    let u = (0..r.max(1)).find(|u| (u * s - 1).rem_euclid(r) == 0).unwrap_or(0);
    let v = (u * s - 1) / r;
    let w = QuadInt::sqrt_neg_d(d);
    let int = |n: i64| QuadInt::from_int(n as i128, d);
    Mat2::from_quadints([[w, int(r)], [int(v * r), w.scale(u as i128)]])
}

/// Matrix of determinant `r` representing the coset of the extended Bianchi
/// group indexed by the squarefree divisor `r` of the field discriminant.
pub fn sigma_r(d: i64, r: i64) -> Result<Mat2> {
    if d <= 0 || !arith::is_squarefree(d as u64) {
        return Err(Error::NotSquarefree(d.max(0) as u64));
    }
    let delta = field_discriminant_abs(d);
    if r <= 0 || delta % r != 0 || !arith::is_squarefree(r as u64) {
        return Err(Error::InvalidArgument(format!(
            "{r} is not a squarefree divisor of the discriminant {delta}"
        )));
    }
    if d % r == 0 {
        return Ok(sigma_odd(d, r));
    }
    // r = 2 r0 with d = 1 (mod 4): an integral matrix of determinant 2 times sigma_{r0}
    if d % 4 != 1 || r % 2 != 0 {
        return Err(Error::Inconsistent(format!("no sigma_r construction for d = {d}, r = {r}")));
    }
    let r0 = r / 2;
    let s1 = (-1 - d) / 2;
    let u0 = (0..2).find(|u| (u * s1 - 1).rem_euclid(2) == 0).expect("s1 is odd");
    let v0 = (u0 * s1 - 1) / 2;
    let one_plus = QuadInt::new(2, 2, d)?;
    let one_minus = one_plus.conj();
    let int = |n: i64| QuadInt::from_int(n as i128, d);
    let m = Mat2::from_quadints([[one_plus, int(2)], [int(2 * v0), -one_minus.scale(u0 as i128)]]);
    Ok(m.mul(&sigma_odd(d, r0)))
}

/// Deterministic, duplicate-free list of elements of `PSL(2, O_d)`.
///
/// Words of length at most `height` in `T`, `T_omega`, their inverses, `S`
/// and the diagonal unit matrices come first, in breadth-first order. Unless
/// `generators_only`, this is followed by translations, parabolic elements
/// `parabolic_element(x, y, t)` with small `t`, and two- and three-syllable
/// words `P(b1) S P(b2) (S P(b3))`. Coordinates are bounded by `height`
/// (by `height / 2` for three syllables). The list is not a complete
/// enumeration of any ball in the group.
pub fn enumerate_gamma_elements(d: i64, height: u32, generators_only: bool) -> Vec<Mat2> {
    let h = height as i128;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut push = |m: Mat2, out: &mut Vec<Mat2>| {
        let n = m.projective_normal();
        if seen.insert(n) {
            out.push(n);
            true
        } else {
            false
        }
    };

    let one = QuadInt::one(d);
    let om = QuadInt::omega(d);
    let mut alphabet = vec![
        Mat2::translation(one),
        Mat2::translation(-one),
        Mat2::translation(om),
        Mat2::translation(-om),
        Mat2::s(d),
    ];
    for u in QuadInt::units(d) {
        // diag(u, u^-1) with u^-1 = conj(u)
        if u != one && u != -one && u.two_y > 0 {
            alphabet.push(Mat2::diag(u, u.conj()));
        }
    }

    push(Mat2::identity(d), &mut out);
    let mut frontier = vec![Mat2::identity(d)];
    for _ in 0..height {
        let mut next = Vec::new();
        for w in &frontier {
            for g in &alphabet {
                let m = w.mul(g);
                if push(m, &mut out) {
                    next.push(m);
                }
            }
        }
        frontier = next;
    }
    if generators_only {
        return out;
    }

    let coords = |bound: i128| -> Vec<QuadInt> {
        let mut v = Vec::new();
        for b1 in -bound..=bound {
            for b2 in -bound..=bound {
                v.push(QuadInt::from_basis(b1, b2, d));
            }
        }
        v
    };
    let full = coords(h);
    for &b in &full {
        push(Mat2::translation(b), &mut out);
    }
    let small_t: Vec<QuadInt> = coords(1).into_iter().filter(|t| !t.is_zero()).collect();
    for &x in &full {
        for &y in &full {
            for &t in &small_t {
                push(parabolic_element(x, y, t), &mut out);
            }
        }
    }
    let s = Mat2::s(d);
    for &b1 in &full {
        let left = Mat2::translation(b1).mul(&s);
        for &b2 in &full {
            push(left.mul(&Mat2::translation(b2)), &mut out);
        }
    }
    let half = coords(h / 2);
    for &b1 in &half {
        let l1 = Mat2::translation(b1).mul(&s);
        for &b2 in &half {
            let l2 = l1.mul(&Mat2::translation(b2)).mul(&s);
            for &b3 in &half {
                push(l2.mul(&Mat2::translation(b3)), &mut out);
            }
        }
    }
    out
}

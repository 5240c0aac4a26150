//! Binary Hermitian forms `[[a, B], [conj(B), c]]` over `O_d`, viewed as
//! circles `a|z|^2 + Bz + conj(Bz) + c = 0` on the sphere at infinity.

use std::fmt;
use std::str::FromStr;

use num_integer::Integer;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadring::{Mat2, QuadInt};

/// Default coordinate height for [`min_represented`].
pub const DEFAULT_MIN_HEIGHT: u32 = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HermitianForm {
    pub a: i128,
    pub b: QuadInt,
    pub c: i128,
    pub d: i64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Orientation {
    Preserving,
    Reversing,
}

impl HermitianForm {
    pub fn new(a: i128, b: QuadInt, c: i128) -> Self {
        HermitianForm { a, b, c, d: b.d }
    }

    /// `[[a, 0], [0, c]]`.
    pub fn diagonal(d: i64, a: i128, c: i128) -> Self {
        Self::new(a, QuadInt::zero(d), c)
    }

    /// `|B|^2 - ac`.
    pub fn discriminant(&self) -> i128 {
        self.b.norm() - self.a * self.c
    }

    /// Largest rational integer dividing `a`, `B` and `c`.
    pub fn content(&self) -> i128 {
        self.a.gcd(&self.c).gcd(&self.b.content())
    }

    pub fn is_primitive(&self) -> bool {
        self.content() == 1
    }

    pub fn primitive(&self) -> Self {
        let g = self.content();
        if g <= 1 {
            return *self;
        }
        HermitianForm {
            a: self.a / g,
            b: self.b.div_int(g).expect("content divides B"),
            c: self.c / g,
            d: self.d,
        }
    }

    pub fn neg(&self) -> Self {
        HermitianForm { a: -self.a, b: -self.b, c: -self.c, d: self.d }
    }

    /// `[[c, -B], [-conj(B), a]]`, which equals `-D * A^-1`.
    pub fn companion(&self) -> Self {
        HermitianForm { a: self.c, b: -self.b, c: self.a, d: self.d }
    }

    pub fn to_mat2(&self) -> Mat2 {
        let d = self.d;
        Mat2::from_quadints([
            [QuadInt::from_int(self.a, d), self.b],
            [self.b.conj(), QuadInt::from_int(self.c, d)],
        ])
    }

    /// `Q_A(x, y) = a|x|^2 + B x conj(y) + conj(B x conj(y)) + c|y|^2`, an integer on `O_d`.
    pub fn evaluate(&self, x: QuadInt, y: QuadInt) -> i128 {
        self.a * x.norm() + (self.b * x * y.conj()).trace() + self.c * y.norm()
    }

    /// `g* A g` for an integral matrix `g`.
    pub fn transform(&self, g: &Mat2) -> Result<Self> {
        if g.det().is_zero() {
            return Err(Error::Singular);
        }
        let q = g
            .to_quadints()
            .ok_or_else(|| Error::NotIntegral(format!("transform by non-integral matrix {g}")))?;
        Ok(self.transform_int(&q))
    }

    pub fn transform_int(&self, g: &[[QuadInt; 2]; 2]) -> Self {
        let [[x, y], [z, w]] = *g;
        let a2 = self.evaluate(x.conj(), z.conj());
        let c2 = self.evaluate(y.conj(), w.conj());
        let a = QuadInt::from_int(self.a, self.d);
        let c = QuadInt::from_int(self.c, self.d);
        let b2 = x.conj() * (a * y + self.b * w) + z.conj() * (self.b.conj() * y + c * w);
        HermitianForm { a: a2, b: b2, c: c2, d: self.d }
    }

    /// `(1/k) g* A g`, failing unless the result is integral.
    pub fn transform_scaled(&self, g: &Mat2, k: i128) -> Result<Self> {
        let t = self.transform(g)?;
        if k == 0 || t.a % k != 0 || t.c % k != 0 {
            return Err(Error::NotIntegral(format!("{t} is not divisible by {k}")));
        }
        let b = t
            .b
            .div_int(k)
            .ok_or_else(|| Error::NotIntegral(format!("{t} is not divisible by {k}")))?;
        Ok(HermitianForm { a: t.a / k, b, c: t.c / k, d: self.d })
    }

    /// Serialize as `d:a:Bx:By:c`, with `B = (Bx + By sqrt(-d))/2`.
    pub fn to_tuple(&self) -> String {
        format!("{}:{}:{}:{}:{}", self.d, self.a, self.b.two_x, self.b.two_y, self.c)
    }

    pub fn parse_tuple(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        if parts.len() != 5 {
            return Err(Error::Parse(format!("expected d:a:Bx:By:c, got {s:?}")));
        }
        let num = |t: &str| -> Result<i128> {
            t.trim().parse::<i128>().map_err(|e| Error::Parse(format!("{t:?}: {e}")))
        };
        let d = num(parts[0])?;
        if d <= 0 || d > i64::MAX as i128 || !crate::arith::is_squarefree(d as u64) {
            return Err(Error::Parse(format!("d = {d} is not a squarefree positive integer")));
        }
        let d = d as i64;
        let b = QuadInt::new(num(parts[2])?, num(parts[3])?, d)
            .map_err(|e| Error::Parse(e.to_string()))?;
        Ok(HermitianForm { a: num(parts[1])?, b, c: num(parts[4])?, d })
    }
}

impl fmt::Display for HermitianForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{}, {}], [{}, {}]]", self.a, self.b, self.b.conj(), self.c)
    }
}

impl FromStr for HermitianForm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::parse_tuple(s)
    }
}

fn check_pair(a: &HermitianForm, a2: &HermitianForm) -> Result<i128> {
    if a.d != a2.d {
        return Err(Error::InvalidArgument(format!("forms over d = {} and d = {}", a.d, a2.d)));
    }
    let (da, db) = (a.discriminant(), a2.discriminant());
    if da != db {
        return Err(Error::DiscriminantMismatch(da, db));
    }
    if da <= 0 {
        return Err(Error::InvalidArgument(format!("discriminant {da} is not positive")));
    }
    Ok(da)
}

/// Numerator of `Tr(A A2^-1)` over the common discriminant: `-(a c' + c a' - 2 Re(B conj(B')))`.
fn trace_numerator(a: &HermitianForm, a2: &HermitianForm) -> i128 {
    -(a.a * a2.c + a.c * a2.a - (a.b * a2.b.conj()).trace())
}

/// `Tr(A A2^-1)` for forms of the same positive discriminant.
pub fn trace_pair(a: &HermitianForm, a2: &HermitianForm) -> Result<Ratio<i128>> {
    let disc = check_pair(a, a2)?;
    Ok(Ratio::new(trace_numerator(a, a2), disc))
}

/// Whether the two circles cross. Tangent circles (`|Tr| = 2`) do not.
pub fn circles_intersect(a: &HermitianForm, a2: &HermitianForm) -> Result<bool> {
    let disc = check_pair(a, a2)?;
    Ok(trace_numerator(a, a2).abs() < 2 * disc)
}

/// `Tr(g* A g A^-1)` when its absolute value is below 2.
pub fn embed_violation(a: &HermitianForm, g: &Mat2) -> Result<Option<Ratio<i128>>> {
    let t = a.transform(g)?;
    let disc = check_pair(&t, a)?;
    let n = trace_numerator(&t, a);
    Ok((n.abs() < 2 * disc).then(|| Ratio::new(n, disc)))
}

/// Integer-only violation test for searches: `Some(numerator)` when
/// `|Tr(g* A g A^-1)| < 2`, with the trace equal to `numerator / D`.
pub fn violation_numerator(a: &HermitianForm, disc: i128, g: &[[QuadInt; 2]; 2]) -> Option<i128> {
    let t = a.transform_int(g);
    let n = trace_numerator(&t, a);
    (n.abs() < 2 * disc).then_some(n)
}

/// `Tr(g* A g A^-1)` for `g = parabolic_element(x, y, t)`, in closed form:
/// `2 - |t|^2 Q_A(conj(y), conj(x))^2 / D`.
pub fn parabolic_trace(a: &HermitianForm, x: QuadInt, y: QuadInt, t: QuadInt) -> Result<Ratio<i128>> {
    let disc = a.discriminant();
    if disc <= 0 {
        return Err(Error::InvalidArgument(format!("discriminant {disc} is not positive")));
    }
    let q = a.evaluate(y.conj(), x.conj());
    Ok(Ratio::from_integer(2) - Ratio::new(t.norm() * q * q, disc))
}

/// Same closed form with `Q_A(-conj(x), y)` in place of `Q_A(conj(y), conj(x))`.
/// Kept to show it does not match the direct product.
pub fn parabolic_trace_alt(a: &HermitianForm, x: QuadInt, y: QuadInt, t: QuadInt) -> Result<Ratio<i128>> {
    let disc = a.discriminant();
    if disc <= 0 {
        return Err(Error::InvalidArgument(format!("discriminant {disc} is not positive")));
    }
    let q = a.evaluate(-x.conj(), y);
    Ok(Ratio::from_integer(2) - Ratio::new(t.norm() * q * q, disc))
}

/// `Tr(g* A g A^-1)` by explicit matrix products over the field.
pub fn direct_trace(a: &HermitianForm, g: &Mat2) -> Result<Ratio<i128>> {
    let m = a.to_mat2();
    let prod = g.conj_transpose().mul(&m).mul(g).mul(&m.inverse()?);
    let tr = prod.trace();
    if tr.q != 0 {
        return Err(Error::Inconsistent(format!("non-real trace {tr:?}")));
    }
    Ok(Ratio::new(tr.p, tr.den))
}

/// Smallest nonzero `|Q_A(x, y)|` over pairs whose basis coordinates are
/// bounded by `height`, with the first pair attaining it. Coordinates are
/// scanned in the order `0, 1, -1, 2, -2, ...`, last coordinate of `x` fastest.
pub fn min_represented(a: &HermitianForm, height: u32) -> Result<(i128, (QuadInt, QuadInt))> {
    if height == 0 {
        return Err(Error::InvalidArgument("height must be positive".into()));
    }
    let h = height as i128;
    let order: Vec<i128> = std::iter::once(0).chain((1..=h).flat_map(|k| [k, -k])).collect();
    let d = a.d;
    let mut best: Option<(i128, (QuadInt, QuadInt))> = None;
    for &y2 in &order {
        for &y1 in &order {
            let y = QuadInt::from_basis(y1, y2, d);
            for &x2 in &order {
                for &x1 in &order {
                    let x = QuadInt::from_basis(x1, x2, d);
                    let v = a.evaluate(x, y).abs();
                    if v != 0 && best.is_none_or(|(b, _)| v < b) {
                        best = Some((v, (x, y)));
                        if v == 1 {
                            return Ok(best.unwrap());
                        }
                    }
                }
            }
        }
    }
    best.ok_or_else(|| Error::SearchExhausted(format!("no nonzero value of {a} up to height {height}")))
}

/// Necessary condition for embeddedness: `4D <= m^2` with `m` the smallest
/// nonzero represented value found at the default height.
pub fn discriminant_bound_check(a: &HermitianForm) -> Result<bool> {
    let (m, _) = min_represented(a, DEFAULT_MIN_HEIGHT)?;
    Ok(4 * a.discriminant() <= m * m)
}

/// Whether `g` maps the circle of `A` to itself, preserving or reversing its
/// orientation. With `g = [[x, y], [z, w]]` and `s = ±1`:
/// `s(a w - B z) = a conj(x) + conj(B z)`,
/// `s D conj(z) = -B(a x + B z) + a^2 y + a B w`,
/// `s a^2 = |a x + B z|^2 - D |z|^2`.
pub fn stabilizer_test(g: &Mat2, a: &HermitianForm, orientation: Orientation) -> Result<bool> {
    if a.a == 0 {
        return Err(Error::InvalidArgument("straight-line forms (a = 0) are not handled".into()));
    }
    let q = g
        .to_quadints()
        .ok_or_else(|| Error::NotIntegral(format!("{g} is not integral")))?;
    Ok(stabilizer_int(&q, a, orientation))
}

pub fn stabilizer_int(g: &[[QuadInt; 2]; 2], a: &HermitianForm, orientation: Orientation) -> bool {
    let [[x, y], [z, w]] = *g;
    let d = a.d;
    let s: i128 = match orientation {
        Orientation::Preserving => 1,
        Orientation::Reversing => -1,
    };
    let aa = QuadInt::from_int(a.a, d);
    let b = a.b;
    let disc = a.discriminant();
    let lin = aa * x + b * z;
    let e1 = (aa * w - b * z).scale(s) == aa * x.conj() + (b * z).conj();
    let e2 = z.conj().scale(s * disc) == -(b * lin) + aa * aa * y + aa * b * w;
    let e3 = s * a.a * a.a == lin.norm() - disc * z.norm();
    e1 && e2 && e3
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadring::{enumerate_gamma_elements, parabolic_element, FieldElem};

    fn q(x: i128, y: i128, d: i64) -> QuadInt {
        QuadInt::new(2 * x, 2 * y, d).unwrap()
    }

    fn r(n: i128, den: i128) -> Ratio<i128> {
        Ratio::new(n, den)
    }

    #[test]
    fn discriminant_and_companion() {
        let f = HermitianForm::new(13, q(0, 4, 13), 13);
        assert_eq!(f.discriminant(), 39);
        assert!(f.is_primitive());
        let m = f.to_mat2();
        let comp = f.companion().to_mat2();
        let neg_d_inv = m.inverse().unwrap().scale(&FieldElem::from_int(-39));
        assert_eq!(comp, neg_d_inv);
        let g = HermitianForm::new(4, q(2, 2, 1), -6);
        assert_eq!(g.content(), 2);
        assert_eq!(g.primitive(), HermitianForm::new(2, q(1, 1, 1), -3));
    }

    #[test]
    fn tuple_roundtrip() {
        let f: HermitianForm = "13:13:0:8:13".parse().unwrap();
        assert_eq!(f, HermitianForm::new(13, q(0, 4, 13), 13));
        assert_eq!(f.to_tuple(), "13:13:0:8:13");
        assert!(HermitianForm::parse_tuple("1:1:0:0").is_err());
        assert!(HermitianForm::parse_tuple("4:1:0:0:1").is_err());
        assert!(HermitianForm::parse_tuple("1:1:1:0:1").is_err());
        assert!(HermitianForm::parse_tuple("x:1:0:0:1").is_err());
    }

    #[test]
    fn evaluate_examples() {
        let f = HermitianForm::diagonal(1, 1, -6);
        assert_eq!(f.evaluate(QuadInt::one(1), QuadInt::zero(1)), 1);
        assert_eq!(f.evaluate(q(2, 0, 1), q(1, 0, 1)), -2);
    }

    #[test]
    fn transform_examples() {
        let d = 1;
        let a = HermitianForm::diagonal(d, 1, -5);
        assert_eq!(a.transform(&Mat2::identity(d)).unwrap(), a);
        let t = Mat2::from_ints(d, [[1, 1], [0, 1]]);
        assert_eq!(a.transform(&t).unwrap(), HermitianForm::new(1, QuadInt::one(d), 1 - 5));
        assert_eq!(a.transform(&Mat2::from_ints(d, [[1, 0], [0, 0]])), Err(Error::Singular));
        // right action
        let s = Mat2::s(d);
        let lhs = a.transform(&t).unwrap().transform(&s).unwrap();
        assert_eq!(lhs, a.transform(&t.mul(&s)).unwrap());
        // agrees with explicit products
        for g in enumerate_gamma_elements(7, 2, false).iter().take(300) {
            let f = HermitianForm::new(3, q(1, 1, 7), -2);
            let direct = g.conj_transpose().mul(&f.to_mat2()).mul(g);
            assert_eq!(f.transform(g).unwrap().to_mat2(), direct);
            assert_eq!(f.transform(g).unwrap().discriminant(), f.discriminant());
        }
    }

    #[test]
    fn trace_pair_examples() {
        let a = HermitianForm::diagonal(1, 1, -2);
        assert_eq!(trace_pair(&a, &a).unwrap(), r(2, 1));
        let b = HermitianForm::new(1, q(-3, 0, 1), 7);
        assert_eq!(trace_pair(&a, &b).unwrap(), r(-5, 2));
        let c = HermitianForm::new(1, q(-2, 0, 1), 2);
        assert_eq!(trace_pair(&a, &c).unwrap(), r(0, 1));
        assert!(!circles_intersect(&a, &a).unwrap());
        assert!(!circles_intersect(&a, &b).unwrap());
        assert!(circles_intersect(&a, &c).unwrap());
        let e = HermitianForm::diagonal(1, 1, -3);
        assert!(trace_pair(&a, &e).is_err());
    }

    #[test]
    fn embed_violation_examples() {
        let d = 1;
        let a = HermitianForm::diagonal(d, 1, -6);
        assert_eq!(embed_violation(&a, &Mat2::identity(d)).unwrap(), None);
        let t = Mat2::from_ints(d, [[1, 1], [0, 1]]);
        assert_eq!(embed_violation(&a, &t).unwrap(), Some(r(2, 1) - r(1, 6)));
    }

    #[test]
    fn parabolic_trace_examples() {
        let d = 2;
        let disc = 5;
        let a = HermitianForm::diagonal(d, 1, -disc);
        let (zero, one) = (QuadInt::zero(d), QuadInt::one(d));
        assert_eq!(parabolic_trace(&a, one, one, zero).unwrap(), r(2, 1));
        let want = r(2, 1) - r(1, disc);
        assert_eq!(parabolic_trace(&a, zero, one, one).unwrap(), want);
        assert_eq!(direct_trace(&a, &parabolic_element(zero, one, one)).unwrap(), want);
        assert_eq!(parabolic_trace_alt(&a, zero, one, one).unwrap(), r(2 - disc, 1));
    }

    #[test]
    fn min_represented_examples() {
        let a = HermitianForm::diagonal(1, 1, -6);
        let (v, (x, y)) = min_represented(&a, 6).unwrap();
        assert_eq!((v, x, y), (1, QuadInt::one(1), QuadInt::zero(1)));
        let f = HermitianForm::new(13, q(0, 4, 13), 13);
        let (v, (x, y)) = min_represented(&f, 10).unwrap();
        assert_eq!((v, x, y), (13, QuadInt::one(13), QuadInt::zero(13)));
        assert!(discriminant_bound_check(&f).unwrap());
        assert!(!discriminant_bound_check(&a).unwrap());
    }

    #[test]
    fn stabilizer_examples() {
        let d = 1;
        let a = HermitianForm::diagonal(d, 1, -6);
        let id = Mat2::identity(d);
        assert!(stabilizer_test(&id, &a, Orientation::Preserving).unwrap());
        assert!(!stabilizer_test(&id, &a, Orientation::Reversing).unwrap());
        let t2 = Mat2::from_quadints([[q(1, 2, d), q(6, 0, d)], [q(-1, 0, d), q(-1, 2, d)]]);
        assert!(stabilizer_test(&t2, &a, Orientation::Reversing).unwrap());
        assert!(!stabilizer_test(&t2, &a, Orientation::Preserving).unwrap());
        assert_eq!(a.transform(&t2).unwrap(), a.neg());
        let line = HermitianForm::new(0, QuadInt::one(d), 0);
        assert!(stabilizer_test(&id, &line, Orientation::Preserving).is_err());
    }

    #[test]
    fn stabilizer_equations_match_transform() {
        for (d, f) in [
            (1, HermitianForm::diagonal(1, 1, -3)),
            (1, HermitianForm::diagonal(1, 1, -6)),
            (2, HermitianForm::new(2, q(1, 1, 2), -1)),
            (7, HermitianForm::new(1, QuadInt::new(1, 1, 7).unwrap(), -1)),
        ] {
            for g in enumerate_gamma_elements(d, 3, false) {
                let t = f.transform(&g).unwrap();
                assert_eq!(stabilizer_test(&g, &f, Orientation::Preserving).unwrap(), t == f, "{g}");
                assert_eq!(stabilizer_test(&g, &f, Orientation::Reversing).unwrap(), t == f.neg(), "{g}");
            }
        }
    }
}

//! Class groups of imaginary quadratic fields via reduced binary quadratic forms.

use std::collections::HashMap;
use std::fmt;

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::arith;
use crate::error::{Error, Result};

/// Largest class number handled by [`class_group_structure`].
pub const CLASS_NUMBER_CAP: usize = 10_000;

/// The form `a x^2 + b x y + c y^2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Bqf {
    pub a: i64,
    pub b: i64,
    pub c: i64,
}

impl Bqf {
    pub fn new(a: i64, b: i64, c: i64) -> Self {
        Bqf { a, b, c }
    }

    pub fn discriminant(&self) -> i64 {
        self.b * self.b - 4 * self.a * self.c
    }

    /// The principal form of discriminant `delta`.
    pub fn principal(delta: i64) -> Self {
        let b = delta.rem_euclid(2);
        Bqf { a: 1, b, c: (b * b - delta) / 4 }
    }

    pub fn inverse(&self) -> Self {
        Bqf { b: -self.b, ..*self }.reduced()
    }

    pub fn is_reduced(&self) -> bool {
        self.b.abs() <= self.a
            && self.a <= self.c
            && !((self.b.abs() == self.a || self.a == self.c) && self.b < 0)
    }

    /// Reduced representative of the proper equivalence class (positive definite forms).
    pub fn reduced(&self) -> Self {
        let (mut a, mut b, mut c) = (self.a as i128, self.b as i128, self.c as i128);
        loop {
            // bring b into (-a, a]
            if b > a || b <= -a {
                let k = Integer::div_floor(&(a - b), &(2 * a));
                let nb = b + 2 * k * a;
                c += k * (b + k * a);
                b = nb;
            }
            if a > c {
                std::mem::swap(&mut a, &mut c);
                b = -b;
                continue;
            }
            if a == c && b < 0 {
                b = -b;
            }
            break;
        }
        Bqf { a: a as i64, b: b as i64, c: c as i64 }
    }

    pub fn eval(&self, x: i64, y: i64) -> i64 {
        self.a * x * x + self.b * x * y + self.c * y * y
    }
}

impl fmt::Display for Bqf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.a, self.b, self.c)
    }
}

/// `-d` if `d = 3 (mod 4)`, else `-4d`.
pub fn field_discriminant(d: i64) -> Result<i64> {
    if d <= 0 || !arith::is_squarefree(d as u64) {
        return Err(Error::NotSquarefree(d.max(0) as u64));
    }
    Ok(if d % 4 == 3 { -d } else { -4 * d })
}

/// All reduced primitive positive definite forms of discriminant `delta`,
/// sorted lexicographically by `(a, b, c)`.
pub fn reduced_forms(delta: i64) -> Result<Vec<Bqf>> {
    if delta >= 0 || !matches!(delta.rem_euclid(4), 0 | 1) {
        return Err(Error::InvalidArgument(format!("{delta} is not a negative discriminant")));
    }
    let mut out = Vec::new();
    let mut a = 1i64;
    while 3 * a * a <= -delta {
        for b in -a + 1..=a {
            if (b - delta).rem_euclid(2) != 0 {
                continue;
            }
            let num = b * b - delta;
            if num % (4 * a) != 0 {
                continue;
            }
            let f = Bqf { a, b, c: num / (4 * a) };
            if f.is_reduced() && a.gcd(&b).gcd(&f.c) == 1 {
                out.push(f);
            }
        }
        a += 1;
    }
    out.sort();
    Ok(out)
}

fn ext_gcd(a: i128, b: i128) -> (i128, i128, i128) {
    let e = a.extended_gcd(&b);
    (e.gcd, e.x, e.y)
}

/// Gauss composition followed by reduction.
pub fn compose(f: &Bqf, g: &Bqf) -> Result<Bqf> {
    let delta = f.discriminant();
    if delta != g.discriminant() {
        return Err(Error::DiscriminantMismatch(delta as i128, g.discriminant() as i128));
    }
    let (mut f1, mut f2) = (*f, *g);
    if f1.a > f2.a {
        std::mem::swap(&mut f1, &mut f2);
    }
    let (a1, b1) = (f1.a as i128, f1.b as i128);
    let (a2, b2, c2) = (f2.a as i128, f2.b as i128, f2.c as i128);
    let s = (b1 + b2) / 2;
    let n = b2 - s;
    let (d, y1) = if a2 % a1 == 0 {
        (a1, 0)
    } else {
        let (g, u, _) = ext_gcd(a2, a1);
        (g, u)
    };
    let (d1, x2, y2) = if s % d == 0 {
        (d, 0, -1)
    } else {
        let (g, x, y) = ext_gcd(s, d);
        (g, x, -y)
    };
    let v1 = a1 / d1;
    let v2 = a2 / d1;
    let r = (y1 * y2 * n - x2 * c2).rem_euclid(v1);
    let b3 = b2 + 2 * v2 * r;
    let a3 = v1 * v2;
    let num = b3 * b3 - delta as i128;
    if num % (4 * a3) != 0 {
        return Err(Error::Inconsistent(format!("composition of {f} and {g} failed")));
    }
    let c3 = num / (4 * a3);
    let to64 = |x: i128| {
        i64::try_from(x).map_err(|_| Error::Inconsistent("composition overflow".into()))
    };
    Ok(Bqf { a: to64(a3)?, b: to64(b3)?, c: to64(c3)? }.reduced())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassGroupData {
    pub discriminant: i64,
    pub forms: Vec<Bqf>,
    /// Order of `forms[i]` in the class group.
    pub orders: Vec<u64>,
    /// Invariant factors in descending order; empty for the trivial group.
    pub structure: Vec<u64>,
}

impl ClassGroupData {
    pub fn class_number(&self) -> usize {
        self.forms.len()
    }

    pub fn order_of(&self, f: &Bqf) -> Option<u64> {
        let r = f.reduced();
        self.forms.iter().position(|g| *g == r).map(|i| self.orders[i])
    }

    /// `Z6xZ2`-style rendering; `1` for the trivial group.
    pub fn structure_string(&self) -> String {
        format_structure(&self.structure)
    }
}

pub fn format_structure(factors: &[u64]) -> String {
    if factors.is_empty() {
        return "1".into();
    }
    factors.iter().map(|n| format!("Z{n}")).collect::<Vec<_>>().join("x")
}

fn is_fundamental(delta: i64) -> bool {
    if delta >= 0 {
        return false;
    }
    let m = -delta;
    if delta.rem_euclid(4) == 1 {
        return arith::is_squarefree(m as u64);
    }
    if m % 4 != 0 {
        return false;
    }
    let k = m / 4;
    // -delta/4 = k with -k = 2 or 3 mod 4
    matches!((-k).rem_euclid(4), 2 | 3) && arith::is_squarefree(k as u64)
}

/// Class group of a fundamental discriminant.
pub fn class_group(delta: i64) -> Result<ClassGroupData> {
    if !is_fundamental(delta) {
        return Err(Error::InvalidArgument(format!("{delta} is not a fundamental discriminant")));
    }
    let forms = reduced_forms(delta)?;
    let h = forms.len();
    if h > CLASS_NUMBER_CAP {
        return Err(Error::CapExceeded {
            what: "class number",
            value: h as u64,
            cap: CLASS_NUMBER_CAP as u64,
        });
    }
    let id = Bqf::principal(delta);
    let mut orders = Vec::with_capacity(h);
    for f in &forms {
        let mut acc = *f;
        let mut k = 1u64;
        while acc != id {
            acc = compose(&acc, f)?;
            k += 1;
            if k as usize > h {
                return Err(Error::Inconsistent(format!("order of {f} exceeds class number {h}")));
            }
        }
        orders.push(k);
    }
    let structure = invariant_factors(h as u64, &orders)?;
    Ok(ClassGroupData { discriminant: delta, forms, orders, structure })
}

/// Invariant factors of a finite abelian group from the multiset of its element orders.
fn invariant_factors(h: u64, orders: &[u64]) -> Result<Vec<u64>> {
    let hf = arith::factorize(h)?;
    // exponents[p] = sorted list of p-primary cyclic exponents, largest first
    let mut per_prime: Vec<(u64, Vec<u32>)> = Vec::new();
    for &(p, e) in &hf.factors {
        let mut count_le = Vec::new(); // |G[p^k]| for k = 0..=e
        for k in 0..=e {
            let pk = p.pow(k);
            count_le.push(orders.iter().filter(|&&o| pk % o == 0).count() as u64);
        }
        // number of cyclic factors with exponent >= k
        let mut at_least = Vec::new();
        for k in 1..=e as usize {
            let ratio = count_le[k] / count_le[k - 1];
            let mut j = 0;
            let mut v = 1;
            while v < ratio {
                v *= p;
                j += 1;
            }
            if v != ratio || count_le[k] % count_le[k - 1] != 0 {
                return Err(Error::Inconsistent("element orders do not form an abelian group".into()));
            }
            at_least.push(j);
        }
        let rank = at_least.first().copied().unwrap_or(0);
        let exps: Vec<u32> = (0..rank)
            .map(|i| at_least.iter().filter(|&&c| c > i).count() as u32)
            .collect();
        per_prime.push((p, exps));
    }
    let len = per_prime.iter().map(|(_, e)| e.len()).max().unwrap_or(0);
    let factors: Vec<u64> = (0..len)
        .map(|i| {
            per_prime
                .iter()
                .map(|(p, e)| e.get(i).map_or(1, |&k| p.pow(k)))
                .product()
        })
        .collect();
    if factors.iter().product::<u64>() != h {
        return Err(Error::Inconsistent(format!("invariant factors {factors:?} do not multiply to {h}")));
    }
    Ok(factors)
}

/// Class group of `Q(sqrt(-d))`.
pub fn class_group_structure(d: i64) -> Result<ClassGroupData> {
    class_group(field_discriminant(d)?)
}

/// Whether the class group of `Q(sqrt(-d))` has an element of order 4.
pub fn has_order_four_element(d: i64) -> Result<bool> {
    Ok(class_group_structure(d)?.orders.iter().any(|o| o % 4 == 0))
}

/// Order counts, keyed by order; useful for reports.
pub fn order_histogram(cg: &ClassGroupData) -> HashMap<u64, usize> {
    let mut m = HashMap::new();
    for &o in &cg.orders {
        *m.entry(o).or_insert(0) += 1;
    }
    m
}

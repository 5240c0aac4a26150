//! Named surface constructions, closedness, and certificates for
//! embeddedness and orientability in Bianchi groups and their congruence
//! subgroups.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use num_integer::Integer;
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arith;
use crate::error::{Error, Result};
use crate::forms::{self, HermitianForm, Orientation};
use crate::quadring::{self, enumerate_gamma_elements, parabolic_element, sigma_r, Level, Mat2, QuadInt};
use crate::sieve;

type IntMat = [[QuadInt; 2]; 2];

/// The group acting on `H^3`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Group {
    /// `PSL(2, O_d)`.
    Bianchi,
    /// Principal congruence subgroup of rational level `n`.
    Principal(i128),
    /// Principal congruence subgroup of the Picard group at a Gaussian prime.
    PicardPrime(QuadInt),
    /// Lower-left entry divisible by `n`.
    Gamma0(i128),
    /// `PSL(2, O_d)`, with the form taken from the coset of the extended
    /// Bianchi group indexed by `r`.
    ExtendedCoset(i64),
}

impl Group {
    pub fn level(&self, d: i64) -> Level {
        match *self {
            Group::Bianchi | Group::ExtendedCoset(_) => Level::Full,
            Group::Principal(n) => Level::rational(n, d),
            Group::PicardPrime(p) => Level::Principal(p),
            Group::Gamma0(n) => Level::Gamma0(n),
        }
    }

    /// Parse `gamma`, `principal:N`, `picard:A:B` (the prime `A + Bi`),
    /// `gamma0:N` or `coset:R`.
    pub fn parse(s: &str, d: i64) -> Result<Group> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |t: &str| -> Result<i128> {
            t.parse::<i128>().map_err(|e| Error::Parse(format!("group spec {s:?}: {e}")))
        };
        let g = match parts.as_slice() {
            ["gamma"] => Group::Bianchi,
            ["principal", n] => Group::Principal(num(n)?),
            ["gamma0", n] => Group::Gamma0(num(n)?),
            ["coset", r] => Group::ExtendedCoset(num(r)? as i64),
            ["picard", a, b] => {
                if d != 1 {
                    return Err(Error::Parse("picard levels need d = 1".into()));
                }
                Group::PicardPrime(QuadInt::new(2 * num(a)?, 2 * num(b)?, 1)?)
            }
            _ => return Err(Error::Parse(format!("unknown group spec {s:?}"))),
        };
        match g {
            Group::Principal(n) | Group::Gamma0(n) if n <= 0 => {
                Err(Error::Parse(format!("level must be positive in {s:?}")))
            }
            Group::ExtendedCoset(r) if r <= 0 => Err(Error::Parse(format!("bad coset in {s:?}"))),
            _ => Ok(g),
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Group::Bianchi => write!(f, "gamma"),
            Group::Principal(n) => write!(f, "principal:{n}"),
            Group::PicardPrime(p) => write!(f, "picard:{}:{}", p.two_x / 2, p.two_y / 2),
            Group::Gamma0(n) => write!(f, "gamma0:{n}"),
            Group::ExtendedCoset(r) => write!(f, "coset:{r}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PicardVariant {
    Plain,
    One,
    Two,
    Three,
}

impl std::str::FromStr for PicardVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(PicardVariant::Plain),
            "one" => Ok(PicardVariant::One),
            "two" => Ok(PicardVariant::Two),
            "three" => Ok(PicardVariant::Three),
            _ => Err(Error::Parse(format!("unknown variant {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "tag", rename_all = "snake_case")]
pub enum Construction {
    /// `d|z|^2 + B sqrt(-d) z + conj(...) + dc = 0`.
    SBc { b: QuadInt, c: i128 },
    /// `B = m` conjugated into the coset of `r`.
    Thereis { r: i64, m: i128, c: i128 },
    PicardCanonical { disc: i128, variant: PicardVariant },
    Gamma0Odd { n: i128 },
    Gamma0Even { n: i128 },
    Raw,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SurfaceSpec {
    pub form: HermitianForm,
    pub group: Group,
    pub construction: Construction,
}

impl SurfaceSpec {
    pub fn raw(form: HermitianForm, group: Group) -> Self {
        SurfaceSpec { form, group, construction: Construction::Raw }
    }

    pub fn d(&self) -> i64 {
        self.form.d
    }

    pub fn discriminant(&self) -> i128 {
        self.form.discriminant()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Certificate {
    NotEmbedded { witness: Mat2, trace: Ratio<i128> },
    /// Every `g` in the group has `-D * Tr(g* A g A^-1) = residue (mod modulus)`,
    /// with `D` the reference discriminant; with `modulus >= 4D` this forces `|Tr| >= 2`.
    EmbeddedCongruence { theorem: String, modulus: i128, residue: i128, reference_discriminant: i128 },
    OrientationReversing { witness: Mat2 },
    Closed,
    NonCompact,
    Inconclusive { height: u32 },
}

/// Flat JSON view of a certificate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertificateRecord {
    pub kind: String,
    pub group: String,
    pub form: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theorem: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub modulus: Option<i128>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residue: Option<i128>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_discriminant: Option<i128>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub height: Option<u32>,
}

impl Certificate {
    pub fn kind(&self) -> &'static str {
        match self {
            Certificate::NotEmbedded { .. } => "not_embedded",
            Certificate::EmbeddedCongruence { .. } => "embedded_congruence",
            Certificate::OrientationReversing { .. } => "orientation_reversing",
            Certificate::Closed => "closed",
            Certificate::NonCompact => "non_compact",
            Certificate::Inconclusive { .. } => "inconclusive",
        }
    }

    pub fn record(&self, spec: &SurfaceSpec) -> CertificateRecord {
        let mut rec = CertificateRecord {
            kind: self.kind().into(),
            group: spec.group.to_string(),
            form: spec.form.to_tuple(),
            witness: None,
            trace: None,
            theorem: None,
            modulus: None,
            residue: None,
            reference_discriminant: None,
            height: None,
        };
        match self {
            Certificate::NotEmbedded { witness, trace } => {
                rec.witness = Some(witness.to_string());
                rec.trace = Some(trace.to_string());
            }
            Certificate::EmbeddedCongruence { theorem, modulus, residue, reference_discriminant } => {
                rec.theorem = Some(theorem.clone());
                rec.modulus = Some(*modulus);
                rec.residue = Some(*residue);
                rec.reference_discriminant = Some(*reference_discriminant);
            }
            Certificate::OrientationReversing { witness } => rec.witness = Some(witness.to_string()),
            Certificate::Inconclusive { height } => rec.height = Some(*height),
            Certificate::Closed | Certificate::NonCompact => {}
        }
        rec
    }
}

/// `d|z|^2 + B sqrt(-d) z + conj(B sqrt(-d) z) + dc = 0`, of discriminant `d(|B|^2 - dc)`.
pub fn canonical_surface(d: i64, b: QuadInt, c: i128) -> Result<SurfaceSpec> {
    if b.d != d {
        return Err(Error::InvalidArgument(format!("B lives in O_{} not O_{d}", b.d)));
    }
    let dd = d as i128;
    let form = HermitianForm::new(dd, b * QuadInt::sqrt_neg_d(d), c * dd);
    Ok(SurfaceSpec { form, group: Group::Bianchi, construction: Construction::SBc { b, c } })
}

/// Recover `(B, c)` when `form` has the shape `(d, B sqrt(-d), c d)`.
pub fn recognize_canonical(form: &HermitianForm) -> Option<Construction> {
    let d = form.d;
    let dd = d as i128;
    if form.a != dd || form.c % dd != 0 {
        return None;
    }
    let b = (form.b * -QuadInt::sqrt_neg_d(d)).div_int(dd)?;
    Some(Construction::SBc { b, c: form.c / dd })
}

fn disc_u64(spec: &SurfaceSpec) -> Result<u64> {
    let disc = spec.discriminant();
    if disc <= 0 {
        return Err(Error::InvalidArgument(format!("discriminant {disc} is not positive")));
    }
    u64::try_from(disc).map_err(|_| Error::InvalidArgument(format!("discriminant {disc} out of range")))
}

/// `NonCompact` when the discriminant is `a^2 + d b^2` over the rationals, else `Closed`.
pub fn is_closed(spec: &SurfaceSpec) -> Result<Certificate> {
    let disc = disc_u64(spec)?;
    Ok(if arith::is_rationally_representable(disc, spec.d() as u64)? {
        Certificate::NonCompact
    } else {
        Certificate::Closed
    })
}

fn thereis_form(d: i64, r: i64, m: i128, c: i128) -> Result<HermitianForm> {
    let base = canonical_surface(d, QuadInt::from_int(m, d), c)?.form;
    if r == 1 {
        return Ok(base);
    }
    base.transform_scaled(&sigma_r(d, r)?, r as i128)
}

/// Surfaces `B = m`, `0 < 2m < d`, `0 < 4(m^2 - dc) < d`, for each `r | d`, with
/// `m^2 - dc` passing the residue and non-representability tests (zero
/// residues allowed). Ordered by `(m^2 - dc, m, r)` and truncated at `limit`.
pub fn thereis_family(d: i64, limit: usize) -> Result<Vec<SurfaceSpec>> {
    if d < 5 {
        return Err(Error::InvalidArgument(format!("d = {d} is below 5")));
    }
    let du = d as u64;
    let divisors = arith::factorize(du)?.divisors();
    let mut params = Vec::new();
    let dd = d as i128;
    let mut m = 1i128;
    while 2 * m < dd {
        // 0 < m^2 - dc < d/4
        let c_max = Integer::div_floor(&(m * m - 1), &dd);
        let mut c = c_max;
        while 4 * (m * m - dd * c) < dd {
            let t = m * m - dd * c;
            if sieve::in_dset_weak(t as u64, du)? {
                params.push((t, m, c));
            }
            c -= 1;
        }
        m += 1;
    }
    let mut out = Vec::new();
    params.sort();
    'outer: for (_, m, c) in params {
        for &r in &divisors {
            if out.len() >= limit {
                break 'outer;
            }
            let r = r as i64;
            out.push(SurfaceSpec {
                form: thereis_form(d, r, m, c)?,
                group: Group::ExtendedCoset(r),
                construction: Construction::Thereis { r, m, c },
            });
        }
    }
    Ok(out)
}

/// Hermitian form of the odd-level construction: `[[n(n-1)/2, n], [n, 2]]`, discriminant `n`.
pub fn gamma0_odd(n: i128) -> Result<SurfaceSpec> {
    if n <= 0 || n % 4 != 1 || arith::is_sum_of_two_squares(n as u64)? {
        return Err(Error::InvalidArgument(format!("{n} is not 1 mod 4 or is a sum of two squares")));
    }
    let form = HermitianForm::new(n * (n - 1) / 2, QuadInt::from_int(n, 1), 2);
    Ok(SurfaceSpec { form, group: Group::Gamma0(n), construction: Construction::Gamma0Odd { n } })
}

/// `[[n(n-1), n], [n, 1]]` at level `2n`, discriminant `n`.
pub fn gamma0_even(n: i128) -> Result<SurfaceSpec> {
    if n <= 0 || n % 4 != 3 || arith::is_sum_of_two_squares(n as u64)? {
        return Err(Error::InvalidArgument(format!("{n} is not 3 mod 4 or is a sum of two squares")));
    }
    let form = HermitianForm::new(n * (n - 1), QuadInt::from_int(n, 1), 1);
    Ok(SurfaceSpec { form, group: Group::Gamma0(2 * n), construction: Construction::Gamma0Even { n } })
}

fn congruence(theorem: &str, modulus: i128, residue: i128, disc: i128) -> Certificate {
    Certificate::EmbeddedCongruence { theorem: theorem.into(), modulus, residue, reference_discriminant: disc }
}

/// Congruence certificate when the construction parameters meet the hypotheses
/// of one of the embeddedness constructions; `Inconclusive` otherwise.
pub fn certify_embedded(spec: &SurfaceSpec) -> Result<Certificate> {
    let d = spec.d();
    let disc = spec.discriminant();
    let fail = Ok(Certificate::Inconclusive { height: 0 });
    if disc <= 0 {
        return fail;
    }
    let tagged = match (spec.construction, spec.group) {
        (Construction::SBc { b, c }, Group::Bianchi) => {
            b.as_int().map(|m| (Construction::Thereis { r: 1, m, c }, Group::ExtendedCoset(1)))
        }
        _ => None,
    };
    let (construction, group) = tagged.unwrap_or((spec.construction, spec.group));
    match (construction, group) {
        (Construction::Thereis { r, m, c }, Group::ExtendedCoset(gr)) => {
            let dd = d as i128;
            let t = m * m - dd * c;
            let ok = gr == r
                && r > 0
                && d % r == 0
                && 0 < m
                && 2 * m < dd
                && 0 < t
                && 4 * t < dd
                && disc == dd * t
                && 4 * disc < dd * dd
                && thereis_form(d, r, m, c)? == spec.form;
            if ok {
                return Ok(congruence("thereis", dd * dd, -2 * disc, disc));
            }
            fail
        }
        (Construction::Gamma0Odd { n }, Group::Gamma0(level)) => {
            match gamma0_odd(n) {
                Ok(s) if s.form == spec.form && level == n && d == 1 => {
                    Ok(congruence("gamma0_odd", 4 * n, -2 * n, disc))
                }
                _ => fail,
            }
        }
        (Construction::Gamma0Even { n }, Group::Gamma0(level)) => {
            match gamma0_even(n) {
                Ok(s) if s.form == spec.form && level == 2 * n && d == 1 => {
                    Ok(congruence("gamma0_even", 4 * n, -2 * n, disc))
                }
                _ => fail,
            }
        }
        (_, Group::Principal(n)) if 4 * disc <= n => Ok(congruence("principal_level", n, -2 * disc, disc)),
        _ => fail,
    }
}

type StreamCache = Vec<((i64, Level, u32), Arc<Vec<IntMat>>)>;

static STREAMS: OnceLock<Mutex<StreamCache>> = OnceLock::new();
const STREAM_CACHE_SLOTS: usize = 4;

/// Stream of group elements for a level: the general stream filtered by the
/// congruence, followed by parabolic elements built to lie in the level.
pub fn level_stream(d: i64, level: Level, height: u32) -> Arc<Vec<IntMat>> {
    let key = (d, level, height);
    let cache = STREAMS.get_or_init(|| Mutex::new(Vec::new()));
    if let Some((_, s)) = cache.lock().expect("stream cache").iter().find(|(k, _)| *k == key) {
        return s.clone();
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut push = |m: &Mat2, out: &mut Vec<IntMat>| {
        let n = m.projective_normal();
        if let Some(q) = n.to_quadints() {
            if level.contains(&q) && seen.insert(n) {
                out.push(q);
            }
        }
    };
    for m in enumerate_gamma_elements(d, height, false) {
        push(&m, &mut out);
    }
    let h = height as i128;
    let coords: Vec<QuadInt> = (-h..=h)
        .flat_map(|b1| (-h..=h).map(move |b2| QuadInt::from_basis(b1, b2, d)))
        .collect();
    let one = QuadInt::one(d);
    let om = QuadInt::omega(d);
    match level {
        Level::Full => {}
        Level::Principal(p) => {
            for &x in &coords {
                for &y in &coords {
                    for t in [p, p * om] {
                        push(&parabolic_element(x, y, t), &mut out);
                    }
                }
            }
        }
        Level::Gamma0(n) => {
            let nq = QuadInt::from_int(n, d);
            for &x in &coords {
                for &y in &coords {
                    for t in [one, om, -one, -om] {
                        push(&parabolic_element(x * nq, y, t), &mut out);
                    }
                }
            }
        }
    }
    let arc = Arc::new(out);
    let mut c = cache.lock().expect("stream cache");
    if c.len() >= STREAM_CACHE_SLOTS {
        c.remove(0);
    }
    c.push((key, arc.clone()));
    arc
}

/// First element of the level stream whose image of the circle crosses it.
pub fn search_not_embedded(spec: &SurfaceSpec, height: u32) -> Result<Certificate> {
    let disc = spec.discriminant();
    if disc <= 0 {
        return Err(Error::InvalidArgument(format!("discriminant {disc} is not positive")));
    }
    let stream = level_stream(spec.d(), spec.group.level(spec.d()), height);
    for g in stream.iter() {
        if let Some(n) = forms::violation_numerator(&spec.form, disc, g) {
            return Ok(Certificate::NotEmbedded {
                witness: Mat2::from_quadints(*g),
                trace: Ratio::new(n, disc),
            });
        }
    }
    Ok(Certificate::Inconclusive { height })
}

/// `[[1 + k sqrt(-d), d k^2 + 2], [-1, -1 + k sqrt(-d)]]`, determinant 1.
pub fn t_k(d: i64, k: i128) -> Mat2 {
    let w = QuadInt::sqrt_neg_d(d).scale(k);
    let one = QuadInt::one(d);
    Mat2::from_quadints([
        [one + w, QuadInt::from_int(d as i128 * k * k + 2, d)],
        [-one, w - one],
    ])
}

/// An orientation-reversing element of the stabilizer, trying `T_k` for
/// `k = 1..=height` before the level stream.
pub fn orientability_search(spec: &SurfaceSpec, height: u32) -> Result<Certificate> {
    if spec.form.a == 0 {
        return Err(Error::InvalidArgument("straight-line forms (a = 0) are not handled".into()));
    }
    let d = spec.d();
    let level = spec.group.level(d);
    for k in 1..=height as i128 {
        let g = t_k(d, k);
        let q = g.to_quadints().expect("integral");
        if level.contains(&q) && forms::stabilizer_int(&q, &spec.form, Orientation::Reversing) {
            return Ok(Certificate::OrientationReversing { witness: g });
        }
    }
    for g in level_stream(d, level, height).iter() {
        if forms::stabilizer_int(g, &spec.form, Orientation::Reversing) {
            return Ok(Certificate::OrientationReversing { witness: Mat2::from_quadints(*g) });
        }
    }
    Ok(Certificate::Inconclusive { height })
}

/// Stream elements fixing the circle with its orientation.
pub fn stabilizer_sample(spec: &SurfaceSpec, height: u32) -> Result<Vec<Mat2>> {
    if spec.form.a == 0 {
        return Err(Error::InvalidArgument("straight-line forms (a = 0) are not handled".into()));
    }
    let d = spec.d();
    Ok(level_stream(d, spec.group.level(d), height)
        .iter()
        .filter(|g| forms::stabilizer_int(g, &spec.form, Orientation::Preserving))
        .map(|g| Mat2::from_quadints(*g))
        .collect())
}

/// `Mat2` with `g* A g = ±A2`, searched along the general stream.
pub fn equivalence_search(a: &HermitianForm, a2: &HermitianForm, height: u32) -> Result<Option<Mat2>> {
    if a.d != a2.d {
        return Err(Error::InvalidArgument("forms over different fields".into()));
    }
    if a.discriminant() != a2.discriminant() {
        return Err(Error::DiscriminantMismatch(a.discriminant(), a2.discriminant()));
    }
    let neg = a2.neg();
    for g in level_stream(a.d, Level::Full, height).iter() {
        let t = a.transform_int(g);
        if t == *a2 || t == neg {
            return Ok(Some(Mat2::from_quadints(*g)));
        }
    }
    Ok(None)
}

/// `D/d` passes the residue and non-representability tests, which is
/// necessary for a closed embedded surface of canonical shape.
pub fn dset_necessary(spec: &SurfaceSpec) -> Result<bool> {
    let d = spec.d();
    let dd = d as i128;
    let t = match spec.construction {
        Construction::SBc { b, c } => b.norm() - dd * c,
        Construction::Thereis { m, c, .. } => m * m - dd * c,
        _ => return Err(Error::InvalidArgument("spec is not of canonical shape".into())),
    };
    if spec.discriminant() != dd * t {
        return Err(Error::Inconsistent(format!("discriminant {} != d * {t}", spec.discriminant())));
    }
    if t <= 0 || 4 * t >= dd {
        return Ok(false);
    }
    sieve::in_dset_weak(t as u64, d as u64)
}

/// Circles of the Picard group: `plain` is `|z|^2 - D = 0`; `one`, `two`
/// and `three` are `2|z|^2 + Bz + conj(Bz) - c = 0` with `B = 1, i, 1 + i`.
pub fn picard_canonical(disc: i128, variant: PicardVariant) -> Result<SurfaceSpec> {
    if disc <= 0 {
        return Err(Error::InvalidArgument(format!("discriminant {disc} must be positive")));
    }
    let q = |x: i128, y: i128| QuadInt::new(2 * x, 2 * y, 1).expect("Gaussian integer");
    let form = match variant {
        PicardVariant::Plain => HermitianForm::diagonal(1, 1, -disc),
        PicardVariant::One | PicardVariant::Two => {
            if disc % 4 != 1 {
                return Err(Error::InvalidArgument(format!("{disc} is not 1 mod 4")));
            }
            let b = if variant == PicardVariant::One { q(1, 0) } else { q(0, 1) };
            HermitianForm::new(2, b, -(disc - 1) / 2)
        }
        PicardVariant::Three => {
            if disc % 4 != 2 {
                return Err(Error::InvalidArgument(format!("{disc} is not 2 mod 4")));
            }
            HermitianForm::new(2, q(1, 1), -(disc - 2) / 2)
        }
    };
    Ok(SurfaceSpec { form, group: Group::Bianchi, construction: Construction::PicardCanonical { disc, variant } })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PicardPrimeVerdict {
    /// No closed embedded totally geodesic surface at this level.
    NoClosedEmbedded,
}

/// Verdict for the principal congruence subgroup of `PSL(2, Z[i])` at a
/// degree-one prime or at `1 + i`; the statement is applied, not re-derived.
pub fn picard_prime_verdict(pi: QuadInt) -> Result<PicardPrimeVerdict> {
    if pi.d != 1 {
        return Err(Error::InvalidArgument("Gaussian prime expected".into()));
    }
    let n = pi.norm();
    let ok = n == 2 || (n % 4 == 1 && arith::is_prime(n as u64));
    if !ok || pi.two_y == 0 || pi.two_x == 0 {
        return Err(Error::InvalidArgument(format!("{pi} is not a degree-one Gaussian prime or 1+i")));
    }
    Ok(PicardPrimeVerdict::NoClosedEmbedded)
}

/// Residue of `i` modulo the prime `pi` over `p`.
fn i_mod_pi(p: u64, pi: QuadInt) -> Result<u64> {
    let (a, b) = ((pi.two_x / 2).rem_euclid(p as i128) as u64, (pi.two_y / 2).rem_euclid(p as i128) as u64);
    if b == 0 {
        return Err(Error::InvalidArgument(format!("{pi} is not of degree one over {p}")));
    }
    let inv = mod_inverse(b, p).ok_or_else(|| Error::InvalidArgument(format!("{b} not invertible mod {p}")))?;
    let i = (p - a * inv % p) % p;
    if (i * i + 1) % p != 0 {
        return Err(Error::InvalidArgument(format!("{pi} does not lie over {p}")));
    }
    Ok(i)
}

fn mod_inverse(a: u64, p: u64) -> Option<u64> {
    let e = (a as i128).extended_gcd(&(p as i128));
    (e.gcd == 1).then(|| e.x.rem_euclid(p as i128) as u64)
}

type ModMat = [u64; 4];

fn mod_mul(x: &ModMat, y: &ModMat, p: u64) -> ModMat {
    [
        (x[0] * y[0] + x[1] * y[2]) % p,
        (x[0] * y[1] + x[1] * y[3]) % p,
        (x[2] * y[0] + x[3] * y[2]) % p,
        (x[2] * y[1] + x[3] * y[3]) % p,
    ]
}

fn mod_projective(x: ModMat, p: u64) -> ModMat {
    let neg = x.map(|v| (p - v) % p);
    x.min(neg)
}

/// Order of the subgroup of `PSL(2, F_p)` generated by the reductions of the
/// sample modulo `pi`, a Gaussian prime over `p`.
pub fn mod_p_image_order(sample: &[Mat2], p: u64, pi: QuadInt) -> Result<u64> {
    if sample.is_empty() {
        return Err(Error::InvalidArgument("empty sample".into()));
    }
    if !arith::is_prime(p) || pi.d != 1 || pi.norm() != p as i128 {
        return Err(Error::InvalidArgument(format!("{pi} is not a prime of norm {p}")));
    }
    let i = i_mod_pi(p, pi)?;
    let mut gens = Vec::new();
    for m in sample {
        let q = m
            .to_quadints()
            .ok_or_else(|| Error::NotIntegral(format!("{m} is not integral")))?;
        let red = |z: QuadInt| -> u64 {
            let x = (z.two_x / 2).rem_euclid(p as i128) as u64;
            let y = (z.two_y / 2).rem_euclid(p as i128) as u64;
            (x + y * i) % p
        };
        gens.push(mod_projective([red(q[0][0]), red(q[0][1]), red(q[1][0]), red(q[1][1])], p));
    }
    let id = mod_projective([1, 0, 0, 1], p);
    let mut seen: HashSet<ModMat> = HashSet::from([id]);
    let mut frontier = vec![id];
    while let Some(x) = frontier.pop() {
        for g in &gens {
            let y = mod_projective(mod_mul(&x, g, p), p);
            if seen.insert(y) {
                frontier.push(y);
            }
        }
    }
    Ok(seen.len() as u64)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingReport {
    pub samples: usize,
    /// Samples whose value is not an integer congruent to the residue.
    pub congruence_failures: usize,
    /// Samples with `|Tr| < 2`.
    pub trace_failures: usize,
    /// Samples outside the group (sampler bug).
    pub membership_failures: usize,
    pub first_counterexample: Option<Mat2>,
}

impl SamplingReport {
    pub fn counterexamples(&self) -> usize {
        self.congruence_failures + self.trace_failures + self.membership_failures
    }
}

fn alphabet(d: i64) -> Vec<Mat2> {
    let one = QuadInt::one(d);
    let om = QuadInt::omega(d);
    let mut v = vec![
        Mat2::translation(one),
        Mat2::translation(-one),
        Mat2::translation(om),
        Mat2::translation(-om),
        Mat2::s(d),
    ];
    for u in QuadInt::units(d) {
        if u.two_y > 0 {
            v.push(Mat2::diag(u, u.conj()));
        }
    }
    v
}

fn random_word(rng: &mut ChaCha8Rng, letters: &[Mat2], max_len: usize) -> Mat2 {
    let len = rng.random_range(1..=max_len);
    let mut m = letters[rng.random_range(0..letters.len())];
    for _ in 1..len {
        m = m.mul(&letters[rng.random_range(0..letters.len())]);
    }
    m
}

// Entries past this size can overflow when transforming forms.
const SAMPLE_ENTRY_CAP: i128 = 1 << 24;

fn is_small(m: &Mat2) -> bool {
    m.to_quadints()
        .is_some_and(|q| q.iter().flatten().all(|z| z.two_x.abs() <= SAMPLE_ENTRY_CAP && z.two_y.abs() <= SAMPLE_ENTRY_CAP))
}

/// Random element of the level subgroup with entries below the sample cap.
fn random_level_element(rng: &mut ChaCha8Rng, d: i64, level: Level) -> Result<Mat2> {
    loop {
        let m = random_level_word(rng, d, level)?;
        if is_small(&m) {
            return Ok(m);
        }
    }
}

fn random_level_word(rng: &mut ChaCha8Rng, d: i64, level: Level) -> Result<Mat2> {
    let base = alphabet(d);
    let om = QuadInt::omega(d);
    let lower = |x: QuadInt| {
        let (z, one) = (QuadInt::zero(d), QuadInt::one(d));
        Mat2::from_quadints([[one, z], [x, one]])
    };
    Ok(match level {
        Level::Full => random_word(rng, &base, 8),
        Level::Principal(p) => {
            // products of conjugates of level-p unipotents
            let unip = [
                Mat2::translation(p),
                Mat2::translation(-p),
                Mat2::translation(p * om),
                lower(p),
                lower(-p),
                lower(p * om),
            ];
            let k = rng.random_range(1..=2);
            let mut acc = Mat2::identity(d);
            for _ in 0..k {
                let w = random_word(rng, &base, 3);
                let u = unip[rng.random_range(0..unip.len())];
                acc = acc.mul(&w.mul(&u).mul(&w.inverse()?));
            }
            acc
        }
        Level::Gamma0(n) => {
            let nq = QuadInt::from_int(n, d);
            let mut letters: Vec<Mat2> = base.iter().filter(|m| **m != Mat2::s(d)).copied().collect();
            letters.extend([lower(nq), lower(-nq), lower(nq * om), lower(-(nq * om))]);
            random_word(rng, &letters, 10)
        }
    })
}

/// Check a congruence certificate on sampled group elements: the first
/// `samples / 2` come from the level stream, the rest are random words.
pub fn verify_certificate_by_sampling(
    cert: &Certificate,
    spec: &SurfaceSpec,
    samples: usize,
    height: u32,
    seed: u64,
) -> Result<SamplingReport> {
    let Certificate::EmbeddedCongruence { modulus, residue, reference_discriminant, .. } = *cert else {
        return Err(Error::InvalidArgument(format!("{} certificates are not sampled", cert.kind())));
    };
    let d = spec.d();
    let level = spec.group.level(d);
    let disc = spec.discriminant();
    if disc <= 0 {
        return Err(Error::InvalidArgument("discriminant must be positive".into()));
    }
    let stream = level_stream(d, level, height);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = SamplingReport {
        samples,
        congruence_failures: 0,
        trace_failures: 0,
        membership_failures: 0,
        first_counterexample: None,
    };
    let from_stream = (samples / 2).min(stream.len());
    for k in 0..samples {
        let g = if k < from_stream {
            Mat2::from_quadints(stream[k])
        } else {
            random_level_element(&mut rng, d, level)?
        };
        let mut bad = false;
        if !quadring::is_in_gamma(&g, &level)? {
            rep.membership_failures += 1;
            bad = true;
        } else {
            let q = g.to_quadints().expect("integral");
            let t = spec.form.transform_int(&q);
            let tr = forms::trace_pair(&t, &spec.form)?;
            let value = tr * Ratio::from_integer(-reference_discriminant);
            if !value.is_integer() || (value.to_integer() - residue).rem_euclid(modulus) != 0 {
                rep.congruence_failures += 1;
                bad = true;
            }
            if tr < Ratio::from_integer(2) && tr > Ratio::from_integer(-2) {
                rep.trace_failures += 1;
                bad = true;
            }
        }
        if bad && rep.first_counterexample.is_none() {
            rep.first_counterexample = Some(g);
        }
    }
    Ok(rep)
}

/// Recheck a certificate from its own data.
pub fn replay_certificate(cert: &Certificate, spec: &SurfaceSpec) -> Result<bool> {
    let d = spec.d();
    let level = spec.group.level(d);
    Ok(match cert {
        Certificate::NotEmbedded { witness, trace } => {
            quadring::is_in_gamma(witness, &level)?
                && forms::embed_violation(&spec.form, witness)? == Some(*trace)
        }
        Certificate::EmbeddedCongruence { modulus, reference_discriminant, .. } => {
            *modulus >= 4 * reference_discriminant && certify_embedded(spec)? == *cert
        }
        Certificate::OrientationReversing { witness } => {
            quadring::is_in_gamma(witness, &level)?
                && forms::stabilizer_test(witness, &spec.form, Orientation::Reversing)?
        }
        Certificate::Closed | Certificate::NonCompact => is_closed(spec)? == *cert,
        Certificate::Inconclusive { .. } => true,
    })
}

/// Bracketed count of inequivalent surfaces in a family.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistinctCount {
    /// Distinct discriminants; surfaces with different discriminants are inequivalent.
    pub certified_lower: usize,
    /// Parameter count minus merges found by [`equivalence_search`].
    pub merged: usize,
    pub raw: usize,
}

pub fn distinct_count(specs: &[SurfaceSpec], merge_height: u32) -> Result<DistinctCount> {
    let discs: HashSet<i128> = specs.iter().map(|s| s.discriminant()).collect();
    let mut classes: Vec<HermitianForm> = Vec::new();
    for s in specs {
        let mut merged = false;
        for c in &classes {
            if c.discriminant() == s.discriminant() && equivalence_search(&s.form, c, merge_height)?.is_some() {
                merged = true;
                break;
            }
        }
        if !merged {
            classes.push(s.form);
        }
    }
    Ok(DistinctCount { certified_lower: discs.len(), merged: classes.len(), raw: specs.len() })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormCountReport {
    pub d: i64,
    pub disc: i128,
    pub forms_enumerated: usize,
    /// Orbits among the enumerated forms after merging along the stream;
    /// at least the number of classes they meet.
    pub classes_found: usize,
    /// `4 tau(gcd(d, D))^2`.
    pub bound: u64,
}

fn sign_normal(f: HermitianForm) -> HermitianForm {
    let key = [f.a, f.b.two_x, f.b.two_y, f.c];
    match key.iter().find(|&&v| v != 0) {
        Some(&v) if v < 0 => f.neg(),
        _ => f,
    }
}

/// Greedy reduction: translate to make `|B|` small, swap when `|c| < |a|`,
/// repeat while `|a|` drops.
pub fn reduce_form(f: &HermitianForm) -> HermitianForm {
    let d = f.d;
    let mut f = sign_normal(*f);
    loop {
        if f.a != 0 {
            // B + a k with k near -B/a in basis coordinates
            let (b1, b2) = f.b.basis_coords();
            let (t1, t2) = (-(b1 as f64) / f.a as f64, -(b2 as f64) / f.a as f64);
            let mut best = f;
            for k1 in [t1.floor() as i128, t1.ceil() as i128] {
                for k2 in [t2.floor() as i128, t2.ceil() as i128] {
                    let k = QuadInt::from_basis(k1, k2, d);
                    let g = Mat2::translation(k).to_quadints().expect("integral");
                    let t = f.transform_int(&g);
                    if t.b.norm() < best.b.norm() {
                        best = t;
                    }
                }
            }
            f = best;
        }
        if f.a == 0 || f.c.abs() >= f.a.abs() {
            return sign_normal(f);
        }
        f = sign_normal(f.transform_int(&Mat2::s(d).to_quadints().expect("integral")));
    }
}

/// Primitive forms of discriminant `disc` with `|a|, |c|` and the basis
/// coordinates of `B` at most `coeff`, grouped into orbits: each form is
/// reduced, then reduced forms are merged along the stream.
pub fn count_form_classes(d: i64, disc: i128, coeff: i128, height: u32) -> Result<FormCountReport> {
    if disc <= 0 {
        return Err(Error::InvalidArgument("discriminant must be positive".into()));
    }
    let mut forms_list = Vec::new();
    let mut index = HashMap::new();
    for b1 in -coeff..=coeff {
        for b2 in -coeff..=coeff {
            let b = QuadInt::from_basis(b1, b2, d);
            let ac = b.norm() - disc;
            for a in -coeff..=coeff {
                if a == 0 || ac % a != 0 {
                    continue;
                }
                let c = ac / a;
                if c.abs() > coeff {
                    continue;
                }
                let f = sign_normal(HermitianForm::new(a, b, c));
                if f.is_primitive() && !index.contains_key(&f) {
                    index.insert(f, forms_list.len());
                    forms_list.push(f);
                }
            }
        }
    }
    let n = forms_list.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    fn union(parent: &mut [usize], i: usize, j: usize) {
        let (ri, rj) = (find(parent, i), find(parent, j));
        if ri != rj {
            parent[ri] = rj;
        }
    }
    let mut reduced = BTreeSet::new();
    for i in 0..n {
        let r = reduce_form(&forms_list[i]);
        let j = *index.entry(r).or_insert_with(|| {
            forms_list.push(r);
            parent.push(parent.len());
            forms_list.len() - 1
        });
        union(&mut parent, i, j);
        reduced.insert(j);
    }
    let stream = level_stream(d, Level::Full, height);
    for &i in &reduced {
        for g in stream.iter() {
            let t = sign_normal(forms_list[i].transform_int(g));
            if let Some(&j) = index.get(&t) {
                union(&mut parent, i, j);
            }
        }
    }
    let roots: HashSet<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
    let classes = roots.len();
    let g = (d as u64).gcd(&(disc as u64));
    let tau = arith::factorize(g)?.tau();
    Ok(FormCountReport { d, disc, forms_enumerated: n, classes_found: classes, bound: 4 * tau * tau })
}

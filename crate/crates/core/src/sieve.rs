//! The residue sieve: the sets `D(d)`, their weighted sizes, the scan for
//! `d` with empty `D(d)`, and the discriminant filters used for counting.
//!
//! Membership of `r` in `D(d)`: `0 < 4r < d`, `(r/p) = +1` for every odd
//! prime `p | d`, and `r` not of the form `a^2 + d b^2` with `a, b` rational.
//! Values `r` that are squares mod `d` only because some odd `p | d` divides
//! `r` are kept apart in [`DsetRecord::shared_factor`].

use std::collections::BTreeSet;
use std::fs::{File, OpenOptions};
use std::io::Write as _;
use std::path::Path;
use std::sync::Mutex;

use num_integer::Integer;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{self, jacobi_unchecked, primes_below};
use crate::classgroup;
use crate::error::{Error, Result};

/// Width of the `d` ranges processed as one unit of work and one checkpoint record.
pub const SHARD_SIZE: u64 = 1 << 14;

/// Largest `r` whose smallest prime factor is tabulated during a scan.
const SPF_CAP: u64 = 1 << 22;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DsetRecord {
    pub d: u64,
    pub members: Vec<u64>,
    pub weight_sum: u64,
    pub first_witness: Option<u64>,
    /// `0 < 4r < d`, not representable, a square mod `d` with some odd `p | d` dividing `r`.
    pub shared_factor: Vec<u64>,
}

fn odd_primes_of_squarefree(d: u64) -> Result<Vec<u64>> {
    let f = arith::factorize(d)?;
    if !f.is_squarefree() {
        return Err(Error::NotSquarefree(d));
    }
    Ok(f.odd_primes().collect())
}

/// `prod over odd p | d of ((r/p) + 1)`.
fn weight(r: u64, odd_primes: &[u64]) -> u64 {
    odd_primes
        .iter()
        .map(|&p| (jacobi_unchecked(r % p, p) + 1) as u64)
        .product()
}

fn strict_residue(r: u64, odd_primes: &[u64]) -> bool {
    odd_primes.iter().all(|&p| jacobi_unchecked(r % p, p) == 1)
}

fn weak_residue(r: u64, odd_primes: &[u64]) -> bool {
    odd_primes.iter().all(|&p| jacobi_unchecked(r % p, p) != -1)
}

/// Residue criterion for `r = a^2 + d b^2` over the rationals, from the
/// odd primes of `d` and the squarefree part `s` of `r` with its odd primes.
fn representable_from_parts(d: u64, d_odd: &[u64], s: u64, s_odd: &[u64]) -> bool {
    let g = d.gcd(&s);
    let cross = (d / g) * (s / g);
    d_odd.iter().all(|&p| jacobi_unchecked(s % p, p) != -1)
        && s_odd.iter().all(|&p| {
            let neg_d = (p - d % p) % p;
            jacobi_unchecked(neg_d, p) != -1
        })
        && d_odd
            .iter()
            .filter(|&&p| g % p == 0)
            .all(|&p| jacobi_unchecked(cross % p, p) != -1)
}

/// All of `D(d)` together with the shared-factor values.
pub fn dset(d: u64) -> Result<DsetRecord> {
    let odd = odd_primes_of_squarefree(d)?;
    let mut members = Vec::new();
    let mut shared_factor = Vec::new();
    let mut weight_sum = 0;
    let mut r = 1;
    while 4 * r < d {
        if weak_residue(r, &odd) && !arith::is_rationally_representable(r, d)? {
            if strict_residue(r, &odd) {
                members.push(r);
                weight_sum += weight(r, &odd);
            } else {
                shared_factor.push(r);
            }
        }
        r += 1;
    }
    Ok(DsetRecord { d, first_witness: members.first().copied(), members, weight_sum, shared_factor })
}

/// Smallest member of `D(d)`, residue test first.
pub fn dset_nonempty_witness(d: u64) -> Result<Option<u64>> {
    let odd = odd_primes_of_squarefree(d)?;
    let mut r = 1;
    while 4 * r < d {
        if strict_residue(r, &odd) && !arith::is_rationally_representable(r, d)? {
            return Ok(Some(r));
        }
        r += 1;
    }
    Ok(None)
}

/// `sum over r in D(d) of prod over odd p | d of ((r/p) + 1)`.
pub fn weight_sum(d: u64) -> Result<u64> {
    Ok(dset(d)?.weight_sum)
}

/// Whether `r` lies in `D(d)` or among the shared-factor values, i.e. `r`
/// is a square mod `d` allowing zero residues and is not representable.
pub fn in_dset_weak(r: u64, d: u64) -> Result<bool> {
    let odd = odd_primes_of_squarefree(d)?;
    Ok(r > 0 && 4 * r < d && weak_residue(r, &odd) && !arith::is_rationally_representable(r, d)?)
}

/// Smallest-prime-factor table on `[0, n)`.
struct SpfTable {
    spf: Vec<u32>,
}

impl SpfTable {
    fn new(n: u64) -> Self {
        let n = n.max(2) as usize;
        let mut spf = vec![0u32; n];
        for i in 2..n {
            if spf[i] == 0 {
                let mut j = i;
                while j < n {
                    if spf[j] == 0 {
                        spf[j] = i as u32;
                    }
                    j += i;
                }
            }
        }
        SpfTable { spf }
    }

    /// Squarefree part and its odd primes.
    fn squarefree_parts(&self, mut r: u64) -> Result<(u64, Vec<u64>)> {
        if (r as usize) >= self.spf.len() {
            let f = arith::factorize(r)?;
            let s = f.squarefree_part();
            let odd = f.factors.iter().filter(|&&(p, e)| p != 2 && e % 2 == 1).map(|&(p, _)| p).collect();
            return Ok((s, odd));
        }
        let mut s = 1;
        let mut odd = Vec::new();
        while r > 1 {
            let p = self.spf[r as usize] as u64;
            let mut e = 0;
            while r % p == 0 {
                r /= p;
                e += 1;
            }
            if e % 2 == 1 {
                s *= p;
                if p != 2 {
                    odd.push(p);
                }
            }
        }
        Ok((s, odd))
    }
}

/// Prime factors of every integer in `[lo, hi)` by sieving with primes up to `sqrt(hi)`.
/// `None` marks integers that are not squarefree.
fn segment_factors(lo: u64, hi: u64, primes: &[u64]) -> Vec<Option<Vec<u64>>> {
    let len = (hi - lo) as usize;
    let mut rest: Vec<u64> = (lo..hi).collect();
    let mut out: Vec<Option<Vec<u64>>> = vec![Some(Vec::new()); len];
    for &p in primes {
        if p * p >= hi {
            break;
        }
        let start = lo.div_ceil(p) * p;
        let mut m = start;
        while m < hi {
            let i = (m - lo) as usize;
            rest[i] /= p;
            if rest[i] % p == 0 {
                out[i] = None;
            } else if let Some(v) = out[i].as_mut() {
                v.push(p);
            }
            m += p;
        }
    }
    for i in 0..len {
        if rest[i] > 1 {
            if let Some(v) = out[i].as_mut() {
                v.push(rest[i]);
            }
        }
    }
    out
}

/// Scan `(lo, hi)` range for `d` with empty `D(d)`; returns the empties.
fn scan_shard(lo: u64, hi: u64, primes: &[u64], spf: &SpfTable) -> Result<Vec<u64>> {
    let mut empties = Vec::new();
    for (i, facs) in segment_factors(lo, hi, primes).into_iter().enumerate() {
        let d = lo + i as u64;
        let Some(facs) = facs else { continue };
        if d == 0 {
            continue;
        }
        let odd: Vec<u64> = facs.into_iter().filter(|&p| p != 2).collect();
        let mut found = false;
        let mut r = 1;
        while 4 * r < d {
            if strict_residue(r, &odd) {
                let (s, s_odd) = spf.squarefree_parts(r)?;
                if !representable_from_parts(d, &odd, s, &s_odd) {
                    found = true;
                    break;
                }
            }
            r += 1;
        }
        if !found {
            empties.push(d);
        }
    }
    Ok(empties)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanReport {
    pub d_max: u64,
    pub empties: Vec<u64>,
    pub shards: usize,
    /// Shards taken from the checkpoint instead of recomputed.
    #[serde(skip)]
    pub resumed_shards: usize,
}

fn shard_bounds(d_max: u64) -> Vec<(u64, u64)> {
    let mut v = Vec::new();
    let mut lo = 1;
    while lo <= d_max {
        let hi = (lo + SHARD_SIZE).min(d_max + 1);
        v.push((lo, hi));
        lo = hi;
    }
    v
}

#[derive(Default)]
struct Checkpoint {
    done: BTreeSet<(u64, u64)>,
    empties: BTreeSet<u64>,
}

const CHECKPOINT_HEADER: [&str; 3] = ["d", "status", "first_witness"];

fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut ck = Checkpoint::default();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Parse(format!("checkpoint {}: {e}", path.display())))?;
    let header = rdr.headers().map_err(|e| Error::Parse(format!("checkpoint header: {e}")))?;
    if header.iter().collect::<Vec<_>>() != CHECKPOINT_HEADER {
        return Err(Error::Parse(format!("checkpoint header {header:?}")));
    }
    let mut pending = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(format!("checkpoint record {}: {e}", line + 2)))?;
        let bad = || Error::Parse(format!("checkpoint record {}: {rec:?}", line + 2));
        if rec.len() != 3 {
            return Err(bad());
        }
        let d: u64 = rec[0].parse().map_err(|_| bad())?;
        match &rec[1] {
            "empty" if rec[2].is_empty() => pending.push(d),
            "nonempty" => {
                rec[2].parse::<u64>().map_err(|_| bad())?;
            }
            "done" => {
                let lo: u64 = rec[2].parse().map_err(|_| bad())?;
                if lo >= d {
                    return Err(bad());
                }
                ck.done.insert((lo, d));
            }
            _ => return Err(bad()),
        }
    }
    for d in pending {
        if ck.done.iter().any(|&(lo, hi)| lo <= d && d < hi) {
            ck.empties.insert(d);
        }
    }
    Ok(ck)
}

/// All squarefree `d <= d_max` with empty `D(d)`, in increasing order.
///
/// With a checkpoint path, finished shards are appended to the file as
/// `d,empty,` rows followed by a `hi,done,lo` row, and shards already
/// recorded there are not recomputed. The result does not depend on the
/// number of threads.
pub fn scan_empty(d_max: u64, threads: usize, checkpoint: Option<&Path>) -> Result<ScanReport> {
    if d_max == 0 {
        return Err(Error::InvalidArgument("d_max must be positive".into()));
    }
    let shards = shard_bounds(d_max);
    let ck = match checkpoint {
        Some(p) if p.exists() && std::fs::metadata(p)?.len() > 0 => read_checkpoint(p)?,
        _ => Checkpoint::default(),
    };
    let todo: Vec<(u64, u64)> = shards.iter().copied().filter(|s| !ck.done.contains(s)).collect();
    let resumed = shards.len() - todo.len();

    let writer: Option<Mutex<File>> = match checkpoint {
        Some(p) => {
            let fresh = !p.exists() || std::fs::metadata(p)?.len() == 0;
            let mut f = OpenOptions::new().create(true).append(true).open(p)?;
            if fresh {
                writeln!(f, "{}", CHECKPOINT_HEADER.join(","))?;
            }
            Some(Mutex::new(f))
        }
        None => None,
    };

    let root = ((d_max as f64).sqrt() as u64) + 2;
    let primes = primes_below(root + 1);
    let spf = SpfTable::new((d_max / 4 + 1).min(SPF_CAP));

    let run = || -> Result<Vec<Vec<u64>>> {
        todo.par_iter()
            .map(|&(lo, hi)| {
                let empties = scan_shard(lo, hi, &primes, &spf)?;
                if let Some(w) = &writer {
                    let mut buf = String::new();
                    for d in &empties {
                        buf.push_str(&format!("{d},empty,\n"));
                    }
                    buf.push_str(&format!("{hi},done,{lo}\n"));
                    let mut f = w.lock().map_err(|_| Error::Io("checkpoint lock poisoned".into()))?;
                    f.write_all(buf.as_bytes())?;
                    f.flush()?;
                }
                Ok(empties)
            })
            .collect()
    };
    let fresh = if threads == 0 {
        run()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Inconsistent(format!("thread pool: {e}")))?
            .install(run)?
    };

    let mut all: BTreeSet<u64> = ck.empties.into_iter().filter(|&d| d <= d_max).collect();
    all.extend(fresh.into_iter().flatten());
    Ok(ScanReport { d_max, empties: all.into_iter().collect(), shards: shards.len(), resumed_shards: resumed })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", content = "value")]
pub enum UnknownReason {
    /// `D(d)` has this smallest member.
    DsetNonEmpty(u64),
    /// The class group has an element of order 4.
    OrderFourClass,
    /// Shared-factor values exist; each gives a closed surface with an
    /// embeddedness certificate when the construction's bounds hold.
    SharedFactorMembers(Vec<u64>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict")]
pub enum Verdict {
    NoClosedEmbedded,
    Unknown { reasons: Vec<UnknownReason> },
}

/// Whether `H^3 / PSL(2, O_d)` is known to contain no closed embedded
/// totally geodesic surface: requires `D(d)` empty, no shared-factor
/// values, and no class of order 4.
pub fn exceptional_verdict(d: u64) -> Result<Verdict> {
    let rec = dset(d)?;
    let mut reasons = Vec::new();
    if let Some(r) = rec.first_witness {
        reasons.push(UnknownReason::DsetNonEmpty(r));
    }
    let di = i64::try_from(d).map_err(|_| Error::InvalidArgument(format!("{d} out of range")))?;
    if classgroup::has_order_four_element(di)? {
        reasons.push(UnknownReason::OrderFourClass);
    }
    if !rec.shared_factor.is_empty() {
        reasons.push(UnknownReason::SharedFactorMembers(rec.shared_factor));
    }
    Ok(if reasons.is_empty() { Verdict::NoClosedEmbedded } else { Verdict::Unknown { reasons } })
}

/// Candidate discriminants `D = e D0` with `e | d`, `gcd(D0, d/e) = 1`, and
/// `e log^4(max(2, D0)) / D0 >= threshold`, grouped by `e = gcd(d, D)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateReport {
    pub d: u64,
    pub threshold: f64,
    pub classes: Vec<DivisorClass>,
    pub total: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DivisorClass {
    pub e: u64,
    /// Every admissible `D0` is at most this.
    pub max_d0: u64,
    pub count: u64,
}

// The score e log^4(x)/x increases up to x = e^4 < 55 and decreases after.
const MONOTONE_FROM: u64 = 55;

fn score(e: u64, d0: u64) -> f64 {
    let l = (d0.max(2) as f64).ln();
    e as f64 * l.powi(4) / d0 as f64
}

/// Integers in `[lo, hi]` coprime to `m`, by inclusion-exclusion over the primes of `m`.
fn count_coprime(lo: u64, hi: u64, primes: &[u64]) -> u64 {
    if lo > hi {
        return 0;
    }
    let upto = |x: u64| -> i128 {
        let mut total = 0i128;
        for mask in 0u32..(1 << primes.len()) {
            let mut prod = 1u64;
            for (i, &p) in primes.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    prod = prod.saturating_mul(p);
                }
            }
            let term = (x / prod) as i128;
            total += if mask.count_ones() % 2 == 0 { term } else { -term };
        }
        total
    };
    (upto(hi) - upto(lo - 1)) as u64
}

impl CandidateReport {
    pub fn contains(&self, disc: u64) -> bool {
        if disc == 0 {
            return false;
        }
        let e = self.d.gcd(&disc);
        score(e, disc / e) >= self.threshold
    }

    /// The candidates in increasing order, or an error past `cap` entries.
    pub fn list(&self, cap: u64) -> Result<Vec<u64>> {
        if self.total > cap {
            return Err(Error::CapExceeded { what: "candidate count", value: self.total, cap });
        }
        let mut out = Vec::new();
        for c in &self.classes {
            let m = self.d / c.e;
            for d0 in 1..=c.max_d0 {
                if d0.gcd(&m) == 1 && score(c.e, d0) >= self.threshold {
                    out.push(c.e * d0);
                }
            }
        }
        out.sort_unstable();
        Ok(out)
    }
}

pub fn candidate_discriminants(d: u64, threshold: f64) -> Result<CandidateReport> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidArgument(format!("threshold {threshold} must be positive")));
    }
    let f = arith::factorize(d)?;
    if !f.is_squarefree() {
        return Err(Error::NotSquarefree(d));
    }
    let mut classes = Vec::new();
    for e in f.divisors() {
        let m = d / e;
        let m_primes: Vec<u64> = arith::factorize(m)?.primes().collect();
        let mut count = 0;
        let mut max_d0 = 0;
        for d0 in 1..MONOTONE_FROM {
            if d0.gcd(&m) == 1 && score(e, d0) >= threshold {
                count += 1;
                max_d0 = d0;
            }
        }
        if score(e, MONOTONE_FROM) >= threshold {
            // largest x >= 55 with score(e, x) >= threshold
            let mut lo = MONOTONE_FROM;
            let mut hi = MONOTONE_FROM * 2;
            while score(e, hi) >= threshold {
                lo = hi;
                hi = hi.saturating_mul(2);
            }
            while hi - lo > 1 {
                let mid = lo + (hi - lo) / 2;
                if score(e, mid) >= threshold {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            count += count_coprime(MONOTONE_FROM, lo, &m_primes);
            max_d0 = lo;
        }
        classes.push(DivisorClass { e, max_d0, count });
    }
    let total = classes.iter().map(|c| c.count).sum();
    Ok(CandidateReport { d, threshold, classes, total })
}

/// Odd primes `p` in `[d^lo_exp, d^hi_exp]` with `(-d/p) = -1`, taken in
/// increasing order until their reciprocal sum exceeds `1/4`.
pub fn nonresidue_primes(d: u64, lo_exp: f64, hi_exp: f64) -> Result<(Vec<u64>, f64)> {
    if !(0.0 < lo_exp && lo_exp < hi_exp && hi_exp < 0.25) {
        return Err(Error::InvalidArgument(format!("need 0 < {lo_exp} < {hi_exp} < 1/4")));
    }
    let lo = (d as f64).powf(lo_exp).ceil() as u64;
    let hi = (d as f64).powf(hi_exp).floor() as u64;
    let mut out = Vec::new();
    let mut sum = 0.0;
    for p in primes_below(hi + 1) {
        if p < lo.max(3) {
            continue;
        }
        let neg_d = (p - d % p) % p;
        if jacobi_unchecked(neg_d, p) == -1 {
            out.push(p);
            sum += 1.0 / p as f64;
            if sum > 0.25 {
                break;
            }
        }
    }
    Ok((out, sum))
}

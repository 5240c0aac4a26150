#![allow(dead_code)]

use bianchi_core::forms::HermitianForm;
use bianchi_core::quadring::QuadInt;
use rand::Rng;

pub fn rand_quad(rng: &mut impl Rng, d: i64, bound: i128) -> QuadInt {
    QuadInt::from_basis(rng.random_range(-bound..=bound), rng.random_range(-bound..=bound), d)
}

/// Random form `[[a, B], [conj(B), c]]` with `a != 0` and discriminant `disc`.
pub fn rand_form_with_disc(rng: &mut impl Rng, d: i64, disc: i128, bound: i128) -> HermitianForm {
    loop {
        let b = rand_quad(rng, d, bound);
        let mut a = rng.random_range(-bound..=bound);
        if a == 0 {
            a = 1;
        }
        let ac = b.norm() - disc;
        if ac % a == 0 {
            return HermitianForm::new(a, b, ac / a);
        }
    }
}

/// Random form with `a != 0` and positive discriminant.
pub fn rand_form(rng: &mut impl Rng, d: i64, bound: i128) -> HermitianForm {
    loop {
        let b = rand_quad(rng, d, bound);
        let a = rng.random_range(-bound..=bound);
        let c = rng.random_range(-bound..=bound);
        if a != 0 && b.norm() - a * c > 0 {
            return HermitianForm::new(a, b, c);
        }
    }
}

/// Real and imaginary parts of a ring element.
pub fn to_f64(z: QuadInt) -> (f64, f64) {
    (z.two_x as f64 / 2.0, z.two_y as f64 / 2.0 * (z.d as f64).sqrt())
}

/// Center and radius of the circle `Q_A(z, 1) = 0`.
pub fn circle(f: &HermitianForm) -> ((f64, f64), f64) {
    let (bx, by) = to_f64(f.b);
    let a = f.a as f64;
    ((-bx / a, by / a), (f.discriminant() as f64).sqrt() / a.abs())
}

/// `r = p^2 + d s^2` over the rationals, searched with common denominator at most `qmax`.
pub fn brute_rational_rep(r: u64, d: u64, qmax: u64) -> bool {
    for q in 1..=qmax {
        let target = (r * q * q) as u128;
        let mut s = 0u128;
        while (d as u128) * s * s <= target {
            let rest = target - (d as u128) * s * s;
            let p = (rest as f64).sqrt() as u128;
            if (p.saturating_sub(1)..=p + 1).any(|p| p * p == rest) {
                return true;
            }
            s += 1;
        }
    }
    false
}

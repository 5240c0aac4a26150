mod common;

use std::collections::BTreeSet;

use bianchi_core::arith;
use bianchi_core::forms::{self, HermitianForm};
use bianchi_core::quadring::{Level, Mat2, QuadInt};
use bianchi_core::sieve::{self, UnknownReason, Verdict};
use bianchi_core::surfaces::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn squarefree_upto(n: u64) -> impl Iterator<Item = u64> {
    (1..=n).filter(|&d| arith::is_squarefree(d))
}

#[test]
fn family_discriminants_cover_the_residue_set() {
    for d in squarefree_upto(200).filter(|&d| d >= 5) {
        let fam = thereis_family(d as i64, usize::MAX).unwrap();
        let rec = sieve::dset(d).unwrap();
        let weak: BTreeSet<u64> = rec.members.iter().chain(&rec.shared_factor).copied().collect();
        let ts: BTreeSet<u64> = fam.iter().map(|s| (s.discriminant() / d as i128) as u64).collect();
        assert_eq!(ts, weak, "d={d}");
        for s in &fam {
            assert_eq!(s.discriminant() % d as i128, 0);
            let Construction::Thereis { r, .. } = s.construction else { panic!() };
            assert_eq!(s.group, Group::ExtendedCoset(r));
            assert!(dset_necessary(s).unwrap());
            assert_eq!(is_closed(s).unwrap(), Certificate::Closed);
        }
    }
}

#[test]
fn shared_factor_surface_is_certified() {
    // d = 30 has no strict residue-set members but m = 6, c = 1 gives t = 6
    assert!(sieve::dset(30).unwrap().members.is_empty());
    assert_eq!(
        sieve::exceptional_verdict(30).unwrap(),
        Verdict::Unknown { reasons: vec![UnknownReason::SharedFactorMembers(vec![6])] }
    );
    let fam = thereis_family(30, usize::MAX).unwrap();
    assert!(!fam.is_empty());
    for s in &fam {
        assert_eq!(s.discriminant(), 180);
        let cert = certify_embedded(s).unwrap();
        assert!(matches!(cert, Certificate::EmbeddedCongruence { modulus: 900, residue: -360, .. }), "{cert:?}");
        assert!(replay_certificate(&cert, s).unwrap());
        assert_eq!(is_closed(s).unwrap(), Certificate::Closed);
        assert!(forms::discriminant_bound_check(&s.form).unwrap());
        assert_eq!(search_not_embedded(s, 3).unwrap(), Certificate::Inconclusive { height: 3 });
    }
    let rep = verify_certificate_by_sampling(&certify_embedded(&fam[0]).unwrap(), &fam[0], 1000, 3, 30).unwrap();
    assert_eq!(rep.counterexamples(), 0);
}

#[test]
fn gamma0_certificates_survive_sampling() {
    for n in [21i128, 33, 57, 69, 77] {
        let s = gamma0_odd(n).unwrap();
        assert_eq!(s.discriminant(), n);
        let cert = certify_embedded(&s).unwrap();
        assert!(matches!(cert, Certificate::EmbeddedCongruence { .. }));
        let rep = verify_certificate_by_sampling(&cert, &s, 400, 2, n as u64).unwrap();
        assert_eq!(rep.counterexamples(), 0, "n={n} {:?}", rep.first_counterexample);
        assert_eq!(search_not_embedded(&s, 2).unwrap(), Certificate::Inconclusive { height: 2 });
    }
    for n in [3i128, 7, 11, 15, 19, 23] {
        let s = gamma0_even(n).unwrap();
        assert_eq!(s.group, Group::Gamma0(2 * n));
        let cert = certify_embedded(&s).unwrap();
        let rep = verify_certificate_by_sampling(&cert, &s, 400, 2, n as u64).unwrap();
        assert_eq!(rep.counterexamples(), 0, "n={n} {:?}", rep.first_counterexample);
    }
    for n in [13i128, 29, 5] {
        assert!(gamma0_odd(n).is_err());
    }
}

#[test]
fn sampler_detects_false_congruences() {
    // the level-21 congruence does not hold on the whole Picard group
    let s = gamma0_odd(21).unwrap();
    let cert = certify_embedded(&s).unwrap();
    let full = SurfaceSpec { group: Group::Bianchi, ..s };
    let rep = verify_certificate_by_sampling(&cert, &full, 400, 2, 1).unwrap();
    assert!(rep.counterexamples() > 0);
    assert!(matches!(search_not_embedded(&full, 2).unwrap(), Certificate::NotEmbedded { .. }));
}

#[test]
fn principal_level_certificates() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (d, n) in [(1i64, 13i128), (2, 17), (3, 25), (7, 29), (13, 169)] {
        let mut done = 0;
        while done < 4 {
            let f = common::rand_form(&mut rng, d, 6);
            let disc = f.discriminant();
            if 4 * disc > n {
                continue;
            }
            done += 1;
            let s = SurfaceSpec::raw(f, Group::Principal(n));
            let cert = certify_embedded(&s).unwrap();
            assert!(matches!(cert, Certificate::EmbeddedCongruence { .. }));
            assert!(replay_certificate(&cert, &s).unwrap());
            let rep = verify_certificate_by_sampling(&cert, &s, 200, 2, done).unwrap();
            assert_eq!(rep.counterexamples(), 0, "d={d} n={n} {f}");
            assert_eq!(search_not_embedded(&s, 2).unwrap(), Certificate::Inconclusive { height: 2 });
        }
        let big = SurfaceSpec::raw(HermitianForm::diagonal(d, 1, -(n / 4 + 1)), Group::Principal(n));
        assert!(matches!(certify_embedded(&big).unwrap(), Certificate::Inconclusive { .. }));
    }
}

#[test]
fn witnesses_replay() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut found = 0;
    for d in [1i64, 2, 3, 5, 6, 7] {
        for _ in 0..40 {
            let s = SurfaceSpec::raw(common::rand_form(&mut rng, d, 8), Group::Bianchi);
            let c = search_not_embedded(&s, 2).unwrap();
            assert!(replay_certificate(&c, &s).unwrap());
            if let Certificate::NotEmbedded { witness, trace } = &c {
                found += 1;
                assert_eq!(forms::direct_trace(&s.form, witness).unwrap(), *trace);
                assert!(forms::circles_intersect(&s.form.transform(witness).unwrap(), &s.form).unwrap());
            }
            if s.form.a != 0 {
                let o = orientability_search(&s, 2).unwrap();
                assert!(replay_certificate(&o, &s).unwrap());
            }
        }
    }
    assert!(found > 50);
}

#[test]
fn t_k_reverses_plain_circles() {
    for d in [1i64, 2, 3, 5, 6, 7, 13] {
        for k in 1..=4i128 {
            let disc = d as i128 * k * k + 2;
            let s = SurfaceSpec::raw(HermitianForm::diagonal(d, 1, -disc), Group::Bianchi);
            assert!(forms::stabilizer_test(&t_k(d, k), &s.form, forms::Orientation::Reversing).unwrap());
            assert_eq!(orientability_search(&s, 4).unwrap(), Certificate::OrientationReversing { witness: t_k(d, k) });
        }
    }
}

#[test]
fn stabilizers_fix_the_form() {
    for (d, disc) in [(1i64, 3i128), (1, 6), (2, 5), (3, 2), (7, 3)] {
        let s = SurfaceSpec::raw(HermitianForm::diagonal(d, 1, -disc), Group::Bianchi);
        let st = stabilizer_sample(&s, 3).unwrap();
        assert!(st.len() > 1);
        for g in &st {
            assert_eq!(s.form.transform(g).unwrap(), s.form);
        }
    }
}

#[test]
fn equivalence_finds_stream_images() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for d in [1i64, 2, 3, 7] {
        let gs = level_stream(d, Level::Full, 1);
        for _ in 0..20 {
            let a = common::rand_form(&mut rng, d, 8);
            let g = gs[rng.random_range(0..gs.len())];
            let b = a.transform_int(&g);
            let w = equivalence_search(&a, &b, 1).unwrap().expect("image is equivalent");
            let t = a.transform(&w).unwrap();
            assert!(t == b || t == b.neg());
        }
    }
}

#[test]
fn distinct_count_brackets() {
    for d in [13i64, 30, 34, 58, 85] {
        let fam = thereis_family(d, usize::MAX).unwrap();
        let c = distinct_count(&fam, 1).unwrap();
        assert!(c.certified_lower <= c.merged && c.merged <= c.raw, "d={d} {c:?}");
        assert_eq!(c.raw, fam.len());
    }
}

#[test]
fn class_count_bound_in_euclidean_fields() {
    for d in [1i64, 2, 3, 7, 11] {
        for disc in 1..=30i128 {
            let r = count_form_classes(d, disc, 5, 2).unwrap();
            assert!(r.forms_enumerated > 0);
            assert!(r.classes_found as u64 <= r.bound, "d={d} D={disc} {r:?}");
        }
    }
}

#[test]
fn reduction_keeps_the_class() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for d in [1i64, 2, 3, 5, 13] {
        for _ in 0..100 {
            let f = common::rand_form(&mut rng, d, 30);
            let r = reduce_form(&f);
            assert_eq!(r.discriminant(), f.discriminant());
            assert!(r.a.abs() <= f.a.abs());
        }
    }
}

#[test]
fn picard_discriminants_and_mod_p_images() {
    for disc in 1..=50i128 {
        for v in [PicardVariant::Plain, PicardVariant::One, PicardVariant::Two, PicardVariant::Three] {
            if let Ok(s) = picard_canonical(disc, v) {
                assert_eq!(s.discriminant(), disc);
                assert!(s.form.is_primitive() || v == PicardVariant::Plain);
            }
        }
    }
    let c3 = picard_canonical(3, PicardVariant::Plain).unwrap();
    let sample = stabilizer_sample(&c3, 4).unwrap();
    let q = |x: i128, y: i128| QuadInt::new(2 * x, 2 * y, 1).unwrap();
    assert_eq!(mod_p_image_order(&sample, 5, q(2, 1)).unwrap(), 60);
    assert_eq!(mod_p_image_order(&sample, 5, q(1, 2)).unwrap(), 60);
    assert_eq!(mod_p_image_order(&sample, 13, q(3, 2)).unwrap(), 1092);
    assert_eq!(mod_p_image_order(&[Mat2::translation(q(1, 0))], 5, q(2, 1)).unwrap(), 5);
}

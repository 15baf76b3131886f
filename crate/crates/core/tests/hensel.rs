mod common;

use common::*;
use num_bigint::BigInt;
use num_rational::BigRational;
use padic_core::epoch::Engine;
use padic_core::exact::{ExactField, ExactMPolySystem, ExactPoly, ExactTuple};
use padic_core::hensel::*;
use padic_core::newton::Q;
use padic_core::{Error, ExtVal};

/// Integer coefficients of `Π (x - r_i)`, low degree first.
fn poly_from_roots(rs: &[i64]) -> Vec<i64> {
    let mut cs = vec![1i64];
    for &r in rs {
        let mut next = vec![0i64; cs.len() + 1];
        for (i, c) in cs.iter().enumerate() {
            next[i + 1] += c;
            next[i] -= r * c;
        }
        cs = next;
    }
    cs
}

/// Agreement with `x` to the approximation's own absolute precision, which must be at least `min`.
fn agrees(a: &padic_core::approx::ApproxElt, x: &BigRational, min: i64) -> bool {
    let k = a.abs_prec().floor_i64().unwrap_or(i64::MAX).min(1 << 20);
    k >= min && agrees_mod(a, x, k)
}

fn assert_root_sound(f: &ExactPoly, r: &padic_core::exact::ExactElt, epochs: std::ops::RangeInclusive<u32>) {
    let fr = f.evaluate(r).unwrap();
    for n in epochs {
        assert!(fr.approx(n).unwrap().is_weakly_zero(), "f(root) not weakly zero at epoch {n}");
    }
}

/// Product of the factors, coefficientwise, as approximations at epoch `n`.
fn assert_product(f: &ExactPoly, factors: &[ExactPoly], n: u32) {
    let mut prod = ExactPoly::from_ints(f.field(), &[1]).unwrap();
    for g in factors {
        prod = prod.mul(g).unwrap();
    }
    let fm = f.monic().unwrap();
    let diff = fm.sub(&prod).unwrap().approx(n).unwrap();
    for c in diff.coeffs() {
        assert!(c.is_weakly_zero(), "product differs from f at epoch {n}");
    }
}

#[test]
fn test_root_x2_minus_1_from_1() {
    let ctx = Engine::new();
    let q3 = ExactField::prime(&ctx, 3).unwrap();
    let f = ExactPoly::from_ints(&q3, &[-1, 0, 1]).unwrap();
    let lift = is_hensel_liftable_root(&f, &q3.one().unwrap()).unwrap().expect("liftable");
    assert!(lift.certificate.holds());
    assert_root_sound(&f, &lift.root, 1..=8);
    assert!(agrees_mod(&lift.root.approx(6).unwrap(), &q(1), 64));
}

#[test]
fn test_root_x2_minus_1_from_0_is_false() {
    let ctx = Engine::new();
    let q3 = ExactField::prime(&ctx, 3).unwrap();
    let f = ExactPoly::from_ints(&q3, &[-1, 0, 1]).unwrap();
    assert!(is_hensel_liftable_root(&f, &q3.zero().unwrap()).unwrap().is_none());
}

#[test]
fn test_double_root_is_undecidable() {
    for cap in [6, 8] {
        let ctx = Engine::with_epoch_cap(cap);
        let q2 = ExactField::prime(&ctx, 2).unwrap();
        let f = ExactPoly::from_ints(&q2, &[1, -2, 1]).unwrap();
        let e = is_hensel_liftable_root(&f, &q2.one().unwrap()).err().expect("undecidable");
        assert!(matches!(e, Error::Precision(_)), "{e:?}");
        let e = roots(&f).err().expect("no fabricated double root");
        assert!(matches!(e, Error::Precision(_) | Error::Depth(_)), "{e:?}");
    }
}

#[test]
fn test_generalized_root_away_from_unit_derivative() {
    // f = (x - 1)(x - 1 - 3^4): f'(1) has valuation 4, the classical lemma does not apply
    let ctx = Engine::new();
    let q3 = ExactField::prime(&ctx, 3).unwrap();
    let f = ExactPoly::from_ints(&q3, &poly_from_roots(&[1, 82])).unwrap();
    let a = q3.from_int(1 + 3 * 3 * 3 * 3 * 3 * 3).unwrap();
    let lift = is_hensel_liftable_root(&f, &a).unwrap().expect("liftable");
    // reduction check: the rescaled g has v(g0) > 0 and v(g1) = 0
    assert!(lift.rescaled[0] > ExtVal::zero());
    assert_eq!(lift.rescaled[1], ExtVal::zero());
    assert_root_sound(&f, &lift.root, 1..=8);
    assert!(agrees_mod(&lift.root.approx(7).unwrap(), &q(1), 100));
    assert!(lift.log.borrow().quadratic(&lift.offset()));
}

#[test]
fn test_roots_x2_minus_1_q3() {
    let ctx = Engine::new();
    let q3 = ExactField::prime(&ctx, 3).unwrap();
    let f = ExactPoly::from_ints(&q3, &[-1, 0, 1]).unwrap();
    let rs = roots(&f).unwrap();
    assert_eq!(rs.len(), 2);
    for r in &rs {
        assert_root_sound(&f, r, 1..=8);
    }
    let a: Vec<_> = rs.iter().map(|r| r.approx(6).unwrap()).collect();
    assert!(a.iter().any(|x| agrees_mod(x, &q(1), 64)));
    assert!(a.iter().any(|x| agrees_mod(x, &q(-1), 64)));
}

#[test]
fn test_no_roots_for_odd_slope() {
    let ctx = Engine::new();
    let q2 = ExactField::prime(&ctx, 2).unwrap();
    let f = ExactPoly::from_ints(&q2, &[2048, 0, 1]).unwrap();
    assert!(roots(&f).unwrap().is_empty());
}

#[test]
fn test_roots_with_zero_root() {
    let ctx = Engine::new();
    let q5 = ExactField::prime(&ctx, 5).unwrap();
    let f = ExactPoly::from_ints(&q5, &[0, -1, 1]).unwrap();
    let rs = roots(&f).unwrap();
    assert_eq!(rs.len(), 2);
    let a: Vec<_> = rs.iter().map(|r| r.approx(5).unwrap()).collect();
    assert!(a.iter().any(|x| x.is_exact_zero()));
    assert!(a.iter().any(|x| agrees_mod(x, &q(1), 32)));
    let sq = ExactPoly::from_ints(&q5, &[0, 0, 1]).unwrap();
    assert!(matches!(roots(&sq), Err(Error::Unsupported(_))));
}

#[test]
fn test_roots_of_close_cluster() {
    // roots 1, 1 + 2^3, 1 + 2^3 + 2^5, -3: repeated residues force recursion
    let ctx = Engine::new();
    let q2 = ExactField::prime(&ctx, 2).unwrap();
    let rts = [1, 9, 41, -3];
    let f = ExactPoly::from_ints(&q2, &poly_from_roots(&rts)).unwrap();
    let rs = roots(&f).unwrap();
    assert_eq!(rs.len(), rts.len());
    for r in &rs {
        assert_root_sound(&f, r, 1..=8);
    }
    for t in rts {
        assert!(rs.iter().any(|r| agrees(&r.approx(8).unwrap(), &q(t), 100)), "missing root {t}");
    }
    let e = roots_with_depth(&f, 0).err().expect("budget too small");
    assert!(matches!(e, Error::Depth(_)));
}

#[test]
fn test_system_linear_exact_root() {
    let ctx = Engine::new();
    let q5 = ExactField::prime(&ctx, 5).unwrap();
    let sys = ExactMPolySystem::from_rationals(
        &q5,
        2,
        &[
            vec![(vec![1, 0], q(1)), (vec![0, 1], q(1)), (vec![0, 0], q(-3))],
            vec![(vec![1, 0], q(1)), (vec![0, 1], q(-1)), (vec![0, 0], q(-1))],
        ],
    )
    .unwrap();
    let a = ExactTuple::from_elts(&q5, &[q5.from_int(2).unwrap(), q5.from_int(1).unwrap()]).unwrap();
    let lift = is_hensel_liftable_system(&sys, &a, None, None).unwrap().expect("liftable");
    let x = lift.root.approx(6).unwrap();
    assert!(agrees_mod(&x[0], &q(2), 64) && agrees_mod(&x[1], &q(1), 64));
}

fn parabolas(field: &ExactField) -> ExactMPolySystem {
    ExactMPolySystem::from_rationals(
        field,
        2,
        &[
            vec![(vec![2, 0], q(1)), (vec![0, 1], q(-1))],
            vec![(vec![0, 2], q(1)), (vec![1, 0], q(-1))],
        ],
    )
    .unwrap()
}

#[test]
fn test_system_quadratic_convergence_q7() {
    let ctx = Engine::new();
    let q7 = ExactField::prime(&ctx, 7).unwrap();
    let sys = parabolas(&q7);
    let a = ExactTuple::from_elts(&q7, &[q7.from_int(1 + 343).unwrap(), q7.from_int(1 - 343).unwrap()]).unwrap();
    let lift = is_hensel_liftable_system(&sys, &a, None, None).unwrap().expect("liftable");
    assert_eq!(lift.certificate.t, ExtVal::zero());
    for n in 1..=7 {
        let x = lift.root.approx(n).unwrap();
        let k = x[0].abs_prec().floor_i64().unwrap();
        assert!(agrees_mod(&x[0], &q(1), k) && agrees_mod(&x[1], &q(1), k));
    }
    assert!(lift.log.borrow().quadratic(&lift.offset()));
}

#[test]
fn test_system_with_jacobian_valuation_one() {
    let ctx = Engine::new();
    let q3 = ExactField::prime(&ctx, 3).unwrap();
    let sys = parabolas(&q3);
    let a = ExactTuple::from_elts(&q3, &[q3.one().unwrap(), q3.one().unwrap()]).unwrap();
    let lift = is_hensel_liftable_system(&sys, &a, None, None).unwrap().expect("liftable");
    assert_eq!(lift.certificate.t, ExtVal::int(1));
    // f(1, 1) = 0, so the criterion holds with any visible lower bound s > 2
    assert!(lift.certificate.s > ExtVal::int(2));
    let x = lift.root.approx(5).unwrap();
    assert!(agrees_mod(&x[0], &q(1), 30));
}

#[test]
fn test_system_rescaled() {
    // x = 5 u with u = 1: f = (x - 5, y - 1), mu = (-1, 0) makes the root integral after scaling
    let ctx = Engine::new();
    let q5 = ExactField::prime(&ctx, 5).unwrap();
    let sys = ExactMPolySystem::from_rationals(
        &q5,
        2,
        &[
            vec![(vec![1, 0], q(1)), (vec![0, 1], q(1)), (vec![0, 0], q(-6))],
            vec![(vec![1, 0], q(1)), (vec![0, 0], q(-5))],
        ],
    )
    .unwrap();
    let a = ExactTuple::from_elts(&q5, &[q5.from_int(5).unwrap(), q5.one().unwrap()]).unwrap();
    let mu = [q(-1), q(0)];
    let nu = [q(0), q(-1)];
    let lift = is_hensel_liftable_system(&sys, &a, Some(&mu), Some(&nu)).unwrap().expect("liftable");
    assert!(matches!(lift.certificate.scaling, Scaling::Diagonal { .. }));
    let x = lift.root.approx(5).unwrap();
    assert!(agrees_mod(&x[0], &q(5), 30) && agrees_mod(&x[1], &q(1), 30));
}

#[test]
fn test_factor_pair_exact() {
    let ctx = Engine::new();
    let q2 = ExactField::prime(&ctx, 2).unwrap();
    let f = ExactPoly::from_ints(&q2, &[2, -3, 1]).unwrap();
    let g = ExactPoly::from_ints(&q2, &[-1, 1]).unwrap();
    let lift = is_hensel_liftable_factor(&f, &g, None).unwrap().expect("liftable");
    assert_eq!(lift.certificate.t, ExtVal::zero());
    for n in 1..=8 {
        assert_product(&f, &[lift.g.clone(), lift.h.clone()], n);
    }
    let h = lift.h.approx(6).unwrap();
    assert!(agrees_mod(&h.coeff(0), &q(-2), 64));
}

#[test]
fn test_factor_pair_fails_for_x() {
    let ctx = Engine::new();
    let q2 = ExactField::prime(&ctx, 2).unwrap();
    let f = ExactPoly::from_ints(&q2, &[-2, 0, 1]).unwrap();
    let g = ExactPoly::from_ints(&q2, &[0, 1]).unwrap();
    assert!(is_hensel_liftable_factor(&f, &g, None).unwrap().is_none());
}

#[test]
fn test_factor_boundary_fixture() {
    // f = (x - 1)(x - 1 - 2^9) + 2^18, g = x - 1: f - g h = 2^18 and Res(g, h) = -2^9
    let oracle_s = val_int(BigInt::from(1i64 << 18), 2);
    let oracle_t = val_int(BigInt::from(1i64 << 9), 2);
    assert_eq!((oracle_s, oracle_t), (18, 9));
    let ctx = Engine::new();
    let q2 = ExactField::prime(&ctx, 2).unwrap();
    let mut cs = poly_from_roots(&[1, 1 + 512]);
    cs[0] += 1 << 18;
    let f = ExactPoly::from_ints(&q2, &cs).unwrap();
    let g = ExactPoly::from_ints(&q2, &[-1, 1]).unwrap();
    assert!(is_hensel_liftable_factor(&f, &g, None).unwrap().is_none());
    // without the perturbation the residual vanishes and the pair lifts
    let f0 = ExactPoly::from_ints(&q2, &poly_from_roots(&[1, 513])).unwrap();
    let lift = is_hensel_liftable_factor(&f0, &g, None).unwrap().expect("liftable");
    assert_eq!(lift.certificate.t, ExtVal::int(oracle_t));
}

#[test]
fn test_newton_polygon_factorization_distinct_slopes() {
    let ctx = Engine::new();
    let q2 = ExactField::prime(&ctx, 2).unwrap();
    let f = ExactPoly::from_ints(&q2, &[2, -3, 1]).unwrap();
    let fs = newton_polygon_factorization(&f).unwrap();
    assert_eq!(fs.iter().map(ExactPoly::degree).collect::<Vec<_>>(), vec![1, 1]);
    for n in 1..=8 {
        assert_product(&f, &fs, n);
    }
    // (x - 2)(x^2 + 32)(x - 3): slopes 0, -1 and -5/2
    let g = ExactPoly::from_ints(&q2, &[-2, 1]).unwrap();
    let h = ExactPoly::from_ints(&q2, &[32, 0, 1]).unwrap();
    let k = ExactPoly::from_ints(&q2, &[-3, 1]).unwrap();
    let f = g.mul(&h).unwrap().mul(&k).unwrap();
    let pieces = newton_pieces(&f).unwrap();
    let shapes: Vec<_> = pieces.iter().map(|p| (p.poly.degree(), p.kind.clone())).collect();
    let face = |h: i64, e: i64| PieceKind::Face { h: BigInt::from(h), e: BigInt::from(e) };
    assert_eq!(shapes, vec![(2, face(5, 2)), (1, face(1, 1)), (1, face(0, 1))]);
    let polys: Vec<_> = pieces.into_iter().map(|p| p.poly).collect();
    for n in 1..=8 {
        assert_product(&f, &polys, n);
    }
}

#[test]
fn test_single_face_is_kept() {
    let ctx = Engine::new();
    let q2 = ExactField::prime(&ctx, 2).unwrap();
    let f = ExactPoly::from_ints(&q2, &[2048, 0, 1]).unwrap();
    let fs = newton_polygon_factorization(&f).unwrap();
    assert_eq!(fs.len(), 1);
    assert_product(&f, &fs, 6);
}

#[test]
fn test_split_three_linear_q3() {
    let ctx = Engine::new();
    let q3 = ExactField::prime(&ctx, 3).unwrap();
    let f = ExactPoly::from_ints(&q3, &poly_from_roots(&[1, 2, 5])).unwrap();
    let s0 = split_factorization(&f, 0).unwrap();
    let mut degs: Vec<_> = s0.iter().map(|(p, t)| (p.degree(), t.separated)).collect();
    degs.sort();
    assert_eq!(degs, vec![(1, true), (2, false)]);
    let quad = s0.iter().find(|(p, _)| p.degree() == 2).unwrap();
    assert_eq!(quad.1.residual, vec![vec![1], vec![1]]);
    assert_eq!(quad.1.multiplicity, 2);
    let s1 = split_factorization(&f, 1).unwrap();
    assert_eq!(s1.len(), 3);
    assert!(s1.iter().all(|(p, t)| p.degree() == 1 && t.separated));
    let polys: Vec<_> = s1.iter().map(|(p, _)| p.clone()).collect();
    for n in 1..=7 {
        assert_product(&f, &polys, n);
    }
}

#[test]
fn test_split_eisenstein_and_two_adic_pair() {
    let ctx = Engine::new();
    let q2 = ExactField::prime(&ctx, 2).unwrap();
    let f = ExactPoly::from_ints(&q2, &[-2, 0, 1]).unwrap();
    let s = split_factorization(&f, DEFAULT_DEPTH).unwrap();
    assert_eq!(s.len(), 1);
    assert_eq!(s[0].1.slope, Some(BigRational::new((-1).into(), 2.into())));

    let f = ExactPoly::from_ints(&q2, &[-1, 0, 1]).unwrap();
    let s0 = split_factorization(&f, 0).unwrap();
    assert_eq!(s0.len(), 1);
    assert!(!s0[0].1.separated);
    let s1 = split_factorization(&f, 1).unwrap();
    assert_eq!(s1.len(), 2);
    let polys: Vec<_> = s1.iter().map(|(p, _)| p.clone()).collect();
    for n in 1..=7 {
        assert_product(&f, &polys, n);
    }
    let consts: Vec<_> = polys.iter().map(|p| p.approx(6).unwrap().coeff(0)).collect();
    assert!(consts.iter().any(|c| agrees(c, &q(1), 20)));
    assert!(consts.iter().any(|c| agrees(c, &q(-1), 20)));
}

#[test]
fn test_certificate_invariants() {
    let c = LiftCertificate { kind: LiftKind::FactorPair, s: ExtVal::int(5), t: ExtVal::int(2), scaling: Scaling::None, epoch: 1 };
    assert!(c.holds());
    let c = LiftCertificate { s: ExtVal::int(4), ..c };
    assert!(!c.holds());
    let u = LiftCertificate { kind: LiftKind::UniRoot, s: ExtVal::int(1), t: ExtVal::zero(), scaling: Scaling::Variable(Q::from_integer(1.into())), epoch: 1 };
    assert!(u.holds());
}

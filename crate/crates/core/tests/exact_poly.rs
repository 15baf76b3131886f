mod common;

use common::*;
use num_rational::BigRational;
use padic_core::approx::FieldKind;
use padic_core::epoch::Engine;
use padic_core::exact::{ExactField, ExactPoly};
use padic_core::newton::{lower_hull, Q};
use padic_core::ExtVal;

#[test]
fn test_evaluate_defining_relation() {
    let ctx = Engine::new();
    let q2 = ExactField::prime(&ctx, 2).unwrap();
    let f = ExactPoly::from_ints(&q2, &[-2, 0, 1]).unwrap();
    let l = ExactField::extension(&f, FieldKind::Eisen).unwrap();
    let v = f.evaluate(&l.generator().unwrap()).unwrap();
    for n in 1..=7 {
        assert!(v.approx(n).unwrap().is_weakly_zero());
    }
}

#[test]
fn test_derivative_against_rational_oracle() {
    let ctx = Engine::new();
    let q3 = ExactField::prime(&ctx, 3).unwrap();
    let f = ExactPoly::from_ints(&q3, &[0, 2, 0, 1]).unwrap();
    let d = f.derivative().unwrap();
    assert_eq!(d.degree(), 2);
    let a = d.approx(5).unwrap();
    // d/dx (x^3 + 2x) = 3x^2 + 2
    let oracle = [q(2), q(0), q(3)];
    for (i, c) in oracle.iter().enumerate() {
        assert!(agrees_mod(&a.coeff(i), c, 20));
    }
}

#[test]
fn test_divrem_exact_quotient() {
    let ctx = Engine::new();
    let q5 = ExactField::prime(&ctx, 5).unwrap();
    let f = ExactPoly::from_ints(&q5, &[-1, 0, 1]).unwrap();
    let g = ExactPoly::from_ints(&q5, &[-1, 1]).unwrap();
    let (qt, r) = f.divrem(&g).unwrap();
    assert_eq!((qt.degree(), r.degree()), (1, 0));
    let qa = qt.approx(4).unwrap();
    assert!(agrees_mod(&qa.coeff(0), &q(1), 16));
    assert!(agrees_mod(&qa.coeff(1), &q(1), 16));
    assert!(r.approx(4).unwrap().is_weakly_zero());
}

#[test]
fn test_resultant_examples() {
    let ctx = Engine::new();
    let q2 = ExactField::prime(&ctx, 2).unwrap();
    let f = ExactPoly::from_ints(&q2, &[-1, 1]).unwrap();
    let g = ExactPoly::from_ints(&q2, &[-3, 1]).unwrap();
    // Res(x - a, x - b) = b - a up to sign; here |3 - 1| = 2
    assert_eq!(f.resultant(&g).unwrap().valuation().unwrap(), val_q(&q(2), 2));
    let h = ExactPoly::from_ints(&q2, &[0, 1]).unwrap();
    let k = ExactPoly::from_ints(&q2, &[-32, 1]).unwrap();
    assert_eq!(h.resultant(&k).unwrap().valuation().unwrap(), val_q(&q(32), 2));
    let sq = ExactPoly::from_ints(&q2, &[2, -3, 1]).unwrap();
    let r = sq.resultant(&sq).unwrap();
    for k in [1, 5, 20, 60] {
        assert!(r.valuation_ge(&ExtVal::int(k)).unwrap());
    }
}

#[test]
fn test_newton_polygon_two_monomials() {
    let ctx = Engine::new();
    let q2 = ExactField::prime(&ctx, 2).unwrap();
    let f = ExactPoly::from_ints(&q2, &[2048, 0, 1]).unwrap();
    let np = f.newton_polygon(None).unwrap();
    assert_eq!(np.faces.len(), 1);
    assert_eq!(np.faces[0].slope(), qf(-11, 2));
    assert_eq!(np.to_json().to_string(), "[[0,11],[2,0]]");
    let g = ExactPoly::from_ints(&q2, &[-1, 1]).unwrap();
    let np = g.newton_polygon(None).unwrap();
    assert_eq!((np.faces[0].slope(), np.faces[0].width()), (q(0), q(1)));
}

#[test]
fn test_newton_polygon_matches_brute_hull() {
    let ctx = Engine::new();
    for p in [2u64, 3, 5] {
        let k = ExactField::prime(&ctx, p).unwrap();
        let cs: Vec<BigRational> = vec![q(p as i64 * p as i64), q(1 + p as i64), q(0), qf(1, p as i64), q(7), q(1)];
        let f = ExactPoly::from_rationals(&k, &cs).unwrap();
        let np = f.newton_polygon(None).unwrap();
        let pts: Vec<(Q, Q)> = cs
            .iter()
            .enumerate()
            .filter_map(|(i, c)| match val_q(c, p) {
                ExtVal::Fin(v) => Some((q(i as i64), v)),
                _ => None,
            })
            .collect();
        assert_eq!(np.vertices(), lower_hull(&pts));
    }
}

#[test]
fn test_residual_polynomials() {
    let ctx = Engine::new();
    let q2 = ExactField::prime(&ctx, 2).unwrap();
    let f = ExactPoly::from_ints(&q2, &[2, -3, 1]).unwrap();
    let np = f.newton_polygon(None).unwrap();
    let face = np.faces.iter().find(|fc| fc.slope() == q(0)).unwrap();
    assert_eq!((face.left.clone(), face.right.clone()), ((q(1), q(0)), (q(2), q(0))));
    let (_, r) = f.residual_polynomial(face).unwrap();
    // -3 and 1 reduce to 1 and 1
    assert_eq!(r, vec![vec![1], vec![1]]);

    let q3 = ExactField::prime(&ctx, 3).unwrap();
    let g = ExactPoly::from_ints(&q3, &[-1, 0, 1]).unwrap();
    let np = g.newton_polygon(None).unwrap();
    assert_eq!(np.faces.len(), 1);
    let (k, r) = g.residual_polynomial(&np.faces[0]).unwrap();
    assert_eq!(r, vec![vec![2], vec![0], vec![1]]);
    let roots: Vec<u64> = k.roots(&r).unwrap().iter().map(|(c, _)| c[0]).collect();
    assert_eq!(roots, vec![1, 2]);

    // a face of width e with slope -h/e gives a degree-1 residual
    let h = ExactPoly::from_ints(&q2, &[8, 0, 1]).unwrap();
    let np = h.newton_polygon(None).unwrap();
    let (_, r) = h.residual_polynomial(&np.faces[0]).unwrap();
    assert_eq!(r.len(), 2);
}

#[test]
fn test_shift_over_extension() {
    let ctx = Engine::new();
    let q2 = ExactField::prime(&ctx, 2).unwrap();
    let f = ExactPoly::from_ints(&q2, &[-2, 0, 1]).unwrap();
    let l = ExactField::extension(&f, FieldKind::Eisen).unwrap();
    let s = f.shift(&l.generator().unwrap()).unwrap();
    let a = s.approx(5).unwrap();
    assert!(a.coeff(0).is_weakly_zero());
    assert_eq!(a.coeff(1).weak_val(), ExtVal::frac(3, 2));
}

#[test]
fn test_full_degree_rewrites_lead() {
    let ctx = Engine::new();
    let q2 = ExactField::prime(&ctx, 2).unwrap();
    let f = ExactPoly::from_ints(&q2, &[1, 64]).unwrap();
    let first = f.ensure_full_degree().unwrap();
    assert_eq!(first, 3);
    for n in 1..=3 {
        assert!(!f.approx(n).unwrap().coeff(1).is_weakly_zero());
    }
}

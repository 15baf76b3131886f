mod common;

use common::*;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;

use padic_core::epoch::Engine;
use padic_core::exact::{ExactField, ExactPoly};
use padic_core::hensel::*;
use padic_core::ExtVal;

type RPoly = Vec<BigRational>;

fn rmul(a: &RPoly, b: &RPoly) -> RPoly {
    let mut out = vec![BigRational::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn rsub(a: &RPoly, b: &RPoly) -> RPoly {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| a.get(i).cloned().unwrap_or_default() - b.get(i).cloned().unwrap_or_default())
        .collect()
}

fn rval(a: &RPoly, p: u64) -> ExtVal {
    a.iter().map(|c| val_q(c, p)).fold(ExtVal::PosInf, |x, y| x.meet(&y))
}

fn from_roots(rs: &[BigRational]) -> RPoly {
    rs.iter().fold(vec![BigRational::one()], |acc, r| rmul(&acc, &vec![-r.clone(), BigRational::one()]))
}

/// Distinct nonzero integers `p^v u`; `v` and the residue of `u` are random.
fn split_roots(p: u64) -> impl Strategy<Value = Vec<BigRational>> {
    prop::collection::vec((0u32..3, 1i64..40, any::<bool>()), 1..5).prop_filter_map("distinct roots", move |spec| {
        let mut rs: Vec<BigRational> = Vec::new();
        for (v, u, neg) in spec {
            if u % p as i64 == 0 {
                return None;
            }
            let x = BigInt::from(p).pow(v) * BigInt::from(if neg { -u } else { u });
            let r = BigRational::from_integer(x);
            if rs.contains(&r) {
                return None;
            }
            rs.push(r);
        }
        Some(rs)
    })
}

fn prime() -> impl Strategy<Value = u64> {
    prop::sample::select(vec![2u64, 3, 5])
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 100, ..ProptestConfig::default() })]

    #[test]
    fn prop_roots_complete_on_split_fixtures((p, rs) in prime().prop_flat_map(|p| (Just(p), split_roots(p)))) {
        let ctx = Engine::new();
        let k = ExactField::prime(&ctx, p).unwrap();
        let f = ExactPoly::from_rationals(&k, &from_roots(&rs)).unwrap();
        let lifts = root_lifts(&f, DEFAULT_DEPTH).unwrap();
        prop_assert_eq!(lifts.len(), rs.len());
        let approxs: Vec<_> = lifts.iter().map(|(r, _)| r.approx(9).unwrap()).collect();
        for a in &approxs {
            prop_assert!(a.abs_prec() >= ExtVal::int(256));
        }
        for r in &rs {
            prop_assert!(approxs.iter().any(|a| agrees_mod(a, r, 256)), "root {} not found", r);
        }
        for (root, lift) in &lifts {
            let fr = f.evaluate(root).unwrap();
            for n in 1..=10 {
                prop_assert!(fr.approx(n).unwrap().is_weakly_zero());
            }
            if let Some(l) = lift {
                prop_assert!(l.certificate.holds());
                prop_assert!(l.log.borrow().quadratic(&l.offset()));
            }
        }
    }

    #[test]
    fn prop_factorization_product_identity((p, rs) in prime().prop_flat_map(|p| (Just(p), split_roots(p)))) {
        let ctx = Engine::new();
        let k = ExactField::prime(&ctx, p).unwrap();
        let f = ExactPoly::from_rationals(&k, &from_roots(&rs)).unwrap();
        let fs = newton_polygon_factorization(&f).unwrap();
        prop_assert_eq!(fs.iter().map(|g| g.degree()).sum::<isize>(), f.degree());
        let prod = fs.iter().skip(1).fold(fs[0].clone(), |acc, g| acc.mul(g).unwrap());
        let diff = f.sub(&prod).unwrap();
        for n in 1..=8 {
            prop_assert!(diff.approx(n).unwrap().is_weakly_zero());
        }
    }

    #[test]
    fn prop_div_is_optimal(
        p in prime(),
        f in prop::collection::vec(-60i64..60, 3..7),
        g in prop::collection::vec(-60i64..60, 1..3),
        perturb in prop::collection::vec((prop::collection::vec(-9i64..9, 1..5), 0u32..4), 200),
    ) {
        let rq = |cs: &[i64]| -> RPoly {
            let mut v: RPoly = cs.iter().map(|&c| q(c)).collect();
            v.push(BigRational::one());
            v
        };
        let (fr, gr) = (rq(&f), rq(&g));
        let ctx = Engine::new();
        let k = ExactField::prime(&ctx, p).unwrap();
        let fe = ExactPoly::from_rationals(&k, &fr).unwrap();
        let ge = ExactPoly::from_rationals(&k, &gr).unwrap();
        let (quot, _) = fe.divrem(&ge).unwrap();
        let qa = quot.approx(6).unwrap();
        let h: RPoly = qa.coeffs().iter().map(|c| c.pdig().unwrap().value(p)).collect();
        let best = rval(&rsub(&fr, &rmul(&gr, &h)), p);
        for (d, shift) in perturb {
            let scale = BigRational::from_integer(BigInt::from(p).pow(shift));
            let dr: RPoly = d.iter().map(|&c| q(c) * &scale).collect();
            let h2 = rsub(&h, &dr.iter().map(|c| -c.clone()).collect::<RPoly>());
            let v = rval(&rsub(&fr, &rmul(&gr, &h2)), p);
            prop_assert!(v <= best, "perturbation improved the remainder: {} > {}", v, best);
        }
    }
}

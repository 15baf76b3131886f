mod common;

use common::dag::*;
use common::*;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use proptest::prelude::*;

use padic_core::approx::FieldKind;
use padic_core::epoch::Engine;
use padic_core::exact::{ExactField, ExactPoly};
use padic_core::val::Rel;
use padic_core::ExtVal;

fn nonzero(p: u64) -> impl Strategy<Value = BigRational> {
    (1i64..100_000, 1i64..10_000, -6i32..7, any::<bool>()).prop_map(move |(a, b, s, neg)| {
        let x = leaf_value(p, a, b, s);
        if neg { -x } else { x }
    })
}

/// Residue of a `p`-integral rational: numerator times inverse denominator mod `p`.
fn residue_oracle(x: &BigRational, p: u64) -> u64 {
    let pb = BigInt::from(p);
    let n = ((x.numer() % &pb) + &pb) % &pb;
    let d = ((x.denom() % &pb) + &pb) % &pb;
    let inv = d.modpow(&(&pb - 2u32), &pb);
    u64::try_from((n * inv) % &pb).unwrap()
}

fn check_valuations(p: u64) {
    let ctx = Engine::new();
    let k = ExactField::prime(&ctx, p).unwrap();
    let mut runner = proptest::test_runner::TestRunner::new(ProptestConfig { cases: 1000, ..ProptestConfig::default() });
    runner
        .run(&nonzero(p), |x| {
            let e = k.from_rational(&x).unwrap();
            prop_assert_eq!(e.valuation().unwrap(), val_q(&x, p));
            Ok(())
        })
        .unwrap();
}

#[test]
fn prop_valuation_oracle_p2() {
    check_valuations(2);
}

#[test]
fn prop_valuation_oracle_p3() {
    check_valuations(3);
}

#[test]
fn prop_valuation_oracle_p5() {
    check_valuations(5);
}

#[test]
fn prop_valuation_oracle_p7() {
    check_valuations(7);
}

fn prime() -> impl Strategy<Value = u64> {
    prop::sample::select(vec![2u64, 3, 5, 7])
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 150, ..ProptestConfig::default() })]

    #[test]
    fn prop_representation_independence((p, x, y) in prime().prop_flat_map(|p| (Just(p), nonzero(p), nonzero(p))), t in -4i64..8) {
        let ctx = Engine::new();
        let k = ExactField::prime(&ctx, p).unwrap();
        let a = k.from_rational(&x).unwrap();
        let b = k.from_rational(&y).unwrap();
        let via = a.add(&b).unwrap().sub(&b).unwrap();
        prop_assert_eq!(via.valuation().unwrap(), a.valuation().unwrap());
        let v = ExtVal::int(t);
        for rel in [Rel::Eq, Rel::Ne, Rel::Le, Rel::Lt, Rel::Ge, Rel::Gt] {
            prop_assert_eq!(via.valuation_cmp(&v, rel).unwrap(), a.valuation_cmp(&v, rel).unwrap());
        }
        if val_q(&x, p) >= ExtVal::int(0) {
            let r = via.residue().unwrap();
            prop_assert_eq!(&r, &a.residue().unwrap());
            prop_assert_eq!(r.first().copied().unwrap_or(0), residue_oracle(&x, p));
        }
    }

    #[test]
    fn prop_field_laws((p, ops) in dag(), n in 1u32..=8) {
        let ctx = Engine::new();
        let k = ExactField::prime(&ctx, p).unwrap();
        let vals = oracle(p, &ops);
        let xs = build_epoch(&k, p, &ops);
        let (a, b, c) = (&xs[0], &xs[1], xs.last().unwrap());
        let l = a.mul(&b.add(c).unwrap()).unwrap();
        let r = a.mul(b).unwrap().add(&a.mul(c).unwrap()).unwrap();
        prop_assert!(l.approx(n).unwrap().is_weakly_equal(&r.approx(n).unwrap()).unwrap());
        let l = a.add(b).unwrap().add(c).unwrap();
        let r = a.add(&b.add(c).unwrap()).unwrap();
        prop_assert!(l.approx(n).unwrap().is_weakly_equal(&r.approx(n).unwrap()).unwrap());
        prop_assert!(sound(&r.approx(n).unwrap(), &(&vals[0] + &vals[1] + vals.last().unwrap())));
        if !vals.last().unwrap().is_zero() {
            let one = c.mul(&c.inverse().unwrap()).unwrap();
            let w = one.approx(n.max(3)).unwrap();
            prop_assert!(sound(&w, &q(1)));
            prop_assert_eq!(one.valuation().unwrap(), ExtVal::int(0));
        }
    }

    #[test]
    fn prop_eisenstein_generator_valuation(p in prime(), e in 2usize..6, (a, b) in (0i64..10, 0i64..6), mids in prop::collection::vec(-20i64..20, 4)) {
        let unit = a * p as i64 + 1 + b % (p as i64 - 1);
        let ctx = Engine::new();
        let k = ExactField::prime(&ctx, p).unwrap();
        let pi = p as i64;
        let mut cs = vec![pi * unit];
        cs.extend(mids.iter().take(e - 1).map(|m| pi * m));
        cs.push(1);
        let f = ExactPoly::from_ints(&k, &cs).unwrap();
        let l = ExactField::extension(&f, FieldKind::Eisen).unwrap();
        let g = l.generator().unwrap();
        prop_assert_eq!(g.valuation().unwrap(), ExtVal::frac(1, e as i64));
        prop_assert_eq!(g.pow(e as i64).unwrap().valuation().unwrap(), ExtVal::int(1));
        prop_assert_eq!(l.ramification_index(), e as u64);
    }
}

mod common;

use common::*;
use num_bigint::BigInt;
use num_rational::BigRational;
use padic_core::getters::*;
use padic_core::{Error, ExtVal};

fn ints(v: &[u64]) -> Vec<u64> {
    v.to_vec()
}

/// a = 5·3^10, b = 7 over Q_3, so val(a) = 10 and val(b) = 0.
fn fig3_inputs(u: &Gctx) -> (LazyElt, LazyElt, BigRational, BigRational) {
    let qa = q(5) * qpow(&q(3), 10);
    let qb = q(7);
    (u.constant(&qa), u.constant(&qb), qa, qb)
}

#[test]
fn test_fig3_single_update_per_leaf() {
    for variant in [Variant::Children, Variant::Restart] {
        let u = Universe::new(3).unwrap();
        u.set_variant(variant);
        let (a, b, qa, qb) = fig3_inputs(&u);
        let terms = [a.pow(3).unwrap(), a.pow(2).unwrap().mul(&b).unwrap(), a.mul(&b.pow(2).unwrap()).unwrap(), b.pow(3).unwrap()];
        let c = u.sum(&terms).unwrap();
        c.increase_abs_prec(100).unwrap();
        assert_eq!(a.update_targets(), vec![100], "{variant:?}");
        assert_eq!(b.update_targets(), vec![100], "{variant:?}");
        let exact = qpow(&qa, 3) + qpow(&qa, 2) * &qb + &qa * qpow(&qb, 2) + qpow(&qb, 3);
        assert!(c.abs_prec() >= ExtVal::int(100));
        assert!(pdig_agrees(&c.pdig(), 3, &exact, 100));
    }
}

#[test]
fn test_fig3_merged_targets() {
    let u = Universe::new(3).unwrap();
    let (a, b, _, _) = fig3_inputs(&u);
    let a3 = a.pow(3).unwrap();
    let a2 = a.pow(2).unwrap();
    let a2b = a2.mul(&b).unwrap();
    let b2 = b.pow(2).unwrap();
    let ab2 = a.mul(&b2).unwrap();
    let b3 = b.pow(3).unwrap();
    let c = u.sum(&[a3.clone(), a2b.clone(), ab2.clone(), b3.clone()]).unwrap();
    let mut arr = DepArray::new(true);
    u.add_dependencies(&mut arr, None, vec![Dep::new(&c, 100)]);
    let t: std::collections::HashMap<EltId, i64> = arr.targets().into_iter().collect();
    for (x, n) in [(&a, 100), (&b, 100), (&a3, 100), (&a2, 100), (&a2b, 100), (&b2, 90), (&ab2, 100), (&b3, 100), (&c, 100)] {
        assert_eq!(t[&x.id()], n, "{}", x.label());
    }
    // one entry per element, the two sums in between included
    assert_eq!(t.len(), 11);
    assert_eq!(arr.children(b2.id()), vec![b.id()]);
    assert_eq!(arr.children(a2b.id()), vec![b.id(), a2.id()]);
}

#[test]
fn test_unmerged_refinement_updates_three_times() {
    // refining the summands one after the other instead
    let u = Universe::new(3).unwrap();
    let (a, b, _, _) = fig3_inputs(&u);
    let terms = [a.pow(3).unwrap(), a.pow(2).unwrap().mul(&b).unwrap(), a.mul(&b.pow(2).unwrap()).unwrap()];
    for t in &terms {
        t.increase_abs_prec(100).unwrap();
    }
    assert_eq!(a.update_targets(), vec![80, 90, 100]);
}

#[test]
fn test_null_getter() {
    let u = Universe::new(2).unwrap();
    u.evaluate(null()).unwrap();
    assert_eq!(u.counters(), Counters::default());
}

#[test]
fn test_evaluate_meets_dependency() {
    let u = Universe::new(2).unwrap();
    let x = u.from_int(3);
    let g = Getter::new((), move |_, _| vec![Dep { elt: 0, abs: 10 }], |_, u: &Universe| Ok(Some(u.approximation_of(0))));
    let d = u.evaluate(g).unwrap();
    assert!(d.abs().unwrap() >= 10);
    assert!(x.abs_prec() >= ExtVal::int(10));
}

#[test]
fn test_combinators() {
    let u = Universe::new(5).unwrap();
    let x = u.from_int(7);
    let g = compose(vec![u.approximation_lazy(x.id(), 4)], |mut v| v.pop().unwrap());
    let d = u.evaluate(g).unwrap();
    assert_eq!(d, u.evaluate(u.approximation_lazy(x.id(), 4)).unwrap());
    let vs = u.evaluate(flatten(vec![Getter::pure(1), Getter::pure(2)])).unwrap();
    assert_eq!(vs, vec![1, 2]);
    // the inner getter needs y to the precision the outer one produced
    let y = u.from_int(10);
    let yid = y.id();
    let g = compose_getter(vec![Getter::pure(6i64)], move |v| {
        let k = v[0];
        compose(vec![needs(yid, k)], move |_| k + 1)
    });
    assert_eq!(u.evaluate(g).unwrap(), 7);
    assert!(y.abs_prec() >= ExtVal::int(6));
    let g = compose_procedure(vec![Getter::pure(26i64)], move |_, v| y.increase_abs_prec(v[0]));
    u.evaluate(g).unwrap();
    assert_eq!(u.approximation_of(yid).abs(), Some(26));
}

/// Depends on `id` to precision `n`; yields `()` once that holds.
fn needs(id: EltId, n: i64) -> Getter<()> {
    Getter::new((), move |_, _| vec![Dep { elt: id, abs: n }], move |_, u: &Universe| {
        Ok((u.approximation_of(id).abs().is_none_or(|a| a >= n)).then_some(()))
    })
}

#[test]
fn test_lazy_increase_on_precise_element_is_null() {
    let u = Universe::new(2).unwrap();
    let x = u.from_int(5);
    x.increase_abs_prec(20).unwrap();
    let before = u.counters();
    let g = u.increase_abs_prec_lazy(x.id(), &ExtVal::int(12)).unwrap();
    u.evaluate(g).unwrap();
    assert_eq!(u.counters(), before);
    assert_eq!(x.update_count(), 1);
}

#[test]
fn test_strategy_exp_guard() {
    let reg = Registry::default();
    let s = Strategy::List(vec![Strategy::Int(1), Strategy::exp(2)]);
    assert_eq!(s.realize(&reg, 0, 5).unwrap(), ints(&[1, 2, 4, 16, 256]));
}

#[test]
fn test_strategy_limit() {
    let reg = Registry::default();
    let s = Strategy::List(vec![Strategy::Limit(100), Strategy::Int(1), Strategy::exp(2)]);
    assert_eq!(s.realize(&reg, 0, 50).unwrap(), ints(&[1, 2, 4, 16, 100]));
}

#[test]
fn test_strategy_single_integer() {
    let reg = Registry::default();
    assert_eq!(Strategy::Int(7).realize(&reg, 0, 50).unwrap(), ints(&[7]));
}

#[test]
fn test_strategy_function_and_errors() {
    let mut reg = Registry::default();
    let f = Strategy::func(|n| (n < 10).then_some(n + 3));
    assert_eq!(f.realize(&reg, 0, 50).unwrap(), ints(&[3, 6, 9, 12]));
    let bad = Strategy::List(vec![Strategy::Int(3), Strategy::Int(2)]);
    assert!(matches!(bad.realize(&reg, 0, 50), Err(Error::Invalid(_))));
    assert!(Strategy::named("nope").realize(&reg, 0, 5).is_err());
    reg.set("loop", Strategy::named("loop"));
    assert!(Strategy::named("loop").realize(&reg, 0, 5).is_err());
    reg.set("three", Strategy::List(vec![Strategy::Int(1), Strategy::Int(2), Strategy::Int(3)]));
    assert_eq!(Strategy::named("three").realize(&reg, 0, 5).unwrap(), ints(&[1, 2, 3]));
}

#[test]
fn test_named_defaults() {
    let reg = Registry::default();
    let d = Strategy::named("default").realize(&reg, 11, 1000).unwrap();
    assert_eq!(d[0], 1);
    assert_eq!(*d.last().unwrap(), 100);
    assert!(d.windows(2).all(|w| w[0] < w[1]));
    // the same seed gives the same draws
    assert_eq!(Strategy::named("default").realize(&reg, 11, 1000).unwrap(), d);
    let unlimited = Strategy::named("unlimitedDefault").realize(&reg, 3, 6).unwrap();
    assert_eq!(unlimited.len(), 6);
    // each draw lies in (previous output, next power-of-power]
    for (w, top) in unlimited.windows(2).zip([2u64, 4, 16, 256, 65536]) {
        assert!(w[0] < w[1] && w[1] <= top);
    }
}

#[test]
fn test_valuation_of_power_of_two() {
    let u = Universe::new(2).unwrap();
    let x = u.constant(&qpow(&q(2), 5));
    assert_eq!(x.baseline_valuation(), ExtVal::int(5));
    let s = Strategy::List([1, 2, 4, 8].map(Strategy::Int).to_vec());
    assert_eq!(x.valuation_with_strategy(&s).unwrap(), ExtVal::int(5));
    assert_eq!(x.update_count(), 1);
    // asking again costs nothing
    let before = u.counters();
    assert_eq!(x.valuation_with_strategy(&s).unwrap(), ExtVal::int(5));
    assert_eq!(u.counters(), before);
}

#[test]
fn test_valuation_of_zero_is_precision_error() {
    let u = Universe::new(2).unwrap();
    let z = u.from_int(0);
    assert!(matches!(z.valuation(), Err(Error::Precision(_))));
    assert_eq!(z.update_count(), 0);
    // a zero built by cancellation needs refining before giving up
    let x = u.constant(&qf(1, 3));
    let d = x.sub(&x).unwrap();
    assert!(matches!(d.valuation(), Err(Error::Precision(_))));
    assert_eq!(d.abs_prec(), ExtVal::int(100));
    let before = u.counters();
    assert!(d.valuation().is_err());
    assert_eq!(u.counters(), before);
}

#[test]
fn test_valuation_default_strategy() {
    let u = Universe::new(3).unwrap();
    let a = u.constant(&(q(1) + qpow(&q(3), 7)));
    let b = u.from_int(1);
    let d = a.sub(&b).unwrap();
    assert_eq!(d.baseline_valuation(), ExtVal::int(0));
    assert_eq!(d.valuation().unwrap(), ExtVal::int(7));
}

/// An element equal to x + y whose update first asks for x only and learns
/// it needs y after trying.
fn late_sum(u: &Gctx, x: &LazyElt, y: &LazyElt) -> LazyElt {
    let pp = u.powers().clone();
    let (xi, yi) = (x.id(), y.id());
    u.add_element(padic_core::approx::PDig::weak(-5), "late", move |z| {
        std::rc::Rc::new(move |_u: &Universe, n| {
            let pp = pp.clone();
            Getter::new(
                false,
                move |asked_y: &mut bool, _| if *asked_y { vec![Dep { elt: yi, abs: n }] } else { vec![Dep { elt: xi, abs: n }] },
                move |asked_y: &mut bool, u: &Universe| {
                    let (a, b) = (u.approximation_of(xi), u.approximation_of(yi));
                    if b.abs().is_some_and(|k| k < n) {
                        *asked_y = true;
                        return Ok(None);
                    }
                    u.apply_update(z, a.with_abs(n, &pp)?.add(&b.with_abs(n, &pp)?, &pp), n)?;
                    Ok(Some(()))
                },
            )
        })
    })
}

#[test]
fn test_failed_get_value_adds_dependencies() {
    let mut finals = Vec::new();
    for variant in [Variant::Restart, Variant::Children] {
        let u = Universe::new(5).unwrap();
        u.set_variant(variant);
        let x = u.from_int(3);
        let y = u.constant(&qf(1, 2));
        let s = late_sum(&u, &x, &y);
        let t = s.mul(&x).unwrap();
        t.increase_abs_prec(12).unwrap();
        assert!(pdig_agrees(&t.pdig(), 5, &(q(3) * qf(7, 2)), 12));
        assert_eq!(y.update_targets(), vec![12]);
        finals.push(t.pdig());
    }
    assert_eq!(finals[0], finals[1]);
}

#[test]
fn test_iteration_cap() {
    let u = Universe::new(2).unwrap();
    u.set_iteration_cap(50);
    let never: Getter<()> = Getter::new((), |_, _| Vec::new(), |_, _| Ok(None));
    assert!(matches!(u.evaluate(never), Err(Error::IterationCap(_))));
}

#[test]
fn test_mixed_universes_rejected() {
    let u = Universe::new(2).unwrap();
    let v = Universe::new(2).unwrap();
    assert!(matches!(u.from_int(1).add(&v.from_int(1)), Err(Error::FieldMismatch(_))));
    assert!(Universe::new(4).is_err());
}

#[test]
fn test_exact_zero_products() {
    let u = Universe::new(7).unwrap();
    let z = u.from_int(0);
    let x = u.constant(&BigRational::new(BigInt::from(3), BigInt::from(49)));
    let p = x.mul(&z).unwrap();
    assert_eq!(p.abs_prec(), ExtVal::PosInf);
    let s = p.add(&x).unwrap();
    s.increase_abs_prec(9).unwrap();
    assert!(pdig_agrees(&s.pdig(), 7, &BigRational::new(BigInt::from(3), BigInt::from(49)), 9));
    assert_eq!(x.pow(2).unwrap().valuation().unwrap(), ExtVal::int(-4));
}

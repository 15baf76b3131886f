//! Exact-rational oracles shared by the integration tests.
#![allow(dead_code)]

pub mod dag;
pub mod towers;
pub mod vals;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use padic_core::approx::{ApproxElt, PDig};
use padic_core::ExtVal;

pub fn q(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

pub fn qf(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// `p`-adic valuation of a nonzero integer by repeated division.
pub fn val_int(mut n: BigInt, p: u64) -> i64 {
    assert!(!n.is_zero());
    let p = BigInt::from(p);
    let mut v = 0;
    loop {
        let (q, r) = n.div_rem(&p);
        if !r.is_zero() {
            return v;
        }
        n = q;
        v += 1;
    }
}

/// `p`-adic valuation of a rational (`PosInf` for zero).
pub fn val_q(x: &BigRational, p: u64) -> ExtVal {
    if x.is_zero() {
        return ExtVal::PosInf;
    }
    ExtVal::int(val_int(x.numer().clone(), p) - val_int(x.denom().clone(), p))
}

/// Whether the prime-field approximation `a` agrees with `x` modulo `p^k`.
pub fn agrees_mod(a: &ApproxElt, x: &BigRational, k: i64) -> bool {
    let p = a.field().p();
    pdig_agrees(a.pdig().expect("prime field element"), p, x, k)
}

/// Whether the prime-level digit `d` agrees with `x` modulo `p^k`.
pub fn pdig_agrees(d: &PDig, p: u64, x: &BigRational, k: i64) -> bool {
    let diff = d.value(p) - x;
    match val_q(&diff, p) {
        ExtVal::PosInf => true,
        ExtVal::Fin(v) => v >= q(k),
        ExtVal::NegInf => false,
    }
}

/// `x^k` for rationals.
pub fn qpow(x: &BigRational, k: u32) -> BigRational {
    let mut acc = BigRational::one();
    for _ in 0..k {
        acc *= x;
    }
    acc
}

pub fn is_neg(x: &BigRational) -> bool {
    x.is_negative()
}

/// Whether `a` agrees with `x` up to its own absolute precision (capped at `2^20`).
pub fn sound(a: &ApproxElt, x: &BigRational) -> bool {
    let k = match a.abs_prec() {
        ExtVal::Fin(v) => v.floor().to_integer().try_into().unwrap_or(i64::MAX),
        _ => i64::MAX,
    };
    agrees_mod(a, x, k.min(1 << 20))
}

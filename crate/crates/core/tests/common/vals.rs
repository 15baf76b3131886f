//! Generators for extended valuations and aggregates.

use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;

use padic_core::val::{AggVal, ValOp};
use padic_core::ExtVal;

pub fn ext() -> impl Strategy<Value = ExtVal> {
    prop_oneof![
        1 => Just(ExtVal::NegInf),
        1 => Just(ExtVal::PosInf),
        8 => (-20i64..20, 1i64..4).prop_map(|(n, d)| ExtVal::Fin(BigRational::new(BigInt::from(n), BigInt::from(d)))),
    ]
}

pub fn uni() -> impl Strategy<Value = AggVal> {
    (prop::collection::vec((0usize..12, ext()), 0..6), ext()).prop_map(|(es, d)| AggVal::univariate(es, d))
}

pub fn multi() -> impl Strategy<Value = AggVal> {
    (prop::collection::vec((prop::collection::vec(0usize..4, 2), ext()), 0..6), ext())
        .prop_map(|(es, d)| AggVal::multivariate(2, es, d).unwrap())
}

pub fn op() -> impl Strategy<Value = ValOp> {
    prop::sample::select(vec![ValOp::Add, ValOp::Sub, ValOp::Meet, ValOp::Join, ValOp::Diff])
}


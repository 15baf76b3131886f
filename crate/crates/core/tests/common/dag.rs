//! Random expression DAGs over `Q_p` with a rational oracle and builders for both engines.

use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;

use padic_core::exact::{ExactElt, ExactField};
use padic_core::getters::{Gctx, LazyElt};

use super::qpow;

#[derive(Clone, Debug)]
pub enum Op {
    Leaf(i64, i64, i32),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Neg(usize),
    Pow(usize, u32),
}

/// Random expression DAGs; operands always refer to earlier nodes.
pub fn dag() -> impl Strategy<Value = (u64, Vec<Op>)> {
    dag_with(1..10)
}

/// As [`dag`] with the number of non-leaf operations drawn from `ops`, which bounds the depth.
pub fn dag_with(ops: std::ops::Range<usize>) -> impl Strategy<Value = (u64, Vec<Op>)> {
    let prime = prop::sample::select(vec![2u64, 3, 5, 7]);
    let leaves = prop::collection::vec((-40i64..40, 1i64..30, -3i32..4), 2..4);
    let ops = prop::collection::vec((0u8..6, any::<prop::sample::Index>(), any::<prop::sample::Index>(), 1u32..4), ops);
    (prime, leaves, ops).prop_map(|(p, leaves, ops)| {
        let mut out: Vec<Op> = leaves.into_iter().map(|(a, b, s)| Op::Leaf(a, b, s)).collect();
        for (kind, i, j, k) in ops {
            let n = out.len();
            let (i, j) = (i.index(n), j.index(n));
            out.push(match kind {
                0 | 1 => Op::Add(i, j),
                2 => Op::Sub(i, j),
                3 | 4 => Op::Mul(i, j),
                _ if k == 1 => Op::Neg(i),
                _ => Op::Pow(i, k),
            });
        }
        (p, out)
    })
}

pub fn leaf_value(p: u64, a: i64, b: i64, s: i32) -> BigRational {
    BigRational::new(BigInt::from(a), BigInt::from(b)) * BigRational::from_integer(BigInt::from(p)).pow(s)
}

pub fn oracle(p: u64, ops: &[Op]) -> Vec<BigRational> {
    let mut v: Vec<BigRational> = Vec::new();
    for op in ops {
        let x = match *op {
            Op::Leaf(a, b, s) => leaf_value(p, a, b, s),
            Op::Add(i, j) => &v[i] + &v[j],
            Op::Sub(i, j) => &v[i] - &v[j],
            Op::Mul(i, j) => &v[i] * &v[j],
            Op::Neg(i) => -&v[i],
            Op::Pow(i, k) => qpow(&v[i], k),
        };
        v.push(x);
    }
    v
}

pub fn build_getter(u: &Gctx, p: u64, ops: &[Op]) -> Vec<LazyElt> {
    let mut v: Vec<LazyElt> = Vec::new();
    for op in ops {
        let x = match *op {
            Op::Leaf(a, b, s) => u.constant(&leaf_value(p, a, b, s)),
            Op::Add(i, j) => v[i].add(&v[j]).unwrap(),
            Op::Sub(i, j) => v[i].sub(&v[j]).unwrap(),
            Op::Mul(i, j) => v[i].mul(&v[j]).unwrap(),
            Op::Neg(i) => v[i].neg(),
            Op::Pow(i, k) => v[i].pow(k).unwrap(),
        };
        v.push(x);
    }
    v
}

pub fn build_epoch(k: &ExactField, p: u64, ops: &[Op]) -> Vec<ExactElt> {
    let mut v: Vec<ExactElt> = Vec::new();
    for op in ops {
        let x = match *op {
            Op::Leaf(a, b, s) => k.from_rational(&leaf_value(p, a, b, s)).unwrap(),
            Op::Add(i, j) => v[i].add(&v[j]).unwrap(),
            Op::Sub(i, j) => v[i].sub(&v[j]).unwrap(),
            Op::Mul(i, j) => v[i].mul(&v[j]).unwrap(),
            Op::Neg(i) => v[i].neg().unwrap(),
            Op::Pow(i, k) => v[i].pow(k as i64).unwrap(),
        };
        v.push(x);
    }
    v
}


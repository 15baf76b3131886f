//! Synthetic ramification data: lower breaks of random towers.

use num_traits::Zero;
use proptest::prelude::*;

use padic_core::newton::Q;
use padic_core::ramify::TransitionFunction;

use super::{q, qf};

/// Synthetic lower breaks: positive increasing `v`, strictly decreasing orders in `(1, e]`
/// starting at `e`.
pub fn breaks() -> impl Strategy<Value = (u64, Vec<(Q, Q)>)> {
    (1u64..13).prop_flat_map(|e| {
        // the first break always has order e
        let orders = prop::collection::btree_set(2..e.max(3), 0..(e as usize)).prop_map(move |mut o| {
            o.retain(|&s| s < e);
            o.insert(e);
            o
        });
        let steps = prop::collection::vec((1i64..20, 1i64..6), e as usize);
        (Just(e), orders, steps).prop_map(|(e, orders, steps)| {
            if e == 1 {
                return (e, Vec::new());
            }
            let mut v = Q::zero();
            let bs = orders
                .into_iter()
                .rev()
                .zip(steps)
                .map(|(s, (n, d))| {
                    v += qf(n, d);
                    (v.clone(), q(s as i64))
                })
                .collect();
            (e, bs)
        })
    })
}

pub fn point() -> impl Strategy<Value = Q> {
    (0i64..200, 1i64..8).prop_map(|(n, d)| qf(n, d))
}

pub fn concave(phi: &TransitionFunction) -> bool {
    let mut last = None;
    for w in phi.vertices.windows(2) {
        let s = (&w[1].1 - &w[0].1) / (&w[1].0 - &w[0].0);
        if last.as_ref().is_some_and(|l| &s >= l) {
            return false;
        }
        last = Some(s);
    }
    last.is_none_or(|l| phi.final_slope < l)
}


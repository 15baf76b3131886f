//! Valuation-pivoted elimination over approximate fields.

use std::sync::Arc;

use num_bigint::BigInt;

use super::digits::PDig;
use super::field::{ApproxElt, ApproxField, Repr};
use crate::error::{Error, Result};
use crate::val::ExtVal;

/// A weakly zero element whose absolute precision is at most `k`.
pub fn weak_zero(field: &Arc<ApproxField>, k: &ExtVal) -> ApproxElt {
    ApproxElt::from_repr(field, weak_zero_repr(field, k))
}

fn weak_zero_repr(field: &ApproxField, k: &ExtVal) -> Repr {
    match field.base() {
        None => match k {
            ExtVal::PosInf => Repr::P(PDig::Zero),
            ExtVal::Fin(q) => Repr::P(PDig::weak(q.floor().to_integer().try_into().unwrap_or(i64::MIN / 4))),
            ExtVal::NegInf => Repr::P(PDig::weak(i64::MIN / 4)),
        },
        Some(b) => Repr::X(
            (0..field.degree())
                .map(|i| {
                    let ki = match k {
                        ExtVal::Fin(q) => ExtVal::Fin(q - field.gen_val() * BigInt::from(i)),
                        other => other.clone(),
                    };
                    weak_zero_repr(b, &ki)
                })
                .collect(),
        ),
    }
}

/// Index of the row in `rows` holding the non-weakly-zero entry of least weak valuation.
fn pick_pivot(m: &[Vec<ApproxElt>], rows: std::ops::Range<usize>, col: usize) -> Option<usize> {
    let mut best: Option<(usize, ExtVal)> = None;
    for i in rows {
        let e = &m[i][col];
        if e.is_weakly_zero() {
            continue;
        }
        let v = e.weak_val();
        if best.as_ref().is_none_or(|(_, bv)| v < *bv) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// Solves `mat * x = rhs` for a square system.
pub fn solve(mat: &[Vec<ApproxElt>], rhs: &[ApproxElt]) -> Result<Vec<ApproxElt>> {
    let n = mat.len();
    if rhs.len() != n || mat.iter().any(|r| r.len() != n) {
        return Err(Error::Invalid("solve needs a square system".into()));
    }
    let mut a: Vec<Vec<ApproxElt>> = mat
        .iter()
        .zip(rhs)
        .map(|(row, b)| {
            let mut r = row.clone();
            r.push(b.clone());
            r
        })
        .collect();
    for k in 0..n {
        let piv = pick_pivot(&a, k..n, k)
            .ok_or_else(|| Error::precision("matrix is singular to the working precision"))?;
        a.swap(k, piv);
        let pinv = a[k][k].inverse()?;
        for i in (k + 1)..n {
            if a[i][k].is_exact_zero() {
                continue;
            }
            let factor = a[i][k].mul(&pinv)?;
            for j in k..=n {
                let t = factor.mul(&a[k][j])?;
                a[i][j] = a[i][j].sub(&t)?;
            }
        }
    }
    let mut x: Vec<ApproxElt> = vec![ApproxElt::zero(a[0][0].field()); n];
    for k in (0..n).rev() {
        let mut acc = a[k][n].clone();
        for j in (k + 1)..n {
            acc = acc.sub(&a[k][j].mul(&x[j])?)?;
        }
        x[k] = acc.div(&a[k][k])?;
    }
    Ok(x)
}

/// Determinant by fraction-free (Bareiss) elimination with valuation pivoting.
///
/// When a column becomes weakly zero, the result is a weakly zero element whose
/// precision is the valuation bound implied by the remaining block.
pub fn det(mat: &[Vec<ApproxElt>], field: &Arc<ApproxField>) -> Result<ApproxElt> {
    let n = mat.len();
    if mat.iter().any(|r| r.len() != n) {
        return Err(Error::Invalid("determinant of a non-square matrix".into()));
    }
    if n == 0 {
        return Ok(ApproxElt::one(field));
    }
    let mut a = mat.to_vec();
    let mut negate = false;
    let mut prev = ApproxElt::one(field);
    for k in 0..n {
        let piv = match pick_pivot(&a, k..n, k) {
            Some(i) => i,
            None => return Ok(stuck_bound(&a, k, &prev, field)),
        };
        if piv != k {
            a.swap(k, piv);
            negate = !negate;
        }
        if k + 1 == n {
            break;
        }
        for i in (k + 1)..n {
            for j in (k + 1)..n {
                let t = a[k][k].mul(&a[i][j])?.sub(&a[i][k].mul(&a[k][j])?)?;
                a[i][j] = t.div(&prev)?;
            }
        }
        prev = a[k][k].clone();
    }
    let d = a[n - 1][n - 1].clone();
    Ok(if negate { d.neg() } else { d })
}

fn stuck_bound(a: &[Vec<ApproxElt>], k: usize, prev: &ApproxElt, field: &Arc<ApproxField>) -> ApproxElt {
    let n = a.len();
    let mut total = ExtVal::zero();
    for j in k..n {
        let col_min = (k..n).map(|i| a[i][j].weak_val()).min().unwrap();
        if col_min == ExtVal::PosInf {
            return ApproxElt::zero(field);
        }
        total = total.add(&col_min).unwrap_or(ExtVal::NegInf);
    }
    let pv = prev.weak_val();
    let extra = (n - k - 1) as i64;
    if extra > 0 {
        if let ExtVal::Fin(q) = &pv {
            total = total.sub(&ExtVal::Fin(q * BigInt::from(extra)));
        }
    }
    weak_zero(field, &total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn elt(f: &Arc<ApproxField>, n: i64) -> ApproxElt {
        ApproxElt::from_int(f, n)
    }

    #[test]
    fn test_det_matches_integer_det() {
        let q5 = ApproxField::prime(5, 20).unwrap();
        let m = vec![
            vec![elt(&q5, 2), elt(&q5, 3), elt(&q5, 1)],
            vec![elt(&q5, 5), elt(&q5, 7), elt(&q5, 11)],
            vec![elt(&q5, 13), elt(&q5, 4), elt(&q5, 6)],
        ];
        // 2(42-44) - 3(30-143) + 1(20-91) = -4 + 339 - 71 = 264
        let d = det(&m, &q5).unwrap();
        assert!(d.is_weakly_equal(&elt(&q5, 264)).unwrap());
    }

    #[test]
    fn test_det_needs_row_swap() {
        let q3 = ApproxField::prime(3, 10).unwrap();
        let m = vec![vec![elt(&q3, 0), elt(&q3, 1)], vec![elt(&q3, 1), elt(&q3, 0)]];
        assert!(det(&m, &q3).unwrap().is_weakly_equal(&elt(&q3, -1)).unwrap());
    }

    #[test]
    fn test_singular_det_is_weakly_zero() {
        let q2 = ApproxField::prime(2, 10).unwrap();
        let m = vec![vec![elt(&q2, 1), elt(&q2, 2)], vec![elt(&q2, 2), elt(&q2, 4)]];
        let d = det(&m, &q2).unwrap();
        assert!(d.is_weakly_zero());
    }

    #[test]
    fn test_solve_small_system() {
        let q7 = ApproxField::prime(7, 12).unwrap();
        let m = vec![vec![elt(&q7, 7), elt(&q7, 1)], vec![elt(&q7, 1), elt(&q7, 1)]];
        let rhs = vec![elt(&q7, 15), elt(&q7, 3)];
        let x = solve(&m, &rhs).unwrap();
        assert!(x[0].is_weakly_equal(&elt(&q7, 2)).unwrap());
        assert!(x[1].is_weakly_equal(&elt(&q7, 1)).unwrap());
    }
}

//! Univariate polynomials over an approximate field.

use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;

use super::field::{ApproxElt, ApproxField};
use super::linalg;
use crate::error::{Error, Result};

/// Coefficients are stored low degree first; trailing exact zeros are allowed.
#[derive(Clone)]
pub struct ApproxPoly {
    field: Arc<ApproxField>,
    coeffs: Vec<ApproxElt>,
}

impl fmt::Debug for ApproxPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.coeffs.iter().map(|c| c.render()).collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

impl ApproxPoly {
    pub fn from_coeffs(field: &Arc<ApproxField>, coeffs: Vec<ApproxElt>) -> ApproxPoly {
        ApproxPoly { field: field.clone(), coeffs }
    }

    pub fn from_ints(field: &Arc<ApproxField>, cs: &[i64]) -> ApproxPoly {
        Self::from_coeffs(field, cs.iter().map(|&c| ApproxElt::from_int(field, c)).collect())
    }

    pub fn from_rationals(field: &Arc<ApproxField>, cs: &[BigRational]) -> ApproxPoly {
        Self::from_coeffs(field, cs.iter().map(|c| ApproxElt::from_rational(field, c)).collect())
    }

    pub fn zero(field: &Arc<ApproxField>) -> ApproxPoly {
        Self::from_coeffs(field, Vec::new())
    }

    /// The monomial `x`.
    pub fn x(field: &Arc<ApproxField>) -> ApproxPoly {
        Self::from_coeffs(field, vec![ApproxElt::zero(field), ApproxElt::one(field)])
    }

    pub fn field(&self) -> &Arc<ApproxField> {
        &self.field
    }

    /// Number of stored coefficients.
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeffs(&self) -> &[ApproxElt] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> ApproxElt {
        self.coeffs.get(i).cloned().unwrap_or_else(|| ApproxElt::zero(&self.field))
    }

    pub(crate) fn coeff_ref(&self, i: usize) -> &ApproxElt {
        &self.coeffs[i]
    }

    /// Largest index whose coefficient is not exactly zero; `None` for the zero polynomial.
    pub fn weak_degree(&self) -> Option<usize> {
        self.coeffs.iter().rposition(|c| !c.is_exact_zero())
    }

    fn trimmed(mut self) -> ApproxPoly {
        while self.coeffs.last().is_some_and(|c| c.is_exact_zero()) {
            self.coeffs.pop();
        }
        self
    }

    fn check(&self, other: &ApproxPoly) -> Result<()> {
        if self.field.compatible(&other.field) {
            Ok(())
        } else {
            Err(Error::FieldMismatch("polynomials over different fields".into()))
        }
    }

    pub fn coerce_to(&self, field: &Arc<ApproxField>) -> Result<ApproxPoly> {
        let cs = self.coeffs.iter().map(|c| c.coerce_to(field)).collect::<Result<_>>()?;
        Ok(Self::from_coeffs(field, cs))
    }

    pub fn add(&self, other: &ApproxPoly) -> Result<ApproxPoly> {
        self.combine(other, false)
    }

    pub fn sub(&self, other: &ApproxPoly) -> Result<ApproxPoly> {
        self.combine(other, true)
    }

    fn combine(&self, other: &ApproxPoly, negate: bool) -> Result<ApproxPoly> {
        self.check(other)?;
        let n = self.len().max(other.len());
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let (a, b) = (self.coeff(i), other.coeff(i));
            out.push(if negate { a.sub(&b)? } else { a.add(&b)? });
        }
        Ok(Self::from_coeffs(&self.field, out))
    }

    pub fn neg(&self) -> ApproxPoly {
        Self::from_coeffs(&self.field, self.coeffs.iter().map(|c| c.neg()).collect())
    }

    pub fn scale(&self, c: &ApproxElt) -> Result<ApproxPoly> {
        let cs = self.coeffs.iter().map(|x| x.mul(c)).collect::<Result<_>>()?;
        Ok(Self::from_coeffs(&self.field, cs))
    }

    pub fn mul(&self, other: &ApproxPoly) -> Result<ApproxPoly> {
        self.check(other)?;
        if self.is_empty() || other.is_empty() {
            return Ok(Self::zero(&self.field));
        }
        let mut out = vec![ApproxElt::zero(&self.field); self.len() + other.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_exact_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                if b.is_exact_zero() {
                    continue;
                }
                out[i + j] = out[i + j].add(&a.mul(b)?)?;
            }
        }
        Ok(Self::from_coeffs(&self.field, out))
    }

    pub fn evaluate(&self, x: &ApproxElt) -> Result<ApproxElt> {
        let mut acc = ApproxElt::zero(x.field());
        for c in self.coeffs.iter().rev() {
            acc = acc.mul(x)?.add(&x.field().embed(c)?)?;
        }
        Ok(acc)
    }

    pub fn derivative(&self) -> Result<ApproxPoly> {
        let mut out = Vec::with_capacity(self.len().saturating_sub(1));
        for (i, c) in self.coeffs.iter().enumerate().skip(1) {
            out.push(c.mul(&ApproxElt::from_int(&self.field, i as i64))?);
        }
        Ok(Self::from_coeffs(&self.field, out))
    }

    /// Division with remainder by a divisor whose top stored coefficient is not weakly zero.
    pub fn divrem(&self, g: &ApproxPoly) -> Result<(ApproxPoly, ApproxPoly)> {
        self.check(g)?;
        let g = g.clone().trimmed();
        let n = g.len();
        if n == 0 {
            return Err(Error::WeaklyZeroDivision);
        }
        let lead = &g.coeffs[n - 1];
        if lead.is_weakly_zero() {
            return Err(Error::precision("divisor has a weakly zero leading coefficient"));
        }
        let lead_inv = lead.inverse()?;
        let mut rem = self.clone().trimmed().coeffs;
        if rem.len() < n {
            return Ok((Self::zero(&self.field), Self::from_coeffs(&self.field, rem)));
        }
        let mut quo = vec![ApproxElt::zero(&self.field); rem.len() - n + 1];
        for k in (0..quo.len()).rev() {
            let c = rem[k + n - 1].mul(&lead_inv)?;
            for (i, gi) in g.coeffs.iter().enumerate() {
                if gi.is_exact_zero() {
                    continue;
                }
                rem[k + i] = rem[k + i].sub(&c.mul(gi)?)?;
            }
            quo[k] = c;
        }
        rem.truncate(n - 1);
        Ok((Self::from_coeffs(&self.field, quo), Self::from_coeffs(&self.field, rem)))
    }

    /// `f(x + a)`.
    pub fn shift(&self, a: &ApproxElt) -> Result<ApproxPoly> {
        let field = a.field().clone();
        let lin = Self::from_coeffs(&field, vec![a.clone(), ApproxElt::one(&field)]);
        self.compose_poly(&lin)
    }

    /// `f(a + b x)`.
    pub fn compose_linear(&self, a: &ApproxElt, b: &ApproxElt) -> Result<ApproxPoly> {
        let field = a.field().clone();
        let lin = Self::from_coeffs(&field, vec![a.clone(), b.clone()]);
        self.compose_poly(&lin)
    }

    /// `f(h(x))` by Horner's rule; `h` may live over an extension of `f`'s field.
    pub fn compose_poly(&self, h: &ApproxPoly) -> Result<ApproxPoly> {
        let field = h.field().clone();
        let mut acc = Self::zero(&field);
        for c in self.coeffs.iter().rev() {
            acc = acc.mul(h)?;
            let c = field.embed(c)?;
            if acc.is_empty() {
                acc = Self::from_coeffs(&field, vec![c]);
            } else {
                acc.coeffs[0] = acc.coeffs[0].add(&c)?;
            }
        }
        Ok(acc)
    }

    /// Resultant as the determinant of the Sylvester matrix (rows of `self` first).
    pub fn resultant(&self, g: &ApproxPoly) -> Result<ApproxElt> {
        self.check(g)?;
        let f = self.clone().trimmed();
        let g = g.clone().trimmed();
        if f.is_empty() || g.is_empty() {
            return Ok(ApproxElt::zero(&self.field));
        }
        for p in [&f, &g] {
            if p.coeffs.last().unwrap().is_weakly_zero() {
                return Err(Error::precision("resultant needs full-degree polynomials"));
            }
        }
        let (m, n) = (f.len() - 1, g.len() - 1);
        let size = m + n;
        if size == 0 {
            return Ok(ApproxElt::one(&self.field));
        }
        let zero = ApproxElt::zero(&self.field);
        let mut mat = vec![vec![zero; size]; size];
        for r in 0..n {
            for (i, c) in f.coeffs.iter().rev().enumerate() {
                mat[r][r + i] = c.clone();
            }
        }
        for r in 0..m {
            for (i, c) in g.coeffs.iter().rev().enumerate() {
                mat[n + r][r + i] = c.clone();
            }
        }
        linalg::det(&mat, &self.field)
    }

    /// Every coefficient weakly zero.
    pub fn is_weakly_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_weakly_zero())
    }

    pub fn is_weakly_equal(&self, other: &ApproxPoly) -> Result<bool> {
        Ok(self.sub(other)?.is_weakly_zero())
    }

    /// Multiplies by `x^k`.
    pub fn shift_degree(&self, k: usize) -> ApproxPoly {
        let mut cs = vec![ApproxElt::zero(&self.field); k];
        cs.extend(self.coeffs.iter().cloned());
        Self::from_coeffs(&self.field, cs)
    }

    pub fn monomial(field: &Arc<ApproxField>, c: ApproxElt, k: usize) -> ApproxPoly {
        Self::from_coeffs(field, vec![c]).shift_degree(k)
    }

    pub fn int_coeff(field: &Arc<ApproxField>, n: i64) -> ApproxElt {
        ApproxElt::from_rational(field, &BigRational::from_integer(BigInt::from(n)))
    }
}

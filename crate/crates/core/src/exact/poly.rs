//! Exact univariate polynomials.

use std::fmt;
use std::rc::Rc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use super::field::{ExactElt, ExactField};
use crate::approx::{ApproxElt, ApproxPoly, FPoly, FiniteField};
use crate::epoch::{capacity, Approx, ApproxFn, EvalArgs, NodeId, NodeSpec};
use crate::error::{Error, Result};
use crate::newton::{overlap, Face, NewtonPolygon, PointData, Q};

/// A polynomial node with a declared degree (`-1` for the zero polynomial).
#[derive(Clone)]
pub struct ExactPoly {
    field: ExactField,
    node: NodeId,
    degree: isize,
}

impl fmt::Debug for ExactPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.field.ctx().latest(self.node) {
            Some(a) => write!(f, "{:?}", a.as_poly().map_err(|_| fmt::Error)?),
            None => write!(f, "<poly node {} of degree {}>", self.node, self.degree),
        }
    }
}

/// Pads or truncates to exactly `d + 1` coefficients.
fn fit(p: ApproxPoly, d: isize) -> ApproxPoly {
    let n = (d + 1).max(0) as usize;
    if p.len() == n {
        return p;
    }
    let cs = (0..n).map(|i| p.coeff(i)).collect();
    ApproxPoly::from_coeffs(p.field(), cs)
}

/// What a coefficient approximation says about its valuation, in units of `1/e`.
pub fn point_data(c: &ApproxElt, e: &Q) -> PointData {
    if c.is_exact_zero() {
        PointData::Absent
    } else if c.is_weakly_zero() {
        PointData::Weak(c.abs_prec().as_rational().expect("finite precision") * e)
    } else {
        PointData::Known(c.weak_val().as_rational().expect("finite valuation") * e)
    }
}

impl ExactPoly {
    /// A polynomial node computed by `func`; the approximation is fitted to `degree`.
    pub fn from_fn(field: &ExactField, deps: Vec<NodeId>, degree: isize, func: ApproxFn, label: &'static str) -> Result<ExactPoly> {
        let wrapped: ApproxFn = Rc::new(move |a: &EvalArgs| {
            let p = func(a)?;
            Ok(Approx::Poly(fit(p.as_poly()?.clone(), degree)))
        });
        let ring = field.ring_node();
        let node = field.ctx().add_node(NodeSpec::element(ring, deps, wrapped, label))?;
        Ok(ExactPoly { field: field.clone(), node, degree })
    }

    /// Rational coefficients, low degree first. Each is known to absolute precision
    /// `2^n` at epoch `n`; zeros are exact.
    pub fn from_rationals(field: &ExactField, cs: &[BigRational]) -> Result<ExactPoly> {
        let degree = cs.iter().rposition(|c| !c.is_zero()).map_or(-1, |i| i as isize);
        let cs: Vec<BigRational> = cs[..(degree + 1) as usize].to_vec();
        let func: ApproxFn = Rc::new(move |a: &EvalArgs| {
            let f = a.deps[0].as_field()?;
            let k = capacity(a.epoch) as i64;
            Ok(Approx::Poly(ApproxPoly::from_coeffs(f, cs.iter().map(|q| ApproxElt::from_rational_abs(f, q, k)).collect())))
        });
        Self::from_fn(field, vec![field.ring_node()], degree, func, "constant poly")
    }

    pub fn from_ints(field: &ExactField, cs: &[i64]) -> Result<ExactPoly> {
        let qs: Vec<BigRational> = cs.iter().map(|&c| BigRational::from_integer(BigInt::from(c))).collect();
        Self::from_rationals(field, &qs)
    }

    /// Coefficients given as exact elements; the declared degree is `cs.len() - 1`.
    pub fn from_elts(field: &ExactField, cs: &[ExactElt]) -> Result<ExactPoly> {
        let mut deps = vec![field.ring_node()];
        for c in cs {
            deps.push(field.coerce(c)?.node());
        }
        let func: ApproxFn = Rc::new(|a: &EvalArgs| {
            let f = a.deps[0].as_field()?;
            let cs = a.deps[1..].iter().map(|d| d.as_elt().cloned()).collect::<Result<Vec<_>>>()?;
            Ok(Approx::Poly(ApproxPoly::from_coeffs(f, cs)))
        });
        Self::from_fn(field, deps, cs.len() as isize - 1, func, "poly from coefficients")
    }

    /// The monomial `x`.
    pub fn x(field: &ExactField) -> Result<ExactPoly> {
        Self::from_ints(field, &[0, 1])
    }

    pub fn field(&self) -> &ExactField {
        &self.field
    }
    pub fn node(&self) -> NodeId {
        self.node
    }
    pub fn degree(&self) -> isize {
        self.degree
    }

    pub fn approx(&self, n: u32) -> Result<ApproxPoly> {
        Ok(self.field.ctx().epoch_approximation(self.node, n)?.as_poly()?.clone())
    }

    pub fn latest(&self) -> Option<ApproxPoly> {
        self.field.ctx().latest(self.node).and_then(|a| a.as_poly().ok().cloned())
    }

    pub fn coeff(&self, i: usize) -> Result<ExactElt> {
        let func: ApproxFn = Rc::new(move |a: &EvalArgs| Ok(Approx::Elt(a.deps[0].as_poly()?.coeff(i))));
        self.field.element(vec![self.node], func, "coefficient")
    }

    pub fn lead(&self) -> Result<ExactElt> {
        self.coeff(self.degree.max(0) as usize)
    }

    /// Moves the polynomial to an extension of its field.
    pub fn coerce_to(&self, field: &ExactField) -> Result<ExactPoly> {
        if self.field.ptr_eq(field) {
            return Ok(self.clone());
        }
        if !self.field.is_subfield_of(field) {
            return Err(Error::FieldMismatch("no coercion between these rings".into()));
        }
        let func: ApproxFn = Rc::new(|a: &EvalArgs| {
            let f = a.deps[0].as_field()?;
            let p = a.deps[1].as_poly()?;
            let cs = p.coeffs().iter().map(|c| f.embed(c)).collect::<Result<Vec<_>>>()?;
            Ok(Approx::Poly(ApproxPoly::from_coeffs(f, cs)))
        });
        Self::from_fn(field, vec![field.ring_node(), self.node], self.degree, func, "coerce poly")
    }

    fn common(&self, other: &ExactPoly) -> Result<(ExactPoly, ExactPoly)> {
        if self.field.ptr_eq(&other.field) {
            Ok((self.clone(), other.clone()))
        } else if self.field.is_subfield_of(&other.field) {
            Ok((self.coerce_to(&other.field)?, other.clone()))
        } else {
            Ok((self.clone(), other.coerce_to(&self.field)?))
        }
    }

    fn binop(
        &self,
        other: &ExactPoly,
        degree: isize,
        op: fn(&ApproxPoly, &ApproxPoly) -> Result<ApproxPoly>,
        label: &'static str,
    ) -> Result<ExactPoly> {
        let (a, b) = self.common(other)?;
        let func: ApproxFn = Rc::new(move |x: &EvalArgs| Ok(Approx::Poly(op(x.deps[0].as_poly()?, x.deps[1].as_poly()?)?)));
        Self::from_fn(&a.field, vec![a.node, b.node], degree, func, label)
    }

    pub fn add(&self, other: &ExactPoly) -> Result<ExactPoly> {
        self.binop(other, self.degree.max(other.degree), ApproxPoly::add, "poly add")
    }

    pub fn sub(&self, other: &ExactPoly) -> Result<ExactPoly> {
        self.binop(other, self.degree.max(other.degree), ApproxPoly::sub, "poly sub")
    }

    pub fn mul(&self, other: &ExactPoly) -> Result<ExactPoly> {
        let d = if self.degree < 0 || other.degree < 0 { -1 } else { self.degree + other.degree };
        self.binop(other, d, ApproxPoly::mul, "poly mul")
    }

    pub fn neg(&self) -> Result<ExactPoly> {
        let func: ApproxFn = Rc::new(|a: &EvalArgs| Ok(Approx::Poly(a.deps[0].as_poly()?.neg())));
        Self::from_fn(&self.field, vec![self.node], self.degree, func, "poly neg")
    }

    /// Multiplies every coefficient by `c`.
    pub fn scale(&self, c: &ExactElt) -> Result<ExactPoly> {
        let c = self.field.coerce(c)?;
        let func: ApproxFn =
            Rc::new(|a: &EvalArgs| Ok(Approx::Poly(a.deps[0].as_poly()?.scale(a.deps[1].as_elt()?)?)));
        Self::from_fn(&self.field, vec![self.node, c.node()], self.degree, func, "poly scale")
    }

    pub fn derivative(&self) -> Result<ExactPoly> {
        let func: ApproxFn = Rc::new(|a: &EvalArgs| Ok(Approx::Poly(a.deps[0].as_poly()?.derivative()?)));
        Self::from_fn(&self.field, vec![self.node], (self.degree - 1).max(-1), func, "derivative")
    }

    /// `f(x)` for `x` in this field or an extension of it.
    pub fn evaluate(&self, x: &ExactElt) -> Result<ExactElt> {
        if !self.field.is_subfield_of(x.field()) {
            return Err(Error::FieldMismatch("evaluation point outside the coefficient field's tower".into()));
        }
        let func: ApproxFn =
            Rc::new(|a: &EvalArgs| Ok(Approx::Elt(a.deps[0].as_poly()?.evaluate(a.deps[1].as_elt()?)?)));
        x.field().element(vec![self.node, x.node()], func, "evaluate")
    }

    /// Quotient and remainder; the divisor is first made full degree.
    pub fn divrem(&self, g: &ExactPoly) -> Result<(ExactPoly, ExactPoly)> {
        let (f, g) = self.common(g)?;
        if g.degree < 0 {
            return Err(Error::WeaklyZeroDivision);
        }
        g.ensure_full_degree()?;
        let qd = if f.degree < g.degree { -1 } else { f.degree - g.degree };
        let rd = (g.degree - 1).min(f.degree);
        let func: ApproxFn = Rc::new(|a: &EvalArgs| {
            let (q, r) = a.deps[0].as_poly()?.divrem(a.deps[1].as_poly()?)?;
            Ok(Approx::Tuple(vec![Approx::Poly(q), Approx::Poly(r)]))
        });
        let ring = f.field.ring_node();
        let both = f.field.ctx().add_node(NodeSpec::element(ring, vec![f.node, g.node], func, "divrem"))?;
        let pick = |i: usize, d: isize| -> Result<ExactPoly> {
            let func: ApproxFn = Rc::new(move |a: &EvalArgs| Ok(a.deps[0].as_tuple()?[i].clone()));
            Self::from_fn(&f.field, vec![both], d, func, "divrem part")
        };
        Ok((pick(0, qd)?, pick(1, rd)?))
    }

    /// `f(x + a)`, over the field of `a`.
    pub fn shift(&self, a: &ExactElt) -> Result<ExactPoly> {
        let f = self.coerce_to(a.field())?;
        let func: ApproxFn = Rc::new(|x: &EvalArgs| Ok(Approx::Poly(x.deps[0].as_poly()?.shift(x.deps[1].as_elt()?)?)));
        Self::from_fn(a.field(), vec![f.node, a.node()], self.degree, func, "shift")
    }

    /// `f(a + b x)`, over the common field of `a` and `b`.
    pub fn compose_linear(&self, a: &ExactElt, b: &ExactElt) -> Result<ExactPoly> {
        let field = if a.field().is_subfield_of(b.field()) { b.field().clone() } else { a.field().clone() };
        let (a, b) = (field.coerce(a)?, field.coerce(b)?);
        let f = self.coerce_to(&field)?;
        let func: ApproxFn = Rc::new(|x: &EvalArgs| {
            Ok(Approx::Poly(x.deps[0].as_poly()?.compose_linear(x.deps[1].as_elt()?, x.deps[2].as_elt()?)?))
        });
        Self::from_fn(&field, vec![f.node, a.node(), b.node()], self.degree, func, "compose linear")
    }

    /// Divides by the leading coefficient.
    pub fn monic(&self) -> Result<ExactPoly> {
        let lead = self.lead()?;
        let inv = lead.inverse()?;
        self.scale(&inv)
    }

    /// Rewrites every approximation so its declared leading coefficient is not weakly zero.
    pub fn ensure_full_degree(&self) -> Result<u32> {
        let d = self.degree;
        if d < 0 {
            return Err(Error::Invalid("the zero polynomial has no full-degree approximations".into()));
        }
        let pred = move |a: &Approx| a.as_poly().is_ok_and(|p| !p.coeff(d as usize).is_weakly_zero());
        self.field.ctx().ensure_approximations(self.node, &pred).map_err(|e| match e {
            Error::Precision(_) => Error::precision("leading coefficient indistinguishable from zero at max epoch"),
            other => other,
        })
    }

    pub fn resultant(&self, g: &ExactPoly) -> Result<ExactElt> {
        let (f, g) = self.common(g)?;
        f.ensure_full_degree()?;
        g.ensure_full_degree()?;
        let func: ApproxFn =
            Rc::new(|a: &EvalArgs| Ok(Approx::Elt(a.deps[0].as_poly()?.resultant(a.deps[1].as_poly()?)?)));
        f.field.element(vec![f.node, g.node], func, "resultant")
    }

    /// Valuation data of the coefficients at epoch `n`, in units of the coefficient
    /// field's uniformizer.
    pub fn points(&self, n: u32) -> Result<Vec<PointData>> {
        let a = self.approx(n)?;
        let e = Q::from_integer(BigInt::from(self.field.ramification_index()));
        Ok(a.coeffs().iter().map(|c| point_data(c, &e)).collect())
    }

    /// The Newton polygon on at least `support` (default: from the lowest
    /// coefficient that is not exactly zero up to the declared degree).
    pub fn newton_polygon(&self, support: Option<(usize, usize)>) -> Result<NewtonPolygon> {
        if self.degree < 0 {
            return Err(Error::Invalid("Newton polygon of the zero polynomial".into()));
        }
        let ctx = self.field.ctx();
        let limit = ctx.reachable_max(self.node);
        for n in 1..=limit {
            let pts = self.points(n)?;
            let (lo, hi) = match support {
                Some(s) => s,
                None => {
                    let lo = pts.iter().position(|p| *p != PointData::Absent).unwrap_or(0);
                    (lo, self.degree as usize)
                }
            };
            if lo == hi {
                return Ok(NewtonPolygon::default());
            }
            let np = overlap(&pts);
            let (ql, qh) = (Q::from_integer(lo.into()), Q::from_integer(hi.into()));
            if np.covers(&ql, &qh) {
                return Ok(np);
            }
        }
        Err(Error::precision(format!("Newton polygon not confirmed on the support by epoch {limit}")))
    }

    /// The residual polynomial of a confirmed face with integral endpoints.
    pub fn residual_polynomial(&self, face: &Face) -> Result<(FiniteField, FPoly)> {
        let ctx = self.field.ctx();
        let limit = ctx.reachable_max(self.node);
        let k = self.field.residue_field()?;
        for n in self.field.ready_epoch()..=limit {
            match residual_of(&self.approx(n)?, face) {
                Err(Error::Precision(_)) => continue,
                Ok(r) => return Ok((k, r)),
                Err(e) => return Err(e),
            }
        }
        Err(Error::precision("residual polynomial coefficients not determined at max epoch"))
    }
}

fn face_i64(q: &Q, what: &str) -> Result<i64> {
    if !q.is_integer() {
        return Err(Error::Invalid(format!("{what} is not integral")));
    }
    q.to_integer().to_i64().ok_or_else(|| Error::Invalid(format!("{what} too large")))
}

/// Residual polynomial of `face` read off one approximation (ordinates in units of
/// the field's uniformizer). A precision error means some residue is not determined yet.
pub fn residual_of(a: &ApproxPoly, face: &Face) -> Result<FPoly> {
    if !face.is_closed() {
        return Err(Error::Invalid("residual polynomial needs a face with confirmed endpoints".into()));
    }
    let i0 = face_i64(&face.left.0, "face endpoint")?;
    let v0 = face_i64(&face.left.1, "face endpoint")?;
    let (h, e) = face.slope_parts();
    let h = h.to_i64().ok_or_else(|| Error::Invalid("slope too large".into()))?;
    let e = e.to_i64().ok_or_else(|| Error::Invalid("slope too large".into()))?;
    let terms = face_i64(&face.width(), "face width")? / e;
    let fld = a.field().clone();
    let mut out: FPoly = Vec::with_capacity(terms as usize + 1);
    for j in 0..=terms {
        let c = a.coeff((i0 + j * e) as usize).mul_pi_pow(j * h - v0)?;
        out.push(fld.residue(&c)?);
    }
    Ok(out)
}

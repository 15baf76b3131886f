//! Ramification polygons and Hasse-Herbrand transition functions.
//!
//! Conventions: for an embedding `σ` of `L/K`, `val(σ) = min val_L(σx - x)` over the
//! integers of `L`, and `Γ_v = {σ : val(σ) >= v}` with no shift. Lower breaks are
//! listed as `(v, s)` with `s = |Γ_v|`. The transition function is
//! `φ(v) = (1/e) ∫_0^v |Γ_t| dt`; on `(v_{i-1}, v_i]` its slope is `s_i / e` and past
//! the last break it is `1/e`.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde_json::{json, Value};

use crate::approx::FieldKind;
use crate::error::{Error, Result};
use crate::exact::{ExactField, ExactPoly};
use crate::newton::{overlap, rational_json, Face, NewtonPolygon, PointData, Q};

fn qi(n: u64) -> Q {
    Q::from_integer(BigInt::from(n))
}

/// A concave increasing piecewise-linear bijection of `[0, ∞)`, kept as its kinks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransitionFunction {
    /// `(v, u)` points starting at `(0, 0)`; every later point is a genuine kink.
    pub vertices: Vec<(Q, Q)>,
    /// Slope after the last vertex.
    pub final_slope: Q,
}

impl TransitionFunction {
    pub fn identity() -> TransitionFunction {
        TransitionFunction { vertices: vec![(Q::zero(), Q::zero())], final_slope: Q::one() }
    }

    /// Builds from points through the origin, dropping points where the slope does not change.
    pub fn new(points: Vec<(Q, Q)>, final_slope: Q) -> Result<TransitionFunction> {
        if points.first() != Some(&(Q::zero(), Q::zero())) {
            return Err(Error::Invalid("transition function must start at (0, 0)".into()));
        }
        if !final_slope.is_positive() {
            return Err(Error::Invalid("transition function must be increasing".into()));
        }
        let mut slopes = Vec::with_capacity(points.len());
        for w in points.windows(2) {
            let dv = &w[1].0 - &w[0].0;
            let du = &w[1].1 - &w[0].1;
            if !dv.is_positive() || !du.is_positive() {
                return Err(Error::Invalid("transition vertices must increase in both coordinates".into()));
            }
            slopes.push(du / dv);
        }
        slopes.push(final_slope.clone());
        if slopes.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Invalid("transition function must be concave".into()));
        }
        let mut vertices = vec![points[0].clone()];
        for (i, p) in points.iter().enumerate().skip(1) {
            if slopes[i - 1] != slopes[i] {
                vertices.push(p.clone());
            }
        }
        Ok(TransitionFunction { vertices, final_slope })
    }

    /// Slope on the segment ending at vertex `i >= 1`.
    fn slope_before(&self, i: usize) -> Q {
        let (a, b) = (&self.vertices[i - 1], &self.vertices[i]);
        (&b.1 - &a.1) / (&b.0 - &a.0)
    }

    pub fn eval(&self, v: &Q) -> Result<Q> {
        if v.is_negative() {
            return Err(Error::Invalid("transition function evaluated at a negative argument".into()));
        }
        Ok(interpolate(&self.vertices, &self.final_slope, v, false))
    }

    pub fn inverse(&self, u: &Q) -> Result<Q> {
        if u.is_negative() {
            return Err(Error::Invalid("inverse transition evaluated at a negative argument".into()));
        }
        Ok(interpolate(&self.vertices, &self.final_slope, u, true))
    }

    /// `self ∘ inner`. The kinks are those of `inner` together with the preimages
    /// under `inner` of the kinks of `self`.
    pub fn compose(&self, inner: &TransitionFunction) -> Result<TransitionFunction> {
        let mut vs: Vec<Q> = inner.vertices.iter().map(|p| p.0.clone()).collect();
        for (v, _) in &self.vertices {
            vs.push(inner.inverse(v)?);
        }
        vs.sort();
        vs.dedup();
        let pts = vs.into_iter().map(|v| {
            let u = self.eval(&inner.eval(&v)?)?;
            Ok((v, u))
        });
        TransitionFunction::new(pts.collect::<Result<_>>()?, &self.final_slope * &inner.final_slope)
    }

    pub fn to_json(&self) -> Value {
        Value::Array(self.vertices.iter().map(|(v, u)| json!([rational_json(v), rational_json(u)])).collect())
    }
}

/// Piecewise-linear interpolation through `pts` (or of the inverse when `swap`).
fn interpolate(pts: &[(Q, Q)], tail: &Q, x: &Q, swap: bool) -> Q {
    let key = |p: &(Q, Q)| if swap { (p.1.clone(), p.0.clone()) } else { p.clone() };
    let tail = if swap { tail.recip() } else { tail.clone() };
    for w in pts.windows(2) {
        let (a, b) = (key(&w[0]), key(&w[1]));
        if x <= &b.0 {
            return &a.1 + (&b.1 - &a.1) * (x - &a.0) / (&b.0 - &a.0);
        }
    }
    let last = key(pts.last().expect("at least the origin"));
    &last.1 + tail * (x - &last.0)
}

/// The transition function of lower breaks `(v_i, s_i)` for ramification index `e`.
/// A leading `(0, s_0)` entry (the unramified part) does not affect `φ` and is skipped.
pub fn breaks_to_transition(breaks: &[(Q, Q)], e: u64) -> Result<TransitionFunction> {
    if e == 0 {
        return Err(Error::Invalid("ramification index must be positive".into()));
    }
    let e = qi(e);
    let bs: Vec<&(Q, Q)> = breaks.iter().skip_while(|(v, _)| v.is_zero()).collect();
    // every embedding over the unramified part moves π, so the first break has order e
    match bs.first() {
        None if !e.is_one() => return Err(Error::Invalid("a ramified extension has a positive break".into())),
        Some((_, s)) if *s != e => return Err(Error::Invalid(format!("first break has order {s}, expected e = {e}"))),
        _ => {}
    }
    let mut pts = vec![(Q::zero(), Q::zero())];
    for (i, (v, s)) in bs.iter().enumerate() {
        let (pv, pu) = pts.last().unwrap().clone();
        if *v <= pv {
            return Err(Error::Invalid("lower breaks must be positive and increasing".into()));
        }
        if i > 0 && s >= &bs[i - 1].1 {
            return Err(Error::Invalid("break orders must decrease strictly".into()));
        }
        if *s <= Q::one() {
            return Err(Error::Invalid("a break must have more than one embedding above it".into()));
        }
        pts.push((v.clone(), pu + (v - pv) * s / &e));
    }
    TransitionFunction::new(pts, e.recip())
}

/// Lower breaks `(v_i, s_i)` of `φ` for ramification index `e`.
pub fn transition_to_breaks(phi: &TransitionFunction, e: u64) -> Result<Vec<(Q, Q)>> {
    let e = qi(e);
    if &phi.final_slope * &e != Q::one() {
        return Err(Error::Invalid(format!("final slope {} does not match e = {e}", phi.final_slope)));
    }
    Ok((1..phi.vertices.len()).map(|i| (phi.vertices[i].0.clone(), &e * phi.slope_before(i))).collect())
}

/// Ramification data of `L/K`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RamificationData {
    pub e: u64,
    pub d: u64,
    pub polygon: NewtonPolygon,
    /// `(v, |Γ_v|)`, increasing in `v`; starts with `(0, ed)` when `d > 1`.
    pub lower_breaks: Vec<(Q, Q)>,
    pub phi: TransitionFunction,
}

impl RamificationData {
    /// Assembles the data from `φ`; the polygon is rebuilt from the breaks.
    pub fn from_transition(phi: TransitionFunction, e: u64, d: u64) -> Result<RamificationData> {
        let positive = transition_to_breaks(&phi, e)?;
        let mut lower_breaks = Vec::new();
        if d > 1 {
            lower_breaks.push((Q::zero(), qi(e * d)));
        }
        lower_breaks.extend(positive.iter().cloned());
        let polygon = polygon_from_breaks(&positive, e, d);
        Ok(RamificationData { e, d, polygon, lower_breaks, phi })
    }

    pub fn to_json(&self) -> Value {
        json!({
            "e": self.e,
            "d": self.d,
            "polygon": self.polygon.to_json(),
            "lower_breaks": self.lower_breaks.iter().map(|(v, s)| json!([rational_json(v), rational_json(s)])).collect::<Vec<_>>(),
            "phi_vertices": self.phi.to_json(),
        })
    }
}

fn face(a: (Q, Q), b: (Q, Q)) -> Face {
    Face { left: a, right: b, left_open: false, right_open: false }
}

/// Faces of slope `-v_i` between consecutive orders `s_{i+1} < s_i`, the leftmost
/// starting at abscissa 1, plus the horizontal face on `[e, ed]`.
fn polygon_from_breaks(breaks: &[(Q, Q)], e: u64, d: u64) -> NewtonPolygon {
    let mut faces = Vec::new();
    let mut right = (qi(e), Q::zero());
    for (i, (v, s)) in breaks.iter().enumerate() {
        let left_x = breaks.get(i + 1).map_or_else(Q::one, |b| b.1.clone());
        debug_assert_eq!(s, &right.0);
        let left = (left_x.clone(), &right.1 + v * (&right.0 - &left_x));
        faces.push(face(left.clone(), right));
        right = left;
    }
    faces.reverse();
    if d > 1 {
        faces.push(face((qi(e), Q::zero()), (qi(e * d), Q::zero())));
    }
    NewtonPolygon { faces }
}

/// One layer of a tower: an unramified part of degree `d` under an Eisenstein step
/// of degree `e` (absent when the layer is unramified).
struct Layer {
    d: u64,
    eisen: Option<ExactField>,
}

fn layers(l: &ExactField, k: Option<&ExactField>) -> Result<Vec<Layer>> {
    let tower = l.tower();
    let start = match k {
        None => 1,
        Some(k) => {
            let pos = tower
                .iter()
                .position(|f| f.ptr_eq(k))
                .ok_or_else(|| Error::Invalid("base field is not in the tower".into()))?;
            pos + 1
        }
    };
    let mut out = Vec::new();
    let mut d = 1;
    for step in &tower[start..] {
        match step.kind() {
            FieldKind::Inert => d *= step.degree() as u64,
            FieldKind::Eisen => {
                out.push(Layer { d, eisen: Some(step.clone()) });
                d = 1;
            }
            FieldKind::Prime => unreachable!("prime field above the base"),
        }
    }
    if d > 1 || out.is_empty() {
        out.push(Layer { d, eisen: None });
    }
    Ok(out)
}

/// The Newton polygon of `f(x + π)` on `[1, e]` for the Eisenstein step `l`, with ordinates
/// in units of `val_L`. The constant term `f(π)` is exactly zero and is dropped.
fn shifted_polygon(l: &ExactField) -> Result<NewtonPolygon> {
    let f = l.def_poly().expect("extension step").coerce_to(l)?;
    let e = f.degree() as usize;
    if e == 1 {
        return Ok(NewtonPolygon::default());
    }
    let g: ExactPoly = f.shift(&l.generator()?)?;
    let (lo, hi) = (Q::one(), Q::from_integer(BigInt::from(e)));
    let limit = l.ctx().reachable_max(g.node());
    for n in 1..=limit {
        let mut pts = g.points(n)?;
        pts[0] = PointData::Absent;
        let np = overlap(&pts);
        if np.covers(&lo, &hi) {
            return Ok(np.restrict(&lo, &hi));
        }
    }
    Err(Error::precision(format!("ramification polygon not confirmed by epoch {limit}")))
}

/// Ramification data of one layer, read directly from its polygon.
fn layer_data(layer: &Layer) -> Result<RamificationData> {
    let Some(l) = &layer.eisen else {
        return RamificationData::from_transition(TransitionFunction::identity(), 1, layer.d);
    };
    let e = l.degree() as u64;
    let np = shifted_polygon(l)?;
    let mut positive: Vec<(Q, Q)> = np.faces.iter().map(|f| (-f.slope(), f.right.0.clone())).collect();
    positive.reverse();
    let phi = breaks_to_transition(&positive, e)?;
    let mut data = RamificationData::from_transition(phi, e, layer.d)?;
    let mut polygon = np;
    if layer.d > 1 {
        polygon.faces.push(face((qi(e), Q::zero()), (qi(e * layer.d), Q::zero())));
    }
    if polygon != data.polygon {
        return Err(Error::Inconsistent("ramification polygon disagrees with its breaks".into()));
    }
    data.polygon = polygon;
    Ok(data)
}

/// Ramification data of `l` over `Q_p`.
pub fn ramification_polygon(l: &ExactField) -> Result<RamificationData> {
    ramification_polygon_over(l, None)
}

/// Ramification data of `l` over a field `k` of its tower (`None` for the prime field).
/// Layers are computed from their polygons and chained through `φ_{M/K} = φ_{L/K} ∘ φ_{M/L}`.
pub fn ramification_polygon_over(l: &ExactField, k: Option<&ExactField>) -> Result<RamificationData> {
    let ls = layers(l, k)?;
    if ls.len() == 1 {
        return layer_data(&ls[0]);
    }
    let (mut phi, mut e, mut d) = (TransitionFunction::identity(), 1u64, 1u64);
    for layer in &ls {
        let data = layer_data(layer)?;
        phi = phi.compose(&data.phi)?;
        e *= data.e;
        d *= data.d;
    }
    RamificationData::from_transition(phi, e, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64) -> Q {
        Q::from_integer(BigInt::from(n))
    }

    #[test]
    fn test_sqrt2_breaks_to_phi() {
        let phi = breaks_to_transition(&[(q(3), q(2))], 2).unwrap();
        assert_eq!(phi.vertices, vec![(q(0), q(0)), (q(3), q(3))]);
        assert_eq!(phi.final_slope, Q::new(1.into(), 2.into()));
        assert_eq!(phi.eval(&q(5)).unwrap(), q(4));
        assert_eq!(phi.inverse(&q(4)).unwrap(), q(5));
    }

    #[test]
    fn test_identity_and_collinear_points() {
        assert_eq!(breaks_to_transition(&[], 1).unwrap(), TransitionFunction::identity());
        let phi = TransitionFunction::new(vec![(q(0), q(0)), (q(1), q(1)), (q(2), q(2))], q(1)).unwrap();
        assert_eq!(phi, TransitionFunction::identity());
        assert!(TransitionFunction::new(vec![(q(0), q(0)), (q(1), q(1))], q(2)).is_err());
        assert!(phi.eval(&q(-1)).is_err());
    }

    #[test]
    fn test_polygon_from_breaks() {
        let np = polygon_from_breaks(&[(q(3), q(2))], 2, 1);
        assert_eq!(np.vertices(), vec![(q(1), q(3)), (q(2), q(0))]);
        let np = polygon_from_breaks(&[], 1, 3);
        assert_eq!(np.vertices(), vec![(q(1), q(0)), (q(3), q(0))]);
    }

    #[test]
    fn test_rejects_bad_breaks() {
        assert!(breaks_to_transition(&[(q(2), q(2)), (q(1), q(1))], 2).is_err());
        assert!(breaks_to_transition(&[(q(1), q(2)), (q(2), q(3))], 4).is_err());
    }
}

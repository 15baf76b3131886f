//! Newton polygons from partially known valuations.
//!
//! A point is either known (its valuation is exact), weak (only a lower bound is
//! known) or absent (the coefficient is exactly zero). The lower weak polygon is
//! the hull of every bound; the upper weak polygon is the hull of the known points
//! only. The true polygon lies between them, so wherever they coincide it is known.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed};
use serde_json::{json, Value};

use crate::val::fmt_rational;

pub type Q = BigRational;

/// What is known about the valuation of one coefficient.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PointData {
    Known(Q),
    Weak(Q),
    Absent,
}

/// A face of a Newton polygon. Open ends mark section boundaries where the
/// true face might continue further.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Face {
    pub left: (Q, Q),
    pub right: (Q, Q),
    pub left_open: bool,
    pub right_open: bool,
}

impl Face {
    pub fn width(&self) -> Q {
        &self.right.0 - &self.left.0
    }

    pub fn slope(&self) -> Q {
        (&self.right.1 - &self.left.1) / self.width()
    }

    /// `(h, e)` with slope `-h/e`, `e > 0` and the fraction reduced.
    pub fn slope_parts(&self) -> (BigInt, BigInt) {
        let s = -self.slope();
        (s.numer().clone(), s.denom().clone())
    }

    /// Both endpoints are genuine vertices of the true polygon.
    pub fn is_closed(&self) -> bool {
        !self.left_open && !self.right_open
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NewtonPolygon {
    pub faces: Vec<Face>,
}

/// `(x, y)` from an integer abscissa.
fn pt(i: usize, y: &Q) -> (Q, Q) {
    (Q::from_integer(BigInt::from(i)), y.clone())
}

fn cross(o: &(Q, Q), a: &(Q, Q), b: &(Q, Q)) -> Q {
    (&a.0 - &o.0) * (&b.1 - &o.1) - (&a.1 - &o.1) * (&b.0 - &o.0)
}

/// Lower convex hull, left to right, with collinear interior points dropped.
pub fn lower_hull(points: &[(Q, Q)]) -> Vec<(Q, Q)> {
    let mut pts = points.to_vec();
    pts.sort();
    // keep the lowest point per abscissa
    pts.dedup_by(|b, a| a.0 == b.0);
    let mut hull: Vec<(Q, Q)> = Vec::with_capacity(pts.len());
    for p in pts {
        while hull.len() >= 2 && !cross(&hull[hull.len() - 2], &hull[hull.len() - 1], &p).is_positive() {
            hull.pop();
        }
        hull.push(p);
    }
    hull
}

/// Value of a hull at `x`, or `None` outside its support.
pub fn hull_eval(hull: &[(Q, Q)], x: &Q) -> Option<Q> {
    let first = hull.first()?;
    let last = hull.last()?;
    if x < &first.0 || x > &last.0 {
        return None;
    }
    for w in hull.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if x <= &b.0 {
            return Some(&a.1 + (&b.1 - &a.1) * (x - &a.0) / (&b.0 - &a.0));
        }
    }
    Some(first.1.clone())
}

/// Lower weak polygon: hull of every point with a bound.
pub fn lower_weak(points: &[PointData]) -> Vec<(Q, Q)> {
    let pts: Vec<(Q, Q)> = points
        .iter()
        .enumerate()
        .filter_map(|(i, p)| match p {
            PointData::Known(y) | PointData::Weak(y) => Some(pt(i, y)),
            PointData::Absent => None,
        })
        .collect();
    lower_hull(&pts)
}

/// Upper weak polygon: hull of the known points.
pub fn upper_weak(points: &[PointData]) -> Vec<(Q, Q)> {
    let pts: Vec<(Q, Q)> = points
        .iter()
        .enumerate()
        .filter_map(|(i, p)| match p {
            PointData::Known(y) => Some(pt(i, y)),
            _ => None,
        })
        .collect();
    lower_hull(&pts)
}

/// The part of the Newton polygon certified by the overlap of the weak polygons.
pub fn overlap(points: &[PointData]) -> NewtonPolygon {
    let lw = lower_weak(points);
    let up = upper_weak(points);
    if lw.len() < 2 || up.len() < 2 {
        return NewtonPolygon::default();
    }
    let lo = std::cmp::max(&lw[0].0, &up[0].0).clone();
    let hi = std::cmp::min(&lw[lw.len() - 1].0, &up[up.len() - 1].0).clone();
    if lo >= hi {
        return NewtonPolygon::default();
    }
    let mut xs: Vec<Q> = lw
        .iter()
        .chain(up.iter())
        .map(|p| p.0.clone())
        .filter(|x| x >= &lo && x <= &hi)
        .collect();
    xs.push(lo);
    xs.push(hi);
    xs.sort();
    xs.dedup();
    let agrees = |x: &Q| hull_eval(&lw, x) == hull_eval(&up, x);
    let is_lw_vertex = |x: &Q| lw.iter().any(|p| &p.0 == x);

    // maximal runs of agreeing elementary intervals
    let mut sections: Vec<(usize, usize)> = Vec::new();
    for k in 0..xs.len() - 1 {
        if agrees(&xs[k]) && agrees(&xs[k + 1]) {
            match sections.last_mut() {
                Some((_, end)) if *end == k => *end = k + 1,
                _ => sections.push((k, k + 1)),
            }
        }
    }
    let mut faces = Vec::new();
    for (s, e) in sections {
        let cuts: Vec<&Q> = (s..=e).filter(|&k| k == s || k == e || is_lw_vertex(&xs[k])).map(|k| &xs[k]).collect();
        let nfaces = cuts.len() - 1;
        for (j, w) in cuts.windows(2).enumerate() {
            let (a, b) = (w[0], w[1]);
            faces.push(Face {
                left: (a.clone(), hull_eval(&lw, a).unwrap()),
                right: (b.clone(), hull_eval(&lw, b).unwrap()),
                left_open: j == 0 && !is_lw_vertex(a),
                right_open: j + 1 == nfaces && !is_lw_vertex(b),
            });
        }
    }
    NewtonPolygon { faces }
}

impl NewtonPolygon {
    /// Endpoints of all faces, left to right, without repeats.
    pub fn vertices(&self) -> Vec<(Q, Q)> {
        let mut out: Vec<(Q, Q)> = Vec::new();
        for f in &self.faces {
            for p in [&f.left, &f.right] {
                if out.last() != Some(p) {
                    out.push(p.clone());
                }
            }
        }
        out
    }

    /// Contiguous confirmed intervals.
    pub fn sections(&self) -> Vec<(Q, Q)> {
        let mut out: Vec<(Q, Q)> = Vec::new();
        for f in &self.faces {
            match out.last_mut() {
                Some((_, hi)) if *hi == f.left.0 => *hi = f.right.0.clone(),
                _ => out.push((f.left.0.clone(), f.right.0.clone())),
            }
        }
        out
    }

    /// Whether one confirmed section contains `[lo, hi]`.
    pub fn covers(&self, lo: &Q, hi: &Q) -> bool {
        self.sections().iter().any(|(a, b)| a <= lo && hi <= b)
    }

    /// Faces lying inside `[lo, hi]`.
    pub fn restrict(&self, lo: &Q, hi: &Q) -> NewtonPolygon {
        NewtonPolygon { faces: self.faces.iter().filter(|f| &f.left.0 >= lo && &f.right.0 <= hi).cloned().collect() }
    }

    /// Multiplies every ordinate by `s` (unit changes).
    pub fn scale_ordinates(&self, s: &Q) -> NewtonPolygon {
        let faces = self
            .faces
            .iter()
            .map(|f| Face {
                left: (f.left.0.clone(), &f.left.1 * s),
                right: (f.right.0.clone(), &f.right.1 * s),
                ..f.clone()
            })
            .collect();
        NewtonPolygon { faces }
    }

    /// `[[x, y], ...]` with integers as numbers and other rationals as `"h/e"` strings.
    pub fn to_json(&self) -> Value {
        Value::Array(self.vertices().iter().map(|(x, y)| json!([rational_json(x), rational_json(y)])).collect())
    }
}

/// An integral rational as a JSON number, otherwise as an `"h/e"` string.
pub fn rational_json(q: &Q) -> Value {
    if q.is_integer() {
        if let Ok(n) = i64::try_from(q.to_integer()) {
            return json!(n);
        }
    }
    json!(fmt_rational(q))
}

/// Ordinates of the hull at every integer abscissa of its support (for tests).
pub fn hull_profile(hull: &[(Q, Q)]) -> Vec<(i64, Q)> {
    let (Some(a), Some(b)) = (hull.first(), hull.last()) else { return Vec::new() };
    let lo = a.0.ceil().to_integer();
    let hi = b.0.floor().to_integer();
    let mut out = Vec::new();
    let mut x = lo;
    while x <= hi {
        let q = Q::from_integer(x.clone());
        out.push((i64::try_from(&x).unwrap_or(0), hull_eval(hull, &q).unwrap()));
        x += BigInt::one();
    }
    out
}

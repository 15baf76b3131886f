//! Extended valuations `Q ∪ {±∞}` and aggregates of them.
//!
//! Subtraction uses `∞ − ∞ = 0`, which makes chains of subtractions
//! non-associative; expressions are always evaluated left to right.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// A value in `Q ∪ {±∞}`. The derived order puts `NegInf` first and `PosInf` last.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExtVal {
    NegInf,
    Fin(BigRational),
    PosInf,
}

/// Comparison relations used by valuation queries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Rel {
    Eq,
    Ne,
    Le,
    Lt,
    Ge,
    Gt,
}

impl Rel {
    pub fn holds(self, ord: Ordering) -> bool {
        match self {
            Rel::Eq => ord == Ordering::Equal,
            Rel::Ne => ord != Ordering::Equal,
            Rel::Le => ord != Ordering::Greater,
            Rel::Lt => ord == Ordering::Less,
            Rel::Ge => ord != Ordering::Less,
            Rel::Gt => ord == Ordering::Greater,
        }
    }
}

impl ExtVal {
    pub fn int(n: i64) -> Self {
        ExtVal::Fin(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn frac(n: i64, d: i64) -> Self {
        ExtVal::Fin(BigRational::new(BigInt::from(n), BigInt::from(d)))
    }

    pub fn zero() -> Self {
        ExtVal::int(0)
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, ExtVal::Fin(_))
    }

    pub fn as_rational(&self) -> Option<&BigRational> {
        match self {
            ExtVal::Fin(q) => Some(q),
            _ => None,
        }
    }

    /// Largest integer not exceeding a finite value.
    pub fn floor_i64(&self) -> Option<i64> {
        self.as_rational().and_then(|q| q.floor().to_integer().to_i64())
    }

    pub fn ceil_i64(&self) -> Option<i64> {
        self.as_rational().and_then(|q| q.ceil().to_integer().to_i64())
    }

    pub fn add(&self, other: &ExtVal) -> Result<ExtVal> {
        use ExtVal::*;
        Ok(match (self, other) {
            (PosInf, NegInf) | (NegInf, PosInf) => {
                return Err(Error::UndefinedVal("+Inf + -Inf".into()))
            }
            (PosInf, _) | (_, PosInf) => PosInf,
            (NegInf, _) | (_, NegInf) => NegInf,
            (Fin(a), Fin(b)) => Fin(a + b),
        })
    }

    /// Subtraction with `∞ − ∞ = 0` (and likewise for `−∞`).
    pub fn sub(&self, other: &ExtVal) -> ExtVal {
        use ExtVal::*;
        match (self, other) {
            (PosInf, PosInf) | (NegInf, NegInf) => ExtVal::zero(),
            (PosInf, _) => PosInf,
            (NegInf, _) => NegInf,
            (Fin(_), PosInf) => NegInf,
            (Fin(_), NegInf) => PosInf,
            (Fin(a), Fin(b)) => Fin(a - b),
        }
    }

    pub fn neg(&self) -> ExtVal {
        match self {
            ExtVal::NegInf => ExtVal::PosInf,
            ExtVal::PosInf => ExtVal::NegInf,
            ExtVal::Fin(a) => ExtVal::Fin(-a),
        }
    }

    /// Multiplication by a rational; `0·(±∞)` is rejected.
    pub fn scale(&self, q: &BigRational) -> Result<ExtVal> {
        match self {
            ExtVal::Fin(a) => Ok(ExtVal::Fin(a * q)),
            inf => {
                if q.is_zero() {
                    Err(Error::UndefinedVal("0 * infinity".into()))
                } else if q.is_positive() {
                    Ok(inf.clone())
                } else {
                    Ok(inf.neg())
                }
            }
        }
    }

    pub fn meet(&self, other: &ExtVal) -> ExtVal {
        std::cmp::min(self, other).clone()
    }

    pub fn join(&self, other: &ExtVal) -> ExtVal {
        std::cmp::max(self, other).clone()
    }

    /// `a diff b` is `a` when `a > b` and `−∞` otherwise.
    pub fn diff(&self, other: &ExtVal) -> ExtVal {
        if self > other {
            self.clone()
        } else {
            ExtVal::NegInf
        }
    }

    pub fn parse(s: &str) -> Result<ExtVal> {
        let t = s.trim();
        match t {
            "+Inf" | "Inf" | "inf" | "+inf" => Ok(ExtVal::PosInf),
            "-Inf" | "-inf" => Ok(ExtVal::NegInf),
            _ => parse_rational(t).map(ExtVal::Fin),
        }
    }
}

impl From<i64> for ExtVal {
    fn from(n: i64) -> Self {
        ExtVal::int(n)
    }
}

impl From<BigRational> for ExtVal {
    fn from(q: BigRational) -> Self {
        ExtVal::Fin(q)
    }
}

impl fmt::Display for ExtVal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtVal::NegInf => write!(f, "-Inf"),
            ExtVal::PosInf => write!(f, "+Inf"),
            ExtVal::Fin(q) => write!(f, "{}", fmt_rational(q)),
        }
    }
}

/// Renders a rational as `n` or `n/d`.
pub fn fmt_rational(q: &BigRational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Parses `n` or `n/d` (denominator nonzero).
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let n: BigInt = n
        .parse()
        .map_err(|_| Error::Parse(format!("bad rational numerator in {s:?}")))?;
    let d: BigInt = d
        .parse()
        .map_err(|_| Error::Parse(format!("bad rational denominator in {s:?}")))?;
    if d.is_zero() {
        return Err(Error::Parse(format!("zero denominator in {s:?}")));
    }
    Ok(BigRational::new(n, d))
}

/// Binary operations that lift pointwise to aggregates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ValOp {
    Add,
    Sub,
    Meet,
    Join,
    Diff,
}

impl ValOp {
    pub fn apply(self, a: &ExtVal, b: &ExtVal) -> Result<ExtVal> {
        match self {
            ValOp::Add => a.add(b),
            ValOp::Sub => Ok(a.sub(b)),
            ValOp::Meet => Ok(a.meet(b)),
            ValOp::Join => Ok(a.join(b)),
            ValOp::Diff => Ok(a.diff(b)),
        }
    }
}

/// Key domain of an aggregate.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Shape {
    /// Keys are single non-negative integers (coefficient indices).
    Univariate,
    /// Keys are exponent vectors of the given rank.
    Multivariate(usize),
    /// Finite positional tuple of the given length; no default.
    Tuple(usize),
}

/// Result of comparing two aggregates in the pointwise partial order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AggCmp {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
    Incomparable,
}

/// An aggregate valuation: a map with a default, or a positional tuple.
///
/// Map entries never equal the default, so structural equality is value equality.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AggVal {
    shape: Shape,
    entries: BTreeMap<Vec<usize>, ExtVal>,
    default: Option<ExtVal>,
}

impl AggVal {
    pub fn constant(shape: Shape, v: ExtVal) -> Result<AggVal> {
        if let Shape::Tuple(n) = shape {
            return Ok(AggVal::tuple(vec![v; n]));
        }
        Ok(AggVal {
            shape,
            entries: BTreeMap::new(),
            default: Some(v),
        })
    }

    pub fn univariate<I: IntoIterator<Item = (usize, ExtVal)>>(entries: I, default: ExtVal) -> AggVal {
        let mut a = AggVal {
            shape: Shape::Univariate,
            entries: entries.into_iter().map(|(k, v)| (vec![k], v)).collect(),
            default: Some(default),
        };
        a.canonicalize();
        a
    }

    pub fn multivariate<I: IntoIterator<Item = (Vec<usize>, ExtVal)>>(
        rank: usize,
        entries: I,
        default: ExtVal,
    ) -> Result<AggVal> {
        let entries: BTreeMap<_, _> = entries.into_iter().collect();
        if entries.keys().any(|k| k.len() != rank) {
            return Err(Error::Invalid(format!("exponent vector rank differs from {rank}")));
        }
        let mut a = AggVal {
            shape: Shape::Multivariate(rank),
            entries,
            default: Some(default),
        };
        a.canonicalize();
        Ok(a)
    }

    pub fn tuple(values: Vec<ExtVal>) -> AggVal {
        AggVal {
            shape: Shape::Tuple(values.len()),
            entries: values.into_iter().enumerate().map(|(i, v)| (vec![i], v)).collect(),
            default: None,
        }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn default_value(&self) -> Option<&ExtVal> {
        self.default.as_ref()
    }

    /// Explicit entries; in canonical form these all differ from the default.
    pub fn entries(&self) -> impl Iterator<Item = (&Vec<usize>, &ExtVal)> {
        self.entries.iter()
    }

    pub fn get(&self, key: &[usize]) -> Result<ExtVal> {
        self.check_key(key)?;
        match self.entries.get(key) {
            Some(v) => Ok(v.clone()),
            None => self
                .default
                .clone()
                .ok_or_else(|| Error::Invalid(format!("tuple position {key:?} out of range"))),
        }
    }

    pub fn get_index(&self, i: usize) -> Result<ExtVal> {
        self.get(&[i])
    }

    fn check_key(&self, key: &[usize]) -> Result<()> {
        let ok = match self.shape {
            Shape::Univariate => key.len() == 1,
            Shape::Multivariate(r) => key.len() == r,
            Shape::Tuple(n) => key.len() == 1 && key[0] < n,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Invalid(format!("key {key:?} does not fit shape {:?}", self.shape)))
        }
    }

    fn canonicalize(&mut self) {
        if let Some(d) = &self.default {
            self.entries.retain(|_, v| v != d);
        }
    }

    fn same_shape(&self, other: &AggVal) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Invalid(format!(
                "shape mismatch: {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        Ok(())
    }

    fn keys_union<'a>(&'a self, other: &'a AggVal) -> BTreeSet<&'a Vec<usize>> {
        self.entries.keys().chain(other.entries.keys()).collect()
    }

    pub fn pointwise(&self, other: &AggVal, op: ValOp) -> Result<AggVal> {
        self.same_shape(other)?;
        let default = match (&self.default, &other.default) {
            (Some(a), Some(b)) => Some(op.apply(a, b)?),
            _ => None,
        };
        let mut entries = BTreeMap::new();
        for k in self.keys_union(other) {
            entries.insert(k.clone(), op.apply(&self.get(k)?, &other.get(k)?)?);
        }
        let mut out = AggVal {
            shape: self.shape.clone(),
            entries,
            default,
        };
        out.canonicalize();
        Ok(out)
    }

    pub fn map(&self, f: impl Fn(&ExtVal) -> Result<ExtVal>) -> Result<AggVal> {
        let mut out = AggVal {
            shape: self.shape.clone(),
            entries: self
                .entries
                .iter()
                .map(|(k, v)| Ok((k.clone(), f(v)?)))
                .collect::<Result<_>>()?,
            default: self.default.as_ref().map(&f).transpose()?,
        };
        out.canonicalize();
        Ok(out)
    }

    /// Pointwise comparison in the product partial order.
    pub fn compare(&self, other: &AggVal) -> Result<AggCmp> {
        self.same_shape(other)?;
        let mut pairs: Vec<(ExtVal, ExtVal)> = Vec::new();
        for k in self.keys_union(other) {
            pairs.push((self.get(k)?, other.get(k)?));
        }
        if let (Some(a), Some(b)) = (&self.default, &other.default) {
            pairs.push((a.clone(), b.clone()));
        }
        let (mut lt, mut eq, mut gt) = (false, false, false);
        for (a, b) in &pairs {
            match a.cmp(b) {
                Ordering::Less => lt = true,
                Ordering::Equal => eq = true,
                Ordering::Greater => gt = true,
            }
        }
        Ok(match (lt, eq, gt) {
            (true, _, true) => AggCmp::Incomparable,
            (true, false, false) => AggCmp::Lt,
            (true, true, false) => AggCmp::Le,
            (false, _, true) if !eq => AggCmp::Gt,
            (false, _, true) => AggCmp::Ge,
            _ => AggCmp::Eq,
        })
    }

    /// Whether `self rel other` holds pointwise.
    pub fn satisfies(&self, other: &AggVal, rel: Rel) -> Result<bool> {
        let c = self.compare(other)?;
        Ok(match rel {
            Rel::Eq => c == AggCmp::Eq,
            Rel::Ne => c != AggCmp::Eq,
            Rel::Le => matches!(c, AggCmp::Lt | AggCmp::Le | AggCmp::Eq),
            Rel::Ge => matches!(c, AggCmp::Gt | AggCmp::Ge | AggCmp::Eq),
            Rel::Lt => c == AggCmp::Lt,
            Rel::Gt => c == AggCmp::Gt,
        })
    }

    /// Parses the rendering produced by `Display` for the given shape.
    pub fn parse(s: &str, shape: Shape) -> Result<AggVal> {
        let t = s.trim();
        let body = t
            .strip_prefix('{')
            .and_then(|r| r.strip_suffix('}'))
            .ok_or_else(|| Error::Parse(format!("aggregate must be braced: {t:?}")))?;
        let mut entries = BTreeMap::new();
        let mut default = None;
        for item in split_top_level(body) {
            let item = item.trim();
            if item.is_empty() {
                continue;
            }
            let (k, v) = item
                .rsplit_once(':')
                .ok_or_else(|| Error::Parse(format!("missing ':' in {item:?}")))?;
            let v = ExtVal::parse(v)?;
            let k = k.trim();
            if k == "default" {
                default = Some(v);
                continue;
            }
            let key: Vec<usize> = k
                .trim_start_matches('(')
                .trim_end_matches(')')
                .split(',')
                .map(|x| x.trim().parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Parse(format!("bad key {k:?}")))?;
            entries.insert(key, v);
        }
        match shape {
            Shape::Tuple(n) => {
                if default.is_some() || entries.len() != n {
                    return Err(Error::Parse("tuple aggregates list every position and no default".into()));
                }
                let vals: Vec<ExtVal> = (0..n)
                    .map(|i| {
                        entries
                            .get(&vec![i])
                            .cloned()
                            .ok_or_else(|| Error::Parse(format!("missing tuple position {i}")))
                    })
                    .collect::<Result<_>>()?;
                Ok(AggVal::tuple(vals))
            }
            Shape::Univariate => {
                let d = default.ok_or_else(|| Error::Parse("missing default".into()))?;
                if entries.keys().any(|k| k.len() != 1) {
                    return Err(Error::Parse("univariate keys are single integers".into()));
                }
                Ok(AggVal::univariate(entries.into_iter().map(|(k, v)| (k[0], v)), d))
            }
            Shape::Multivariate(r) => {
                let d = default.ok_or_else(|| Error::Parse("missing default".into()))?;
                AggVal::multivariate(r, entries, d).map_err(|e| Error::Parse(e.to_string()))
            }
        }
    }
}

fn split_top_level(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}

impl fmt::Display for AggVal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = self
            .entries
            .iter()
            .map(|(k, v)| {
                let key = match self.shape {
                    Shape::Multivariate(_) => format!(
                        "({})",
                        k.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
                    ),
                    _ => k[0].to_string(),
                };
                format!("{key}:{v}")
            })
            .collect();
        if let Some(d) = &self.default {
            parts.push(format!("default: {d}"));
        }
        write!(f, "{{{}}}", parts.join(", "))
    }
}

/// Convenience: `1/n` as a rational.
pub fn recip(n: i64) -> BigRational {
    BigRational::new(BigInt::one(), BigInt::from(n))
}

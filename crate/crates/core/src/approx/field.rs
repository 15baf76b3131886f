//! Fixed-capacity fields (`Q_p` and towers of inertial/Eisenstein steps) and their elements.

use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use super::digits::{PDig, PrimePowers};
use super::poly::ApproxPoly;
use crate::error::{Error, Result};
use crate::val::ExtVal;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FieldKind {
    Prime,
    Inert,
    Eisen,
}

impl FieldKind {
    pub fn name(self) -> &'static str {
        match self {
            FieldKind::Prime => "PRIME",
            FieldKind::Inert => "INERT",
            FieldKind::Eisen => "EISEN",
        }
    }
}

/// A field approximation: elements carry at most `capacity` digits of relative
/// precision at the prime level.
pub struct ApproxField {
    kind: FieldKind,
    pp: Arc<PrimePowers>,
    base: Option<Arc<ApproxField>>,
    def_poly: Option<ApproxPoly>,
    cap: u64,
    degree: usize,
    e_abs: u64,
    f_abs: u64,
    gen_val: BigRational,
}

impl fmt::Debug for ApproxField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ApproxField({} p={} deg={} cap={})", self.kind.name(), self.p(), self.degree, self.cap)
    }
}

pub fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2u64;
    while d.saturating_mul(d) <= p {
        if p % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Internal element representation, interpreted relative to a field.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub(crate) enum Repr {
    P(PDig),
    X(Vec<Repr>),
}

impl ApproxField {
    pub fn prime(p: u64, cap: u64) -> Result<Arc<ApproxField>> {
        if !is_prime(p) {
            return Err(Error::Invalid(format!("{p} is not prime")));
        }
        Ok(Self::prime_with(Arc::new(PrimePowers::new(p)), cap))
    }

    /// `Q_p` sharing a power cache with other approximations of the same prime.
    pub fn prime_with(pp: Arc<PrimePowers>, cap: u64) -> Arc<ApproxField> {
        Arc::new(ApproxField {
            kind: FieldKind::Prime,
            pp,
            base: None,
            def_poly: None,
            cap: cap.max(1),
            degree: 1,
            e_abs: 1,
            f_abs: 1,
            gen_val: BigRational::one(),
        })
    }

    /// Builds an extension without checking the defining polynomial; see [`check_def_poly`].
    pub fn extension(def_poly: ApproxPoly, kind: FieldKind) -> Result<Arc<ApproxField>> {
        let base = def_poly.field().clone();
        let m = def_poly.len().saturating_sub(1);
        if m == 0 || kind == FieldKind::Prime {
            return Err(Error::Invalid("extension needs a defining polynomial of degree >= 1".into()));
        }
        let lead = def_poly.coeff(m);
        if !lead.sub(&ApproxElt::one(&base))?.is_weakly_zero() {
            return Err(Error::Invalid("defining polynomial must be monic".into()));
        }
        if kind == FieldKind::Inert && base.inert_steps() >= 1 {
            return Err(Error::Unsupported("towers with more than one inertial step".into()));
        }
        let (e_abs, f_abs) = match kind {
            FieldKind::Eisen => (base.e_abs * m as u64, base.f_abs),
            _ => (base.e_abs, base.f_abs * m as u64),
        };
        let gen_val = match kind {
            FieldKind::Eisen => BigRational::new(BigInt::one(), BigInt::from(e_abs)),
            _ => BigRational::zero(),
        };
        Ok(Arc::new(ApproxField {
            kind,
            pp: base.pp.clone(),
            cap: base.cap,
            base: Some(base),
            def_poly: Some(def_poly),
            degree: m,
            e_abs,
            f_abs,
            gen_val,
        }))
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }
    pub fn p(&self) -> u64 {
        self.pp.p()
    }
    pub fn powers(&self) -> &Arc<PrimePowers> {
        &self.pp
    }
    pub fn base(&self) -> Option<&Arc<ApproxField>> {
        self.base.as_ref()
    }
    pub fn def_poly(&self) -> Option<&ApproxPoly> {
        self.def_poly.as_ref()
    }
    pub fn capacity(&self) -> u64 {
        self.cap
    }
    /// Degree over the immediate base.
    pub fn degree(&self) -> usize {
        self.degree
    }
    pub fn absolute_degree(&self) -> u64 {
        self.e_abs * self.f_abs
    }
    pub fn ramification_index(&self) -> u64 {
        self.e_abs
    }
    pub fn inertia_degree(&self) -> u64 {
        self.f_abs
    }
    /// Valuation of the generator (absolute units, `val(p) = 1`).
    pub fn gen_val(&self) -> &BigRational {
        &self.gen_val
    }
    /// Valuation of a uniformizer, `1/e`.
    pub fn unif_val(&self) -> BigRational {
        BigRational::new(BigInt::one(), BigInt::from(self.e_abs))
    }

    pub fn inert_steps(&self) -> usize {
        let here = usize::from(self.kind == FieldKind::Inert);
        here + self.base.as_ref().map_or(0, |b| b.inert_steps())
    }

    /// Same tower shape, ignoring capacity.
    pub fn same_shape(&self, other: &ApproxField) -> bool {
        if std::ptr::eq(self, other) {
            return true;
        }
        if self.kind != other.kind || self.p() != other.p() || self.degree != other.degree {
            return false;
        }
        match (&self.base, &other.base) {
            (None, None) => true,
            (Some(a), Some(b)) => a.same_shape(b),
            _ => false,
        }
    }

    pub fn compatible(&self, other: &ApproxField) -> bool {
        std::ptr::eq(self, other) || (self.cap == other.cap && self.same_shape(other))
    }

    /// Rebuilds the field at another capacity.
    pub fn with_capacity(self: &Arc<Self>, cap: u64) -> Result<Arc<ApproxField>> {
        if cap == self.cap {
            return Ok(self.clone());
        }
        match (&self.base, &self.def_poly) {
            (Some(b), Some(f)) => {
                let nb = b.with_capacity(cap)?;
                let nf = f.coerce_to(&nb)?;
                ApproxField::extension(nf, self.kind)
            }
            _ => Ok(ApproxField::prime_with(self.pp.clone(), cap)),
        }
    }

    /// Decides whether `f` defines an extension of the given kind over its
    /// coefficient field. `None` means the approximation is too coarse to tell.
    pub fn check_def_poly(f: &ApproxPoly, kind: FieldKind) -> Result<Option<bool>> {
        let base = f.field();
        let m = f.len().saturating_sub(1);
        if m == 0 {
            return Ok(Some(false));
        }
        let lead = f.coeff(m).sub(&ApproxElt::one(base))?;
        if !lead.is_weakly_zero() {
            return Ok(Some(false));
        }
        let unit = ExtVal::Fin(base.unif_val());
        match kind {
            FieldKind::Prime => Ok(Some(false)),
            FieldKind::Eisen => {
                let c0 = f.coeff(0);
                if c0.is_weakly_zero() {
                    if c0.abs_prec() > unit {
                        return Ok(Some(false));
                    }
                    return Ok(None);
                }
                if c0.weak_val() != unit {
                    return Ok(Some(false));
                }
                let mut undecided = false;
                for i in 1..m {
                    let c = f.coeff(i);
                    if c.weak_val() >= unit {
                        continue;
                    }
                    if c.is_weakly_zero() {
                        undecided = true;
                    } else {
                        return Ok(Some(false));
                    }
                }
                Ok(if undecided { None } else { Some(true) })
            }
            FieldKind::Inert => {
                if base.inert_steps() >= 1 {
                    return Err(Error::Unsupported("towers with more than one inertial step".into()));
                }
                let mut red = Vec::with_capacity(m + 1);
                for i in 0..=m {
                    let c = f.coeff(i);
                    if c.abs_prec() < unit {
                        if !c.is_weakly_zero() && c.weak_val() < ExtVal::zero() {
                            return Ok(Some(false));
                        }
                        return Ok(None);
                    }
                    if c.weak_val() < ExtVal::zero() {
                        return Ok(Some(false));
                    }
                    red.push(base.residue(&c)?[0]);
                }
                Ok(Some(super::residue::is_irreducible_fp(&red, base.p())))
            }
        }
    }

    pub(crate) fn zero_repr(&self) -> Repr {
        match &self.base {
            None => Repr::P(PDig::Zero),
            Some(b) => Repr::X(vec![b.zero_repr(); self.degree]),
        }
    }

    pub(crate) fn embed_repr(&self, from: &ApproxField, r: &Repr) -> Result<Repr> {
        if self.same_shape(from) {
            return Ok(self.cap_repr(r));
        }
        match &self.base {
            None => Err(Error::FieldMismatch("no coercion path between fields".into())),
            Some(b) => {
                let mut cs = vec![b.zero_repr(); self.degree];
                cs[0] = b.embed_repr(from, r)?;
                Ok(Repr::X(cs))
            }
        }
    }

    pub(crate) fn cap_repr(&self, r: &Repr) -> Repr {
        match (r, &self.base) {
            (Repr::P(d), _) => Repr::P(d.cap_rel(self.cap, &self.pp)),
            (Repr::X(cs), Some(b)) => Repr::X(cs.iter().map(|c| b.cap_repr(c)).collect()),
            (Repr::X(_), None) => unreachable!("extension repr in prime field"),
        }
    }

    fn coeffs_of<'a>(r: &'a Repr) -> &'a [Repr] {
        match r {
            Repr::X(cs) => cs,
            Repr::P(_) => unreachable!("prime repr in extension"),
        }
    }

    fn dig(r: &Repr) -> &PDig {
        match r {
            Repr::P(d) => d,
            Repr::X(_) => unreachable!("extension repr in prime field"),
        }
    }

    pub(crate) fn wv_repr(&self, r: &Repr) -> ExtVal {
        match &self.base {
            None => Self::dig(r).wv().map_or(ExtVal::PosInf, ExtVal::int),
            Some(b) => self.min_shifted(Self::coeffs_of(r), |c| b.wv_repr(c)),
        }
    }

    pub(crate) fn abs_repr(&self, r: &Repr) -> ExtVal {
        match &self.base {
            None => Self::dig(r).abs().map_or(ExtVal::PosInf, ExtVal::int),
            Some(b) => self.min_shifted(Self::coeffs_of(r), |c| b.abs_repr(c)),
        }
    }

    fn min_shifted(&self, cs: &[Repr], f: impl Fn(&Repr) -> ExtVal) -> ExtVal {
        let mut best = ExtVal::PosInf;
        for (i, c) in cs.iter().enumerate() {
            let v = match f(c) {
                ExtVal::Fin(q) => ExtVal::Fin(q + &self.gen_val * BigInt::from(i)),
                other => other,
            };
            if v < best {
                best = v;
            }
        }
        best
    }

    pub(crate) fn is_exact_zero_repr(&self, r: &Repr) -> bool {
        match r {
            Repr::P(d) => d.is_exact_zero(),
            Repr::X(cs) => {
                let b = self.base.as_ref().unwrap();
                cs.iter().all(|c| b.is_exact_zero_repr(c))
            }
        }
    }

    pub(crate) fn is_wz_repr(&self, r: &Repr) -> bool {
        match r {
            Repr::P(d) => d.is_weakly_zero(),
            Repr::X(_) => self.wv_repr(r) >= self.abs_repr(r),
        }
    }

    pub(crate) fn add_repr(&self, a: &Repr, b: &Repr, negate: bool) -> Repr {
        match (a, b) {
            (Repr::P(x), Repr::P(y)) => Repr::P(if negate { x.sub(y, &self.pp) } else { x.add(y, &self.pp) }),
            (Repr::X(xs), Repr::X(ys)) => {
                let base = self.base.as_ref().unwrap();
                Repr::X(xs.iter().zip(ys).map(|(x, y)| base.add_repr(x, y, negate)).collect())
            }
            _ => unreachable!("mixed representations"),
        }
    }

    pub(crate) fn neg_repr(&self, a: &Repr) -> Repr {
        match a {
            Repr::P(x) => Repr::P(x.neg(&self.pp)),
            Repr::X(xs) => {
                let base = self.base.as_ref().unwrap();
                Repr::X(xs.iter().map(|x| base.neg_repr(x)).collect())
            }
        }
    }

    pub(crate) fn mul_repr(&self, a: &Repr, b: &Repr) -> Repr {
        match (a, b) {
            (Repr::P(x), Repr::P(y)) => Repr::P(x.mul(y, &self.pp)),
            (Repr::X(xs), Repr::X(ys)) => {
                let base = self.base.as_ref().unwrap();
                let m = self.degree;
                let zero = base.zero_repr();
                let mut prod = vec![zero.clone(); 2 * m - 1];
                for (i, x) in xs.iter().enumerate() {
                    if base.is_exact_zero_repr(x) {
                        continue;
                    }
                    for (j, y) in ys.iter().enumerate() {
                        if base.is_exact_zero_repr(y) {
                            continue;
                        }
                        let t = base.mul_repr(x, y);
                        prod[i + j] = base.add_repr(&prod[i + j], &t, false);
                    }
                }
                self.reduce_repr(prod)
            }
            _ => unreachable!("mixed representations"),
        }
    }

    /// Reduces a coefficient list of length up to `2m-1` modulo the defining polynomial.
    fn reduce_repr(&self, mut prod: Vec<Repr>) -> Repr {
        let base = self.base.as_ref().unwrap();
        let m = self.degree;
        let f = self.def_poly.as_ref().unwrap();
        for k in (m..prod.len()).rev() {
            let c = std::mem::replace(&mut prod[k], base.zero_repr());
            if base.is_exact_zero_repr(&c) {
                continue;
            }
            for i in 0..m {
                let fi = &f.coeff_ref(i).repr;
                if base.is_exact_zero_repr(fi) {
                    continue;
                }
                let t = base.mul_repr(&c, fi);
                prod[k - m + i] = base.add_repr(&prod[k - m + i], &t, true);
            }
        }
        prod.truncate(m);
        Repr::X(prod)
    }

    pub(crate) fn with_abs_repr(&self, r: &Repr, k: &ExtVal) -> Result<Repr> {
        match (r, &self.base) {
            (Repr::P(d), None) => {
                let k = match k {
                    ExtVal::PosInf => return Ok(r.clone()),
                    ExtVal::NegInf => return Err(Error::precision("absolute precision -Inf")),
                    ExtVal::Fin(q) => q.ceil().to_integer(),
                };
                let k: i64 = i64::try_from(k).map_err(|_| Error::precision("precision out of range"))?;
                if let Some(have) = d.abs() {
                    if k > have {
                        return Err(Error::precision(format!(
                            "requested absolute precision {k} exceeds known {have}"
                        )));
                    }
                }
                Ok(Repr::P(d.with_abs(k, &self.pp)?))
            }
            (Repr::X(cs), Some(b)) => {
                if *k > self.abs_repr(r) {
                    return Err(Error::precision("requested precision exceeds known precision"));
                }
                let mut out = Vec::with_capacity(cs.len());
                for (i, c) in cs.iter().enumerate() {
                    let ki = match k {
                        ExtVal::Fin(q) => ExtVal::Fin(q - &self.gen_val * BigInt::from(i)),
                        other => other.clone(),
                    };
                    let have = b.abs_repr(c);
                    out.push(if ki >= have { c.clone() } else { b.with_abs_repr(c, &ki)? });
                }
                Ok(Repr::X(out))
            }
            _ => unreachable!("mixed representations"),
        }
    }

    pub(crate) fn render_repr(&self, r: &Repr) -> String {
        match r {
            Repr::P(d) => d.render(self.p()),
            Repr::X(cs) => {
                let b = self.base.as_ref().unwrap();
                let parts: Vec<String> = cs
                    .iter()
                    .enumerate()
                    .map(|(i, c)| match i {
                        0 => format!("({})", b.render_repr(c)),
                        1 => format!("({})*a", b.render_repr(c)),
                        _ => format!("({})*a^{i}", b.render_repr(c)),
                    })
                    .collect();
                parts.join(" + ")
            }
        }
    }
}

/// An element of an [`ApproxField`].
#[derive(Clone)]
pub struct ApproxElt {
    field: Arc<ApproxField>,
    pub(crate) repr: Repr,
}

impl fmt::Debug for ApproxElt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.field.render_repr(&self.repr))
    }
}

impl fmt::Display for ApproxElt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.field.render_repr(&self.repr))
    }
}

impl PartialEq for ApproxElt {
    fn eq(&self, other: &Self) -> bool {
        self.field.compatible(&other.field) && self.repr == other.repr
    }
}

impl ApproxElt {
    pub(crate) fn from_repr(field: &Arc<ApproxField>, repr: Repr) -> ApproxElt {
        ApproxElt { field: field.clone(), repr }
    }

    pub fn field(&self) -> &Arc<ApproxField> {
        &self.field
    }

    pub fn zero(field: &Arc<ApproxField>) -> ApproxElt {
        Self::from_repr(field, field.zero_repr())
    }

    pub fn one(field: &Arc<ApproxField>) -> ApproxElt {
        Self::from_rational(field, &BigRational::one())
    }

    /// A prime-level digit placed in the field.
    pub fn from_pdig(field: &Arc<ApproxField>, d: PDig) -> ApproxElt {
        let prime = ApproxField::prime_with(field.pp.clone(), field.cap);
        let repr = field.embed_repr(&prime, &Repr::P(d)).expect("prime field embeds everywhere");
        Self::from_repr(field, repr)
    }

    /// A rational known to full relative capacity.
    pub fn from_rational(field: &Arc<ApproxField>, q: &BigRational) -> ApproxElt {
        Self::from_pdig(field, PDig::from_rational(&field.pp, q, field.cap))
    }

    pub fn from_int(field: &Arc<ApproxField>, n: i64) -> ApproxElt {
        Self::from_rational(field, &BigRational::from_integer(BigInt::from(n)))
    }

    /// A rational known to absolute precision `k`, capped by capacity.
    pub fn from_rational_abs(field: &Arc<ApproxField>, q: &BigRational, k: i64) -> ApproxElt {
        if q.is_zero() {
            return Self::zero(field);
        }
        let d = PDig::from_rational(&field.pp, q, field.cap);
        let v = d.wv().unwrap();
        let d = if v >= k {
            PDig::weak(k)
        } else {
            let r = ((k - v) as u64).min(field.cap);
            d.with_abs(v + r as i64, &field.pp).expect("within capacity")
        };
        Self::from_pdig(field, d)
    }

    /// The generator of an extension (`p` for `Q_p`).
    pub fn generator(field: &Arc<ApproxField>) -> ApproxElt {
        match &field.base {
            None => Self::from_int(field, field.p() as i64),
            Some(b) => {
                let mut cs = vec![b.zero_repr(); field.degree];
                if field.degree == 1 {
                    let f0 = field.def_poly.as_ref().unwrap().coeff(0);
                    return Self::from_repr(field, Repr::X(vec![f0.neg().repr]));
                }
                cs[1] = ApproxElt::one(b).repr;
                Self::from_repr(field, Repr::X(cs))
            }
        }
    }

    /// A uniformizer of the field.
    pub fn uniformizer(field: &Arc<ApproxField>) -> ApproxElt {
        match field.kind {
            FieldKind::Prime => Self::generator(field),
            FieldKind::Eisen => Self::generator(field),
            FieldKind::Inert => {
                let b = field.base.as_ref().unwrap();
                let u = Self::uniformizer(b);
                field.embed(&u).expect("base embeds")
            }
        }
    }

    /// Coefficients in the power basis (extensions only).
    pub fn coeffs(&self) -> Vec<ApproxElt> {
        match (&self.repr, &self.field.base) {
            (Repr::X(cs), Some(b)) => cs.iter().map(|c| ApproxElt::from_repr(b, c.clone())).collect(),
            _ => vec![self.clone()],
        }
    }

    pub fn from_coeffs(field: &Arc<ApproxField>, cs: &[ApproxElt]) -> Result<ApproxElt> {
        let b = field
            .base
            .as_ref()
            .ok_or_else(|| Error::Invalid("prime field has no coefficient basis".into()))?;
        if cs.len() != field.degree {
            return Err(Error::Invalid("wrong number of coefficients".into()));
        }
        let mut out = Vec::with_capacity(cs.len());
        for c in cs {
            out.push(b.embed_repr(&c.field, &c.repr)?);
        }
        Ok(Self::from_repr(field, Repr::X(out)))
    }

    pub fn pdig(&self) -> Option<&PDig> {
        match &self.repr {
            Repr::P(d) => Some(d),
            _ => None,
        }
    }

    fn check(&self, other: &ApproxElt) -> Result<()> {
        if self.field.compatible(&other.field) {
            Ok(())
        } else {
            Err(Error::FieldMismatch(format!("{:?} vs {:?}", self.field, other.field)))
        }
    }

    pub fn add(&self, other: &ApproxElt) -> Result<ApproxElt> {
        self.check(other)?;
        Ok(Self::from_repr(&self.field, self.field.add_repr(&self.repr, &other.repr, false)))
    }

    pub fn sub(&self, other: &ApproxElt) -> Result<ApproxElt> {
        self.check(other)?;
        Ok(Self::from_repr(&self.field, self.field.add_repr(&self.repr, &other.repr, true)))
    }

    pub fn neg(&self) -> ApproxElt {
        Self::from_repr(&self.field, self.field.neg_repr(&self.repr))
    }

    pub fn mul(&self, other: &ApproxElt) -> Result<ApproxElt> {
        self.check(other)?;
        Ok(Self::from_repr(&self.field, self.field.mul_repr(&self.repr, &other.repr)))
    }

    pub fn inverse(&self) -> Result<ApproxElt> {
        if self.is_weakly_zero() {
            return Err(Error::WeaklyZeroDivision);
        }
        match &self.repr {
            Repr::P(d) => {
                let one = PDig::from_rational(&self.field.pp, &BigRational::one(), self.field.cap);
                Ok(Self::from_repr(&self.field, Repr::P(one.div(d, &self.field.pp)?)))
            }
            Repr::X(_) => {
                let b = self.field.base.as_ref().unwrap();
                let m = self.field.degree;
                let mut cols: Vec<Vec<ApproxElt>> = Vec::with_capacity(m);
                let mut t = self.clone();
                let gen = Self::generator(&self.field);
                for j in 0..m {
                    if j > 0 {
                        t = t.mul(&gen)?;
                    }
                    cols.push(t.coeffs());
                }
                let mat: Vec<Vec<ApproxElt>> =
                    (0..m).map(|i| (0..m).map(|j| cols[j][i].clone()).collect()).collect();
                let mut rhs = vec![ApproxElt::zero(b); m];
                rhs[0] = ApproxElt::one(b);
                let y = super::linalg::solve(&mat, &rhs)?;
                Self::from_coeffs(&self.field, &y)
            }
        }
    }

    pub fn div(&self, other: &ApproxElt) -> Result<ApproxElt> {
        self.check(other)?;
        if other.is_weakly_zero() {
            return Err(Error::WeaklyZeroDivision);
        }
        if let (Repr::P(x), Repr::P(y)) = (&self.repr, &other.repr) {
            return Ok(Self::from_repr(&self.field, Repr::P(x.div(y, &self.field.pp)?)));
        }
        self.mul(&other.inverse()?)
    }

    pub fn pow(&self, k: i64) -> Result<ApproxElt> {
        let mut base = if k < 0 { self.inverse()? } else { self.clone() };
        let mut e = k.unsigned_abs();
        let mut acc = Self::one(&self.field);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base)?;
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base)?;
            }
        }
        Ok(acc)
    }

    pub fn weak_val(&self) -> ExtVal {
        self.field.wv_repr(&self.repr)
    }

    pub fn abs_prec(&self) -> ExtVal {
        self.field.abs_repr(&self.repr)
    }

    /// Absolute minus weak valuation (`0` for the exact zero).
    pub fn rel_prec(&self) -> ExtVal {
        self.abs_prec().sub(&self.weak_val())
    }

    pub fn is_weakly_zero(&self) -> bool {
        self.field.is_wz_repr(&self.repr)
    }

    pub fn is_exact_zero(&self) -> bool {
        self.field.is_exact_zero_repr(&self.repr)
    }

    pub fn is_weakly_equal(&self, other: &ApproxElt) -> Result<bool> {
        Ok(self.sub(other)?.is_weakly_zero())
    }

    /// Truncates to absolute precision `k` (absolute units).
    pub fn with_abs(&self, k: &ExtVal) -> Result<ApproxElt> {
        Ok(Self::from_repr(&self.field, self.field.with_abs_repr(&self.repr, k)?))
    }

    /// Moves into a field of the same shape (possibly another capacity), or
    /// embeds from a subfield of the tower.
    pub fn coerce_to(&self, field: &Arc<ApproxField>) -> Result<ApproxElt> {
        Ok(Self::from_repr(field, field.embed_repr(&self.field, &self.repr)?))
    }

    /// Multiplies by `π^k` for the field's uniformizer.
    pub fn mul_pi_pow(&self, k: i64) -> Result<ApproxElt> {
        if self.field.kind == FieldKind::Prime {
            return Ok(match &self.repr {
                Repr::P(d) => Self::from_repr(&self.field, Repr::P(d.shift(k))),
                _ => unreachable!(),
            });
        }
        let u = Self::uniformizer(&self.field);
        self.mul(&u.pow(k)?)
    }

    pub fn render(&self) -> String {
        self.field.render_repr(&self.repr)
    }
}

impl ApproxField {
    /// Embeds an element of this field or of a subfield in the tower.
    pub fn embed(self: &Arc<Self>, x: &ApproxElt) -> Result<ApproxElt> {
        x.coerce_to(self)
    }
}

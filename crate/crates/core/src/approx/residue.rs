//! Residue fields `F_{p^f}`, quotient rings `O/π^n`, and the maps into them.

use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};

use super::digits::PDig;
use super::field::{ApproxElt, ApproxField, FieldKind, Repr};
use super::linalg::weak_zero;
use crate::error::{Error, Result};
use crate::val::ExtVal;

/// Largest residue field searched exhaustively.
pub const EXHAUSTIVE_LIMIT: u64 = 1 << 20;

fn mulmod(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

fn powmod(mut a: u64, mut e: u64, p: u64) -> u64 {
    let mut acc = 1 % p;
    a %= p;
    while e > 0 {
        if e & 1 == 1 {
            acc = mulmod(acc, a, p);
        }
        a = mulmod(a, a, p);
        e >>= 1;
    }
    acc
}

// Dense polynomials over F_p, low degree first, no trailing zeros.

fn fp_trim(mut a: Vec<u64>) -> Vec<u64> {
    while a.last() == Some(&0) {
        a.pop();
    }
    a
}

fn fp_mul(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0u64; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] = (out[i + j] + mulmod(x, y, p)) % p;
        }
    }
    fp_trim(out)
}

fn fp_rem(a: &[u64], m: &[u64], p: u64) -> Vec<u64> {
    let mut r = fp_trim(a.to_vec());
    let dm = m.len() - 1;
    let inv = powmod(m[dm], p - 2, p);
    while r.len() > dm {
        let k = r.len() - 1 - dm;
        let c = mulmod(*r.last().unwrap(), inv, p);
        for (i, &mi) in m.iter().enumerate() {
            r[k + i] = (r[k + i] + p - mulmod(c, mi, p)) % p;
        }
        r = fp_trim(r);
    }
    r
}

fn fp_gcd(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let (mut a, mut b) = (fp_trim(a.to_vec()), fp_trim(b.to_vec()));
    while !b.is_empty() {
        let r = fp_rem(&a, &b, p);
        a = b;
        b = r;
    }
    a
}

fn fp_sub(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let n = a.len().max(b.len());
    let out = (0..n)
        .map(|i| {
            let x = a.get(i).copied().unwrap_or(0);
            let y = b.get(i).copied().unwrap_or(0);
            (x + p - y) % p
        })
        .collect();
    fp_trim(out)
}

fn fp_powmod(base: &[u64], mut e: BigUint, m: &[u64], p: u64) -> Vec<u64> {
    let mut acc = vec![1u64];
    let mut b = fp_rem(base, m, p);
    let two = BigUint::from(2u32);
    while !e.is_zero() {
        if (&e % &two) == BigUint::from(1u32) {
            acc = fp_rem(&fp_mul(&acc, &b, p), m, p);
        }
        b = fp_rem(&fp_mul(&b, &b, p), m, p);
        e /= &two;
    }
    acc
}

/// Irreducibility over `F_p` via the Ben-Or test.
pub fn is_irreducible_fp(f: &[u64], p: u64) -> bool {
    let f = fp_trim(f.iter().map(|c| c % p).collect());
    if f.len() < 2 {
        return false;
    }
    let d = f.len() - 1;
    if d == 1 {
        return true;
    }
    let x = vec![0u64, 1];
    let mut xp = x.clone();
    for _ in 1..=d / 2 {
        xp = fp_powmod(&xp, BigUint::from(p), &f, p);
        let g = fp_gcd(&f, &fp_sub(&xp, &x, p), p);
        if g.len() > 1 {
            return false;
        }
    }
    true
}

/// Element of `F_{p^f}`: coordinates in the basis `1, t, ..., t^{f-1}`.
pub type FElt = Vec<u64>;

/// Polynomial over a finite field, low degree first.
pub type FPoly = Vec<FElt>;

/// `F_p[t]/(g)` for a monic irreducible `g` of degree `f`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteField {
    p: u64,
    modulus: Vec<u64>,
}

impl FiniteField {
    pub fn prime(p: u64) -> FiniteField {
        FiniteField { p, modulus: vec![0, 1] }
    }

    pub fn new(p: u64, modulus: Vec<u64>) -> Result<FiniteField> {
        let modulus = fp_trim(modulus.into_iter().map(|c| c % p).collect());
        if modulus.last() != Some(&1) || !is_irreducible_fp(&modulus, p) {
            return Err(Error::Invalid("modulus must be monic irreducible".into()));
        }
        Ok(FiniteField { p, modulus })
    }

    pub fn p(&self) -> u64 {
        self.p
    }
    pub fn degree(&self) -> usize {
        self.modulus.len() - 1
    }
    pub fn modulus(&self) -> &[u64] {
        &self.modulus
    }
    pub fn size(&self) -> u64 {
        self.p.saturating_pow(self.degree() as u32)
    }

    fn pad(&self, mut a: Vec<u64>) -> FElt {
        a.resize(self.degree(), 0);
        a
    }

    pub fn zero(&self) -> FElt {
        vec![0; self.degree()]
    }
    pub fn one(&self) -> FElt {
        self.from_int(1)
    }
    pub fn from_int(&self, n: i64) -> FElt {
        let mut z = self.zero();
        z[0] = n.rem_euclid(self.p as i64) as u64;
        z
    }
    /// The class of `t`.
    pub fn gen(&self) -> FElt {
        self.pad(fp_rem(&[0, 1], &self.modulus, self.p))
    }
    pub fn is_zero(&self, a: &FElt) -> bool {
        a.iter().all(|&c| c == 0)
    }

    pub fn add(&self, a: &FElt, b: &FElt) -> FElt {
        a.iter().zip(b).map(|(x, y)| (x + y) % self.p).collect()
    }
    pub fn sub(&self, a: &FElt, b: &FElt) -> FElt {
        a.iter().zip(b).map(|(x, y)| (x + self.p - y) % self.p).collect()
    }
    pub fn neg(&self, a: &FElt) -> FElt {
        a.iter().map(|x| (self.p - x) % self.p).collect()
    }
    pub fn mul(&self, a: &FElt, b: &FElt) -> FElt {
        self.pad(fp_rem(&fp_mul(&fp_trim(a.clone()), &fp_trim(b.clone()), self.p), &self.modulus, self.p))
    }
    pub fn pow(&self, a: &FElt, e: u64) -> FElt {
        self.pad(fp_powmod(&fp_trim(a.clone()), BigUint::from(e), &self.modulus, self.p))
    }
    pub fn inv(&self, a: &FElt) -> Result<FElt> {
        if self.is_zero(a) {
            return Err(Error::WeaklyZeroDivision);
        }
        Ok(self.pow(a, self.size() - 2))
    }

    pub fn from_index(&self, mut i: u64) -> FElt {
        let mut out = self.zero();
        for c in out.iter_mut() {
            *c = i % self.p;
            i /= self.p;
        }
        out
    }

    pub fn index(&self, a: &FElt) -> u64 {
        a.iter().rev().fold(0, |acc, &c| acc * self.p + c)
    }

    pub fn elements(&self) -> Result<Vec<FElt>> {
        if self.size() > EXHAUSTIVE_LIMIT {
            return Err(Error::Unsupported(format!("residue field of size {} too large to search", self.size())));
        }
        Ok((0..self.size()).map(|i| self.from_index(i)).collect())
    }

    // Polynomials over this field.

    pub fn poly_trim(&self, mut f: FPoly) -> FPoly {
        while f.last().is_some_and(|c| self.is_zero(c)) {
            f.pop();
        }
        f
    }

    pub fn poly_eval(&self, f: &FPoly, x: &FElt) -> FElt {
        f.iter().rev().fold(self.zero(), |acc, c| self.add(&self.mul(&acc, x), c))
    }

    pub fn poly_mul(&self, a: &FPoly, b: &FPoly) -> FPoly {
        if a.is_empty() || b.is_empty() {
            return Vec::new();
        }
        let mut out = vec![self.zero(); a.len() + b.len() - 1];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                out[i + j] = self.add(&out[i + j], &self.mul(x, y));
            }
        }
        self.poly_trim(out)
    }

    /// Division with remainder by a nonzero polynomial.
    pub fn poly_divrem(&self, a: &FPoly, b: &FPoly) -> Result<(FPoly, FPoly)> {
        let b = self.poly_trim(b.clone());
        if b.is_empty() {
            return Err(Error::WeaklyZeroDivision);
        }
        let mut r = self.poly_trim(a.clone());
        let db = b.len() - 1;
        let inv = self.inv(b.last().unwrap())?;
        if r.len() <= db {
            return Ok((Vec::new(), r));
        }
        let mut q = vec![self.zero(); r.len() - db];
        while r.len() > db {
            let k = r.len() - 1 - db;
            let c = self.mul(r.last().unwrap(), &inv);
            for (i, bi) in b.iter().enumerate() {
                r[k + i] = self.sub(&r[k + i], &self.mul(&c, bi));
            }
            q[k] = c;
            r = self.poly_trim(r);
        }
        Ok((self.poly_trim(q), r))
    }

    /// Roots with multiplicities, by exhaustive search.
    pub fn roots(&self, f: &FPoly) -> Result<Vec<(FElt, usize)>> {
        let mut f = self.poly_trim(f.clone());
        if f.is_empty() {
            return Err(Error::Invalid("roots of the zero polynomial".into()));
        }
        let mut out = Vec::new();
        for x in self.elements()? {
            let lin = vec![self.neg(&x), self.one()];
            let mut m = 0;
            while f.len() > 1 && self.is_zero(&self.poly_eval(&f, &x)) {
                f = self.poly_divrem(&f, &lin)?.0;
                m += 1;
            }
            if m > 0 {
                out.push((x, m));
            }
        }
        Ok(out)
    }

    fn monic_of_degree(&self, d: usize, idx: u64) -> FPoly {
        let q = self.size();
        let mut i = idx;
        let mut out = Vec::with_capacity(d + 1);
        for _ in 0..d {
            out.push(self.from_index(i % q));
            i /= q;
        }
        out.push(self.one());
        out
    }

    /// Factorization into powers of monic irreducibles (plus the leading coefficient),
    /// by trial division over all monic polynomials of increasing degree.
    pub fn factor(&self, f: &FPoly) -> Result<(FElt, Vec<(FPoly, usize)>)> {
        let f = self.poly_trim(f.clone());
        if f.is_empty() {
            return Err(Error::Invalid("factorization of the zero polynomial".into()));
        }
        let lead = f.last().unwrap().clone();
        let li = self.inv(&lead)?;
        let mut rest: FPoly = f.iter().map(|c| self.mul(c, &li)).collect();
        let q = self.size();
        let mut out = Vec::new();
        let mut d = 1;
        while rest.len() > 1 {
            let deg = rest.len() - 1;
            if 2 * d > deg {
                out.push((rest.clone(), 1));
                break;
            }
            let count = q.checked_pow(d as u32).filter(|&c| c <= EXHAUSTIVE_LIMIT).ok_or_else(|| {
                Error::Unsupported("residual factorization exceeds the exhaustive search bound".into())
            })?;
            for idx in 0..count {
                let g = self.monic_of_degree(d, idx);
                let mut m = 0;
                loop {
                    let (qq, r) = self.poly_divrem(&rest, &g)?;
                    if !r.is_empty() {
                        break;
                    }
                    rest = qq;
                    m += 1;
                }
                if m > 0 {
                    out.push((g, m));
                }
                if rest.len() - 1 < 2 * d {
                    break;
                }
            }
            d += 1;
        }
        // merge a trailing cofactor equal to an earlier factor
        let mut merged: Vec<(FPoly, usize)> = Vec::new();
        for (g, m) in out {
            if let Some(e) = merged.iter_mut().find(|(h, _)| *h == g) {
                e.1 += m;
            } else {
                merged.push((g, m));
            }
        }
        merged.sort_by(|a, b| a.0.len().cmp(&b.0.len()).then_with(|| a.0.cmp(&b.0)));
        Ok((lead, merged))
    }
}

/// `O/π^n` for `Q_p` or a single inertial step over `Q_p`: `(Z/p^n)[t]/(g)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuotientRing {
    pub p: u64,
    pub n: u64,
    pub modulus: Vec<BigUint>,
}

impl QuotientRing {
    pub fn degree(&self) -> usize {
        self.modulus.len() - 1
    }

    pub fn size(&self) -> BigUint {
        BigUint::from(self.p).pow((self.n * self.degree() as u64) as u32)
    }
}

impl ApproxField {
    /// The inertial step of the tower, if any.
    fn inert_step(self: &Arc<Self>) -> Result<Option<Arc<ApproxField>>> {
        if self.inert_steps() > 1 {
            return Err(Error::Unsupported("towers with more than one inertial step".into()));
        }
        let mut cur = Some(self.clone());
        while let Some(f) = cur {
            if f.kind() == FieldKind::Inert {
                return Ok(Some(f));
            }
            cur = f.base().cloned();
        }
        Ok(None)
    }

    pub fn residue_field(self: &Arc<Self>) -> Result<FiniteField> {
        match self.inert_step()? {
            None => Ok(FiniteField::prime(self.p())),
            Some(step) => {
                let b = step.base().unwrap();
                let g = step.def_poly().unwrap();
                let mut red = Vec::with_capacity(g.len());
                for c in g.coeffs() {
                    red.push(b.residue(c)?[0]);
                }
                FiniteField::new(self.p(), red)
            }
        }
    }

    /// The reduction map `O -> F`.
    pub fn residue(&self, x: &ApproxElt) -> Result<FElt> {
        let unit = ExtVal::Fin(self.unif_val());
        if !x.is_weakly_zero() && x.weak_val() < ExtVal::zero() {
            return Err(Error::Invalid("residue of an element of negative valuation".into()));
        }
        if x.abs_prec() < unit {
            return Err(Error::precision("residue needs absolute precision at least 1"));
        }
        Ok(self.residue_repr(&x.repr))
    }

    fn residue_repr(&self, r: &Repr) -> FElt {
        match (r, self.base()) {
            (Repr::P(d), _) => vec![match d {
                PDig::Num { v: 0, r, u } if *r > 0 => (u % BigUint::from(self.p())).to_u64().unwrap(),
                _ => 0,
            }],
            (Repr::X(cs), Some(b)) => match self.kind() {
                FieldKind::Eisen => b.residue_repr(&cs[0]),
                _ => cs.iter().map(|c| b.residue_repr(c)[0]).collect(),
            },
            _ => unreachable!(),
        }
    }

    /// A lift of a residue class, known to absolute precision exactly `1/e`.
    pub fn lift_residue(self: &Arc<Self>, c: &FElt) -> Result<ApproxElt> {
        let repr = self.lift_repr(c)?;
        Ok(ApproxElt::from_repr(self, repr))
    }

    fn lift_repr(self: &Arc<Self>, c: &FElt) -> Result<Repr> {
        match self.base() {
            None => {
                let a = c.first().copied().unwrap_or(0) % self.p();
                Ok(Repr::P(if a == 0 {
                    PDig::weak(1)
                } else {
                    PDig::Num { v: 0, r: 1, u: BigUint::from(a) }
                }))
            }
            Some(b) => match self.kind() {
                FieldKind::Eisen => {
                    let mut cs = vec![b.lift_repr(c)?];
                    for _ in 1..self.degree() {
                        cs.push(weak_zero(b, &ExtVal::zero()).repr);
                    }
                    Ok(Repr::X(cs))
                }
                _ => {
                    if c.len() != self.degree() {
                        return Err(Error::Invalid("residue element has the wrong length".into()));
                    }
                    let cs = c.iter().map(|&ci| b.lift_repr(&vec![ci])).collect::<Result<_>>()?;
                    Ok(Repr::X(cs))
                }
            },
        }
    }

    fn quotient_shape_ok(self: &Arc<Self>, n: u64) -> Result<()> {
        if n == 0 {
            return Err(Error::Invalid("quotient needs n >= 1".into()));
        }
        if n > self.capacity() {
            return Err(Error::precision("quotient precision exceeds capacity"));
        }
        let ok = match self.base() {
            None => true,
            Some(b) => self.kind() == FieldKind::Inert && b.base().is_none(),
        };
        if ok || n == 1 {
            Ok(())
        } else {
            Err(Error::Unsupported("O/π^n for n > 1 needs Q_p or one inertial step over Q_p".into()))
        }
    }

    pub fn quotient(self: &Arc<Self>, n: u64) -> Result<QuotientRing> {
        self.quotient_shape_ok(n)?;
        if n == 1 {
            let f = self.residue_field()?;
            return Ok(QuotientRing {
                p: self.p(),
                n,
                modulus: f.modulus().iter().map(|&c| BigUint::from(c)).collect(),
            });
        }
        let modulus = match self.base() {
            None => vec![BigUint::zero(), BigUint::from(1u32)],
            Some(b) => {
                let mut out = Vec::new();
                for c in self.def_poly().unwrap().coeffs() {
                    out.push(b.q_map(c, n)?[0].clone());
                }
                out
            }
        };
        Ok(QuotientRing { p: self.p(), n, modulus })
    }

    /// The map `O -> O/π^n`.
    pub fn q_map(self: &Arc<Self>, x: &ApproxElt, n: u64) -> Result<Vec<BigUint>> {
        self.quotient_shape_ok(n)?;
        if n == 1 {
            return Ok(self.residue(x)?.into_iter().map(BigUint::from).collect());
        }
        if !x.is_weakly_zero() && x.weak_val() < ExtVal::zero() {
            return Err(Error::Invalid("quotient map on an element of negative valuation".into()));
        }
        if x.abs_prec() < ExtVal::int(n as i64) {
            return Err(Error::precision("quotient map needs more absolute precision"));
        }
        let pp = self.powers().clone();
        let digit = |d: &PDig| -> BigUint {
            match d {
                PDig::Num { v, r, u } if *r > 0 && *v < n as i64 => {
                    pp.reduce(u * pp.pow(*v as u64).as_ref(), n)
                }
                _ => BigUint::zero(),
            }
        };
        Ok(match &x.repr {
            Repr::P(d) => vec![digit(d)],
            Repr::X(cs) => cs
                .iter()
                .map(|c| match c {
                    Repr::P(d) => digit(d),
                    _ => unreachable!(),
                })
                .collect(),
        })
    }

    /// A lift of a class in `O/π^n`, known to absolute precision exactly `n`.
    pub fn q_inv(self: &Arc<Self>, c: &[BigUint], n: u64) -> Result<ApproxElt> {
        self.quotient_shape_ok(n)?;
        if n == 1 {
            let c: FElt = c.iter().map(|x| (x % BigUint::from(self.p())).to_u64().unwrap()).collect();
            return self.lift_residue(&c);
        }
        let pp = self.powers().clone();
        let digit = |x: &BigUint| -> PDig {
            let x = pp.reduce(x.clone(), n);
            if x.is_zero() {
                return PDig::weak(n as i64);
            }
            let (t, w) = pp.split_val(x);
            PDig::from_unit(&pp, t as i64, w, n - t)
        };
        let repr = match self.base() {
            None => Repr::P(digit(&c[0])),
            Some(_) => {
                if c.len() != self.degree() {
                    return Err(Error::Invalid("quotient element has the wrong length".into()));
                }
                Repr::X(c.iter().map(|x| Repr::P(digit(x))).collect())
            }
        };
        Ok(ApproxElt::from_repr(self, repr))
    }
}

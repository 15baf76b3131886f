//! Prime-level digits `p^v (u + p^r Z_p)` with `u` a unit mod `p^r`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Cached powers of a fixed prime and the reductions built on them.
#[derive(Debug)]
pub struct PrimePowers {
    p: u64,
    p_big: BigUint,
    log2p: f64,
    cache: Mutex<HashMap<u64, Arc<BigUint>>>,
}

impl PrimePowers {
    pub fn new(p: u64) -> Self {
        PrimePowers {
            p,
            p_big: BigUint::from(p),
            log2p: (p as f64).log2(),
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn pow(&self, e: u64) -> Arc<BigUint> {
        if let Some(x) = self.cache.lock().unwrap().get(&e) {
            return x.clone();
        }
        let val = Arc::new(if self.p == 2 {
            BigUint::one() << e
        } else {
            self.p_big.pow(e as u32)
        });
        let mut c = self.cache.lock().unwrap();
        if c.len() > 4096 {
            c.clear();
        }
        c.insert(e, val.clone());
        val
    }

    /// Whether `x < p^e` is certain from bit length alone.
    fn surely_below(&self, x: &BigUint, e: u64) -> bool {
        let bound = (e as f64 * self.log2p).floor() - 1.0;
        bound >= 0.0 && (x.bits() as f64) <= bound
    }

    /// `x mod p^e`.
    pub fn reduce(&self, x: BigUint, e: u64) -> BigUint {
        if e == 0 {
            return BigUint::zero();
        }
        if self.p == 2 {
            if x.bits() <= e {
                return x;
            }
            let words = e.div_ceil(32) as usize;
            let mut digits: Vec<u32> = x.iter_u32_digits().take(words).collect();
            let rem = (e % 32) as u32;
            if rem != 0 {
                if let Some(last) = digits.last_mut() {
                    *last &= (1u32 << rem) - 1;
                }
            }
            return BigUint::new(digits);
        }
        if self.surely_below(&x, e) {
            return x;
        }
        x % self.pow(e).as_ref()
    }

    /// Splits a nonzero `x` as `p^t * w` with `p ∤ w`.
    pub fn split_val(&self, x: BigUint) -> (u64, BigUint) {
        debug_assert!(!x.is_zero());
        if self.p == 2 {
            let t = x.trailing_zeros().unwrap_or(0);
            return (t, x >> t);
        }
        let mut t = 0;
        let mut x = x;
        loop {
            let (q, r) = x.div_rem(&self.p_big);
            if !r.is_zero() {
                return (t, x);
            }
            x = q;
            t += 1;
        }
    }

    /// Valuation of a nonzero integer.
    pub fn val_int(&self, x: &BigInt) -> u64 {
        self.split_val(x.magnitude().clone()).0
    }

    /// Inverse of a unit modulo `p^e` by Newton lifting.
    pub fn inv_mod(&self, a: &BigUint, e: u64) -> BigUint {
        debug_assert!(e > 0);
        let a0 = (a % &self.p_big).to_u64().unwrap();
        let mut x = BigUint::from(inv_small(a0, self.p));
        let mut k = 1u64;
        while k < e {
            k = (2 * k).min(e);
            let m = self.pow(k);
            let ax = (a * &x) % m.as_ref();
            let two = BigUint::from(2u32);
            let corr = if ax <= two {
                &two - &ax
            } else {
                m.as_ref() + &two - &ax
            };
            x = (x * corr) % m.as_ref();
        }
        self.reduce(x, e)
    }

    /// Residue of a signed integer modulo `p^e`.
    pub fn mod_signed(&self, x: &BigInt, e: u64) -> BigUint {
        let m = self.pow(e);
        let r = self.reduce(x.magnitude().clone(), e);
        if x.sign() == Sign::Minus && !r.is_zero() {
            m.as_ref() - r
        } else {
            r
        }
    }
}

fn inv_small(a: u64, p: u64) -> u64 {
    let (mut t, mut new_t) = (0i128, 1i128);
    let (mut r, mut new_r) = (p as i128, a as i128);
    while new_r != 0 {
        let q = r / new_r;
        (t, new_t) = (new_t, t - q * new_t);
        (r, new_r) = (new_r, r - q * new_r);
    }
    debug_assert_eq!(r, 1, "not a unit");
    t.rem_euclid(p as i128) as u64
}

/// A prime-level approximation.
///
/// `Num { v, r: 0, .. }` is the weakly zero class `p^v Z_p`; `Zero` is the exact zero.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum PDig {
    Zero,
    Num { v: i64, r: u64, u: BigUint },
}

impl PDig {
    pub fn weak(k: i64) -> PDig {
        PDig::Num {
            v: k,
            r: 0,
            u: BigUint::zero(),
        }
    }

    pub fn is_exact_zero(&self) -> bool {
        matches!(self, PDig::Zero)
    }

    pub fn is_weakly_zero(&self) -> bool {
        match self {
            PDig::Zero => true,
            PDig::Num { r, .. } => *r == 0,
        }
    }

    /// Weak valuation; `None` stands for `+∞`.
    pub fn wv(&self) -> Option<i64> {
        match self {
            PDig::Zero => None,
            PDig::Num { v, .. } => Some(*v),
        }
    }

    /// Absolute precision; `None` stands for `+∞`.
    pub fn abs(&self) -> Option<i64> {
        match self {
            PDig::Zero => None,
            PDig::Num { v, r, .. } => Some(*v + *r as i64),
        }
    }

    pub fn rel(&self) -> u64 {
        match self {
            PDig::Zero => 0,
            PDig::Num { r, .. } => *r,
        }
    }

    /// Builds `p^m * s` known modulo `p^k` (`m < k`), normalizing.
    fn from_scaled(pp: &PrimePowers, m: i64, k: i64, s: BigUint) -> PDig {
        if s.is_zero() {
            return PDig::weak(k);
        }
        let (t, w) = pp.split_val(s);
        let v = m + t as i64;
        if v >= k {
            return PDig::weak(k);
        }
        let r = (k - v) as u64;
        PDig::Num {
            v,
            r,
            u: pp.reduce(w, r),
        }
    }

    pub fn from_unit(pp: &PrimePowers, v: i64, u: BigUint, r: u64) -> PDig {
        if r == 0 {
            return PDig::weak(v);
        }
        let u = pp.reduce(u, r);
        PDig::from_scaled(pp, v, v + r as i64, u)
    }

    pub fn from_rational(pp: &PrimePowers, q: &BigRational, cap: u64) -> PDig {
        if q.is_zero() {
            return PDig::Zero;
        }
        let (n, d) = (q.numer(), q.denom());
        let (vn, un) = pp.split_val(n.magnitude().clone());
        let (vd, ud) = pp.split_val(d.magnitude().clone());
        let v = vn as i64 - vd as i64;
        if cap == 0 {
            return PDig::weak(v);
        }
        let neg = (n.sign() == Sign::Minus) != (d.sign() == Sign::Minus);
        let inv = pp.inv_mod(&ud, cap);
        let mut u = pp.reduce(pp.reduce(un, cap) * inv, cap);
        if neg && !u.is_zero() {
            u = pp.pow(cap).as_ref() - u;
        }
        PDig::Num { v, r: cap, u }
    }

    /// The integer-scaled representative `p^v u` as a rational.
    pub fn value(&self, p: u64) -> BigRational {
        match self {
            PDig::Zero => BigRational::zero(),
            PDig::Num { v, u, .. } => {
                let u = BigRational::from_integer(BigInt::from(u.clone()));
                let pv = BigRational::from_integer(BigInt::from(p)).pow(*v as i32);
                u * pv
            }
        }
    }

    pub fn neg(&self, pp: &PrimePowers) -> PDig {
        match self {
            PDig::Num { v, r, u } if *r > 0 => PDig::Num {
                v: *v,
                r: *r,
                u: pp.pow(*r).as_ref() - u,
            },
            other => other.clone(),
        }
    }

    pub fn add(&self, other: &PDig, pp: &PrimePowers) -> PDig {
        self.add_signed(other, pp, false)
    }

    pub fn sub(&self, other: &PDig, pp: &PrimePowers) -> PDig {
        self.add_signed(other, pp, true)
    }

    fn add_signed(&self, other: &PDig, pp: &PrimePowers, negate: bool) -> PDig {
        let (vx, rx, ux, vy, ry, uy) = match (self, other) {
            (PDig::Zero, y) => return if negate { y.neg(pp) } else { y.clone() },
            (x, PDig::Zero) => return x.clone(),
            (PDig::Num { v: vx, r: rx, u: ux }, PDig::Num { v: vy, r: ry, u: uy }) => {
                (*vx, *rx, ux, *vy, *ry, uy)
            }
        };
        let k = (vx + rx as i64).min(vy + ry as i64);
        let m = vx.min(vy);
        if m >= k {
            return PDig::weak(k);
        }
        let n = (k - m) as u64;
        let scaled = |v: i64, r: u64, u: &BigUint| -> BigUint {
            let shift = (v - m) as u64;
            if r == 0 || shift >= n {
                BigUint::zero()
            } else if shift == 0 {
                if r <= n {
                    u.clone()
                } else {
                    pp.reduce(u.clone(), n)
                }
            } else {
                pp.reduce(u * pp.pow(shift).as_ref(), n)
            }
        };
        let a = scaled(vx, rx, ux);
        let b = scaled(vy, ry, uy);
        let s = if !negate {
            pp.reduce(a + b, n)
        } else if a >= b {
            a - b
        } else {
            pp.pow(n).as_ref() + a - b
        };
        PDig::from_scaled(pp, m, k, s)
    }

    pub fn mul(&self, other: &PDig, pp: &PrimePowers) -> PDig {
        match (self, other) {
            (PDig::Zero, _) | (_, PDig::Zero) => PDig::Zero,
            (PDig::Num { v: vx, r: rx, u: ux }, PDig::Num { v: vy, r: ry, u: uy }) => {
                let r = (*rx).min(*ry);
                let v = vx + vy;
                if r == 0 {
                    return PDig::weak(v);
                }
                PDig::Num {
                    v,
                    r,
                    u: pp.reduce(ux * uy, r),
                }
            }
        }
    }

    pub fn div(&self, other: &PDig, pp: &PrimePowers) -> Result<PDig> {
        let (vy, ry, uy) = match other {
            PDig::Num { v, r, u } if *r > 0 => (*v, *r, u),
            _ => return Err(Error::WeaklyZeroDivision),
        };
        Ok(match self {
            PDig::Zero => PDig::Zero,
            PDig::Num { v: vx, r: rx, u: ux } => {
                let r = (*rx).min(ry);
                let v = vx - vy;
                if r == 0 {
                    return Ok(PDig::weak(v));
                }
                let inv = pp.inv_mod(&pp.reduce(uy.clone(), r), r);
                PDig::Num {
                    v,
                    r,
                    u: pp.reduce(pp.reduce(ux.clone(), r) * inv, r),
                }
            }
        })
    }

    /// Shifts the valuation by `k` (multiplication by `p^k`).
    pub fn shift(&self, k: i64) -> PDig {
        match self {
            PDig::Zero => PDig::Zero,
            PDig::Num { v, r, u } => PDig::Num {
                v: v + k,
                r: *r,
                u: u.clone(),
            },
        }
    }

    /// Truncates to absolute precision `k`, which must not exceed the known precision.
    pub fn with_abs(&self, k: i64, pp: &PrimePowers) -> Result<PDig> {
        match self {
            PDig::Zero => Ok(PDig::weak(k)),
            PDig::Num { v, r, u } => {
                let have = v + *r as i64;
                if k > have {
                    return Err(Error::precision(format!(
                        "requested absolute precision {k} exceeds known {have}"
                    )));
                }
                if k <= *v {
                    return Ok(PDig::weak(k));
                }
                let r2 = (k - v) as u64;
                Ok(PDig::Num {
                    v: *v,
                    r: r2,
                    u: pp.reduce(u.clone(), r2),
                })
            }
        }
    }

    /// Caps relative precision at `cap` digits.
    pub fn cap_rel(&self, cap: u64, pp: &PrimePowers) -> PDig {
        match self {
            PDig::Num { v, r, u } if *r > cap => PDig::Num {
                v: *v,
                r: cap,
                u: pp.reduce(u.clone(), cap),
            },
            other => other.clone(),
        }
    }

    /// Little-endian base-`p` digits of the unit part (exactly `r` of them).
    pub fn digits(&self, p: u64) -> Vec<u64> {
        match self {
            PDig::Zero => Vec::new(),
            PDig::Num { r, u, .. } => {
                let mut out = Vec::with_capacity(*r as usize);
                let mut x = u.clone();
                let pb = BigUint::from(p);
                for _ in 0..*r {
                    let (q, d) = x.div_rem(&pb);
                    out.push(d.to_u64().unwrap());
                    x = q;
                }
                out
            }
        }
    }

    pub fn render(&self, p: u64) -> String {
        match self {
            PDig::Zero => "0".to_string(),
            PDig::Num { v, r, .. } => {
                let mut terms: Vec<String> = Vec::new();
                for (i, d) in self.digits(p).iter().enumerate() {
                    terms.push(match i {
                        0 => d.to_string(),
                        1 => format!("{d}*{p}"),
                        _ => format!("{d}*{p}^{i}"),
                    });
                }
                terms.push(format!("O({p}^{r})"));
                format!("{p}^{v} * ({})", terms.join(" + "))
            }
        }
    }
}

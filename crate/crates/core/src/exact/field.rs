//! Exact fields and elements.

use std::cell::OnceCell;
use std::fmt;
use std::rc::Rc;
use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::One;

use super::poly::ExactPoly;
use crate::approx::{ApproxElt, ApproxField, FElt, FieldKind, FiniteField, PrimePowers, QuotientRing};
use crate::epoch::{capacity, Approx, ApproxFn, Ctx, EvalArgs, NodeId, NodeSpec};
use crate::error::{Error, Result};
use crate::val::{ExtVal, Rel};

struct FieldInner {
    ctx: Ctx,
    node: NodeId,
    ring: OnceCell<NodeId>,
    kind: FieldKind,
    pp: Arc<PrimePowers>,
    base: Option<ExactField>,
    def_poly: Option<ExactPoly>,
    degree: usize,
    e_abs: u64,
    f_abs: u64,
    /// First epoch at which the defining polynomial was verified.
    ready: u32,
}

/// `Q_p` or an inertial/Eisenstein extension of another exact field.
#[derive(Clone)]
pub struct ExactField(Rc<FieldInner>);

impl fmt::Debug for ExactField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0.base {
            None => write!(f, "Q_{}", self.p()),
            Some(b) => write!(f, "{}({:?}, degree {})", self.kind().name(), b, self.degree()),
        }
    }
}

impl ExactField {
    pub fn prime(ctx: &Ctx, p: u64) -> Result<ExactField> {
        if !crate::approx::is_prime(p) {
            return Err(Error::Invalid(format!("{p} is not prime")));
        }
        let pp = Arc::new(PrimePowers::new(p));
        let pp2 = pp.clone();
        let func: ApproxFn =
            Rc::new(move |a: &EvalArgs| Ok(Approx::Field(ApproxField::prime_with(pp2.clone(), capacity(a.epoch)))));
        let node = ctx.add_node(NodeSpec::structure(vec![], func, "prime field"))?;
        Ok(ExactField(Rc::new(FieldInner {
            ctx: ctx.clone(),
            node,
            ring: OnceCell::new(),
            kind: FieldKind::Prime,
            pp,
            base: None,
            def_poly: None,
            degree: 1,
            e_abs: 1,
            f_abs: 1,
            ready: 1,
        })))
    }

    /// The extension defined by a monic polynomial over this field's base. The
    /// polynomial is checked epoch by epoch until its shape is decided.
    pub fn extension(def_poly: &ExactPoly, kind: FieldKind) -> Result<ExactField> {
        let base = def_poly.field().clone();
        let ctx = base.ctx().clone();
        let m = def_poly.degree();
        if m < 1 || kind == FieldKind::Prime {
            return Err(Error::Invalid("extension needs a defining polynomial of degree >= 1".into()));
        }
        if kind == FieldKind::Inert && base.inert_steps() >= 1 {
            return Err(Error::Unsupported("towers with more than one inertial step".into()));
        }
        let limit = ctx.reachable_max(def_poly.node());
        let mut ready = None;
        for n in 1..=limit {
            let f = def_poly.approx(n)?;
            match ApproxField::check_def_poly(&f, kind)? {
                Some(true) => {
                    ready = Some(n);
                    break;
                }
                Some(false) => {
                    let what = if kind == FieldKind::Eisen { "Eisenstein" } else { "inertial" };
                    return Err(Error::Invalid(format!("defining polynomial is not {what}")));
                }
                None => {}
            }
        }
        let ready = ready.ok_or_else(|| Error::precision("defining polynomial undecided at max epoch"))?;
        let func: ApproxFn =
            Rc::new(move |a: &EvalArgs| Ok(Approx::Field(ApproxField::extension(a.deps[0].as_poly()?.clone(), kind)?)));
        let node = ctx.add_node(NodeSpec::structure(vec![def_poly.node()], func, "extension field"))?;
        let m = m as u64;
        let (e_abs, f_abs) = match kind {
            FieldKind::Eisen => (base.0.e_abs * m, base.0.f_abs),
            _ => (base.0.e_abs, base.0.f_abs * m),
        };
        Ok(ExactField(Rc::new(FieldInner {
            ctx,
            node,
            ring: OnceCell::new(),
            kind,
            pp: base.0.pp.clone(),
            base: Some(base),
            def_poly: Some(def_poly.clone()),
            degree: m as usize,
            e_abs,
            f_abs,
            ready,
        })))
    }

    pub fn ctx(&self) -> &Ctx {
        &self.0.ctx
    }
    pub fn node(&self) -> NodeId {
        self.0.node
    }
    pub fn kind(&self) -> FieldKind {
        self.0.kind
    }
    pub fn p(&self) -> u64 {
        self.0.pp.p()
    }
    pub fn base(&self) -> Option<&ExactField> {
        self.0.base.as_ref()
    }
    pub fn def_poly(&self) -> Option<&ExactPoly> {
        self.0.def_poly.as_ref()
    }
    /// Degree over the immediate base.
    pub fn degree(&self) -> usize {
        self.0.degree
    }
    pub fn absolute_degree(&self) -> u64 {
        self.0.e_abs * self.0.f_abs
    }
    pub fn ramification_index(&self) -> u64 {
        self.0.e_abs
    }
    pub fn inertia_degree(&self) -> u64 {
        self.0.f_abs
    }
    /// `1/e`, the valuation of a uniformizer.
    pub fn unif_val(&self) -> BigRational {
        BigRational::new(BigInt::one(), BigInt::from(self.0.e_abs))
    }
    pub fn inert_steps(&self) -> usize {
        usize::from(self.kind() == FieldKind::Inert) + self.base().map_or(0, |b| b.inert_steps())
    }
    /// Epoch at which the defining polynomial was first confirmed.
    pub fn ready_epoch(&self) -> u32 {
        self.0.ready
    }

    pub fn ptr_eq(&self, other: &ExactField) -> bool {
        Rc::ptr_eq(&self.0, &other.0)
    }

    /// Whether `self` is `other` or one of the fields below it in its tower.
    pub fn is_subfield_of(&self, other: &ExactField) -> bool {
        let mut cur = Some(other);
        while let Some(f) = cur {
            if self.ptr_eq(f) {
                return true;
            }
            cur = f.base();
        }
        false
    }

    /// The fields of the tower from `Q_p` up to `self`.
    pub fn tower(&self) -> Vec<ExactField> {
        let mut out = vec![self.clone()];
        while let Some(b) = out.last().unwrap().base().cloned() {
            out.push(b);
        }
        out.reverse();
        out
    }

    pub fn approx(&self, n: u32) -> Result<Arc<ApproxField>> {
        Ok(self.ctx().epoch_approximation(self.node(), n)?.as_field()?.clone())
    }

    /// The univariate polynomial ring over this field.
    pub fn ring_node(&self) -> NodeId {
        *self.0.ring.get_or_init(|| {
            let func: ApproxFn = Rc::new(|a: &EvalArgs| Ok(Approx::Ring(a.deps[0].as_field()?.clone())));
            self.ctx()
                .add_node(NodeSpec::structure(vec![self.node()], func, "polynomial ring"))
                .expect("field node exists")
        })
    }

    /// A new element node with this field as parent.
    pub fn element(&self, deps: Vec<NodeId>, func: ApproxFn, label: &'static str) -> Result<ExactElt> {
        let node = self.ctx().add_node(NodeSpec::element(self.node(), deps, func, label))?;
        Ok(ExactElt { field: self.clone(), node })
    }

    /// Wraps an existing element node of this field.
    pub fn wrap(&self, node: NodeId) -> ExactElt {
        ExactElt { field: self.clone(), node }
    }

    /// A rational constant, known to absolute precision `2^n` at epoch `n`.
    pub fn from_rational(&self, q: &BigRational) -> Result<ExactElt> {
        let q = q.clone();
        let func: ApproxFn = Rc::new(move |a: &EvalArgs| {
            let f = a.deps[0].as_field()?;
            Ok(Approx::Elt(ApproxElt::from_rational_abs(f, &q, capacity(a.epoch) as i64)))
        });
        self.element(vec![self.node()], func, "constant")
    }

    pub fn from_int(&self, n: i64) -> Result<ExactElt> {
        self.from_rational(&BigRational::from_integer(BigInt::from(n)))
    }

    pub fn zero(&self) -> Result<ExactElt> {
        self.from_int(0)
    }

    pub fn one(&self) -> Result<ExactElt> {
        self.from_int(1)
    }

    /// A constant given by rational coordinates along the tower.
    pub fn from_coords(&self, c: &Coords) -> Result<ExactElt> {
        let c = c.clone();
        let func: ApproxFn = Rc::new(move |a: &EvalArgs| {
            let f = a.deps[0].as_field()?;
            Ok(Approx::Elt(c.build(f, capacity(a.epoch) as i64)?))
        });
        self.element(vec![self.node()], func, "constant")
    }

    /// The generator of the extension (`p` for `Q_p`).
    pub fn generator(&self) -> Result<ExactElt> {
        let func: ApproxFn =
            Rc::new(|a: &EvalArgs| Ok(Approx::Elt(ApproxElt::generator(a.deps[0].as_field()?))));
        self.element(vec![self.node()], func, "generator")
    }

    pub fn uniformizer(&self) -> Result<ExactElt> {
        let func: ApproxFn =
            Rc::new(|a: &EvalArgs| Ok(Approx::Elt(ApproxElt::uniformizer(a.deps[0].as_field()?))));
        self.element(vec![self.node()], func, "uniformizer")
    }

    /// `Σ c_i θ^i` for base-field coefficients `c_i`.
    pub fn from_coeffs(&self, cs: &[ExactElt]) -> Result<ExactElt> {
        let b = self.base().ok_or_else(|| Error::Invalid("prime field has no coefficient basis".into()))?;
        if cs.len() != self.degree() {
            return Err(Error::Invalid("wrong number of coefficients".into()));
        }
        let mut deps = vec![self.node()];
        for c in cs {
            deps.push(b.coerce(c)?.node());
        }
        let func: ApproxFn = Rc::new(|a: &EvalArgs| {
            let f = a.deps[0].as_field()?;
            let cs: Vec<ApproxElt> = a.deps[1..].iter().map(|d| d.as_elt().cloned()).collect::<Result<_>>()?;
            Ok(Approx::Elt(ApproxElt::from_coeffs(f, &cs)?))
        });
        self.element(deps, func, "from coefficients")
    }

    /// Embeds an element of this field or of a subfield.
    pub fn coerce(&self, x: &ExactElt) -> Result<ExactElt> {
        if x.field.ptr_eq(self) {
            return Ok(x.clone());
        }
        if !x.field.is_subfield_of(self) {
            return Err(Error::FieldMismatch("no coercion between these fields".into()));
        }
        let func: ApproxFn = Rc::new(|a: &EvalArgs| {
            let f = a.deps[0].as_field()?;
            Ok(Approx::Elt(f.embed(a.deps[1].as_elt()?)?))
        });
        self.element(vec![self.node(), x.node], func, "coerce")
    }

    pub fn residue_field(&self) -> Result<FiniteField> {
        self.approx(self.ready_epoch())?.residue_field()
    }

    /// `O/π^n` (supported for `Q_p` and one inertial step over it).
    pub fn quotient(&self, n: u64) -> Result<QuotientRing> {
        self.approx(self.epoch_for_capacity(n))?.quotient(n)
    }

    fn epoch_for_capacity(&self, n: u64) -> u32 {
        let mut k = self.ready_epoch();
        while capacity(k) < n {
            k += 1;
        }
        k
    }

    /// A lift of a quotient class; its absolute precision stays exactly `n`.
    pub fn q_inv(&self, c: &[BigUint], n: u64) -> Result<ExactElt> {
        let k = self.epoch_for_capacity(n);
        self.approx(k)?.q_inv(c, n)?;
        let c = c.to_vec();
        let func: ApproxFn = Rc::new(move |a: &EvalArgs| Ok(Approx::Elt(a.deps[0].as_field()?.q_inv(&c, n)?)));
        let x = self.element(vec![self.node()], func, "quotient lift")?;
        self.ctx().set_min_epoch(x.node, k);
        Ok(x)
    }

    /// Lift of a residue class as an exact element known to precision `1/e`.
    pub fn lift_residue(&self, c: &FElt) -> Result<ExactElt> {
        let c = c.clone();
        let func: ApproxFn = Rc::new(move |a: &EvalArgs| Ok(Approx::Elt(a.deps[0].as_field()?.lift_residue(&c)?)));
        let x = self.element(vec![self.node()], func, "residue lift")?;
        self.ctx().set_min_epoch(x.node, self.ready_epoch());
        Ok(x)
    }
}

/// Rational coordinates of an element along its tower.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Coords {
    Leaf(BigRational),
    Node(Vec<Coords>),
}

impl Coords {
    /// The exact value represented by an approximation (its digits extended by zeros).
    pub fn of(a: &ApproxElt) -> Coords {
        match a.pdig() {
            Some(d) => Coords::Leaf(d.value(a.field().p())),
            None => Coords::Node(a.coeffs().iter().map(Coords::of).collect()),
        }
    }

    /// Approximation with absolute precision `k` in every leaf.
    pub fn build(&self, field: &Arc<ApproxField>, k: i64) -> Result<ApproxElt> {
        match (self, field.base()) {
            (Coords::Leaf(q), _) => Ok(ApproxElt::from_rational_abs(field, q, k)),
            (Coords::Node(cs), Some(b)) => {
                let parts = cs.iter().map(|c| c.build(b, k)).collect::<Result<Vec<_>>>()?;
                ApproxElt::from_coeffs(field, &parts)
            }
            (Coords::Node(_), None) => Err(Error::Invalid("coordinates deeper than the field".into())),
        }
    }
}

/// An element of an exact field.
#[derive(Clone)]
pub struct ExactElt {
    field: ExactField,
    node: NodeId,
}

impl fmt::Debug for ExactElt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.latest() {
            Some(a) => write!(f, "{}", a.render()),
            None => write!(f, "<node {}>", self.node),
        }
    }
}

type BinOp = fn(&ApproxElt, &ApproxElt) -> Result<ApproxElt>;

/// Smallest `m` with `2^m >= d` (0 for `d <= 1`).
fn ceil_log2(d: &BigRational) -> u32 {
    let mut m = 0;
    let mut c = BigRational::one();
    while &c < d {
        c *= BigRational::from_integer(BigInt::from(2));
        m += 1;
    }
    m
}

impl ExactElt {
    pub fn field(&self) -> &ExactField {
        &self.field
    }
    pub fn node(&self) -> NodeId {
        self.node
    }
    fn ctx(&self) -> &Ctx {
        self.field.ctx()
    }

    pub fn approx(&self, n: u32) -> Result<ApproxElt> {
        Ok(self.ctx().epoch_approximation(self.node, n)?.as_elt()?.clone())
    }

    /// Best approximation computed so far.
    pub fn latest(&self) -> Option<ApproxElt> {
        self.ctx().latest(self.node).and_then(|a| a.as_elt().ok().cloned())
    }

    pub fn current_epoch(&self) -> u32 {
        self.ctx().current_epoch(self.node)
    }

    fn common(&self, other: &ExactElt) -> Result<(ExactElt, ExactElt)> {
        if self.field.ptr_eq(&other.field) {
            Ok((self.clone(), other.clone()))
        } else if self.field.is_subfield_of(&other.field) {
            Ok((other.field.coerce(self)?, other.clone()))
        } else if other.field.is_subfield_of(&self.field) {
            Ok((self.clone(), self.field.coerce(other)?))
        } else {
            Err(Error::FieldMismatch("elements of unrelated fields".into()))
        }
    }

    fn binop(&self, other: &ExactElt, op: BinOp, label: &'static str) -> Result<ExactElt> {
        let (a, b) = self.common(other)?;
        let func: ApproxFn = Rc::new(move |args: &EvalArgs| Ok(Approx::Elt(op(args.deps[0].as_elt()?, args.deps[1].as_elt()?)?)));
        a.field.element(vec![a.node, b.node], func, label)
    }

    pub fn add(&self, other: &ExactElt) -> Result<ExactElt> {
        self.binop(other, ApproxElt::add, "add")
    }

    pub fn sub(&self, other: &ExactElt) -> Result<ExactElt> {
        self.binop(other, ApproxElt::sub, "sub")
    }

    pub fn mul(&self, other: &ExactElt) -> Result<ExactElt> {
        self.binop(other, ApproxElt::mul, "mul")
    }

    pub fn neg(&self) -> Result<ExactElt> {
        let func: ApproxFn = Rc::new(|a: &EvalArgs| Ok(Approx::Elt(a.deps[0].as_elt()?.neg())));
        self.field.element(vec![self.node], func, "neg")
    }

    /// Division that first rewrites every approximation of `other` to be nonzero.
    pub fn div(&self, other: &ExactElt) -> Result<ExactElt> {
        let (a, b) = self.common(other)?;
        b.ensure_nonzero()?;
        a.binop(&b, ApproxElt::div, "div")
    }

    /// Division that leaves `other` untouched and starts the quotient at the first
    /// epoch where `other` is visibly nonzero.
    pub fn div_safe(&self, other: &ExactElt) -> Result<ExactElt> {
        let (a, b) = self.common(other)?;
        let k = match b.is_definitely_nonzero()? {
            (true, Some(k)) => k,
            _ => return Err(Error::precision("divisor indistinguishable from zero at max epoch")),
        };
        let z = a.binop(&b, ApproxElt::div, "div")?;
        z.ctx().set_min_epoch(z.node, k);
        Ok(z)
    }

    pub fn inverse(&self) -> Result<ExactElt> {
        self.pow(-1)
    }

    pub fn pow(&self, k: i64) -> Result<ExactElt> {
        if k < 0 {
            self.ensure_nonzero()?;
        }
        let func: ApproxFn = Rc::new(move |a: &EvalArgs| Ok(Approx::Elt(a.deps[0].as_elt()?.pow(k)?)));
        self.field.element(vec![self.node], func, "pow")
    }

    /// Multiplies by `π^k` for the field's uniformizer.
    pub fn mul_pi_pow(&self, k: i64) -> Result<ExactElt> {
        let func: ApproxFn = Rc::new(move |a: &EvalArgs| Ok(Approx::Elt(a.deps[0].as_elt()?.mul_pi_pow(k)?)));
        self.field.element(vec![self.node], func, "shift")
    }

    /// Rewrites every approximation to be not weakly zero; returns the first such epoch.
    pub fn ensure_nonzero(&self) -> Result<u32> {
        let pred = |a: &Approx| a.as_elt().is_ok_and(|x| !x.is_weakly_zero());
        self.ctx().ensure_approximations(self.node, &pred).map_err(|e| match e {
            Error::Precision(_) => Error::precision("element indistinguishable from zero at max epoch"),
            other => other,
        })
    }

    /// The true valuation, found by refining until the element is visibly nonzero.
    pub fn valuation(&self) -> Result<ExtVal> {
        let limit = self.ctx().reachable_max(self.node);
        for n in 1..=limit {
            let a = self.approx(n)?;
            if !a.is_weakly_zero() {
                return Ok(a.weak_val());
            }
        }
        Err(Error::precision(format!("valuation undetermined at max epoch {limit}: zero or very close to it")))
    }

    /// Compares the valuation with `v` using as little precision as the answer needs.
    pub fn valuation_cmp(&self, v: &ExtVal, rel: Rel) -> Result<bool> {
        Ok(match rel {
            Rel::Ge => self.valuation_ge(v)?,
            Rel::Gt => self.valuation_gt(v)?,
            Rel::Lt => !self.valuation_ge(v)?,
            Rel::Le => !self.valuation_gt(v)?,
            Rel::Eq => self.valuation_ge(v)? && !self.valuation_gt(v)?,
            Rel::Ne => !(self.valuation_ge(v)? && !self.valuation_gt(v)?),
        })
    }

    pub fn valuation_gt(&self, v: &ExtVal) -> Result<bool> {
        match v {
            ExtVal::NegInf => Ok(true),
            ExtVal::PosInf => Ok(false),
            ExtVal::Fin(q) => {
                // valuations lie in (1/e)Z
                let e = BigInt::from(self.field.ramification_index());
                let next = BigRational::new((q * &e).floor().to_integer() + BigInt::one(), e);
                self.valuation_ge(&ExtVal::Fin(next))
            }
        }
    }

    pub fn valuation_ge(&self, v: &ExtVal) -> Result<bool> {
        if *v == ExtVal::NegInf {
            return Ok(true);
        }
        let ctx = self.ctx();
        let limit = ctx.reachable_max(self.node);
        if self.current_epoch() == 0 {
            ctx.bring_to_epoch(self.node, 1)?;
        }
        loop {
            let n = self.current_epoch();
            let a = self.latest().unwrap();
            if !a.is_weakly_zero() {
                return Ok(a.weak_val() >= *v);
            }
            if a.abs_prec() >= *v {
                return Ok(true);
            }
            if n >= limit {
                return Err(Error::precision("valuation comparison undecided at max epoch"));
            }
            let baseline = self.approx(1)?.weak_val();
            let need = match v.sub(&baseline) {
                ExtVal::Fin(d) => ceil_log2(&d),
                _ => limit,
            };
            ctx.bring_to_epoch(self.node, need.max(n + 1).min(limit))?;
        }
    }

    pub fn valuation_lt(&self, v: &ExtVal) -> Result<bool> {
        self.valuation_cmp(v, Rel::Lt)
    }

    /// `(true, first nonzero epoch)`, or `(false, None)` once the max epoch is reached.
    pub fn is_definitely_nonzero(&self) -> Result<(bool, Option<u32>)> {
        let limit = self.ctx().reachable_max(self.node);
        for n in 1..=limit {
            if !self.approx(n)?.is_weakly_zero() {
                return Ok((true, Some(n)));
            }
        }
        Ok((false, None))
    }

    /// Reduction into the residue field (needs nonnegative valuation).
    pub fn residue(&self) -> Result<FElt> {
        self.refine_until(|a| a.field().residue(a))
    }

    /// Image in `O/π^n` as coordinates.
    pub fn quotient(&self, n: u64) -> Result<Vec<BigUint>> {
        self.refine_until(|a| a.field().q_map(a, n))
    }

    fn refine_until<T>(&self, f: impl Fn(&ApproxElt) -> Result<T>) -> Result<T> {
        let limit = self.ctx().reachable_max(self.node);
        let start = self.field.ready_epoch();
        let mut last = Error::precision("no epochs available");
        for n in start..=limit {
            match f(&self.approx(n)?) {
                Err(e @ Error::Precision(_)) => last = e,
                other => return other,
            }
        }
        Err(last)
    }

    /// A constant equal to the current approximation, extended by zero digits.
    pub fn weak_approximation(&self) -> Result<ExactElt> {
        let a = match self.latest() {
            Some(a) => a,
            None => self.approx(1)?,
        };
        self.field.from_coords(&Coords::of(&a))
    }

    /// Approximation at epoch `n`, rendered as a truncated expansion.
    pub fn render_at(&self, n: u32) -> Result<String> {
        Ok(self.approx(n)?.render())
    }
}

/// `p`-adic digits of a prime-field approximation, little-endian, with its valuation
/// and absolute precision.
pub fn digit_expansion(a: &ApproxElt) -> Option<(i64, Vec<u64>, Option<i64>)> {
    let d = a.pdig()?;
    let v = d.wv().unwrap_or(0);
    Some((v, d.digits(a.field().p()), d.abs()))
}

//! Hensel lifting and the algorithms built on it: simple roots of univariate
//! polynomials, roots of square systems, factor pairs, Newton-polygon factorization
//! and splitting by residual factors.
//!
//! Every lift is decided first (at the smallest epoch whose approximations prove
//! the criterion) and then materialized as a node whose update runs Newton's
//! iteration at the working precision of each epoch. The iteration resumes from the
//! node's previous approximation when that is still inside the basin.

use std::cell::RefCell;
use std::rc::Rc;

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};

use crate::approx::{linalg, ApproxElt, ApproxField, ApproxPoly, FElt, FPoly};
use crate::epoch::{Approx, ApproxFn, EvalArgs, NodeSpec};
use crate::error::{Error, Result};
use crate::exact::{
    point_data, residual_of, ApproxSystem, Coords, ExactElt, ExactField, ExactMPolySystem, ExactPoly, ExactTuple,
};
use crate::newton::{lower_weak, overlap, Face, NewtonPolygon, PointData, Q};
use crate::val::ExtVal;

/// Default recursion budget for `roots` and `split_factorization`.
pub const DEFAULT_DEPTH: usize = 8;

const MAX_STEPS: usize = 256;
/// Absolute precision requested when an approximation is pinned to a representative;
/// the field's capacity caps it.
const PIN: i64 = 1 << 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LiftKind {
    UniRoot,
    MultiRoot,
    FactorPair,
}

/// Rescaling applied before the criterion is checked. All exponents are valuations
/// in absolute units, so `π^k` stands for any element of valuation `k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Scaling {
    None,
    /// `g(x) = π^j f(π^k x + a)`.
    Affine { j: Q, k: Q },
    /// Variables scaled by `π^mu`, equations by `π^nu`.
    Diagonal { mu: Vec<Q>, nu: Vec<Q> },
    /// `x = π^k y`, both polynomials made monic again.
    Variable(Q),
}

/// The data that proved a lift: residual valuation `s`, Jacobian valuation `t`,
/// the scaling they refer to and the epoch at which they were established.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LiftCertificate {
    pub kind: LiftKind,
    pub s: ExtVal,
    pub t: ExtVal,
    pub scaling: Scaling,
    pub epoch: u32,
}

impl LiftCertificate {
    pub fn holds(&self) -> bool {
        match self.kind {
            LiftKind::UniRoot => self.s > ExtVal::zero() && self.t == ExtVal::zero(),
            _ => self.s > twice(&self.t),
        }
    }
}

/// Valuation of the residual at one Newton step; `exact` is false when only a
/// lower bound was visible.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Step {
    pub val: ExtVal,
    pub exact: bool,
}

/// The Newton steps taken when one epoch was computed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LiftRun {
    pub epoch: u32,
    pub warm: bool,
    pub steps: Vec<Step>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LiftLog {
    pub runs: Vec<LiftRun>,
}

pub type SharedLog = Rc<RefCell<LiftLog>>;

impl LiftLog {
    /// `v_k >= 2 v_{k-1} - offset` for every pair of consecutive exact steps.
    pub fn quadratic(&self, offset: &Q) -> bool {
        self.runs.iter().all(|run| {
            run.steps.windows(2).all(|w| match (&w[0], &w[1]) {
                (Step { val: ExtVal::Fin(a), exact: true }, Step { val: ExtVal::Fin(b), exact: true }) => {
                    b - (a * Q::from_integer(2.into())) + offset >= Q::zero()
                }
                _ => true,
            })
        })
    }
}

pub struct RootLift {
    pub root: ExactElt,
    pub certificate: LiftCertificate,
    /// Lower bounds for the valuations of the rescaled coefficients `g_i`.
    pub rescaled: Vec<ExtVal>,
    pub log: SharedLog,
}

impl RootLift {
    /// The constant in `v(f(a')) >= 2 v(f(a)) - offset`, namely `-j`.
    pub fn offset(&self) -> Q {
        match &self.certificate.scaling {
            Scaling::Affine { j, .. } => -j.clone(),
            _ => Q::zero(),
        }
    }
}

pub struct SystemLift {
    pub root: ExactTuple,
    pub certificate: LiftCertificate,
    pub log: SharedLog,
}

pub struct FactorLift {
    pub g: ExactPoly,
    pub h: ExactPoly,
    pub certificate: LiftCertificate,
    pub log: SharedLog,
}

impl SystemLift {
    pub fn offset(&self) -> Q {
        offset_of(&self.certificate)
    }
}

impl FactorLift {
    pub fn offset(&self) -> Q {
        offset_of(&self.certificate)
    }
}

fn offset_of(c: &LiftCertificate) -> Q {
    match &c.t {
        ExtVal::Fin(t) => t * Q::from_integer(2.into()),
        _ => Q::zero(),
    }
}

// ---------------------------------------------------------------------------
// small valuation helpers

fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

fn twice(v: &ExtVal) -> ExtVal {
    match v {
        ExtVal::Fin(q) => ExtVal::Fin(q * qi(2)),
        other => other.clone(),
    }
}

fn plus(v: &ExtVal, q: &Q) -> ExtVal {
    match v {
        ExtVal::Fin(a) => ExtVal::Fin(a + q),
        other => other.clone(),
    }
}

/// A lower bound for the true valuation.
fn lower(x: &ApproxElt) -> ExtVal {
    if x.is_weakly_zero() {
        x.abs_prec()
    } else {
        x.weak_val()
    }
}

/// The true valuation, when the approximation shows it.
fn exact(x: &ApproxElt) -> Option<ExtVal> {
    if x.is_exact_zero() {
        Some(ExtVal::PosInf)
    } else if x.is_weakly_zero() {
        None
    } else {
        Some(x.weak_val())
    }
}

/// Replaces an approximation by one representative, as precise as the field allows.
fn pin(x: &ApproxElt) -> Result<ApproxElt> {
    Coords::of(x).build(x.field(), PIN)
}

fn pin_poly(p: &ApproxPoly) -> Result<ApproxPoly> {
    let cs = p.coeffs().iter().map(pin).collect::<Result<Vec<_>>>()?;
    Ok(ApproxPoly::from_coeffs(p.field(), cs))
}

/// Lowers the absolute precision of `x` to `k` when `k` is below what `x` carries.
fn cap(x: &ApproxElt, k: &ExtVal) -> Result<ApproxElt> {
    if *k >= x.abs_prec() {
        Ok(x.clone())
    } else {
        x.with_abs(k)
    }
}

/// Tri-state answer of a criterion at one epoch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Verdict {
    Yes,
    No,
    Unknown,
}

/// Combines `lower bound >= 0` and `exact value < 0` tests.
fn integral(lo: &ExtVal, ex: Option<&ExtVal>) -> Verdict {
    if *lo >= ExtVal::zero() {
        Verdict::Yes
    } else if ex.is_some_and(|v| *v < ExtVal::zero()) {
        Verdict::No
    } else {
        Verdict::Unknown
    }
}

fn all_of(vs: impl IntoIterator<Item = Verdict>) -> Verdict {
    let mut out = Verdict::Yes;
    for v in vs {
        match v {
            Verdict::No => return Verdict::No,
            Verdict::Unknown => out = Verdict::Unknown,
            Verdict::Yes => {}
        }
    }
    out
}

/// `s > 2t` proven, disproven, or open, from bounds `s_lo <= s <= s_hi`,
/// `t_lo <= t` and `t` itself when known.
fn criterion(s_lo: &ExtVal, s_hi: &ExtVal, t_lo: &ExtVal, t: Option<&ExtVal>) -> Verdict {
    if let Some(t) = t {
        if *s_lo > twice(t) {
            return Verdict::Yes;
        }
    }
    if *s_hi <= twice(t_lo) {
        return Verdict::No;
    }
    Verdict::Unknown
}

fn min_all(vs: impl IntoIterator<Item = ExtVal>) -> ExtVal {
    vs.into_iter().fold(ExtVal::PosInf, |a, b| a.meet(&b))
}

fn epoch_limit(field: &ExactField, nodes: &[crate::epoch::NodeId]) -> u32 {
    let ctx = field.ctx();
    nodes.iter().map(|&n| ctx.reachable_max(n)).min().unwrap_or_else(|| ctx.epoch_cap())
}

fn unsafe_element(field: &ExactField, deps: Vec<crate::epoch::NodeId>, func: ApproxFn, label: &'static str, min_epoch: u32) -> Result<ExactElt> {
    let ctx = field.ctx();
    let node = ctx.add_node(NodeSpec { safe: false, ..NodeSpec::element(field.node(), deps, func, label) })?;
    ctx.set_min_epoch(node, min_epoch);
    Ok(field.wrap(node))
}

// ---------------------------------------------------------------------------
// univariate roots

/// What one epoch says about the first face of `f(x + a)`.
enum UniCheck {
    Undecided,
    No,
    /// Width one: lower bound `w0` at 0, exact `v1` at 1, slope of the next segment.
    Yes { w0: ExtVal, v1: Q, sigma2: Option<Q>, bounds: Vec<ExtVal> },
}

fn uni_check(fp: &ApproxPoly, a: &ApproxElt) -> Result<UniCheck> {
    let g = fp.shift(a)?;
    let one = Q::one();
    let pts: Vec<PointData> = g.coeffs().iter().map(|c| point_data(c, &one)).collect();
    if pts.len() < 2 {
        return Err(Error::Invalid("Hensel lifting needs a polynomial of degree at least 1".into()));
    }
    let bounds: Vec<ExtVal> = pts
        .iter()
        .map(|p| match p {
            PointData::Known(v) | PointData::Weak(v) => ExtVal::Fin(v.clone()),
            PointData::Absent => ExtVal::PosInf,
        })
        .collect();
    let lw = lower_weak(&pts);
    let next_slope = |from: usize| -> Option<Q> {
        lw.get(from + 1).map(|p| (&p.1 - &lw[from].1) / (&p.0 - &lw[from].0))
    };
    match (&pts[0], &pts[1]) {
        // a is an exact root
        (PointData::Absent, PointData::Known(v1)) => {
            return Ok(UniCheck::Yes { w0: ExtVal::PosInf, v1: v1.clone(), sigma2: next_slope(0), bounds })
        }
        (PointData::Absent, PointData::Absent) => return Ok(UniCheck::No),
        (PointData::Absent, PointData::Weak(_)) => return Ok(UniCheck::Undecided),
        _ => {}
    }
    if lw.len() < 2 {
        return Ok(UniCheck::Undecided);
    }
    let x1 = &lw[1].0;
    if x1.is_one() {
        if let PointData::Known(v1) = &pts[1] {
            return Ok(UniCheck::Yes { w0: ExtVal::Fin(lw[0].1.clone()), v1: v1.clone(), sigma2: next_slope(1), bounds });
        }
    } else {
        let i1 = x1.to_integer().to_usize().unwrap_or(0);
        if matches!(pts[0], PointData::Known(_)) && matches!(pts[i1], PointData::Known(_)) {
            return Ok(UniCheck::No);
        }
    }
    Ok(UniCheck::Undecided)
}

/// Newton's iteration for one root, starting from a pinned `x`. Returns the root
/// approximation with its proven precision and the residual valuations seen.
fn newton_uni(fp: &ApproxPoly, x0: ApproxElt) -> Result<(ApproxElt, Vec<Step>)> {
    let dfp = fp.derivative()?;
    let mut x = x0;
    let mut steps = Vec::new();
    for _ in 0..MAX_STEPS {
        let fx = fp.evaluate(&x)?;
        let dfx = dfp.evaluate(&x)?;
        if dfx.is_weakly_zero() {
            return Err(Error::precision("derivative indistinguishable from zero at the iterate"));
        }
        let t = dfx.weak_val();
        if fx.is_weakly_zero() {
            steps.push(Step { val: fx.abs_prec(), exact: false });
            let acc = fx.abs_prec().sub(&t);
            return Ok((cap(&x, &acc)?, steps));
        }
        steps.push(Step { val: fx.weak_val(), exact: true });
        let h = fx.div(&dfx)?;
        // inside the basin v(h) is exactly v(x - root)
        let dist = h.weak_val();
        if dist >= x.abs_prec() {
            return Ok((x, steps));
        }
        x = pin(&x.sub(&h)?)?;
    }
    Err(Error::IterationCap("Newton iteration for a root did not settle".into()))
}

/// Decides whether Newton's iteration from `a` converges to a root of `f` closer to
/// `a` than every other root, and if so returns that root.
pub fn is_hensel_liftable_root(f: &ExactPoly, a: &ExactElt) -> Result<Option<RootLift>> {
    if f.degree() < 1 {
        return Err(Error::Invalid("Hensel lifting needs a polynomial of degree at least 1".into()));
    }
    let field = a.field().clone();
    let fk = f.coerce_to(&field)?;
    let limit = epoch_limit(&field, &[fk.node(), a.node()]);
    for n in 1..=limit {
        let fp = fk.approx(n)?;
        let ap = a.approx(n)?;
        let (w0, v1, sigma2, bounds) = match uni_check(&fp, &ap)? {
            UniCheck::Undecided => continue,
            UniCheck::No => return Ok(None),
            UniCheck::Yes { w0, v1, sigma2, bounds } => (w0, v1, sigma2, bounds),
        };
        // g(x) = π^j f(π^k x + a): the first point lands above 0, the second on 0 and
        // the rest on or above 0.
        let k = match (&sigma2, &w0) {
            (Some(s2), _) => -s2.clone(),
            (None, ExtVal::Fin(w)) => w - &v1 - Q::one(),
            (None, _) => Q::zero(),
        };
        let j = -(&v1) - &k;
        let rescaled: Vec<ExtVal> = bounds.iter().enumerate().map(|(i, b)| plus(b, &(&j + &k * qi(i as i64)))).collect();
        let s = rescaled[0].clone();
        if !(s > ExtVal::zero()) || rescaled[1] != ExtVal::zero() || rescaled[2..].iter().any(|r| *r < ExtVal::zero()) {
            return Err(Error::Inconsistent("rescaled polynomial fails the classical hypotheses".into()));
        }
        let certificate = LiftCertificate {
            kind: LiftKind::UniRoot,
            s,
            t: ExtVal::zero(),
            scaling: Scaling::Affine { j, k: k.clone() },
            epoch: n,
        };
        let log: SharedLog = Rc::default();
        let start = Coords::of(&ap);
        // other roots lie at distance at most k from this one
        let warm_bound = sigma2.map(|_| ExtVal::Fin(k));
        let run_log = log.clone();
        let func: ApproxFn = Rc::new(move |args: &EvalArgs| {
            let fp = args.deps[0].as_poly()?;
            let fld = fp.field();
            let prev = args.engine.latest(args.node);
            let warm = match prev.as_deref().map(Approx::as_elt) {
                Some(Ok(p)) if warm_bound.as_ref().is_none_or(|b| p.abs_prec() > *b) => Some(pin(&p.coerce_to(fld)?)?),
                _ => None,
            };
            let was_warm = warm.is_some();
            let x0 = match warm {
                Some(x) => x,
                None => start.build(fld, PIN)?,
            };
            let (x, steps) = newton_uni(fp, x0)?;
            run_log.borrow_mut().runs.push(LiftRun { epoch: args.epoch, warm: was_warm, steps });
            Ok(Approx::Elt(x))
        });
        let root = unsafe_element(&field, vec![fk.node()], func, "hensel root", n)?;
        return Ok(Some(RootLift { root, certificate, rescaled, log }));
    }
    Err(Error::precision(format!("Hensel criterion undecided at max epoch {limit}")))
}

/// The polynomial `Σ_{i=lo}^{hi} f_i x^{i-lo}`.
fn coeff_slice(f: &ExactPoly, lo: usize, hi: usize) -> Result<ExactPoly> {
    let func: ApproxFn = Rc::new(move |a: &EvalArgs| {
        let p = a.deps[0].as_poly()?;
        let cs = (lo..=hi).map(|i| p.coeff(i)).collect();
        Ok(Approx::Poly(ApproxPoly::from_coeffs(p.field(), cs)))
    });
    ExactPoly::from_fn(f.field(), vec![f.node()], (hi - lo) as isize, func, "coefficient slice")
}

/// Number of exactly zero low coefficients (a structural property, read once).
fn low_zeros(f: &ExactPoly) -> Result<usize> {
    let a = f.approx(f.field().ready_epoch())?;
    Ok(a.coeffs().iter().take_while(|c| c.is_exact_zero()).count())
}

/// The confirmed faces ending at `end`, and where they start. `None` when the
/// boundary is not yet a certain vertex.
fn tail_faces(np: &NewtonPolygon, end: usize) -> Option<(usize, Vec<Face>)> {
    let endq = qi(end as i64);
    let (lo, hi) = np.sections().into_iter().last()?;
    if hi != endq {
        return None;
    }
    let faces: Vec<Face> = np.faces.iter().filter(|f| f.left.0 >= lo).cloned().collect();
    if faces.first()?.left_open {
        return None;
    }
    Some((lo.to_integer().to_usize()?, faces))
}

fn integer_slope(face: &Face) -> Option<i64> {
    let (h, e) = face.slope_parts();
    if e.is_one() {
        h.to_i64()
    } else {
        None
    }
}

/// Start points for every root of `fp`, searched as `x = a + π^shift y` with the
/// window restricting to roots with `v(y) > 0`. `None` when this epoch cannot
/// separate them.
fn root_starts(
    fp: &ApproxPoly,
    h: &ApproxPoly,
    a: &ApproxElt,
    shift: i64,
    window: Option<usize>,
    depth: usize,
) -> Result<Option<Vec<ApproxElt>>> {
    let field = h.field().clone();
    let e = qi(field.ramification_index() as i64);
    let mut pts: Vec<PointData> = h.coeffs().iter().map(|c| point_data(c, &e)).collect();
    if let Some(w) = window {
        pts.truncate(w + 1);
    }
    let end = pts.len() - 1;
    if !matches!(pts[end], PointData::Known(_)) {
        return Ok(None);
    }
    let Some((j, faces)) = tail_faces(&overlap(&pts), end) else { return Ok(None) };
    let mut out = Vec::new();
    match j {
        0 => {}
        // one root very close to a
        1 => out.push(a.clone()),
        _ => return Ok(None),
    }
    let kf = field.residue_field()?;
    for face in &faces {
        let Some(m) = integer_slope(face) else { continue };
        if window.is_some() && m <= 0 {
            return Err(Error::Inconsistent("cluster polygon has a face of non-positive root valuation".into()));
        }
        let r = match residual_of(h, face) {
            Ok(r) => r,
            Err(Error::Precision(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        for (c, mult) in kf.roots(&r)? {
            if kf.is_zero(&c) {
                continue;
            }
            let lift = pin(&field.lift_residue(&c)?)?;
            let a2 = pin(&a.add(&lift.mul_pi_pow(shift + m)?)?)?;
            if mult == 1 {
                out.push(a2);
                continue;
            }
            if depth == 0 {
                return Err(Error::Depth("repeated residual roots beyond the recursion budget".into()));
            }
            let scale = pin(&ApproxElt::one(&field))?.mul_pi_pow(shift + m)?;
            let h2 = fp.compose_linear(&a2, &scale)?;
            match root_starts(fp, &h2, &a2, shift + m, Some(mult), depth - 1)? {
                Some(v) => out.extend(v),
                None => return Ok(None),
            }
        }
    }
    Ok(Some(out))
}

/// All roots of `f` in its coefficient field; each is simple and certified by Hensel's lemma.
pub fn roots(f: &ExactPoly) -> Result<Vec<ExactElt>> {
    roots_with_depth(f, DEFAULT_DEPTH)
}

pub fn roots_with_depth(f: &ExactPoly, depth: usize) -> Result<Vec<ExactElt>> {
    Ok(root_lifts(f, depth)?.into_iter().map(|(r, _)| r).collect())
}

/// Roots together with their lift records (`None` for the exact root 0).
pub fn root_lifts(f: &ExactPoly, depth: usize) -> Result<Vec<(ExactElt, Option<RootLift>)>> {
    if f.degree() < 0 {
        return Err(Error::Invalid("roots of the zero polynomial".into()));
    }
    if f.degree() == 0 {
        return Ok(Vec::new());
    }
    let field = f.field().clone();
    let k = low_zeros(f)?;
    if k >= 2 {
        return Err(Error::Unsupported(format!("0 is a root of multiplicity {k}; only simple roots are certified")));
    }
    let mut out = Vec::new();
    if k == 1 {
        out.push((field.zero()?, None));
    }
    let f1 = if k == 0 { f.clone() } else { coeff_slice(f, k, f.degree() as usize)? };
    if f1.degree() == 0 {
        return Ok(out);
    }
    let limit = field.ctx().reachable_max(f1.node());
    'epochs: for n in field.ready_epoch().max(1)..=limit {
        let fp = f1.approx(n)?;
        let zero = ApproxElt::zero(fp.field());
        let Some(starts) = root_starts(&fp, &fp, &zero, 0, None, depth)? else { continue };
        let mut found = Vec::with_capacity(starts.len());
        for s in starts {
            let a = field.from_coords(&Coords::of(&s))?;
            match is_hensel_liftable_root(&f1, &a)? {
                Some(l) => found.push((l.root.clone(), Some(l))),
                None => continue 'epochs,
            }
        }
        out.extend(found);
        return Ok(out);
    }
    Err(Error::precision(format!("roots not separated at max epoch {limit}")))
}

// ---------------------------------------------------------------------------
// square systems

struct SysEval {
    s_lo: ExtVal,
    s_hi: ExtVal,
    t_lo: ExtVal,
    t: Option<ExtVal>,
    integral: Verdict,
}

fn sys_eval(sys: &ApproxSystem, x: &[ApproxElt], mu: &[Q], nu: &[Q]) -> Result<SysEval> {
    let fx = sys.eval(x)?;
    let jac = sys.jacobian(x)?;
    let det = linalg::det(&jac, &sys.field)?;
    let dshift: Q = nu.iter().sum::<Q>() - mu.iter().sum::<Q>();
    let mut checks = Vec::new();
    for (xj, m) in x.iter().zip(mu) {
        checks.push(integral(&plus(&lower(xj), m), exact(xj).map(|v| plus(&v, m)).as_ref()));
    }
    for (eq, n) in sys.equations.iter().zip(nu) {
        for (exps, c) in eq {
            let sh = n - exps.iter().zip(mu).map(|(&e, m)| m * qi(e as i64)).sum::<Q>();
            checks.push(integral(&plus(&lower(c), &sh), exact(c).map(|v| plus(&v, &sh)).as_ref()));
        }
    }
    Ok(SysEval {
        s_lo: min_all(fx.iter().zip(nu).map(|(c, n)| plus(&lower(c), n))),
        s_hi: min_all(fx.iter().zip(nu).filter_map(|(c, n)| exact(c).map(|v| plus(&v, n)))),
        t_lo: plus(&lower(&det), &dshift),
        t: exact(&det).map(|v| plus(&v, &dshift)),
        integral: all_of(checks),
    })
}

/// Newton's iteration `x ↦ x - J(x)^{-1} f(x)`; each component carries the
/// precision `s - t - mu_j` the lemma guarantees.
fn newton_sys(sys: &ApproxSystem, x0: Vec<ApproxElt>, mu: &[Q], nu: &[Q], t0: &ExtVal) -> Result<(Vec<ApproxElt>, Vec<Step>)> {
    let mut x = x0;
    let mut steps = Vec::new();
    let mut best: Option<(ExtVal, Vec<ApproxElt>)> = None;
    for _ in 0..MAX_STEPS {
        let ev = sys_eval(sys, &x, mu, nu)?;
        let t = ev.t.ok_or_else(|| Error::precision("Jacobian determinant indistinguishable from zero"))?;
        if t != *t0 {
            return Err(Error::Inconsistent(format!("Jacobian valuation moved from {t0} to {t} while lifting")));
        }
        steps.push(Step { val: ev.s_lo.clone(), exact: ev.s_lo == ev.s_hi });
        if best.as_ref().is_some_and(|(s, _)| ev.s_lo <= *s) {
            break;
        }
        best = Some((ev.s_lo.clone(), x.clone()));
        let fx = sys.eval(&x)?;
        if fx.iter().all(ApproxElt::is_weakly_zero) {
            break;
        }
        let delta = linalg::solve(&sys.jacobian(&x)?, &fx)?;
        x = x.iter().zip(&delta).map(|(xi, di)| pin(&xi.sub(di)?)).collect::<Result<_>>()?;
    }
    let (s, x) = best.expect("at least one step");
    if s <= twice(t0) {
        return Err(Error::Inconsistent("lifting criterion lost during the iteration".into()));
    }
    let room = s.sub(t0);
    let out = x.iter().zip(mu).map(|(xi, m)| cap(xi, &plus(&room, &-m))).collect::<Result<_>>()?;
    Ok((out, steps))
}

/// Multivariate Hensel lifting of the near-root `a` of a square system, after the
/// diagonal rescaling `x̃ = π^mu x`, `f̃ = π^nu f`.
pub fn is_hensel_liftable_system(
    sys: &ExactMPolySystem,
    a: &ExactTuple,
    mu: Option<&[Q]>,
    nu: Option<&[Q]>,
) -> Result<Option<SystemLift>> {
    let r = sys.rank();
    if a.len() != r {
        return Err(Error::Invalid(format!("near-root has {} components for {r} variables", a.len())));
    }
    let zeros = vec![Q::zero(); r];
    let mu: Vec<Q> = mu.map_or_else(|| zeros.clone(), <[Q]>::to_vec);
    let nu: Vec<Q> = nu.map_or_else(|| zeros.clone(), <[Q]>::to_vec);
    if mu.len() != r || nu.len() != r {
        return Err(Error::Invalid("scaling vectors must have one entry per variable".into()));
    }
    let field = sys.field().clone();
    let a = ExactTuple::from_elts(&field, a.components())?;
    let mut nodes = sys.coeff_nodes();
    nodes.push(a.node());
    let limit = epoch_limit(&field, &nodes);
    let mut singular = true;
    for n in 1..=limit {
        let s_n = sys.approx(n)?;
        let x = a.approx(n)?;
        let ev = sys_eval(&s_n, &x, &mu, &nu)?;
        if ev.integral == Verdict::No {
            return Err(Error::Invalid("rescaled system or near-root is not integral".into()));
        }
        singular &= ev.t.is_none();
        match criterion(&ev.s_lo, &ev.s_hi, &ev.t_lo, ev.t.as_ref()) {
            Verdict::No => return Ok(None),
            Verdict::Unknown => continue,
            Verdict::Yes if ev.integral == Verdict::Unknown => continue,
            Verdict::Yes => {}
        }
        let t0 = ev.t.clone().expect("known when the criterion holds");
        let certificate = LiftCertificate {
            kind: LiftKind::MultiRoot,
            s: ev.s_lo.clone(),
            t: t0.clone(),
            scaling: Scaling::Diagonal { mu: mu.clone(), nu: nu.clone() },
            epoch: n,
        };
        let log: SharedLog = Rc::default();
        let start: Vec<Coords> = x.iter().map(Coords::of).collect();
        let shape: Vec<Vec<Vec<usize>>> = sys.equations().iter().map(|eq| eq.iter().map(|(e, _)| e.clone()).collect()).collect();
        let run_log = log.clone();
        let (mu2, nu2) = (mu.clone(), nu.clone());
        let func: ApproxFn = Rc::new(move |args: &EvalArgs| {
            let fld = args.deps[0].as_field()?;
            let mut it = args.deps[1..].iter();
            let mut equations = Vec::with_capacity(shape.len());
            for eq in &shape {
                let mut terms = Vec::with_capacity(eq.len());
                for e in eq {
                    let c = it.next().ok_or_else(|| Error::Invalid("missing coefficient".into()))?;
                    terms.push((e.clone(), c.as_elt()?.clone()));
                }
                equations.push(terms);
            }
            let approx_sys = ApproxSystem { field: fld.clone(), rank: shape.len(), equations };
            let warm = warm_tuple(args, fld)?.filter(|x| {
                sys_eval(&approx_sys, x, &mu2, &nu2).is_ok_and(|ev| {
                    ev.t.as_ref() == Some(&t0) && criterion(&ev.s_lo, &ev.s_hi, &ev.t_lo, ev.t.as_ref()) == Verdict::Yes
                })
            });
            let was_warm = warm.is_some();
            let x0 = match warm {
                Some(x) => x,
                None => start.iter().map(|c| c.build(fld, PIN)).collect::<Result<_>>()?,
            };
            let (x, steps) = newton_sys(&approx_sys, x0, &mu2, &nu2, &t0)?;
            run_log.borrow_mut().runs.push(LiftRun { epoch: args.epoch, warm: was_warm, steps });
            Ok(Approx::Tuple(x.into_iter().map(Approx::Elt).collect()))
        });
        let mut deps = vec![field.node()];
        deps.extend(sys.coeff_nodes());
        let root = ExactTuple::from_fn(&field, deps, r, func, "hensel system root", false)?;
        field.ctx().set_min_epoch(root.node(), n);
        return Ok(Some(SystemLift { root, certificate, log }));
    }
    if singular {
        return Err(Error::precision(format!("Jacobian singular at the near-root up to max epoch {limit}")));
    }
    Err(Error::precision(format!("multivariate Hensel criterion undecided at max epoch {limit}")))
}

/// The node's previous tuple approximation, pinned into `fld`.
fn warm_tuple(args: &EvalArgs, fld: &std::sync::Arc<ApproxField>) -> Result<Option<Vec<ApproxElt>>> {
    let Some(prev) = args.engine.latest(args.node) else { return Ok(None) };
    let parts = prev.as_tuple()?;
    parts.iter().map(|p| pin(&p.as_elt()?.coerce_to(fld)?)).collect::<Result<Vec<_>>>().map(Some)
}

// ---------------------------------------------------------------------------
// factor pairs

fn monic_approx(p: &ApproxPoly) -> Result<(ApproxPoly, ApproxElt)> {
    let lead = p.coeff(p.len() - 1);
    let inv = lead.inverse()?;
    let mut cs: Vec<ApproxElt> = p.coeffs().iter().map(|c| c.mul(&inv)).collect::<Result<_>>()?;
    *cs.last_mut().unwrap() = ApproxElt::one(p.field());
    Ok((ApproxPoly::from_coeffs(p.field(), cs), lead))
}

struct FactorEval {
    s_lo: ExtVal,
    s_hi: ExtVal,
    t_lo: ExtVal,
    t: Option<ExtVal>,
    integral: Verdict,
    h: ApproxPoly,
    r: ApproxPoly,
}

/// Scaled valuation data of `f = g (f div g) + r` for monic `f`, `g` with `x = π^k y`.
fn factor_eval(f: &ApproxPoly, g: &ApproxPoly, k: &Q) -> Result<FactorEval> {
    let n = f.len() - 1;
    let n1 = g.len() - 1;
    let n2 = n - n1;
    let (h, r) = f.divrem(g)?;
    let h = ApproxPoly::from_coeffs(f.field(), (0..=n2).map(|i| h.coeff(i)).collect());
    let at = |i: usize, d: usize| k * (qi(i as i64) - qi(d as i64));
    let mut checks = Vec::new();
    for (p, d) in [(f, n), (g, n1)] {
        for (i, c) in p.coeffs().iter().enumerate() {
            let sh = at(i, d);
            checks.push(integral(&plus(&lower(c), &sh), exact(c).map(|v| plus(&v, &sh)).as_ref()));
        }
    }
    let res = g.resultant(&h)?;
    let tshift = -(k * qi((n1 * n2) as i64));
    Ok(FactorEval {
        s_lo: min_all(r.coeffs().iter().enumerate().map(|(i, c)| plus(&lower(c), &at(i, n)))),
        s_hi: min_all(r.coeffs().iter().enumerate().filter_map(|(i, c)| exact(c).map(|v| plus(&v, &at(i, n))))),
        t_lo: plus(&lower(&res), &tshift),
        t: exact(&res).map(|v| plus(&v, &tshift)),
        integral: all_of(checks),
        h,
        r,
    })
}

/// Quadratic refinement of a monic factor `g` of the monic `f`: each step solves
/// `h δg + g δh = f - g h` and resets `h = f div g`.
fn newton_factor(f: &ApproxPoly, g0: ApproxPoly, k: &Q, t0: &ExtVal) -> Result<(ApproxPoly, ApproxPoly, Vec<Step>)> {
    let field = f.field().clone();
    let n = f.len() - 1;
    let n1 = g0.len() - 1;
    let n2 = n - n1;
    let mut g = g0;
    let mut steps = Vec::new();
    let mut best: Option<(ExtVal, ApproxPoly, ApproxPoly)> = None;
    for _ in 0..MAX_STEPS {
        let ev = factor_eval(f, &g, k)?;
        let t = ev.t.ok_or_else(|| Error::precision("resultant indistinguishable from zero"))?;
        if t != *t0 {
            return Err(Error::Inconsistent(format!("resultant valuation moved from {t0} to {t} while lifting")));
        }
        steps.push(Step { val: ev.s_lo.clone(), exact: ev.s_lo == ev.s_hi });
        if best.as_ref().is_some_and(|(s, _, _)| ev.s_lo <= *s) {
            break;
        }
        best = Some((ev.s_lo.clone(), g.clone(), ev.h.clone()));
        if ev.r.coeffs().iter().all(ApproxElt::is_weakly_zero) {
            break;
        }
        // columns: x^i h for i < n1, then x^i g for i < n2
        let zero = ApproxElt::zero(&field);
        let mut mat = vec![vec![zero.clone(); n]; n];
        for i in 0..n1 {
            for (d, c) in ev.h.coeffs().iter().enumerate() {
                if i + d < n {
                    mat[i + d][i] = c.clone();
                }
            }
        }
        for i in 0..n2 {
            for (d, c) in g.coeffs().iter().enumerate() {
                if i + d < n {
                    mat[i + d][n1 + i] = c.clone();
                }
            }
        }
        let rhs: Vec<ApproxElt> = (0..n).map(|i| ev.r.coeff(i)).collect();
        let delta = linalg::solve(&mat, &rhs)?;
        let mut cs = Vec::with_capacity(n1 + 1);
        for (i, d) in delta.iter().take(n1).enumerate() {
            cs.push(pin(&g.coeff(i).add(d)?)?);
        }
        cs.push(ApproxElt::one(&field));
        g = ApproxPoly::from_coeffs(&field, cs);
    }
    let (s, g, h) = best.expect("at least one step");
    if s <= twice(t0) {
        return Err(Error::Inconsistent("lifting criterion lost during the iteration".into()));
    }
    let room = s.sub(t0);
    let limit = |p: &ApproxPoly, d: usize| -> Result<ApproxPoly> {
        let mut cs = Vec::with_capacity(d + 1);
        for i in 0..d {
            cs.push(cap(&p.coeff(i), &plus(&room, &-(k * (qi(i as i64) - qi(d as i64)))))?);
        }
        cs.push(p.coeff(d));
        Ok(ApproxPoly::from_coeffs(p.field(), cs))
    };
    Ok((limit(&g, n1)?, limit(&h, n2)?, steps))
}

/// Whether the monic `g` lifts to a factor of `f` (both made monic), after the
/// substitution `x = π^k y` when `scaling` is `Some(k)`. On success the pair
/// `(g*, h*)` satisfies `g* h* = f`.
pub fn is_hensel_liftable_factor(f: &ExactPoly, g: &ExactPoly, scaling: Option<&Q>) -> Result<Option<FactorLift>> {
    let (f, g) = if g.field().is_subfield_of(f.field()) {
        (f.clone(), g.coerce_to(f.field())?)
    } else {
        (f.coerce_to(g.field())?, g.clone())
    };
    let (n, n1) = (f.degree(), g.degree());
    if n1 < 1 || n1 > n {
        return Err(Error::Invalid(format!("factor of degree {n1} for a polynomial of degree {n}")));
    }
    f.ensure_full_degree()?;
    g.ensure_full_degree()?;
    let k = scaling.cloned().unwrap_or_else(Q::zero);
    let field = f.field().clone();
    let limit = epoch_limit(&field, &[f.node(), g.node()]);
    for ep in 1..=limit {
        let (fh, _) = monic_approx(&f.approx(ep)?)?;
        let (gh, _) = monic_approx(&g.approx(ep)?)?;
        let ev = factor_eval(&fh, &gh, &k)?;
        if ev.integral == Verdict::No {
            return Err(Error::Invalid("rescaled polynomials are not integral".into()));
        }
        match criterion(&ev.s_lo, &ev.s_hi, &ev.t_lo, ev.t.as_ref()) {
            Verdict::No => return Ok(None),
            Verdict::Unknown => continue,
            Verdict::Yes if ev.integral == Verdict::Unknown => continue,
            Verdict::Yes => {}
        }
        let t0 = ev.t.clone().expect("known when the criterion holds");
        let certificate = LiftCertificate {
            kind: LiftKind::FactorPair,
            s: ev.s_lo.clone(),
            t: t0.clone(),
            scaling: if k.is_zero() { Scaling::None } else { Scaling::Variable(k.clone()) },
            epoch: ep,
        };
        let log: SharedLog = Rc::default();
        let start: Vec<Coords> = gh.coeffs().iter().map(Coords::of).collect();
        let run_log = log.clone();
        let k2 = k.clone();
        let func: ApproxFn = Rc::new(move |args: &EvalArgs| {
            let (fh, lead) = monic_approx(args.deps[0].as_poly()?)?;
            let fld = fh.field().clone();
            let warm = match args.engine.latest(args.node) {
                Some(prev) => {
                    let gp = prev.as_tuple()?[0].as_poly()?.coerce_to(&fld)?;
                    let gp = pin_poly(&gp)?;
                    factor_eval(&fh, &gp, &k2)
                        .ok()
                        .filter(|ev| {
                            ev.t.as_ref() == Some(&t0)
                                && criterion(&ev.s_lo, &ev.s_hi, &ev.t_lo, ev.t.as_ref()) == Verdict::Yes
                        })
                        .map(|_| gp)
                }
                None => None,
            };
            let was_warm = warm.is_some();
            let g0 = match warm {
                Some(g) => g,
                None => ApproxPoly::from_coeffs(&fld, start.iter().map(|c| c.build(&fld, PIN)).collect::<Result<_>>()?),
            };
            let (g, h, steps) = newton_factor(&fh, g0, &k2, &t0)?;
            run_log.borrow_mut().runs.push(LiftRun { epoch: args.epoch, warm: was_warm, steps });
            Ok(Approx::Tuple(vec![Approx::Poly(g), Approx::Poly(h.scale(&lead)?)]))
        });
        let ctx = field.ctx();
        let spec = NodeSpec { safe: false, ..NodeSpec::element(field.ring_node(), vec![f.node(), g.node()], func, "hensel factor pair") };
        let pair = ctx.add_node(spec)?;
        ctx.set_min_epoch(pair, ep);
        let pick = |i: usize, d: isize| -> Result<ExactPoly> {
            let func: ApproxFn = Rc::new(move |a: &EvalArgs| Ok(a.deps[0].as_tuple()?[i].clone()));
            ExactPoly::from_fn(&field, vec![pair], d, func, "lifted factor")
        };
        let g_star = pick(0, n1)?;
        let h_star = pick(1, n - n1)?;
        return Ok(Some(FactorLift { g: g_star, h: h_star, certificate, log }));
    }
    Err(Error::precision(format!("factor lifting criterion undecided at max epoch {limit}")))
}

// ---------------------------------------------------------------------------
// factorization

/// What a factor of the Newton-polygon factorization corresponds to.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PieceKind {
    /// `x^k` from exactly zero low coefficients.
    Zero(usize),
    /// A confirmed face of slope `-h/e` (units of the field's uniformizer).
    Face { h: BigInt, e: BigInt },
    /// A linear factor whose root is too close to 0 to place on a face yet.
    Cluster,
}

#[derive(Clone, Debug)]
pub struct Piece {
    pub poly: ExactPoly,
    pub kind: PieceKind,
}

/// The monomial `x^k`.
fn x_pow(field: &ExactField, k: usize) -> Result<ExactPoly> {
    let mut cs = vec![0i64; k + 1];
    cs[k] = 1;
    ExactPoly::from_ints(field, &cs)
}

/// One monic factor per face of the Newton polygon, left to right.
pub fn newton_polygon_factorization(f: &ExactPoly) -> Result<Vec<ExactPoly>> {
    Ok(newton_pieces(f)?.into_iter().map(|p| p.poly).collect())
}

/// Like [`newton_polygon_factorization`], keeping the face each factor belongs to.
pub fn newton_pieces(f: &ExactPoly) -> Result<Vec<Piece>> {
    if f.degree() < 1 {
        return Err(Error::Invalid("factorization needs a polynomial of degree at least 1".into()));
    }
    let field = f.field().clone();
    let f = f.monic()?;
    let k = low_zeros(&f)?;
    let d = f.degree() as usize;
    let mut out_rev: Vec<Piece> = Vec::new();
    if k < d {
        let f1 = if k == 0 { f.clone() } else { coeff_slice(&f, k, d)? };
        let end = d - k;
        let limit = field.ctx().reachable_max(f1.node());
        let mut layout = None;
        for n in field.ready_epoch().max(1)..=limit {
            let pts = f1.points(n)?;
            if !matches!(pts[end], PointData::Known(_)) {
                continue;
            }
            if let Some((j, faces)) = tail_faces(&overlap(&pts), end) {
                if j <= 1 {
                    layout = Some(faces);
                    break;
                }
            }
        }
        let faces = layout.ok_or_else(|| Error::precision(format!("Newton polygon not confirmed at max epoch {limit}")))?;
        let e_abs = qi(field.ramification_index() as i64);
        let mut cur = Some(f1);
        for face in faces.iter().rev() {
            let c = cur.take().expect("remaining factor");
            let (h, e) = face.slope_parts();
            let kind = PieceKind::Face { h: h.clone(), e: e.clone() };
            let il = face.left.0.to_integer().to_usize().expect("small abscissa");
            if il == 0 {
                out_rev.push(Piece { poly: c, kind });
                break;
            }
            let g0 = coeff_slice(&c, il, c.degree() as usize)?;
            let lam = Q::new(h, e) / &e_abs;
            let lift = is_hensel_liftable_factor(&c, &g0, Some(&lam))?
                .ok_or_else(|| Error::Inconsistent("face factor failed the lifting criterion".into()))?;
            out_rev.push(Piece { poly: lift.g, kind });
            cur = Some(lift.h);
        }
        if let Some(c) = cur {
            out_rev.push(Piece { poly: c, kind: PieceKind::Cluster });
        }
    }
    if k > 0 {
        out_rev.push(Piece { poly: x_pow(&field, k)?, kind: PieceKind::Zero(k) });
    }
    out_rev.reverse();
    Ok(out_rev)
}

/// What is known about one factor of [`split_factorization`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitTag {
    /// Face slope in units of the field's uniformizer; `None` for `x^k` and for a
    /// linear factor whose root is not yet placed.
    pub slope: Option<Q>,
    /// The monic irreducible residual factor, low degree first.
    pub residual: FPoly,
    pub multiplicity: usize,
    /// The residual is a single irreducible to the first power.
    pub separated: bool,
    /// Recursion depth at which the factor was produced.
    pub depth: usize,
}

/// Exact constant lifting a residue class.
fn lift_const(field: &ExactField, c: &FElt) -> Result<ExactElt> {
    let a = field.approx(field.ready_epoch())?.lift_residue(c)?;
    field.from_coords(&Coords::of(&a))
}

/// `π^{hM} ψ(x^e / π^h)` for a monic `ψ` of degree `M`.
fn face_factor(field: &ExactField, psi: &FPoly, h: i64, e: usize) -> Result<ExactPoly> {
    let m = psi.len() - 1;
    let zero = field.zero()?;
    let mut cs = vec![zero; e * m + 1];
    for (j, c) in psi.iter().enumerate() {
        cs[e * j] = lift_const(field, c)?.mul_pi_pow(h * (m - j) as i64)?;
    }
    ExactPoly::from_elts(field, &cs)
}

/// Pairwise coprime monic factors, each with a single slope and a residual that is a
/// power of one irreducible. Repeated linear residuals are recentred and split
/// further while `depth_budget` lasts.
pub fn split_factorization(f: &ExactPoly, depth_budget: usize) -> Result<Vec<(ExactPoly, SplitTag)>> {
    split_rec(f, depth_budget, 0)
}

fn split_rec(f: &ExactPoly, budget: usize, level: usize) -> Result<Vec<(ExactPoly, SplitTag)>> {
    let mut out = Vec::new();
    for piece in newton_pieces(f)? {
        match piece.kind {
            PieceKind::Zero(k) => out.push((
                piece.poly,
                SplitTag { slope: None, residual: vec![vec![0], vec![1]], multiplicity: k, separated: k == 1, depth: level },
            )),
            PieceKind::Cluster => out.push((
                piece.poly,
                SplitTag { slope: None, residual: vec![vec![0], vec![1]], multiplicity: 1, separated: true, depth: level },
            )),
            PieceKind::Face { h, e } => {
                let h = h.to_i64().ok_or_else(|| Error::Invalid("slope too large".into()))?;
                let e = e.to_usize().ok_or_else(|| Error::Invalid("slope too large".into()))?;
                out.extend(split_face(&piece.poly, h, e, budget, level)?);
            }
        }
    }
    Ok(out)
}

fn split_face(g: &ExactPoly, h: i64, e: usize, budget: usize, level: usize) -> Result<Vec<(ExactPoly, SplitTag)>> {
    let field = g.field().clone();
    let w = g.degree() as usize;
    let slope = -Q::new(BigInt::from(h), BigInt::from(e));
    let face = Face {
        left: (Q::zero(), Q::new(BigInt::from(h * w as i64), BigInt::from(e))),
        right: (qi(w as i64), Q::zero()),
        left_open: false,
        right_open: false,
    };
    let (kf, r) = g.residual_polynomial(&face)?;
    let (_, facs) = kf.factor(&r)?;
    if facs.len() == 1 {
        let (phi, m) = facs[0].clone();
        let tag = SplitTag { slope: Some(slope.clone()), residual: phi.clone(), multiplicity: m, separated: m == 1, depth: level };
        if m == 1 || budget == 0 || phi.len() != 2 || e != 1 {
            return Ok(vec![(g.clone(), tag)]);
        }
        // repeated linear residual: recentre at its root and split the shifted polynomial
        let c = kf.neg(&phi[0]);
        let a0 = lift_const(&field, &c)?.mul_pi_pow(h)?;
        let shifted = g.shift(&a0)?;
        let back = a0.neg()?;
        return split_rec(&shifted, budget - 1, level + 1)?
            .into_iter()
            .map(|(p, t)| {
                let q = p.shift(&back)?;
                let mult = q.degree() as usize;
                Ok((q, SplitTag { slope: Some(slope.clone()), residual: phi.clone(), multiplicity: mult, separated: t.separated, depth: t.depth }))
            })
            .collect();
    }
    let e_abs = qi(field.ramification_index() as i64);
    let lam = Q::new(BigInt::from(h), BigInt::from(e)) / e_abs;
    let mut out = Vec::new();
    let mut cur = g.clone();
    let last = facs.len() - 1;
    for (idx, (phi, m)) in facs.iter().enumerate() {
        if idx == last {
            out.extend(split_face(&cur, h, e, budget, level)?);
            break;
        }
        let mut psi: FPoly = vec![kf.one()];
        for _ in 0..*m {
            psi = kf.poly_mul(&psi, phi);
        }
        let g0 = face_factor(&field, &psi, h, e)?;
        let lift = is_hensel_liftable_factor(&cur, &g0, Some(&lam))?
            .ok_or_else(|| Error::Inconsistent("residual factor failed the lifting criterion".into()))?;
        out.extend(split_face(&lift.g, h, e, budget, level)?);
        cur = lift.h;
    }
    Ok(out)
}

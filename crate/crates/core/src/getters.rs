//! The getter engine: lazy `Q_p` elements refined to absolute precisions on demand.
//!
//! An element's update function takes a target absolute precision and returns a
//! [`Getter`], a deferred computation that first reports which elements it needs
//! to which precisions and only then produces its value. Dependencies of a whole
//! computation are merged by element id before anything is updated, so each
//! element is refined at most once per request.
//!
//! Scope is scalars of `Q_p` under `+`, `-`, `*`, powers and constants. Absolute
//! precisions are plain integers here; `None` stands for `+∞` (the exact zero).

use std::cell::{Cell, RefCell};
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::rc::Rc;
use std::sync::Arc;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::approx::{is_prime, ApproxElt, ApproxField, PDig, PrimePowers};
use crate::error::{Error, Result};
use crate::val::ExtVal;

pub type EltId = usize;

/// "I can't produce my value until `elt` is known to absolute precision `abs`."
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dep {
    pub elt: EltId,
    pub abs: i64,
}

impl Dep {
    pub fn new(elt: &LazyElt, abs: i64) -> Dep {
        Dep { elt: elt.id, abs }
    }
}

/// The two procedures of a getter; state lives in the implementing value.
pub trait GetterImpl<T> {
    fn get_dependencies(&mut self, u: &Universe) -> Vec<Dep>;
    /// `Ok(None)` means more dependencies must be satisfied first.
    fn get_value(&mut self, u: &Universe) -> Result<Option<T>>;
}

pub struct Getter<T>(Box<dyn GetterImpl<T>>);

impl<T> fmt::Debug for Getter<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Getter")
    }
}

struct FnGetter<S, D, V> {
    state: S,
    deps: D,
    value: V,
}

impl<T, S, D, V> GetterImpl<T> for FnGetter<S, D, V>
where
    D: FnMut(&mut S, &Universe) -> Vec<Dep>,
    V: FnMut(&mut S, &Universe) -> Result<Option<T>>,
{
    fn get_dependencies(&mut self, u: &Universe) -> Vec<Dep> {
        (self.deps)(&mut self.state, u)
    }
    fn get_value(&mut self, u: &Universe) -> Result<Option<T>> {
        (self.value)(&mut self.state, u)
    }
}

impl<T: 'static> Getter<T> {
    /// A getter from its state and two procedures over it.
    pub fn new<S: 'static>(
        state: S,
        get_dependencies: impl FnMut(&mut S, &Universe) -> Vec<Dep> + 'static,
        get_value: impl FnMut(&mut S, &Universe) -> Result<Option<T>> + 'static,
    ) -> Getter<T> {
        Getter(Box::new(FnGetter { state, deps: get_dependencies, value: get_value }))
    }

    pub fn from_impl(g: impl GetterImpl<T> + 'static) -> Getter<T> {
        Getter(Box::new(g))
    }

    /// A getter with no dependencies whose value is `v`.
    pub fn pure(v: T) -> Getter<T> {
        Getter::new(Some(v), |_, _| Vec::new(), |s: &mut Option<T>, _| Ok(s.take()))
    }

    pub fn get_dependencies(&mut self, u: &Universe) -> Vec<Dep> {
        self.0.get_dependencies(u)
    }

    pub fn get_value(&mut self, u: &Universe) -> Result<Option<T>> {
        self.0.get_value(u)
    }
}

/// The getter that does nothing.
pub fn null() -> Getter<()> {
    Getter::pure(())
}

/// Values of all `gs`, collected in order; shared by the compose family.
struct Collect<T> {
    gs: Vec<Option<Getter<T>>>,
    vals: Vec<Option<T>>,
}

impl<T: 'static> Collect<T> {
    fn new(gs: Vec<Getter<T>>) -> Self {
        let n = gs.len();
        Collect { gs: gs.into_iter().map(Some).collect(), vals: (0..n).map(|_| None).collect() }
    }

    fn deps(&mut self, u: &Universe) -> Vec<Dep> {
        self.gs.iter_mut().flatten().flat_map(|g| g.get_dependencies(u)).collect()
    }

    /// All values once every getter has produced one.
    fn poll(&mut self, u: &Universe) -> Result<Option<Vec<T>>> {
        let mut ready = true;
        for (slot, val) in self.gs.iter_mut().zip(self.vals.iter_mut()) {
            if let Some(g) = slot {
                match g.get_value(u)? {
                    Some(v) => {
                        *val = Some(v);
                        *slot = None;
                    }
                    None => ready = false,
                }
            }
        }
        Ok(ready.then(|| self.vals.iter_mut().map(|v| v.take().expect("collected")).collect()))
    }
}

/// `evaluate(compose(gs, f)) = f(evaluate(g1), ..., evaluate(gk))`.
pub fn compose<T: 'static, U: 'static>(gs: Vec<Getter<T>>, f: impl FnOnce(Vec<T>) -> U + 'static) -> Getter<U> {
    Getter::new(
        (Collect::new(gs), Some(f)),
        |s, u| s.0.deps(u),
        |s, u| {
            Ok(match s.0.poll(u)? {
                Some(vs) => Some((s.1.take().ok_or_else(consumed)?)(vs)),
                None => None,
            })
        },
    )
}

/// Like [`compose`], for a procedure run for its side effects on the universe.
pub fn compose_procedure<T: 'static>(
    gs: Vec<Getter<T>>,
    proc_: impl FnOnce(&Universe, Vec<T>) -> Result<()> + 'static,
) -> Getter<()> {
    Getter::new(
        (Collect::new(gs), Some(proc_)),
        |s, u| s.0.deps(u),
        |s, u| match s.0.poll(u)? {
            Some(vs) => {
                (s.1.take().ok_or_else(consumed)?)(u, vs)?;
                Ok(Some(()))
            }
            None => Ok(None),
        },
    )
}

enum Chain<T, U, F> {
    First(Collect<T>, Option<F>),
    Then(Getter<U>),
}

/// `evaluate(compose_getter(gs, f)) = evaluate(f(evaluate(g1), ...))`.
pub fn compose_getter<T: 'static, U: 'static>(
    gs: Vec<Getter<T>>,
    f: impl FnOnce(Vec<T>) -> Getter<U> + 'static,
) -> Getter<U> {
    Getter::new(
        Chain::First(Collect::new(gs), Some(f)),
        |s, u| match s {
            Chain::First(c, _) => c.deps(u),
            Chain::Then(g) => g.get_dependencies(u),
        },
        |s, u| {
            if let Chain::First(c, f) = s {
                match c.poll(u)? {
                    Some(vs) => {
                        let g = (f.take().ok_or_else(consumed)?)(vs);
                        *s = Chain::Then(g);
                    }
                    None => return Ok(None),
                }
            }
            match s {
                Chain::Then(g) => g.get_value(u),
                Chain::First(..) => unreachable!(),
            }
        },
    )
}

/// The getter whose value is the list of values of `gs`.
pub fn flatten<T: 'static>(gs: Vec<Getter<T>>) -> Getter<Vec<T>> {
    compose(gs, |vs| vs)
}

fn consumed() -> Error {
    Error::Invalid("getter value already taken".into())
}

/// Which traversal `satisfy_dependencies` uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Variant {
    /// Restart from the lowest id after any failed node.
    Restart,
    /// Track children and parents; keep going past failures.
    #[default]
    Children,
}

/// Instrumentation counters for one universe.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counters {
    /// Calls of element update functions (getter creations).
    pub update_calls: u64,
    /// Approximations actually replaced.
    pub updates: u64,
    /// `get_value` calls made by `satisfy_dependencies`.
    pub value_calls: u64,
    /// Passes over the dependency array.
    pub passes: u64,
}

type UpdateFn = Rc<dyn Fn(&Universe, i64) -> Getter<()>>;

struct EltData {
    app: PDig,
    baseline: Option<i64>,
    update: UpdateFn,
    label: &'static str,
    targets: Vec<i64>,
}

/// Every lazy element lives in a universe, which hands out creation-ordered ids.
pub struct Universe {
    pp: Arc<PrimePowers>,
    elts: RefCell<Vec<EltData>>,
    variant: Cell<Variant>,
    iteration_cap: Cell<u64>,
    counters: Cell<Counters>,
    registry: RefCell<Registry>,
    seed: Cell<u64>,
}

pub type Gctx = Rc<Universe>;

pub const DEFAULT_ITERATION_CAP: u64 = 100_000;

fn abs_of(d: &PDig) -> Option<i64> {
    d.abs()
}

fn reaches(d: &PDig, n: i64) -> bool {
    abs_of(d).is_none_or(|a| a >= n)
}

/// Truncation to `min(wv + 1, abs)`.
fn first_precision(d: &PDig, pp: &PrimePowers) -> PDig {
    match d {
        PDig::Num { v, r, .. } if *r > 1 => d.with_abs(v + 1, pp).expect("within known precision"),
        _ => d.clone(),
    }
}

fn to_ext(v: Option<i64>) -> ExtVal {
    v.map_or(ExtVal::PosInf, ExtVal::int)
}

impl Universe {
    pub fn new(p: u64) -> Result<Gctx> {
        if !is_prime(p) {
            return Err(Error::Invalid(format!("{p} is not prime")));
        }
        Ok(Rc::new(Universe {
            pp: Arc::new(PrimePowers::new(p)),
            elts: RefCell::new(Vec::new()),
            variant: Cell::new(Variant::default()),
            iteration_cap: Cell::new(DEFAULT_ITERATION_CAP),
            counters: Cell::new(Counters::default()),
            registry: RefCell::new(Registry::default()),
            seed: Cell::new(0),
        }))
    }

    pub fn p(&self) -> u64 {
        self.pp.p()
    }

    pub fn powers(&self) -> &Arc<PrimePowers> {
        &self.pp
    }

    pub fn variant(&self) -> Variant {
        self.variant.get()
    }

    pub fn set_variant(&self, v: Variant) {
        self.variant.set(v);
    }

    pub fn set_iteration_cap(&self, cap: u64) {
        self.iteration_cap.set(cap.max(1));
    }

    pub fn counters(&self) -> Counters {
        self.counters.get()
    }

    pub fn len(&self) -> usize {
        self.elts.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn registry(&self) -> std::cell::RefMut<'_, Registry> {
        self.registry.borrow_mut()
    }

    /// Seed for `random` strategies; each realization restarts from it.
    pub fn set_strategy_seed(&self, seed: u64) {
        self.seed.set(seed);
    }

    fn bump(&self, f: impl FnOnce(&mut Counters)) {
        let mut c = self.counters.get();
        f(&mut c);
        self.counters.set(c);
    }

    /// Current approximation of element `id`.
    pub fn approximation_of(&self, id: EltId) -> PDig {
        self.elts.borrow()[id].app.clone()
    }

    fn is_satisfied(&self, d: &Dep) -> bool {
        reaches(&self.elts.borrow()[d.elt].app, d.abs)
    }

    /// Adds a new element; `make` receives the element's own id.
    pub fn add_element(
        self: &Rc<Self>,
        init: PDig,
        label: &'static str,
        make: impl FnOnce(EltId) -> UpdateFn,
    ) -> LazyElt {
        let mut elts = self.elts.borrow_mut();
        let id = elts.len();
        let baseline = init.wv();
        elts.push(EltData { app: init, baseline, update: make(id), label, targets: Vec::new() });
        LazyElt { u: self.clone(), id }
    }

    /// The `Update` procedure: replaces the approximation of `z` by `new`,
    /// recording `target` as the precision asked for.
    pub fn apply_update(&self, z: EltId, new: PDig, target: i64) -> Result<()> {
        let mut elts = self.elts.borrow_mut();
        let e = &mut elts[z];
        if !e.app.sub(&new, &self.pp).is_weakly_zero() {
            return Err(Error::Inconsistent(format!(
                "update of element {z} ({}) is not weakly equal to its previous approximation",
                e.label
            )));
        }
        if !reaches(&new, target) {
            return Err(Error::Inconsistent(format!("update of element {z} ({}) fell short of {target}", e.label)));
        }
        let gains = match (abs_of(&e.app), abs_of(&new)) {
            (Some(a), Some(b)) => b > a,
            (Some(_), None) => true,
            (None, _) => false,
        };
        if gains {
            e.app = new;
        }
        e.targets.push(target);
        drop(elts);
        self.bump(|c| c.updates += 1);
        Ok(())
    }

    /// `x`update(n)`.
    pub fn update_getter(&self, x: EltId, n: i64) -> Getter<()> {
        let f = self.elts.borrow()[x].update.clone();
        self.bump(|c| c.update_calls += 1);
        f(self, n)
    }

    /// `Approximation_Lazy`: the approximation of `x` truncated to `n`, though
    /// never so far that its weak valuation drops; the mul and pow rules size
    /// their requests by the weak valuations they read.
    pub fn approximation_lazy(&self, x: EltId, n: i64) -> Getter<PDig> {
        Getter::new(
            (),
            move |_, _| vec![Dep { elt: x, abs: n }],
            move |_, u: &Universe| {
                let elts = u.elts.borrow();
                let a = &elts[x].app;
                if !reaches(a, n) {
                    return Ok(None);
                }
                Ok(Some(match a {
                    PDig::Zero => PDig::Zero,
                    _ if a.is_weakly_zero() => a.clone(),
                    PDig::Num { v, .. } => a.with_abs(n.max(v + 1), &u.pp)?,
                }))
            },
        )
    }

    /// `IncreaseAbsolutePrecision_Lazy`: the null getter when `x` is already
    /// precise enough, otherwise `x`update(n diff abs(x))`.
    pub fn increase_abs_prec_lazy(&self, x: EltId, n: &ExtVal) -> Result<Getter<()>> {
        let have = to_ext(abs_of(&self.elts.borrow()[x].app));
        if &have >= n {
            return Ok(null());
        }
        let target = n.diff(&have);
        let k = target
            .floor_i64()
            .ok_or_else(|| Error::Invalid(format!("cannot refine to absolute precision {target}")))?;
        Ok(self.update_getter(x, k))
    }

    pub fn evaluate<T: 'static>(&self, mut g: Getter<T>) -> Result<T> {
        for _ in 0..self.iteration_cap.get() {
            let deps = g.get_dependencies(self);
            self.satisfy_dependencies(deps)?;
            if let Some(v) = g.get_value(self)? {
                return Ok(v);
            }
        }
        Err(Error::IterationCap("getter evaluation did not produce a value".into()))
    }

    /// Merges `todo` into `array`, one entry per element id at the largest
    /// requested precision, and recursively adds the new getters' dependencies.
    /// Already satisfied dependencies are skipped.
    pub fn add_dependencies(&self, array: &mut DepArray, parent: Option<EltId>, todo: Vec<Dep>) {
        let mut todo: Vec<(Dep, Option<EltId>)> = todo.into_iter().map(|d| (d, parent)).collect();
        while let Some((d, par)) = todo.pop() {
            let covered = array.entries.get(&d.elt).is_some_and(|e| d.abs <= e.n);
            if !covered && !self.is_satisfied(&d) {
                let mut g = self.update_getter(d.elt, d.abs);
                let deps = g.get_dependencies(self);
                match array.entries.get_mut(&d.elt) {
                    Some(e) => {
                        e.n = d.abs;
                        e.getter = g;
                    }
                    None => {
                        array.entries.insert(
                            d.elt,
                            Entry { n: d.abs, getter: g, children: HashSet::new(), parents: Vec::new() },
                        );
                    }
                }
                todo.extend(deps.into_iter().map(|x| (x, Some(d.elt))));
            }
            if array.track_children {
                if let Some(p) = par {
                    if p != d.elt && array.entries.contains_key(&d.elt) {
                        array.link(p, d.elt);
                    }
                }
            }
        }
    }

    /// Brings every dependency (and, recursively, theirs) up to its target.
    pub fn satisfy_dependencies(&self, deps: Vec<Dep>) -> Result<()> {
        self.satisfy_with(deps, self.variant.get())
    }

    pub fn satisfy_with(&self, deps: Vec<Dep>, variant: Variant) -> Result<()> {
        let mut array = DepArray::new(variant == Variant::Children);
        self.add_dependencies(&mut array, None, deps);
        let cap = self.iteration_cap.get();
        let mut passes = 0u64;
        while !array.entries.is_empty() {
            passes += 1;
            self.bump(|c| c.passes += 1);
            if passes > cap {
                return Err(Error::IterationCap(format!(
                    "{} dependencies still unsatisfied after {cap} passes",
                    array.entries.len()
                )));
            }
            let keys: Vec<EltId> = array.entries.keys().copied().collect();
            for i in keys {
                let Some(item) = array.entries.get_mut(&i) else { continue };
                if variant == Variant::Children && !item.children.is_empty() {
                    continue;
                }
                self.bump(|c| c.value_calls += 1);
                match item.getter.get_value(self)? {
                    Some(()) => array.remove(i),
                    None => {
                        let more = item.getter.get_dependencies(self);
                        self.add_dependencies(&mut array, Some(i), more);
                        if variant == Variant::Restart {
                            break;
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn constant_pdig(&self, q: &BigRational, n: i64) -> PDig {
        let d = PDig::from_rational(&self.pp, q, 0);
        match d.wv() {
            None => PDig::Zero,
            Some(v) if n <= v => PDig::weak(n),
            Some(v) => PDig::from_rational(&self.pp, q, (n - v) as u64),
        }
    }

    /// A rational constant. Its initial approximation knows only the valuation.
    pub fn constant(self: &Rc<Self>, q: &BigRational) -> LazyElt {
        let init = PDig::from_rational(&self.pp, q, 0);
        let q = q.clone();
        self.add_element(init, "constant", move |z| {
            Rc::new(move |_u: &Universe, n| {
                let q = q.clone();
                Getter::new((), |_, _| Vec::new(), move |_, u: &Universe| {
                    u.apply_update(z, u.constant_pdig(&q, n), n)?;
                    Ok(Some(()))
                })
            })
        })
    }

    pub fn from_int(self: &Rc<Self>, n: i64) -> LazyElt {
        self.constant(&BigRational::from_integer(n.into()))
    }

    /// Sums all of `xs` as a left-nested chain of additions.
    pub fn sum(self: &Rc<Self>, xs: &[LazyElt]) -> Result<LazyElt> {
        let (first, rest) = xs.split_first().ok_or_else(|| Error::Invalid("empty sum".into()))?;
        rest.iter().try_fold(first.clone(), |acc, x| acc.add(x))
    }
}

struct Entry {
    n: i64,
    getter: Getter<()>,
    children: HashSet<EltId>,
    parents: Vec<EltId>,
}

/// The merged dependency array, keyed and traversed by element id.
pub struct DepArray {
    entries: BTreeMap<EltId, Entry>,
    track_children: bool,
}

impl DepArray {
    pub fn new(track_children: bool) -> DepArray {
        DepArray { entries: BTreeMap::new(), track_children }
    }

    /// `(id, target)` pairs in id order.
    pub fn targets(&self) -> Vec<(EltId, i64)> {
        self.entries.iter().map(|(&i, e)| (i, e.n)).collect()
    }

    pub fn children(&self, id: EltId) -> Vec<EltId> {
        let mut c: Vec<EltId> = self.entries.get(&id).map(|e| e.children.iter().copied().collect()).unwrap_or_default();
        c.sort_unstable();
        c
    }

    fn link(&mut self, parent: EltId, child: EltId) {
        let Some(pe) = self.entries.get_mut(&parent) else { return };
        if pe.children.insert(child) {
            self.entries.get_mut(&child).expect("child present").parents.push(parent);
        }
    }

    fn remove(&mut self, i: EltId) {
        if let Some(e) = self.entries.remove(&i) {
            for p in e.parents {
                if let Some(pe) = self.entries.get_mut(&p) {
                    pe.children.remove(&i);
                }
            }
        }
    }
}

/// A handle to an element of a [`Universe`].
#[derive(Clone)]
pub struct LazyElt {
    u: Gctx,
    id: EltId,
}

impl fmt::Debug for LazyElt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LazyElt#{}({})", self.id, self.pdig().render(self.u.p()))
    }
}

impl LazyElt {
    pub fn id(&self) -> EltId {
        self.id
    }

    pub fn universe(&self) -> &Gctx {
        &self.u
    }

    pub fn pdig(&self) -> PDig {
        self.u.approximation_of(self.id)
    }

    /// The current approximation as a kernel element.
    pub fn approximation(&self) -> ApproxElt {
        let d = self.pdig();
        let field = ApproxField::prime_with(self.u.pp.clone(), d.rel().max(1));
        ApproxElt::from_pdig(&field, d)
    }

    pub fn abs_prec(&self) -> ExtVal {
        to_ext(abs_of(&self.pdig()))
    }

    pub fn weak_val(&self) -> ExtVal {
        to_ext(self.pdig().wv())
    }

    pub fn is_weakly_zero(&self) -> bool {
        self.pdig().is_weakly_zero()
    }

    /// Weak valuation at creation; never changes.
    pub fn baseline_valuation(&self) -> ExtVal {
        to_ext(self.u.elts.borrow()[self.id].baseline)
    }

    pub fn label(&self) -> &'static str {
        self.u.elts.borrow()[self.id].label
    }

    /// Targets of the updates applied to this element, in order.
    pub fn update_targets(&self) -> Vec<i64> {
        self.u.elts.borrow()[self.id].targets.clone()
    }

    pub fn update_count(&self) -> usize {
        self.u.elts.borrow()[self.id].targets.len()
    }

    pub fn increase_abs_prec(&self, n: i64) -> Result<()> {
        let g = self.u.increase_abs_prec_lazy(self.id, &ExtVal::int(n))?;
        self.u.evaluate(g)
    }

    /// `Approximation(x, n)`.
    pub fn approximate(&self, n: i64) -> Result<PDig> {
        self.u.evaluate(self.u.approximation_lazy(self.id, n))
    }

    fn check(&self, other: &LazyElt) -> Result<()> {
        if Rc::ptr_eq(&self.u, &other.u) {
            Ok(())
        } else {
            Err(Error::FieldMismatch("elements of different universes".into()))
        }
    }

    fn additive(&self, other: &LazyElt, negate: bool) -> Result<LazyElt> {
        self.check(other)?;
        let pp = self.u.pp.clone();
        let (x, y) = (self.id, other.id);
        let (fx, fy) = (first_precision(&self.pdig(), &pp), first_precision(&other.pdig(), &pp));
        let init = if negate { fx.sub(&fy, &pp) } else { fx.add(&fy, &pp) };
        Ok(self.u.add_element(init, if negate { "sub" } else { "add" }, move |z| {
            Rc::new(move |u: &Universe, n| {
                let pp = pp.clone();
                compose_procedure(vec![u.approximation_lazy(x, n), u.approximation_lazy(y, n)], move |u, v| {
                    let s = if negate { v[0].sub(&v[1], &pp) } else { v[0].add(&v[1], &pp) };
                    u.apply_update(z, s, n)
                })
            })
        }))
    }

    pub fn add(&self, other: &LazyElt) -> Result<LazyElt> {
        self.additive(other, false)
    }

    pub fn sub(&self, other: &LazyElt) -> Result<LazyElt> {
        self.additive(other, true)
    }

    pub fn neg(&self) -> LazyElt {
        let pp = self.u.pp.clone();
        let x = self.id;
        let init = first_precision(&self.pdig(), &pp).neg(&pp);
        self.u.add_element(init, "neg", move |z| {
            Rc::new(move |u: &Universe, n| {
                let pp = pp.clone();
                compose_procedure(vec![u.approximation_lazy(x, n)], move |u, v| u.apply_update(z, v[0].neg(&pp), n))
            })
        })
    }

    /// `x` to `n - wv(y)` and `y` to `n - wv(x)`, weak valuations read when the
    /// update is requested.
    pub fn mul(&self, other: &LazyElt) -> Result<LazyElt> {
        self.check(other)?;
        let pp = self.u.pp.clone();
        let (x, y) = (self.id, other.id);
        let init = first_precision(&self.pdig(), &pp).mul(&first_precision(&other.pdig(), &pp), &pp);
        Ok(self.u.add_element(init, "mul", move |z| {
            Rc::new(move |u: &Universe, n| {
                let (wx, wy) = (u.approximation_of(x).wv(), u.approximation_of(y).wv());
                let (Some(wx), Some(wy)) = (wx, wy) else {
                    return Getter::new((), |_, _| Vec::new(), move |_, u: &Universe| {
                        u.apply_update(z, PDig::Zero, n)?;
                        Ok(Some(()))
                    });
                };
                let pp = pp.clone();
                compose_procedure(
                    vec![u.approximation_lazy(x, n - wy), u.approximation_lazy(y, n - wx)],
                    move |u, v| u.apply_update(z, v[0].mul(&v[1], &pp), n),
                )
            })
        }))
    }

    /// `x^k` for `k >= 1`, needing `x` to `n - (k-1) wv(x)`.
    pub fn pow(&self, k: u32) -> Result<LazyElt> {
        if k == 0 {
            return Ok(self.u.from_int(1));
        }
        let pp = self.u.pp.clone();
        let x = self.id;
        let power = move |d: &PDig, pp: &PrimePowers| (1..k).fold(d.clone(), |acc, _| acc.mul(d, pp));
        let init = power(&first_precision(&self.pdig(), &pp), &pp);
        Ok(self.u.add_element(init, "pow", move |z| {
            Rc::new(move |u: &Universe, n| {
                let Some(wx) = u.approximation_of(x).wv() else {
                    return Getter::new((), |_, _| Vec::new(), move |_, u: &Universe| {
                        u.apply_update(z, PDig::Zero, n)?;
                        Ok(Some(()))
                    });
                };
                let pp = pp.clone();
                let need = n - (k as i64 - 1) * wx;
                compose_procedure(vec![u.approximation_lazy(x, need)], move |u, v| {
                    u.apply_update(z, power(&v[0], &pp), n)
                })
            })
        }))
    }

    /// For each `n` of the strategy, raises the absolute precision to
    /// `baseline + n` and returns the weak valuation once the element is not
    /// weakly zero.
    pub fn valuation_with_strategy(&self, s: &Strategy) -> Result<ExtVal> {
        let baseline = self.u.elts.borrow()[self.id].baseline;
        let seq: Vec<Result<u64>> = {
            let reg = self.u.registry.borrow();
            s.iter(&reg, self.u.seed.get()).collect()
        };
        for n in seq {
            let n = n?;
            if let Some(b) = baseline {
                let target = b.saturating_add(i64::try_from(n).unwrap_or(i64::MAX));
                self.increase_abs_prec(target)?;
            }
            if !self.is_weakly_zero() {
                return Ok(self.weak_val());
            }
        }
        Err(Error::precision("strategy exhausted before the element became nonzero"))
    }

    /// Valuation under the registry's `"default"` strategy.
    pub fn valuation(&self) -> Result<ExtVal> {
        self.valuation_with_strategy(&Strategy::named("default"))
    }
}

/// A precision strategy: a strictly increasing sequence of non-negative integers.
#[derive(Clone)]
pub enum Strategy {
    /// The one-element sequence `(n)`.
    Int(u64),
    /// Concatenation.
    List(Vec<Strategy>),
    /// `m(prev)`: the next value, or `None` to stop.
    Func(Rc<dyn Fn(u64) -> Option<u64>>),
    /// A strategy from the registry.
    Named(String),
    /// Caps everything that follows at `n`, then stops.
    Limit(u64),
    /// `prev -> max(prev + 1, ⌈prev^e⌉)` forever.
    Exp(BigRational),
    /// Draws each following value uniformly from `prev + 1 ..= next`.
    Random,
}

impl fmt::Debug for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Int(n) => write!(f, "{n}"),
            Strategy::List(v) => f.debug_list().entries(v).finish(),
            Strategy::Func(_) => f.write_str("<function>"),
            Strategy::Named(s) => write!(f, "{s:?}"),
            Strategy::Limit(n) => write!(f, "<limit, {n}>"),
            Strategy::Exp(e) => write!(f, "<exp, {e}>"),
            Strategy::Random => f.write_str("<random>"),
        }
    }
}

impl Strategy {
    pub fn named(s: &str) -> Strategy {
        Strategy::Named(s.to_string())
    }

    pub fn exp(e: i64) -> Strategy {
        Strategy::Exp(BigRational::from_integer(e.into()))
    }

    pub fn func(f: impl Fn(u64) -> Option<u64> + 'static) -> Strategy {
        Strategy::Func(Rc::new(f))
    }

    /// The realized sequence; `random` draws from a generator seeded with `seed`.
    pub fn iter<'a>(&self, registry: &'a Registry, seed: u64) -> StrategyIter<'a> {
        StrategyIter {
            registry,
            stack: vec![Frame::List(vec![self.clone()], 0)],
            limit: None,
            rng: None,
            seed,
            prev_out: None,
            prev_under: None,
            done: false,
            expansions: 0,
        }
    }

    /// The first `max` values (stops early at the end or on an error).
    pub fn realize(&self, registry: &Registry, seed: u64, max: usize) -> Result<Vec<u64>> {
        self.iter(registry, seed).take(max).collect()
    }
}

/// Named strategies; ships with `defaultLimit`, `unlimitedDefault` and `default`.
#[derive(Clone, Debug)]
pub struct Registry {
    map: HashMap<String, Strategy>,
}

impl Default for Registry {
    fn default() -> Self {
        let mut map = HashMap::new();
        map.insert("defaultLimit".to_string(), Strategy::Limit(100));
        map.insert(
            "unlimitedDefault".to_string(),
            Strategy::List(vec![Strategy::Int(1), Strategy::Random, Strategy::exp(2)]),
        );
        map.insert(
            "default".to_string(),
            Strategy::List(vec![Strategy::named("defaultLimit"), Strategy::named("unlimitedDefault")]),
        );
        Registry { map }
    }
}

impl Registry {
    pub fn get(&self, name: &str) -> Result<&Strategy> {
        self.map.get(name).ok_or_else(|| Error::Invalid(format!("unknown strategy {name:?}")))
    }

    pub fn set(&mut self, name: &str, s: Strategy) {
        self.map.insert(name.to_string(), s);
    }
}

enum Frame {
    List(Vec<Strategy>, usize),
    Func(Rc<dyn Fn(u64) -> Option<u64>>),
    Exp(BigRational),
}

const MAX_EXPANSIONS: usize = 10_000;

pub struct StrategyIter<'a> {
    registry: &'a Registry,
    stack: Vec<Frame>,
    limit: Option<u64>,
    rng: Option<ChaCha8Rng>,
    seed: u64,
    prev_out: Option<u64>,
    prev_under: Option<u64>,
    done: bool,
    expansions: usize,
}

/// `⌈b^e⌉`, or `None` once it leaves `i64` range.
fn ceil_pow(b: u64, e: &BigRational) -> Option<u64> {
    if !e.is_positive() {
        return Some(1);
    }
    let (num, den) = (e.numer().to_u32()?, e.denom().to_u32()?);
    let target = BigUint::from(b).pow(num);
    let limit = BigUint::from(i64::MAX as u64);
    // smallest m with m^den >= b^num
    let est = (b as f64).powf(num as f64 / den as f64).ceil();
    if !est.is_finite() || est > 9.0e18 {
        return None;
    }
    let mut m = BigUint::from(est as u64);
    while m.pow(den) < target {
        m += 1u32;
    }
    while !m.is_zero() && (&m - 1u32).pow(den) >= target {
        m -= 1u32;
    }
    if m > limit {
        return None;
    }
    m.to_u64()
}

impl StrategyIter<'_> {
    fn next_underlying(&mut self) -> Result<Option<u64>> {
        loop {
            let base = self.prev_under.unwrap_or(0);
            let Some(top) = self.stack.last_mut() else { return Ok(None) };
            match top {
                Frame::Func(f) => match f(base) {
                    Some(m) => return Ok(Some(m)),
                    None => {
                        self.stack.pop();
                    }
                },
                Frame::Exp(e) => {
                    return Ok(ceil_pow(base, e).map(|m| m.max(base + 1)));
                }
                Frame::List(items, i) => {
                    if *i == items.len() {
                        self.stack.pop();
                        continue;
                    }
                    let s = items[*i].clone();
                    *i += 1;
                    match s {
                        Strategy::Int(n) => return Ok(Some(n)),
                        Strategy::List(v) => self.stack.push(Frame::List(v, 0)),
                        Strategy::Named(name) => {
                            self.expansions += 1;
                            if self.expansions > MAX_EXPANSIONS {
                                return Err(Error::Invalid(format!("strategy {name:?} expands without end")));
                            }
                            let s = self.registry.get(&name)?.clone();
                            self.stack.push(Frame::List(vec![s], 0));
                        }
                        Strategy::Limit(n) => self.limit = Some(self.limit.map_or(n, |l| l.min(n))),
                        Strategy::Random => {
                            if self.rng.is_none() {
                                self.rng = Some(ChaCha8Rng::seed_from_u64(self.seed));
                            }
                        }
                        Strategy::Func(f) => self.stack.push(Frame::Func(f)),
                        Strategy::Exp(e) => self.stack.push(Frame::Exp(e)),
                    }
                }
            }
        }
    }
}

impl Iterator for StrategyIter<'_> {
    type Item = Result<u64>;

    fn next(&mut self) -> Option<Result<u64>> {
        if self.done {
            return None;
        }
        let m = match self.next_underlying() {
            Ok(Some(m)) => m,
            Ok(None) => {
                self.done = true;
                return None;
            }
            Err(e) => {
                self.done = true;
                return Some(Err(e));
            }
        };
        if self.prev_under.is_some_and(|p| m <= p) {
            self.done = true;
            return Some(Err(Error::Invalid(format!(
                "strategy is not strictly increasing: {m} after {}",
                self.prev_under.unwrap()
            ))));
        }
        self.prev_under = Some(m);
        let mut out = m;
        if let (Some(rng), Some(p)) = (self.rng.as_mut(), self.prev_out) {
            out = rng.gen_range(p + 1..=m);
        }
        if let Some(l) = self.limit {
            if self.prev_out.is_some_and(|p| p >= l) {
                self.done = true;
                return None;
            }
            if out >= l {
                out = l;
                self.done = true;
            }
        }
        self.prev_out = Some(out);
        Some(Ok(out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn test_first_precision() {
        let u = Universe::new(3).unwrap();
        let d = PDig::from_rational(&u.pp, &BigRational::from_integer(10.into()), 5);
        assert_eq!(first_precision(&d, &u.pp).abs(), Some(1));
        assert_eq!(first_precision(&PDig::weak(4), &u.pp), PDig::weak(4));
    }

    #[test]
    fn test_ceil_pow() {
        assert_eq!(ceil_pow(16, &BigRational::from_integer(2.into())), Some(256));
        assert_eq!(ceil_pow(10, &BigRational::new(3.into(), 2.into())), Some(32));
        assert_eq!(ceil_pow(1 << 40, &BigRational::from_integer(2.into())), None);
    }
}

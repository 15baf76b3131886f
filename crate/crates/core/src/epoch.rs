//! The epoch engine: a DAG of lazily approximated objects with one cached
//! approximation per epoch.
//!
//! Node ids are handed out by the engine in creation order, so every node depends
//! only on nodes with smaller ids and sorting by id is a topological order.

use std::cell::{Cell, RefCell};
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::rc::Rc;
use std::sync::Arc;
use std::time::Instant;

use crate::approx::{ApproxElt, ApproxField, ApproxPoly};
use crate::error::{Error, Result};

/// Relative capacity used at epoch `n`.
pub const fn capacity(n: u32) -> u64 {
    1u64 << n
}

/// Hard ceiling on epochs unless a context raises it.
pub const DEFAULT_EPOCH_CAP: u32 = 20;

pub type NodeId = usize;

/// One approximation of an exact object.
#[derive(Clone, Debug)]
pub enum Approx {
    Field(Arc<ApproxField>),
    /// Polynomial ring over the given field approximation.
    Ring(Arc<ApproxField>),
    Elt(ApproxElt),
    Poly(ApproxPoly),
    Tuple(Vec<Approx>),
}

impl Approx {
    pub fn as_field(&self) -> Result<&Arc<ApproxField>> {
        match self {
            Approx::Field(f) | Approx::Ring(f) => Ok(f),
            _ => Err(Error::Invalid("expected a field approximation".into())),
        }
    }
    pub fn as_elt(&self) -> Result<&ApproxElt> {
        match self {
            Approx::Elt(x) => Ok(x),
            _ => Err(Error::Invalid("expected an element approximation".into())),
        }
    }
    pub fn as_poly(&self) -> Result<&ApproxPoly> {
        match self {
            Approx::Poly(f) => Ok(f),
            _ => Err(Error::Invalid("expected a polynomial approximation".into())),
        }
    }
    pub fn as_tuple(&self) -> Result<&[Approx]> {
        match self {
            Approx::Tuple(xs) => Ok(xs),
            _ => Err(Error::Invalid("expected a tuple approximation".into())),
        }
    }

    fn same_variant(&self, other: &Approx) -> bool {
        std::mem::discriminant(self) == std::mem::discriminant(other)
    }

    /// Coerces into the structure approximation `parent` (used for interpolation).
    pub fn coerce_into(&self, parent: &Approx) -> Result<Approx> {
        let f = parent.as_field()?;
        Ok(match self {
            Approx::Elt(x) => Approx::Elt(x.coerce_to(f)?),
            Approx::Poly(p) => Approx::Poly(p.coerce_to(f)?),
            Approx::Tuple(xs) => Approx::Tuple(xs.iter().map(|x| x.coerce_into(parent)).collect::<Result<_>>()?),
            other => other.clone(),
        })
    }

    /// Whether the structure approximation `parent` can hold this value.
    fn lies_in(&self, parent: &Approx) -> bool {
        let Ok(f) = parent.as_field() else { return false };
        match self {
            Approx::Elt(x) => x.field().compatible(f),
            Approx::Poly(p) => p.field().compatible(f),
            Approx::Tuple(xs) => xs.iter().all(|x| x.lies_in(parent)),
            _ => false,
        }
    }

    /// Weak equality of two approximations at the coarser precision.
    pub fn consistent_with(&self, coarse: &Approx) -> Result<bool> {
        match (self, coarse) {
            (Approx::Field(a), Approx::Field(b)) | (Approx::Ring(a), Approx::Ring(b)) => Ok(a.same_shape(b)),
            (Approx::Elt(a), Approx::Elt(b)) => {
                let (lo, hi) = if a.field().capacity() <= b.field().capacity() { (a, b) } else { (b, a) };
                lo.is_weakly_equal(&hi.coerce_to(lo.field())?)
            }
            (Approx::Poly(a), Approx::Poly(b)) => {
                let (lo, hi) = if a.field().capacity() <= b.field().capacity() { (a, b) } else { (b, a) };
                lo.is_weakly_equal(&hi.coerce_to(lo.field())?)
            }
            (Approx::Tuple(a), Approx::Tuple(b)) => {
                if a.len() != b.len() {
                    return Ok(false);
                }
                for (x, y) in a.iter().zip(b) {
                    if !x.consistent_with(y)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            _ => Ok(false),
        }
    }
}

/// Inputs handed to an approximation function.
pub struct EvalArgs<'a> {
    pub epoch: u32,
    pub deps: &'a [&'a Approx],
    pub engine: &'a Engine,
    pub node: NodeId,
}

pub type ApproxFn = Rc<dyn Fn(&EvalArgs) -> Result<Approx>>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Structure,
    Element,
}

/// How gaps below a freshly set epoch are filled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Interp {
    /// Coerce the top approximation into the parent's lower approximations.
    Coerce,
    /// Call the approximation function again at each lower epoch.
    Regenerate,
}

/// Everything needed to create a node.
pub struct NodeSpec {
    pub deps: Vec<NodeId>,
    pub parent: Option<NodeId>,
    pub func: ApproxFn,
    pub kind: NodeKind,
    pub interp: Interp,
    pub min_epoch: u32,
    pub max_epoch: Option<u32>,
    /// False when the function mutates other nodes or reads its own cache.
    pub safe: bool,
    pub label: &'static str,
}

impl NodeSpec {
    pub fn element(parent: NodeId, deps: Vec<NodeId>, func: ApproxFn, label: &'static str) -> NodeSpec {
        NodeSpec {
            deps,
            parent: Some(parent),
            func,
            kind: NodeKind::Element,
            interp: Interp::Coerce,
            min_epoch: 1,
            max_epoch: None,
            safe: true,
            label,
        }
    }

    pub fn structure(deps: Vec<NodeId>, func: ApproxFn, label: &'static str) -> NodeSpec {
        NodeSpec {
            deps,
            parent: None,
            func,
            kind: NodeKind::Structure,
            interp: Interp::Regenerate,
            min_epoch: 1,
            max_epoch: None,
            safe: true,
            label,
        }
    }
}

struct NodeData {
    deps: Vec<NodeId>,
    parent: Option<NodeId>,
    apps: Vec<Rc<Approx>>,
    func: ApproxFn,
    kind: NodeKind,
    interp: Interp,
    min_epoch: u32,
    max_epoch: Option<u32>,
    safe: bool,
    label: &'static str,
    calls: u64,
}

/// Instrumentation counters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Stats {
    pub approx_calls: u64,
    pub interpolated_slots: u64,
    pub consistency_checks: u64,
}

/// One engine context. Not shared across threads; independent contexts may run in parallel.
pub struct Engine {
    nodes: RefCell<Vec<NodeData>>,
    approx_calls: Cell<u64>,
    interpolated: Cell<u64>,
    checks: Cell<u64>,
    trace: Cell<bool>,
    epoch_cap: Cell<u32>,
    check_consistency: Cell<bool>,
}

pub type Ctx = Rc<Engine>;

impl Engine {
    pub fn new() -> Ctx {
        Rc::new(Engine {
            nodes: RefCell::new(Vec::new()),
            approx_calls: Cell::new(0),
            interpolated: Cell::new(0),
            checks: Cell::new(0),
            trace: Cell::new(false),
            epoch_cap: Cell::new(DEFAULT_EPOCH_CAP),
            check_consistency: Cell::new(true),
        })
    }

    pub fn with_epoch_cap(cap: u32) -> Ctx {
        let e = Self::new();
        e.epoch_cap.set(cap.max(1));
        e
    }

    pub fn epoch_cap(&self) -> u32 {
        self.epoch_cap.get()
    }

    pub fn set_epoch_cap(&self, cap: u32) {
        self.epoch_cap.set(cap.max(1));
    }

    /// Enables a trace line on standard error per approximation call.
    pub fn set_trace(&self, on: bool) {
        self.trace.set(on);
    }

    pub fn stats(&self) -> Stats {
        Stats {
            approx_calls: self.approx_calls.get(),
            interpolated_slots: self.interpolated.get(),
            consistency_checks: self.checks.get(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn add_node(&self, spec: NodeSpec) -> Result<NodeId> {
        let mut nodes = self.nodes.borrow_mut();
        let id = nodes.len();
        if spec.deps.iter().chain(spec.parent.iter()).any(|&d| d >= id) {
            return Err(Error::Invalid("dependencies must already exist".into()));
        }
        nodes.push(NodeData {
            deps: spec.deps,
            parent: spec.parent,
            apps: Vec::new(),
            func: spec.func,
            kind: spec.kind,
            interp: spec.interp,
            min_epoch: spec.min_epoch.max(1),
            max_epoch: spec.max_epoch,
            safe: spec.safe,
            label: spec.label,
            calls: 0,
        });
        Ok(id)
    }

    pub fn deps(&self, x: NodeId) -> Vec<NodeId> {
        self.nodes.borrow()[x].deps.clone()
    }
    pub fn parent(&self, x: NodeId) -> Option<NodeId> {
        self.nodes.borrow()[x].parent
    }
    pub fn kind(&self, x: NodeId) -> NodeKind {
        self.nodes.borrow()[x].kind
    }
    pub fn label(&self, x: NodeId) -> &'static str {
        self.nodes.borrow()[x].label
    }
    pub fn min_epoch(&self, x: NodeId) -> u32 {
        self.nodes.borrow()[x].min_epoch
    }
    pub fn max_epoch(&self, x: NodeId) -> Option<u32> {
        self.nodes.borrow()[x].max_epoch
    }
    pub fn set_min_epoch(&self, x: NodeId, m: u32) {
        self.nodes.borrow_mut()[x].min_epoch = m.max(1);
    }
    pub fn set_max_epoch(&self, x: NodeId, m: Option<u32>) {
        self.nodes.borrow_mut()[x].max_epoch = m;
    }
    pub fn is_safe(&self, x: NodeId) -> bool {
        self.nodes.borrow()[x].safe
    }
    pub fn set_safe(&self, x: NodeId, safe: bool) {
        self.nodes.borrow_mut()[x].safe = safe;
    }
    /// Number of approximation calls made for one node.
    pub fn node_calls(&self, x: NodeId) -> u64 {
        self.nodes.borrow()[x].calls
    }
    /// Highest filled epoch (0 when empty).
    pub fn current_epoch(&self, x: NodeId) -> u32 {
        self.nodes.borrow()[x].apps.len() as u32
    }
    /// Cached approximation at epoch `n`, without computing anything.
    pub fn cached(&self, x: NodeId, n: u32) -> Option<Rc<Approx>> {
        if n == 0 {
            return None;
        }
        self.nodes.borrow()[x].apps.get(n as usize - 1).cloned()
    }
    pub fn latest(&self, x: NodeId) -> Option<Rc<Approx>> {
        self.nodes.borrow()[x].apps.last().cloned()
    }
    /// Disables consistency checks in `set_approximation` (for measurements only).
    pub fn set_consistency_checks(&self, on: bool) {
        self.check_consistency.set(on);
    }

    fn effective_max(&self, x: NodeId) -> u32 {
        let cap = self.epoch_cap.get();
        self.nodes.borrow()[x].max_epoch.map_or(cap, |m| m.min(cap))
    }

    /// Largest epoch `x` may be brought to.
    pub fn reachable_max(&self, x: NodeId) -> u32 {
        self.effective_max(x)
    }

    /// Collects the nodes needing work and their target epochs, checking max epochs first.
    fn plan(&self, x: NodeId, n: u32) -> Result<Vec<(NodeId, u32)>> {
        let nodes = self.nodes.borrow();
        let mut targets: HashMap<NodeId, u32> = HashMap::new();
        let mut heap = BinaryHeap::new();
        let t0 = n.max(nodes[x].min_epoch);
        targets.insert(x, t0);
        heap.push(x);
        let mut work = Vec::new();
        let cap = self.epoch_cap.get();
        while let Some(y) = heap.pop() {
            let t = targets[&y];
            let node = &nodes[y];
            if node.apps.len() as u32 >= t {
                continue;
            }
            let limit = node.max_epoch.map_or(cap, |m| m.min(cap));
            if t > limit {
                return Err(Error::precision(format!(
                    "max_epoch exceeded: node {y} ({}) needs epoch {t}, limit {limit}",
                    node.label
                )));
            }
            work.push((y, t));
            for &d in node.deps.iter().chain(node.parent.iter()) {
                let td = t.max(nodes[d].min_epoch);
                match targets.get_mut(&d) {
                    Some(old) => *old = (*old).max(td),
                    None => {
                        targets.insert(d, td);
                        heap.push(d);
                    }
                }
            }
        }
        // a node popped later (smaller id) never raises the target of one popped earlier
        work.reverse();
        Ok(work)
    }

    pub fn bring_to_epoch(&self, x: NodeId, n: u32) -> Result<()> {
        if n == 0 {
            return Err(Error::Invalid("epochs start at 1".into()));
        }
        {
            let nodes = self.nodes.borrow();
            if nodes[x].apps.len() as u32 >= n.max(nodes[x].min_epoch) {
                return Ok(());
            }
        }
        for (y, t) in self.plan(x, n)? {
            self.update_node(y, t)?;
        }
        Ok(())
    }

    /// Like [`bring_to_epoch`](Self::bring_to_epoch) but reports an unreachable epoch as `false`.
    pub fn can_bring_to_epoch(&self, x: NodeId, n: u32) -> Result<bool> {
        match self.plan(x, n.max(1)) {
            Err(Error::Precision(_)) => Ok(false),
            Err(e) => Err(e),
            Ok(work) => {
                for (y, t) in work {
                    self.update_node(y, t)?;
                }
                Ok(true)
            }
        }
    }

    pub fn epoch_approximation(&self, x: NodeId, n: u32) -> Result<Rc<Approx>> {
        self.bring_to_epoch(x, n)?;
        Ok(self.cached(x, n).expect("slot filled by bring_to_epoch"))
    }

    /// Computes and stores the approximation of `y` at epoch `t`; dependencies must
    /// already be at epoch `t`.
    fn update_node(&self, y: NodeId, t: u32) -> Result<()> {
        let (func, dep_apps) = {
            let nodes = self.nodes.borrow();
            let node = &nodes[y];
            if node.apps.len() as u32 >= t {
                return Ok(());
            }
            let mut dep_apps = Vec::with_capacity(node.deps.len());
            for &d in &node.deps {
                match nodes[d].apps.get(t as usize - 1) {
                    Some(a) => dep_apps.push(a.clone()),
                    None => return Err(Error::Invalid(format!("dependency {d} of {y} not at epoch {t}"))),
                }
            }
            (node.func.clone(), dep_apps)
        };
        let app = self.call(y, t, &func, &dep_apps)?;
        self.set_approximation(y, t, app)
    }

    fn call(&self, y: NodeId, t: u32, func: &ApproxFn, dep_apps: &[Rc<Approx>]) -> Result<Approx> {
        let refs: Vec<&Approx> = dep_apps.iter().map(|a| a.as_ref()).collect();
        let start = self.trace.get().then(Instant::now);
        let out = func(&EvalArgs { epoch: t, deps: &refs, engine: self, node: y });
        self.approx_calls.set(self.approx_calls.get() + 1);
        self.nodes.borrow_mut()[y].calls += 1;
        if let Some(s) = start {
            eprintln!("get_approximation node={y} epoch={t} elapsed_us={}", s.elapsed().as_micros());
        }
        out
    }

    /// Stores `app` at epoch `n`, filling any gap below it by interpolation.
    pub fn set_approximation(&self, x: NodeId, n: u32, app: Approx) -> Result<()> {
        let (have, parent, prev) = {
            let nodes = self.nodes.borrow();
            let node = &nodes[x];
            (node.apps.len() as u32, node.parent, node.apps.last().cloned())
        };
        if n <= have {
            return Err(Error::Invalid(format!("epoch {n} of node {x} is already set")));
        }
        if let Some(p) = &prev {
            if !p.same_variant(&app) {
                return Err(Error::Invalid("approximation has the wrong structural type".into()));
            }
        }
        if let Some(par) = parent {
            if self.current_epoch(par) < n {
                self.bring_to_epoch(par, n)?;
            }
            let pa = self.cached(par, n).unwrap();
            if !app.lies_in(&pa) {
                return Err(Error::Inconsistent(format!("approximation of node {x} is not in its parent at epoch {n}")));
            }
        }
        if self.check_consistency.get() {
            if let Some(p) = &prev {
                self.checks.set(self.checks.get() + 1);
                if !app.consistent_with(p)? {
                    return Err(Error::Inconsistent(format!(
                        "node {x} at epoch {n} disagrees with epoch {have}"
                    )));
                }
            }
        }
        let gap = if n > have + 1 { self.interpolate_epochs(x, have + 1, n, &app)? } else { Vec::new() };
        let mut nodes = self.nodes.borrow_mut();
        let node = &mut nodes[x];
        node.apps.extend(gap.into_iter().map(Rc::new));
        node.apps.push(Rc::new(app));
        Ok(())
    }

    /// Approximations for epochs `n1..n2` derived from the one at `n2`.
    pub fn interpolate_epochs(&self, x: NodeId, n1: u32, n2: u32, app: &Approx) -> Result<Vec<Approx>> {
        if n1 == 0 || n1 >= n2 {
            return Ok(Vec::new());
        }
        let (interp, parent, min_epoch, func, deps) = {
            let nodes = self.nodes.borrow();
            let node = &nodes[x];
            (node.interp, node.parent, node.min_epoch, node.func.clone(), node.deps.clone())
        };
        self.interpolated.set(self.interpolated.get() + u64::from(n2 - n1));
        match (interp, parent) {
            (Interp::Coerce, Some(par)) => {
                self.bring_to_epoch(par, n2)?;
                (n1..n2)
                    .map(|k| app.coerce_into(&self.cached(par, k).unwrap()))
                    .collect()
            }
            _ => {
                if n1 < min_epoch {
                    return Err(Error::Unsupported(
                        "not implemented: InterpolateEpochs with min_epoch>1".into(),
                    ));
                }
                let mut out = Vec::with_capacity((n2 - n1) as usize);
                for k in n1..n2 {
                    let dep_apps: Vec<Rc<Approx>> = deps
                        .iter()
                        .map(|&d| self.cached(d, k).ok_or_else(|| Error::Invalid("dependency gap".into())))
                        .collect::<Result<_>>()?;
                    out.push(self.call(x, k, &func, &dep_apps)?);
                }
                Ok(out)
            }
        }
    }

    /// Brings `x` up epoch by epoch until `pred` holds, then rewrites every lower
    /// slot from that approximation. Returns the first satisfying epoch.
    pub fn ensure_approximations(&self, x: NodeId, pred: &dyn Fn(&Approx) -> bool) -> Result<u32> {
        let limit = self.effective_max(x);
        let mut n = 1;
        loop {
            if n > limit {
                return Err(Error::precision(format!("max_epoch {limit} reached before the predicate held")));
            }
            self.bring_to_epoch(x, n)?;
            let a = self.cached(x, n).unwrap();
            if pred(&a) {
                if n > 1 {
                    let lower = self.interpolate_epochs(x, 1, n, &a)?;
                    if !lower.iter().all(pred) {
                        return Err(Error::Inconsistent("interpolated approximations lost the predicate".into()));
                    }
                    let mut nodes = self.nodes.borrow_mut();
                    for (i, l) in lower.into_iter().enumerate() {
                        nodes[x].apps[i] = Rc::new(l);
                    }
                }
                return Ok(n);
            }
            n += 1;
        }
    }

    /// Nodes strictly between `x` and the cut set `d`, sorted by id (`x` excluded).
    fn chain_between(&self, x: NodeId, d: &[NodeId]) -> Vec<NodeId> {
        let nodes = self.nodes.borrow();
        let cut: HashSet<NodeId> = d.iter().copied().collect();
        let mut seen: HashSet<NodeId> = HashSet::new();
        let mut stack = vec![x];
        while let Some(y) = stack.pop() {
            for &z in &nodes[y].deps {
                if !cut.contains(&z) && seen.insert(z) {
                    stack.push(z);
                }
            }
        }
        let mut out: Vec<NodeId> = seen.into_iter().collect();
        out.sort_unstable();
        out
    }

    /// A copy of `x` whose direct dependencies are exactly `d`.
    pub fn with_dependencies(self: &Rc<Self>, x: NodeId, d: &[NodeId], fast: bool) -> Result<NodeId> {
        let chain = self.chain_between(x, d);
        let (parent, kind, interp, x_min, x_max, x_label) = {
            let nodes = self.nodes.borrow();
            let n = &nodes[x];
            (n.parent, n.kind, n.interp, n.min_epoch, n.max_epoch, n.label)
        };
        if fast {
            self.fast_chain(x, d, &chain, parent, kind, interp, x_label)
        } else {
            // m(y) = max min_epoch over y and everything in the chain depending on y
            let mut m: HashMap<NodeId, u32> = HashMap::new();
            m.insert(x, x_min);
            {
                let nodes = self.nodes.borrow();
                let mut order: Vec<NodeId> = chain.clone();
                order.push(x);
                for &y in order.iter().rev() {
                    let my = m.get(&y).copied().unwrap_or(1).max(nodes[y].min_epoch);
                    m.insert(y, my);
                    for &z in &nodes[y].deps {
                        if let Some(mz) = m.get_mut(&z) {
                            *mz = (*mz).max(my);
                        } else if chain.binary_search(&z).is_ok() {
                            m.insert(z, my);
                        }
                    }
                }
            }
            let list: Vec<(NodeId, u32)> = chain.iter().map(|&y| (y, m[&y])).collect();
            let engine = Rc::downgrade(self);
            let x_deps = self.deps(x);
            let x_func = self.nodes.borrow()[x].func.clone();
            let func: ApproxFn = Rc::new(move |args: &EvalArgs| {
                let eng = engine.upgrade().ok_or_else(|| Error::Invalid("engine dropped".into()))?;
                for &(y, my) in &list {
                    let e = args.epoch.max(my);
                    if eng.current_epoch(y) < e {
                        eng.update_in_chain(y, e)?;
                    }
                }
                let dep_apps: Vec<Rc<Approx>> = x_deps
                    .iter()
                    .map(|&z| {
                        if eng.current_epoch(z) < args.epoch {
                            eng.bring_to_epoch(z, args.epoch)?;
                        }
                        Ok(eng.cached(z, args.epoch).unwrap())
                    })
                    .collect::<Result<_>>()?;
                let refs: Vec<&Approx> = dep_apps.iter().map(|a| a.as_ref()).collect();
                x_func(&EvalArgs { epoch: args.epoch, deps: &refs, engine: args.engine, node: x })
            });
            self.add_node(NodeSpec {
                deps: d.to_vec(),
                parent,
                func,
                kind,
                interp,
                min_epoch: x_min,
                max_epoch: x_max,
                safe: false,
                label: x_label,
            })
        }
    }

    /// Updates one chain member whose dependencies are expected to be in place;
    /// falls back to a full traversal otherwise.
    fn update_in_chain(&self, y: NodeId, e: u32) -> Result<()> {
        let ready = {
            let nodes = self.nodes.borrow();
            nodes[y].deps.iter().all(|&d| nodes[d].apps.len() as u32 >= e)
                && nodes[y].max_epoch.is_none_or(|m| e <= m)
        };
        if ready {
            self.update_node(y, e)
        } else {
            self.bring_to_epoch(y, e)
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn fast_chain(
        self: &Rc<Self>,
        x: NodeId,
        d: &[NodeId],
        chain: &[NodeId],
        parent: Option<NodeId>,
        kind: NodeKind,
        interp: Interp,
        label: &'static str,
    ) -> Result<NodeId> {
        #[derive(Clone, Copy)]
        enum Src {
            Ext(usize),
            Local(usize),
        }
        let nodes = self.nodes.borrow();
        let ext: HashMap<NodeId, usize> = d.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        let mut local: HashMap<NodeId, usize> = HashMap::new();
        let mut steps: Vec<(NodeId, ApproxFn, Vec<Src>)> = Vec::with_capacity(chain.len() + 1);
        let mut min_e = 1;
        let mut max_e: Option<u32> = None;
        for &y in chain.iter().chain(std::iter::once(&x)) {
            let node = &nodes[y];
            if !node.safe {
                return Err(Error::Unsupported(format!(
                    "fast mode cannot inline node {y} ({}): it is not safe",
                    node.label
                )));
            }
            min_e = min_e.max(node.min_epoch);
            if let Some(m) = node.max_epoch {
                max_e = Some(max_e.map_or(m, |o| o.min(m)));
            }
            let srcs = node
                .deps
                .iter()
                .map(|z| match (ext.get(z), local.get(z)) {
                    (Some(&i), _) => Ok(Src::Ext(i)),
                    (None, Some(&j)) => Ok(Src::Local(j)),
                    _ => Err(Error::Invalid(format!("node {z} is neither in the cut set nor inlined"))),
                })
                .collect::<Result<Vec<_>>>()?;
            local.insert(y, steps.len());
            steps.push((y, node.func.clone(), srcs));
        }
        drop(nodes);
        let func: ApproxFn = Rc::new(move |args: &EvalArgs| {
            let mut scratch: Vec<Approx> = Vec::with_capacity(steps.len());
            let mut refs: Vec<&Approx> = Vec::new();
            for (y, f, srcs) in &steps {
                refs.clear();
                let out = {
                    let mut local_refs: Vec<&Approx> = Vec::with_capacity(srcs.len());
                    for s in srcs {
                        local_refs.push(match *s {
                            Src::Ext(i) => args.deps[i],
                            Src::Local(j) => &scratch[j],
                        });
                    }
                    f(&EvalArgs { epoch: args.epoch, deps: &local_refs, engine: args.engine, node: *y })?
                };
                scratch.push(out);
            }
            Ok(scratch.pop().expect("chain contains x"))
        });
        self.add_node(NodeSpec {
            deps: d.to_vec(),
            parent,
            func,
            kind,
            interp,
            min_epoch: min_e,
            max_epoch: max_e,
            safe: true,
            label,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approx::PrimePowers;
    use num_bigint::BigInt;
    use num_rational::BigRational;

    fn q2(eng: &Ctx) -> NodeId {
        let pp = Arc::new(PrimePowers::new(2));
        let f: ApproxFn = Rc::new(move |a: &EvalArgs| Ok(Approx::Field(ApproxField::prime_with(pp.clone(), capacity(a.epoch)))));
        eng.add_node(NodeSpec::structure(vec![], f, "Q2")).unwrap()
    }

    fn constant(eng: &Ctx, field: NodeId, q: i64) -> NodeId {
        let f: ApproxFn = Rc::new(move |a: &EvalArgs| {
            let fld = a.deps[0].as_field()?;
            let q = BigRational::from_integer(BigInt::from(q));
            Ok(Approx::Elt(ApproxElt::from_rational_abs(fld, &q, capacity(a.epoch) as i64)))
        });
        eng.add_node(NodeSpec::element(field, vec![field], f, "const")).unwrap()
    }

    fn add(eng: &Ctx, field: NodeId, x: NodeId, y: NodeId) -> NodeId {
        let f: ApproxFn = Rc::new(|a: &EvalArgs| Ok(Approx::Elt(a.deps[0].as_elt()?.add(a.deps[1].as_elt()?)?)));
        eng.add_node(NodeSpec::element(field, vec![x, y], f, "add")).unwrap()
    }

    #[test]
    fn test_constant_capacities() {
        let eng = Engine::new();
        let k = q2(&eng);
        eng.bring_to_epoch(k, 3).unwrap();
        let caps: Vec<u64> = (1..=3).map(|n| eng.cached(k, n).unwrap().as_field().unwrap().capacity()).collect();
        assert_eq!(caps, vec![2, 4, 8]);
    }

    #[test]
    fn test_second_bring_is_free() {
        let eng = Engine::new();
        let k = q2(&eng);
        let a = constant(&eng, k, 1);
        let b = add(&eng, k, a, a);
        eng.bring_to_epoch(b, 4).unwrap();
        let calls = eng.stats().approx_calls;
        eng.bring_to_epoch(b, 4).unwrap();
        eng.bring_to_epoch(b, 2).unwrap();
        assert_eq!(eng.stats().approx_calls, calls);
    }

    #[test]
    fn test_max_epoch_error() {
        let eng = Engine::new();
        let k = q2(&eng);
        let a = constant(&eng, k, 1);
        eng.set_max_epoch(a, Some(2));
        assert!(matches!(eng.bring_to_epoch(a, 5), Err(Error::Precision(_))));
        assert!(!eng.can_bring_to_epoch(a, 5).unwrap());
        assert!(eng.can_bring_to_epoch(a, 2).unwrap());
    }

    #[test]
    fn test_set_with_gap_interpolates() {
        let eng = Engine::new();
        let k = q2(&eng);
        let never: ApproxFn = Rc::new(|_| Err(Error::Invalid("unused".into())));
        let x = eng.add_node(NodeSpec::element(k, vec![], never, "manual")).unwrap();
        eng.bring_to_epoch(k, 4).unwrap();
        let f1 = eng.cached(k, 1).unwrap().as_field().unwrap().clone();
        let f4 = eng.cached(k, 4).unwrap().as_field().unwrap().clone();
        let one = ApproxElt::from_rational_abs(&f1, &BigRational::from_integer(1.into()), 1);
        eng.set_approximation(x, 1, Approx::Elt(one)).unwrap();
        let three = ApproxElt::from_rational_abs(&f4, &BigRational::from_integer(3.into()), 8);
        eng.set_approximation(x, 4, Approx::Elt(three)).unwrap();
        assert_eq!(eng.current_epoch(x), 4);
        let s2 = eng.cached(x, 2).unwrap();
        assert_eq!(s2.as_elt().unwrap().field().capacity(), 4);
        // inconsistent value
        let eng2 = Engine::new();
        let k2 = q2(&eng2);
        let never: ApproxFn = Rc::new(|_| Err(Error::Invalid("unused".into())));
        let y = eng2.add_node(NodeSpec::element(k2, vec![], never, "manual")).unwrap();
        eng2.bring_to_epoch(k2, 4).unwrap();
        let g1 = eng2.cached(k2, 1).unwrap().as_field().unwrap().clone();
        let g4 = eng2.cached(k2, 4).unwrap().as_field().unwrap().clone();
        eng2.set_approximation(y, 1, Approx::Elt(ApproxElt::from_rational_abs(&g1, &BigRational::from_integer(1.into()), 1))).unwrap();
        let zero = crate::approx::linalg::weak_zero(&g4, &crate::val::ExtVal::int(8));
        assert!(matches!(eng2.set_approximation(y, 4, Approx::Elt(zero)), Err(Error::Inconsistent(_))));
    }

    #[test]
    fn test_regenerate_with_min_epoch_errors() {
        let eng = Engine::new();
        let k = q2(&eng);
        eng.set_min_epoch(k, 3);
        let f4 = ApproxField::prime(2, 8).unwrap();
        let err = eng.interpolate_epochs(k, 2, 3, &Approx::Field(f4));
        assert!(matches!(err, Err(Error::Unsupported(_))));
    }

    #[test]
    fn test_with_dependencies_modes_agree() {
        let eng = Engine::new();
        let k = q2(&eng);
        let x1 = constant(&eng, k, 1);
        let x2 = constant(&eng, k, 2);
        let mut xs = vec![x1, x2];
        for i in 2..40 {
            let n = add(&eng, k, xs[i - 1], xs[i - 2]);
            xs.push(n);
        }
        let y = *xs.last().unwrap();
        let y_opt = eng.with_dependencies(y, &[x1, x2], false).unwrap();
        let y_fast = eng.with_dependencies(y, &[x1, x2], true).unwrap();
        for n in 1..=6 {
            let a = eng.epoch_approximation(y, n).unwrap();
            let b = eng.epoch_approximation(y_opt, n).unwrap();
            let c = eng.epoch_approximation(y_fast, n).unwrap();
            assert!(a.consistent_with(&b).unwrap());
            assert!(a.consistent_with(&c).unwrap());
            assert_eq!(a.as_elt().unwrap().render(), c.as_elt().unwrap().render());
        }
    }

    #[test]
    fn test_fast_chain_min_epoch_propagates() {
        let eng = Engine::new();
        let k = q2(&eng);
        let x1 = constant(&eng, k, 1);
        let x2 = add(&eng, k, x1, x1);
        eng.set_min_epoch(x2, 3);
        let x3 = add(&eng, k, x2, x1);
        let fast = eng.with_dependencies(x3, &[x1], true).unwrap();
        assert_eq!(eng.min_epoch(fast), 3);
    }

    #[test]
    fn test_ensure_nonzero_rewrites_low_slots() {
        let eng = Engine::new();
        let k = q2(&eng);
        let x = constant(&eng, k, 32);
        let first = eng
            .ensure_approximations(x, &|a: &Approx| !a.as_elt().unwrap().is_weakly_zero())
            .unwrap();
        assert_eq!(first, 3);
        for n in 1..=3 {
            let a = eng.cached(x, n).unwrap();
            assert!(!a.as_elt().unwrap().is_weakly_zero());
            assert_eq!(a.as_elt().unwrap().weak_val(), crate::val::ExtVal::int(5));
        }
    }

    #[test]
    fn test_ensure_on_zero_hits_max_epoch() {
        let eng = Engine::new();
        let k = q2(&eng);
        let x = constant(&eng, k, 0);
        eng.set_max_epoch(x, Some(4));
        let r = eng.ensure_approximations(x, &|a: &Approx| !a.as_elt().unwrap().is_weakly_zero());
        assert!(matches!(r, Err(Error::Precision(_))));
    }
}

//! Tuples of elements sharing one node, so all components refine together.

use std::rc::Rc;

use super::field::{ExactElt, ExactField};
use crate::approx::ApproxElt;
use crate::epoch::{Approx, ApproxFn, EvalArgs, NodeId, NodeSpec};
use crate::error::Result;

#[derive(Clone, Debug)]
pub struct ExactTuple {
    field: ExactField,
    node: NodeId,
    components: Vec<ExactElt>,
}

impl ExactTuple {
    /// A tuple node whose function returns `len` elements of `field` at once.
    pub fn from_fn(
        field: &ExactField,
        deps: Vec<NodeId>,
        len: usize,
        func: ApproxFn,
        label: &'static str,
        safe: bool,
    ) -> Result<ExactTuple> {
        let spec = NodeSpec { safe, ..NodeSpec::element(field.node(), deps, func, label) };
        let node = field.ctx().add_node(spec)?;
        let components = (0..len)
            .map(|i| {
                let pick: ApproxFn = Rc::new(move |a: &EvalArgs| Ok(a.deps[0].as_tuple()?[i].clone()));
                field.element(vec![node], pick, "tuple component")
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ExactTuple { field: field.clone(), node, components })
    }

    /// Groups existing elements of one field.
    pub fn from_elts(field: &ExactField, xs: &[ExactElt]) -> Result<ExactTuple> {
        let deps = xs.iter().map(|x| field.coerce(x).map(|y| y.node())).collect::<Result<Vec<_>>>()?;
        let func: ApproxFn = Rc::new(|a: &EvalArgs| Ok(Approx::Tuple(a.deps.iter().map(|&d| d.clone()).collect())));
        Self::from_fn(field, deps, xs.len(), func, "tuple", true)
    }

    pub fn field(&self) -> &ExactField {
        &self.field
    }
    pub fn node(&self) -> NodeId {
        self.node
    }
    pub fn len(&self) -> usize {
        self.components.len()
    }
    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }
    pub fn components(&self) -> &[ExactElt] {
        &self.components
    }

    pub fn approx(&self, n: u32) -> Result<Vec<ApproxElt>> {
        let a = self.field.ctx().epoch_approximation(self.node, n)?;
        a.as_tuple()?.iter().map(|x| x.as_elt().cloned()).collect()
    }
}

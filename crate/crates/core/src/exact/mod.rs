//! Exact objects built on the epoch engine: fields, elements, polynomials, tuples
//! and square polynomial systems.

mod field;
mod mpoly;
mod poly;
mod tuple;

pub use field::{digit_expansion, Coords, ExactElt, ExactField};
pub use mpoly::{ApproxSystem, ExactMPolySystem};
pub use poly::{point_data, residual_of, ExactPoly};
pub use tuple::ExactTuple;

//! Fixed-precision p-adic kernel.

mod digits;
mod field;
pub mod linalg;
mod poly;
mod residue;

pub use digits::{PDig, PrimePowers};
pub use field::{is_prime, ApproxElt, ApproxField, FieldKind};
pub use poly::ApproxPoly;
pub use residue::{is_irreducible_fp, FElt, FPoly, FiniteField, QuotientRing, EXHAUSTIVE_LIMIT};

//! Lazy exact p-adic arithmetic.
//!
//! Two engines are provided: an epoch engine ([`epoch`]) where every object caches one
//! approximation per epoch, and a getter engine ([`getters`]) driven by explicit
//! precision dependencies.

pub mod approx;
pub mod bench;
pub mod epoch;
pub mod error;
pub mod exact;
pub mod getters;
pub mod hensel;
pub mod newton;
pub mod ramify;
pub mod val;

pub use error::{Error, Result};
pub use val::{AggVal, ExtVal};

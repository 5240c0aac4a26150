//! Closed embedded totally geodesic surfaces in Bianchi orbifolds: exact
//! arithmetic, surface constructions with replayable certificates, and the
//! quadratic-residue sieve behind the exceptional lists.

pub mod arith;
pub mod classgroup;
pub mod error;
pub mod forms;
pub mod quadring;
pub mod sieve;
pub mod surfaces;
pub mod tables;

pub use error::{Error, Result};

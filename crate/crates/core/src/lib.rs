//! Exact p-adic computation of twisted q-Bernoulli numbers and the
//! h-extension p-adic twisted L-function, with machine verification of the
//! underlying identities (distribution relations, measure additivity, the
//! Euler-factor identity, interpolation at negative integers).

pub mod characters;
pub mod cyclotomic;
pub mod error;
pub mod qbernoulli;
pub mod measures;
pub mod padic;
pub mod par;

pub use error::{Defect, Error, Rat, Result};

//! Numerical verification of locally conformally symplectic (LCS) geometry:
//! twisted Hamiltonian actions, momentum maps, reduction, and the contact
//! and locally conformally Kähler (LCK) specialisations.
//!
//! Everything is computed on ambient `R^N` with submanifolds cut out by
//! constraint functions. Claims are certified at seeded sample points with
//! explicit tolerances; no quotient manifold is ever constructed, only
//! verified against a supplied witness.

pub mod action;
pub mod calculus;
pub mod contact;
pub mod error;
pub mod expr;
pub mod flow;
pub mod gallery;
pub mod lck;
pub mod lcs;
pub mod linalg;
pub mod manifold;
pub mod reduction;
pub mod report;
pub mod runner;
pub mod scenario;

pub use error::{Error, Result};

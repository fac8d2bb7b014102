//! Finite-state automorphisms of rooted regular trees, forbidden-pattern
//! (finitely constrained) groups, and finite quotient computations.

pub mod automorphism;
pub mod cli;
pub mod closure;
pub mod constrained;
pub mod error;
pub mod families;
pub mod pattern;
pub mod permgroup;
pub mod tree;

pub use error::{Error, Result};

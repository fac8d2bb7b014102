//! Finite-state tree automorphisms and their algebra.
//!
//! Elements are group words over the states of a [`MachineSpec`]. The product
//! convention is `(gh)(w) = g(h(w))`, so sections obey
//! `(f g)|_u = f|_{g(u)} g|_u` and `(g^-1)|_u = (g|_{g^-1(u)})^-1`.

mod element;
mod machine;

pub use element::{
    conjugate, dedupe_by_equality, delta, section_closure, unify_all, Element, ElementSet,
    DEFAULT_MAX_STATES,
};
pub use machine::{Letter, MachineSpec, State, Word};

//! Entanglement entropy of the regularized free Dirac vacuum.
//!
//! The crate has two independent routes to the boundary (area-law) term:
//! lattice correlation matrices restricted to a region ([`lattice_model`]),
//! and one-dimensional finite sections of the Dirac symbol restricted to
//! lines ([`wiener_hopf`], [`widom_coefficient`]). [`area_law_harness`]
//! compares the two.

pub mod area_law_harness;
pub mod config;
pub mod container;
pub mod dirac_symbols;
pub mod entropy_functions;
pub mod error;
pub mod lattice_model;
pub mod linalg;
pub mod quadrature;
pub mod spin_algebra;
pub mod verification;
pub mod widom_coefficient;
pub mod wiener_hopf;

pub use error::{Error, Result};

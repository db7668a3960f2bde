//! Equilibrium, attractivity and extinction analysis for n-species
//! Lotka-Volterra systems with distributed delays and feedback controls.
//!
//! The crate answers three questions about a parameterized system:
//!
//! 1. Where can it settle? Saturated equilibria are computed exactly as
//!    complementarity solutions over the community matrix ([`equilibria`]).
//! 2. Must it settle there? A family of sufficient criteria based on
//!    M-matrix dominance certifies global attractivity, partial or total
//!    extinction, and dissipativity, independently of the delay kernels
//!    ([`criteria`], [`matrix`]).
//! 3. What does a trajectory actually do? A fixed-step integrator with
//!    dense history handles discrete, exponential, Erlang and tabulated
//!    kernels, with detectors for convergence and sustained oscillation
//!    ([`dynamics`]), and characteristic-root tools locate the loss of
//!    stability for the planar system ([`spectral`]).
//!
//! Systems are described by a [`model::SystemSpec`], either built in code
//! or parsed from a TOML document ([`schema`]).

// Negated comparisons like `!(x > 0.0)` are NaN-rejecting on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops address several parallel structures at once.
#![allow(clippy::needless_range_loop)]
#![allow(clippy::type_complexity)]

pub mod criteria;
pub mod dynamics;
pub mod equilibria;
pub mod export;
pub mod fixtures;
pub mod kernel;
pub mod linalg;
pub mod matrix;
pub mod model;
pub mod schema;
pub mod spectral;

pub use kernel::Kernel;
pub use model::{InitialData, SystemSpec};

//! wavelab: a numerical laboratory for multi-speed semilinear wave systems.
//!
//! The crate evolves systems of three coupled semilinear wave equations
//! with possibly different propagation speeds on a cell-centered uniform
//! grid over `[-L, L]^3`, and measures the weighted norms, commutator
//! identities and decay rates that organize the long-time behavior of such
//! systems.  Quadratic couplings are specified by constant coefficient
//! tensors; an exact algebraic test classifies each tensor as null or
//! non-null with respect to a given speed's characteristic cone, and a
//! structural checker decides whether a full system satisfies the
//! constraints under which small data evolve globally.
//!
//! Capabilities, one module each:
//!
//! * [`grid`] / [`stencil`] / [`norms`] / [`sphere`]: fields, fourth-order
//!   derivatives, weighted Lebesgue norms, sphere restriction.
//! * [`vector_fields`]: translation, rotation and scaling vector fields,
//!   their compositions on evolving fields, and commutator residuals.
//! * [`system`]: system specification, null-form algebra, structural
//!   assumption checks, right-hand-side evaluation, named presets.
//! * [`solver`]: RK4 time stepping under a CFL rule, blow-up detection,
//!   convergence studies against closed-form references.
//! * [`diagnostics`]: energies, vector-field norm hierarchies, ghost-weight
//!   energy balance, data norms, decay-rate fits.
//! * [`inequality`]: a corpus of test fields and measured-constant
//!   verification for the weighted inequalities used in decay analysis.
//! * [`config`] / [`report`] / [`cli`]: JSON-configured runs with
//!   deterministic CSV/JSON outputs and a thin command-line binary.
//!
//! Runnable tours live in `examples/`; try
//! `cargo run --release --example null_certification`.

pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod inequality;
pub mod report;
pub mod norms;
pub mod solver;
pub mod sphere;
pub mod stencil;
pub mod system;
pub mod vector_fields;

pub use error::{Error, Result};

//! Simulation laboratory for a one-dimensional kinetic particle system with
//! sign-kernel (Coulomb) interaction, friction, and noise.
//!
//! The library simulates the interacting N-particle dynamics, solves the
//! associated kinetic mean-field equation on a phase-space grid, couples the
//! two synchronously with shared Brownian increments, and measures how fast
//! the coupled systems separate as N grows — together with the fluctuation
//! statistics and explicit deviation bounds that control that separation.
//!
//! Modules:
//! - [`kernel`]: the sign interaction kernel, its mollification, fast forces.
//! - [`rng`]: counter-based deterministic noise substreams.
//! - [`dynamics`]: particle / linear-SDE integrators and synchronous coupling.
//! - [`meanfield`]: the phase-space grid solver, weighted norms, backward
//!   Monte Carlo density estimation.
//! - [`metrics`]: transport distances, windowed sup-norms, moments.
//! - [`concentration`]: fluctuation statistics and tail curves.
//! - [`experiments`]: end-to-end studies and the constants ledger.
//! - [`config`] / [`output`]: run configuration and artifact writing.

// Negated float comparisons like `!(dt > 0.0)` are deliberate throughout:
// they reject NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod concentration;
pub mod config;
pub mod dynamics;
pub mod experiments;
pub mod kernel;
pub mod meanfield;
pub mod metrics;
pub mod output;
pub mod rng;

pub use config::LabConfig;
pub use kernel::{InteractionSign, KernelSpec};
pub use rng::NoiseStreamSpec;

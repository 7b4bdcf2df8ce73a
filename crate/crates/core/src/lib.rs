//! Simulation of a closed, unit-speed elastic wire with thickness moving in a
//! Riemannian manifold.
//!
//! The equation of motion
//!
//! ```text
//! -D_t γ_t + D_x D_t² γ_x - D_x³ γ_x + Ψ = D_x(μ γ_x),   |γ_x|² = 1
//! ```
//!
//! is solved through its decomposition into an elliptic problem for an
//! auxiliary field θ, a semilinear wave equation for the unit tangent ξ, and two
//! ordinary differential equations for the velocity η and the curve γ. The
//! Lagrange multiplier μ is eliminated and reconstructed afterwards.
//!
//! Module map:
//!
//! * [`geometry`]: orthonormal frames, modified Christoffel symbols and the
//!   curvature operator for the built-in chart models.
//! * [`fields`]: periodic grids, vector fields along a curve and the covariant
//!   difference operators.
//! * [`elliptic`]: the θ-equation, the bentness helper problem and bentness.
//! * [`wave`]: the d'Alembert integral operator, characteristic derivatives,
//!   Picard iteration for ξ and the covariant leapfrog.
//! * [`dynamics`]: source terms, the coupled time step, the coupled fixed-point
//!   map, initial data and the multiplier / residual reconstruction.
//! * [`diagnostics`]: energy, constraint drift and transport checks.
//! * [`config`], [`run`], [`study`]: configuration-driven runs and convergence
//!   studies used by the `elastic-wire` binary.

// negated comparisons reject NaN along with out-of-range values; tensor
// loops index several arrays by the same component
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod diagnostics;
pub mod dynamics;
pub mod elliptic;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod run;
pub mod study;
pub mod wave;

pub use error::{Result, WireError};

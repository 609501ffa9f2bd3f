//! Least energy solutions of the nonlinear Schrödinger–Bopp–Podolsky equation
//!
//! ```text
//! -Δv + v + (v² ∗ K_β) v = |v|^{p-2} v,    K_β(x) = (1 - e^{-|x|/β}) / |x|
//! ```
//!
//! and of its Schrödinger–Poisson limit (β = 0, K_0 = 1/|x|) in the radial class of
//! H¹(ℝ³), computed as minimizers of the energy on the Nehari–Pohožaev manifold.
//!
//! Module map:
//! - [`grid`]: uniform radial grids, fields, finite differences and the basic norms.
//! - [`potentials`]: Coulomb / Yukawa / exponential radial convolutions in O(N).
//! - [`functionals`]: energies, Nehari and Pohožaev residuals, the manifold functional.
//! - [`fibering`]: the dilation `t²v(t·)` and the projection onto the manifold.
//! - [`solver`]: projected descent followed by a Newton polish.
//! - [`asymptotics`]: the β → 0 sweep and its checks.
//! - [`cli`]: configuration, artifacts and the `bpgs` command line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod cli;
pub mod error;
pub mod fibering;
pub mod functionals;
pub mod grid;
pub mod io;
pub mod potentials;
pub mod solver;

pub use error::{Error, Result};
pub use grid::{Params, RadialField, RadialGrid};

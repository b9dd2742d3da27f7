//! Chernoff approximation of evolution semigroups `e^{-tĤ}` whose generators are
//! τ-quantizations of Lévy–Khintchine type Hamilton functions
//!
//! ```text
//! H(q, p) = c(q) + i b(q)·p + p·A(q)p + Σ_j w_j (1 − e^{i y_j·p} + i y_j·p / (1 + |y_j|²))
//! ```
//!
//! The one-step family `F_τ(t)` has τ-symbol `e^{-tH}`; it is realised as an integral
//! operator with an explicit Gaussian ⊛ compound-Poisson kernel evaluated at the ordering
//! point `τq + (1 − τ)q₁`. Iterating `F_τ(t/n)` n times approximates the semigroup.
//!
//! Independent cross-checks live next to the iteration engine:
//!
//! * [`generator`]: the generator in differential + jump form and (τ = 1) spectral form,
//!   plus the Chernoff derivative residual.
//! * [`feynman_kac`]: jump-diffusion Monte Carlo with a Girsanov-reweighted variant.
//! * [`phase_space`]: the oscillatory phase-space (Hamiltonian) form of the same kernels.
//! * [`reference`]: closed-form Gaussian and Poisson-mixture solutions for constant
//!   coefficients.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod feynman_kac;
pub mod generator;
pub mod grid;
pub mod kernels;
pub mod phase_space;
pub mod presets;
pub mod reference;
pub mod semigroup;
pub mod symbols;

mod fft;
mod linalg;

pub use error::{Error, Result};
pub use grid::{GridFunction, GridSpec};
pub use symbols::{
    CoefficientField, HamiltonSymbol, LevySpec, Mat, Point, QuadraticSymbol, Symbol,
};

pub use num_complex::Complex64;

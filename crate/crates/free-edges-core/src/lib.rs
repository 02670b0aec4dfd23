//! Spectral edges of `xx* + b⊗1` for matrix-coefficient free semicircular
//! operators `x = Σ aᵢ⊗sᵢ`.
//!
//! The crate provides several independent routes to the extreme eigenvalues:
//!
//! * [`edges`] — variational solvers over the feasible cone of self-adjoint
//!   certificates, including Lehner's self-adjoint formula and a dilation
//!   cross-check,
//! * [`cauchy`] — the matrix Cauchy transform fixed-point equation, a power
//!   series oracle, and edge location by continuation in `λ`,
//! * [`diagonal`] — a fast scalar specialization for independent-entry
//!   (variance-profile) models,
//! * [`mc`] — a seeded GUE Monte Carlo comparator.
//!
//! All types are immutable values and all solvers are pure functions, so
//! everything here is safe to share across threads. The crate is
//! `no_std`-compatible (requires `alloc`).

#![cfg_attr(not(test), no_std)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod cauchy;
pub mod diagonal;
pub mod edges;
pub mod linalg;
pub mod mc;
pub mod model;

pub use linalg::{BlockMatrix2x2, ComplexMatrix, HermitianMatrix, LinalgError, C64};
pub use model::{FreeModel, ModelError, VarianceProfile};

//! Two-dimensional Gegenbauer (seasonal long-memory) random fields.
//!
//! The crate covers the full workflow around these fields:
//!
//! - [`model`]: Gegenbauer polynomials, the spectral density with poles at
//!   `λ_i = ±arccos(u_i)`, its closed-form derivatives in the long-memory
//!   exponents, and autocovariance oracles.
//! - [`simulate`]: seeded Gaussian noise and the truncated moving-average
//!   realization of the field on the lattice `{0,…,T}²`.
//! - [`periodogram`]: the 2D periodogram `I_T`, the unbiased lag covariance
//!   estimator and the unbiased periodogram `I*_T`.
//! - [`contrast`]: the weight function, the `σ²(θ)Ψ` factorization of the
//!   spectral density, the contrast function `K` and its empirical versions.
//! - [`estimate`]: minimum contrast estimation of `θ = (d₁, d₂)` over the
//!   open box `(0, 1/2)²`.
//! - [`asymptotics`]: the matrices `S(θ)`, `A(θ)` and the sandwich covariance
//!   `S⁻¹AS⁻¹` of the scaled adjusted estimator.
//! - [`montecarlo`]: seeded replication studies (consistency and asymptotic
//!   normality) with self-contained multivariate normality testing.
//!
//! All operations are deterministic given their inputs; randomness enters only
//! through explicit 64-bit seeds.

// `!(x > 0.0)`-style range checks are deliberate: they reject NaN together
// with the out-of-range values. Index loops over 2×2 matrices stay as plain
// ranges to keep the (i, j) entry algebra readable.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod asymptotics;
pub mod contrast;
pub mod error;
pub mod estimate;
pub mod model;
pub mod montecarlo;
pub mod periodogram;
mod quad;
pub mod simulate;

pub use error::GegenError;
pub use model::{Frequency, Lag, LrdParams, ModelParams};
pub use quad::QuadratureGrid;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, GegenError>;

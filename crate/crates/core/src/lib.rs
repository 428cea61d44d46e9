//! Characteristic-fan solver for the covariant Hamilton-Jacobi equation of
//! first-order Hamiltonian field theories.
//!
//! The crate builds solutions of the form `S^μ = u·X^μ`, where `X` is a
//! divergence-free transport field constant along characteristics and `u` is
//! obtained by quadrature, then reconstructs the critical field `y(x)`,
//! `p(x)` on the base manifold and checks every governing equation by
//! finite differences.
//!
//! Pipeline:
//!
//! 1. [`model`]: Hamiltonian (and optional Lagrangian) evaluators.
//! 2. [`boundary`]: boundary surface, field and normal-derivative data.
//! 3. [`characteristics`]: RK4 integration of the characteristic system.
//! 4. [`embeddability`]: transport-field ansätze and least-squares fitting of
//!    the embeddability condition along the boundary directions.
//! 5. [`reconstruct`]: chart inversion and evaluation of `y`, `p`, `S`.
//! 6. [`verify`]: independent finite-difference residuals.

pub mod boundary;
pub mod characteristics;
pub mod embeddability;
pub mod error;
pub mod interp;
pub mod model;
pub mod presets;
pub mod reconstruct;
pub mod sinusoid;
pub mod verify;

pub use error::{Error, Result};

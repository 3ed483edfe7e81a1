//! Numerical toolkit for the Legendre elliptic scheme `y² = x(x-1)(x-λ)` over `B = C \ {0, 1}`.

pub mod error;
pub mod heights;
pub mod nevanlinna;
pub mod betti;
pub mod counting;
pub mod curve;
pub mod periods;
pub mod quad;
pub mod sections;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

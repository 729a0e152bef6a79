//! Spectral toolkit for generalized Laguerre semigroups: Bernstein
//! functions, generalized Weierstrass products, invariant densities,
//! eigenpolynomials and co-eigenfunctions, plus a Monte-Carlo oracle.

// `!(x > 0.0)` guards are written that way on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod error;
pub mod invariant_density;
pub mod levy_model;
pub mod montecarlo;
pub mod quadrature;
pub mod special;
pub mod spectral;
pub mod weierstrass;

pub use error::{Error, Result};
pub use levy_model::{ClassFlags, ExpComponent, JumpFamily, LevyModel, ModelScalars};
pub use num_complex::Complex64;

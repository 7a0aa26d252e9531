//! Spectral, limit-theorem and Martin-boundary computations for invariant
//! random walks on thickened lattices `Z^d × {1..N}` and on free products
//! `Z^{d1} ⋆ Z^{d2}`.

pub mod boundary;
pub mod canonical;
pub mod free;
pub mod error;
pub mod kernel;
pub mod limit;
pub mod spectral;
mod linalg;

pub use error::{Error, ErrorClass, Result};

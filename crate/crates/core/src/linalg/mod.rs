//! Small numerical kernels: banded storage, banded factorizations and
//! Gauss–Legendre quadrature.

mod banded;
mod quadrature;

pub use banded::{apply_pencil, ComplexSymBandLdl, SymBand};
pub use quadrature::gauss_legendre;

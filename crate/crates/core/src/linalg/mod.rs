//! Linear algebra kernels used by the solver and the recovery operator.

pub mod banded;
pub mod dense;
pub mod sparse;

pub use banded::{BandCholesky, BandMatrix};
pub use sparse::{CsrMatrix, CsrPattern};

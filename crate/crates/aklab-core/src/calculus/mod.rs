//! Periodic-grid spectral calculus and pointwise matrix algebra.
//!
//! Everything downstream (structures, curvature, operators, flows) is built
//! from four primitives: the grid, tensor fields sampled on it, spectral
//! differentiation, and the fiberwise matrix exponential. All reductions run
//! in a fixed sequential order so reports are bitwise reproducible.

pub mod fieldalg;
pub mod grid;
pub mod matexp;
pub mod random;
pub mod smat;
pub mod tensor;

pub use grid::PeriodicGrid;
pub use matexp::matrix_exp;
pub use random::{random_band_limited, FourierMode};
pub use tensor::{integrate, TensorField};

//! Numerical laboratory for almost-Kähler geometry on flat symplectic tori.
//!
//! The library discretizes the torus T^{2m} = [0,2π)^{2m} with the standard
//! symplectic form ω₀ = Σ dx_i ∧ dx_{m+i} and provides, on top of a spectral
//! calculus:
//!
//! - ω-compatible almost complex structures J generated by fiberwise
//!   symplectic exponentials, with exact-by-construction compatibility;
//! - Levi-Civita and Hermitian connections, curvature, and the Hermitian
//!   scalar curvature s^∇ with its symplectic gradient K;
//! - the operator calculus P, JP, their adjoints, the Lichnerowicz operator
//!   𝕃 = P*P (with an explicit curvature formula), ℒ_K, the Calabi operators
//!   𝕃± and the Hessian operator H of the Calabi functional 𝒞 = ∫ (s^∇)²;
//! - the Hermitian Calabi flow dJ/dt = JP(s^∇), geodesics of the space of
//!   compatible structures, and Hessian probes with finite-difference cross
//!   checks;
//! - the principal symbol Ξ-calculus of the flow linearization and its weak
//!   parabolicity diagnostics.

pub mod calculus;
pub mod curvature;
pub mod dynamics;
pub mod error;
pub mod operators;
pub mod oracles;
pub mod structure;
pub mod symbol;

pub use error::{Error, Result};

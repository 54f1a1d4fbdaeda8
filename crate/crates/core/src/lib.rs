//! Layered random dimer models on the torus.
//!
//! Free energies, phase boundaries and dimer correlations are computed from
//! Lyapunov exponents of products of 2×2 transfer matrices, and checked
//! against exact Kasteleyn determinants on finite tori.

pub mod asymptotics;
pub mod correlations;
pub mod disorder;
pub mod error;
pub mod kasteleyn;
pub mod matprod;
pub mod numeric;
pub mod poincare;
pub mod spectrum;

pub use error::{Error, Result};
pub use num_complex::Complex64;

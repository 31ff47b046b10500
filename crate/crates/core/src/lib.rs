//! Finite element solvers for the biharmonic (Kirchhoff plate) equation
//! `Δ²u = f` with clamped, simply supported and free boundaries, together
//! with guaranteed a posteriori error bounds obtained by equilibrating the
//! discrete moment tensor.

pub mod adaptivity;
pub mod benchmarks;
pub mod equilibration;
pub mod error;
pub mod estimator;
pub mod geometry;
pub mod hhj_solver;
pub mod ipdg;
pub mod linalg;
pub mod mesh;
pub mod poly;
pub mod problem;
pub mod quadrature;
pub mod spaces;

pub use error::{Error, Result};

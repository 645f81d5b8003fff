//! Laplace and Schrödinger operators on metric graphs with vertex conditions
//! given by a self-adjoint matrix `L_v` and an orthogonal projection `P_v`.

pub mod boundary;
pub mod error;
pub mod expansion;
pub mod fem;
pub mod fixtures;
pub mod funcspace;
pub mod graph;
pub mod linalg;
pub mod potentials;
pub mod quadrature;
pub mod sampling;
pub mod secular;
pub mod solver;

pub use error::{Error, Result};

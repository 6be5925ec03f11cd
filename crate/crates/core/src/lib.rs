//! Phase-field tumour growth: finite element forward model, discrete adjoint
//! and gradient-based reconstruction of initial conditions.

pub mod adjoint;
pub mod error;
pub mod experiment;
pub mod fem;
pub mod field;
pub mod forward;
pub mod linalg;
pub mod model;
pub mod optimizer;
pub mod mesh;
pub mod scalar;

pub use error::{Error, Result};
pub use field::NodalField;
pub use scalar::Scalar;

/// Floating-point type used by the solvers.
pub type Real = f64;
pub type Matrix = fem::SparseMatrix<Real>;
pub type Quadrature = fem::QuadratureRule<Real>;

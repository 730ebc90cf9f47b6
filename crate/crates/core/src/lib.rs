//! Polynomial ridge approximation `f(x) ≈ g(U^T x)` fitted by
//! variable-projection Gauss-Newton on the Grassmann manifold.

pub mod basis;
pub mod error;
pub mod grassmann;
pub mod linalg;
pub mod model;
pub mod solver;
pub mod testbed;
pub mod vandermonde;
pub mod varpro;

pub use error::{Result, RidgeError};
pub use model::{evaluate_model, RidgeModel};
pub use solver::{fit_alternating, fit_gauss_newton, FitReport, FitStatus, SolverConfig};

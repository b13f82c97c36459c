//! Estimation of density matrices from noisy linear measurements
//! `Y_j = tr(rho X_j) + xi_j` by entropy-penalized least squares, together
//! with the design distributions, noncommutative distances, and
//! closed-form bound evaluators needed to verify the estimator's
//! oracle inequalities numerically.
//!
//! Module map:
//! - [`hermitian`]: dense complex Hermitian matrices, eigendecomposition,
//!   matrix functions, Schatten norms.
//! - [`states`]: density matrices, von Neumann entropy, quantum distances,
//!   Gibbs states and their low-rank structure.
//! - [`designs`]: the sampling laws for the random observable `X`, the
//!   L2(Pi) geometry, and design-dependent structural coefficients.
//! - [`noise`]: noise models and simulation of the measurement process.
//! - [`estimator`]: mirror-descent and proximal solvers for the penalized
//!   problems, with optimality certificates.
//! - [`bounds`]: evaluators for the theoretical error bounds and the
//!   matrix Bernstein tail inequalities.

pub mod bounds;
pub mod designs;
pub mod estimator;
pub mod hermitian;
pub mod noise;
pub mod states;

pub use hermitian::{HermitianMatrix, MatrixFunction, Spectrum};
pub use states::{DensityMatrix, SubspaceProjector};

pub use nalgebra;
pub use num_complex;

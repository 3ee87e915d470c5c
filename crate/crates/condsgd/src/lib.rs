//! Conditioned stochastic gradient descent with weighted averaging of past
//! Hessian estimates, plus the asymptotic-covariance machinery (Lyapunov
//! solves, optimal covariance, excess-risk spectrum) and a Monte Carlo
//! harness that checks the central-limit behavior of the iterates against
//! the closed-form targets.

pub mod asymptotics;
pub mod config;
pub mod experiment;
pub mod linalg;
pub mod montecarlo;
pub mod optimizer;
pub mod problems;
pub mod scalar;
pub mod verify;

pub use scalar::Real;

/// Double-precision matrix, the working type for everything stochastic.
pub type Matrix64 = linalg::Matrix<f64>;
/// Single-precision matrix.
pub type Matrix32 = linalg::Matrix<f32>;

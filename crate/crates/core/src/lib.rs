//! Regularization paths for penalized generalized linear models.
//!
//! The path of stationary points `beta(rho)` is traced by integrating an ODE in decreasing
//! `rho`, with event detection for coefficients leaving or entering the active set and
//! coordinate-descent recovery at discontinuities. Tuning is done with Laplace-approximated
//! empirical Bayes criteria.

pub mod penalty;
pub mod linalg;
pub mod model;
pub mod ode;
pub mod cd;
pub mod path;
pub mod ebayes;
pub mod genreg;

//! Pointwise Hamilton-Jacobi solvers built on characteristic Cauchy problems.
//!
//! The crate evaluates value functions of finite-horizon optimal control
//! problems and linear zero-sum differential games at isolated positions
//! `(t, x)`, without a state-space grid: each query integrates a family of
//! characteristic ODEs parametrized by the initial adjoint vector and
//! optimizes over that finite-dimensional parameter. A monotone
//! Lax-Friedrichs solver ([`fd`]) provides an independent 2-D reference,
//! and [`mpc`] drives the noise-perturbed closed loop for Monte Carlo
//! validation.
//!
//! Module map:
//! - [`numerics`]: adaptive Runge-Kutta, Euler-Maruyama, Simpson quadrature,
//!   Powell minimization.
//! - [`fields`]: differentiable scalar fields and spherical parametrization
//!   of adjoint search spaces.
//! - [`hj`]: characteristic systems and value/feedback evaluation at points.
//! - [`fd`]: Lax-Friedrichs reference solver on 2-D grids.
//! - [`games`]: support-function algebra, programmed maximin, closed-loop
//!   game values and saddle strategies for linear games.
//! - [`mpc`]: open-loop vs recomputed-feedback simulation under diagonal
//!   Brownian noise.
//! - [`selftest`]: the acceptance checks shared by `cargo test` and the CLI.

pub mod error;
pub mod fd;
pub mod fields;
pub mod games;
pub mod hj;
pub mod mpc;
pub mod numerics;
pub mod report;
pub mod selftest;

pub use error::{Error, Result};

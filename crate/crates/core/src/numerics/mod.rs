//! Numerical kernels: adaptive ODE integration with dense output, fixed-step
//! Euler-Maruyama, composite Simpson quadrature, and Powell minimization.
//!
//! All routines are pure given their inputs (and a seed where randomness is
//! involved); there is no shared mutable state.

pub mod ode;
pub mod optim;
pub mod quad;
pub mod sde;
mod traj;

pub use ode::{integrate_adaptive, integrate_with_stop};
pub use optim::{golden_max, golden_min, minimize_powell, MinResult};
pub use quad::quad_simpson;
pub use sde::integrate_sde_em;
pub use traj::{RngSeed, ToleranceSpec, Trajectory};

pub(crate) use traj::hermite_eval as hermite_segment_eval;

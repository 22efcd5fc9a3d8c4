//! The benchmark problem family used across the self-checks: a Gaussian
//! speed bump over an anisotropic quadratic cost landscape, in its
//! terminal-cost and running-cost variants.

use std::sync::Arc;

use crate::fields::ScalarField;
use crate::hj::{EikonalProblem, EtaCondition, SigmaCondition, DEFAULT_CRITICAL_TOL};
use crate::Result;

/// Speed field `sign * (1 + 3 exp(-4 ||x - center||^2))` with the bump
/// centered at `(1, 1, 0, ..., 0)`.
pub fn bump_speed(n: usize, sign: f64) -> ScalarField {
    let mut center = vec![0.0; n];
    center[0] = 1.0;
    if n > 1 {
        center[1] = 1.0;
    }
    ScalarField::GaussOffset {
        base: sign,
        amplitude: 3.0 * sign,
        rate: 4.0,
        center,
    }
}

/// Diagonal `[0.25, 1, 0.5, ..., 0.5]` quadratic with the given offset.
pub fn anisotropic_quadratic(n: usize, offset: f64) -> ScalarField {
    let mut diag = vec![0.5; n];
    diag[0] = 0.25;
    if n > 1 {
        diag[1] = 1.0;
    }
    ScalarField::quadratic_diag(&diag, offset)
}

/// Terminal-cost benchmark: positive bump speed, quadratic terminal cost
/// `0.5 (<Ax, x> - 1)` (maximization; the cost's only critical point is its
/// global minimum, so terminal-mode evaluation is justified).
pub fn mayer_benchmark(n: usize, horizon: f64) -> Result<EikonalProblem> {
    EikonalProblem::mayer(
        Arc::new(bump_speed(n, 1.0)),
        Arc::new(anisotropic_quadratic(n, -0.5)),
        horizon,
        Some(SigmaCondition::CriticalAtOptimum),
    )
}

/// Running-cost benchmark: negative bump speed, zero terminal cost, and the
/// quadratic running cost with its critical point at the origin
/// (minimization with the freeze rule).
pub fn running_cost_benchmark(n: usize, horizon: f64) -> Result<EikonalProblem> {
    EikonalProblem::bolza(
        Arc::new(bump_speed(n, -1.0)),
        Arc::new(ScalarField::Constant { dim: n, value: 0.0 }),
        Arc::new(anisotropic_quadratic(n, 0.0)),
        horizon,
        EtaCondition::CriticalPoint {
            point: vec![0.0; n],
            tol: DEFAULT_CRITICAL_TOL,
        },
    )
}

/// Constant-speed surrogate with the same cost landscape; its value has the
/// exact reachable-ball characterization used as an independent oracle.
pub fn constant_speed_surrogate(n: usize, speed: f64, horizon: f64) -> Result<EikonalProblem> {
    EikonalProblem::mayer(
        Arc::new(ScalarField::Constant {
            dim: n,
            value: speed,
        }),
        Arc::new(anisotropic_quadratic(n, -0.5)),
        horizon,
        Some(SigmaCondition::CriticalAtOptimum),
    )
}

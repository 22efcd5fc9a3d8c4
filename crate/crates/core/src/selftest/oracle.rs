//! Independent brute-force oracles. These never touch the characteristic
//! or finite-difference solvers; they sample the cost landscape directly.

use crate::fields::Field;
use crate::hj::Sense;

/// Extremum of a field over the closed planar disc of the given radius
/// around `x0`, by dense radial-angular sampling (center included).
pub fn disc_extremum(
    field: &dyn Field,
    x0: &[f64],
    radius: f64,
    sense: Sense,
    radial: usize,
    angular: usize,
) -> f64 {
    assert_eq!(x0.len(), 2);
    let mut best = field.value(x0);
    for i in 1..=radial {
        let r = radius * i as f64 / radial as f64;
        for j in 0..angular {
            let theta = 2.0 * std::f64::consts::PI * j as f64 / angular as f64;
            let y = [x0[0] + r * theta.cos(), x0[1] + r * theta.sin()];
            let v = field.value(&y);
            if sense.improves(v, best) {
                best = v;
            }
        }
    }
    best
}

/// Extremum of a field over the disc *boundary* only.
pub fn circle_extremum(
    field: &dyn Field,
    x0: &[f64],
    radius: f64,
    sense: Sense,
    angular: usize,
) -> f64 {
    assert_eq!(x0.len(), 2);
    let mut best = match sense {
        Sense::Min => f64::INFINITY,
        Sense::Max => f64::NEG_INFINITY,
    };
    for j in 0..angular {
        let theta = 2.0 * std::f64::consts::PI * j as f64 / angular as f64;
        let y = [x0[0] + radius * theta.cos(), x0[1] + radius * theta.sin()];
        let v = field.value(&y);
        if sense.improves(v, best) {
            best = v;
        }
    }
    best
}

/// Exact cost of piecewise-constant scalar control for the one-dimensional
/// problem `dx/dt = -u`, `u in {-1, 0, 1}`, running cost `x^2 / 2`, zero
/// terminal cost: per-interval integrals are cubic polynomials evaluated in
/// closed form.
fn piecewise_cost_1d(x0: f64, span: f64, controls: &[i8]) -> f64 {
    let dt = span / controls.len() as f64;
    let mut x = x0;
    let mut cost = 0.0;
    for &u in controls {
        let s = -(u as f64);
        cost += 0.5 * (x * x * dt + x * s * dt * dt + s * s * dt * dt * dt / 3.0);
        x += s * dt;
    }
    cost
}

/// Brute-force minimum of [`piecewise_cost_1d`] over all `3^segments`
/// control words.
pub fn best_piecewise_cost_1d(x0: f64, span: f64, segments: usize) -> f64 {
    let mut best = f64::INFINITY;
    let total = 3usize.pow(segments as u32);
    let mut controls = vec![0i8; segments];
    for word in 0..total {
        let mut w = word;
        for c in controls.iter_mut() {
            *c = (w % 3) as i8 - 1;
            w /= 3;
        }
        best = best.min(piecewise_cost_1d(x0, span, &controls));
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::ScalarField;

    #[test]
    fn disc_extremum_of_quadratic() {
        let sigma = ScalarField::quadratic_diag(&[0.25, 1.0], -0.5);
        // Max over the radius-0.5 disc around the origin is on the short
        // axis: 0.5 * (1 * 0.25 - 1) = -0.375.
        let v = disc_extremum(&sigma, &[0.0, 0.0], 0.5, Sense::Max, 64, 720);
        assert!((v + 0.375).abs() < 1e-6, "got {v}");
        // Min over the radius-0.5 disc around (1, 0) for ||x||^2 / 2.
        let half_norm = ScalarField::NormSquaredHalf { dim: 2 };
        let v = disc_extremum(&half_norm, &[1.0, 0.0], 0.5, Sense::Min, 64, 720);
        assert!((v - 0.125).abs() < 1e-6, "got {v}");
    }

    #[test]
    fn drive_to_rest_is_exactly_representable() {
        // From x0 = 1 over one time unit in 8 segments, full braking reaches
        // the origin exactly at the horizon: cost 1/6.
        let v = best_piecewise_cost_1d(1.0, 1.0, 8);
        assert!((v - 1.0 / 6.0).abs() < 1e-12, "got {v}");
    }
}

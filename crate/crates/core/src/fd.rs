//! Monotone Lax-Friedrichs reference solver for 2-D terminal-value problems
//! with Hamiltonian `c(x) ||p|| + eta(x)`. Used purely for validation of the
//! characteristics path; first-order accurate, explicit in time.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hj::EikonalProblem;

/// Uniform 2-D grid of values, row-major in the first coordinate
/// (`values[i1 * n2 + i2]`).
#[derive(Debug, Clone)]
pub struct Grid2D {
    origin: (f64, f64),
    spacing: (f64, f64),
    counts: (usize, usize),
    values: Vec<f64>,
}

impl Grid2D {
    pub fn from_fn<F: FnMut(f64, f64) -> f64>(
        origin: (f64, f64),
        spacing: (f64, f64),
        counts: (usize, usize),
        mut f: F,
    ) -> Result<Self> {
        if !(spacing.0 > 0.0 && spacing.1 > 0.0) {
            return Err(Error::InvalidConfig("grid spacing must be positive".into()));
        }
        if counts.0 < 2 || counts.1 < 2 {
            return Err(Error::InvalidConfig(
                "grid needs at least two nodes per axis".into(),
            ));
        }
        let mut values = Vec::with_capacity(counts.0 * counts.1);
        for i1 in 0..counts.0 {
            for i2 in 0..counts.1 {
                values.push(f(
                    origin.0 + i1 as f64 * spacing.0,
                    origin.1 + i2 as f64 * spacing.1,
                ));
            }
        }
        Ok(Grid2D {
            origin,
            spacing,
            counts,
            values,
        })
    }

    pub fn counts(&self) -> (usize, usize) {
        self.counts
    }

    pub fn spacing(&self) -> (f64, f64) {
        self.spacing
    }

    pub fn node(&self, i1: usize, i2: usize) -> (f64, f64) {
        (
            self.origin.0 + i1 as f64 * self.spacing.0,
            self.origin.1 + i2 as f64 * self.spacing.1,
        )
    }

    pub fn value(&self, i1: usize, i2: usize) -> f64 {
        self.values[i1 * self.counts.1 + i2]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Bilinear interpolation inside the grid hull.
    pub fn sample(&self, x1: f64, x2: f64) -> Result<f64> {
        let u = (x1 - self.origin.0) / self.spacing.0;
        let v = (x2 - self.origin.1) / self.spacing.1;
        let edge_tol = 1e-9;
        if u < -edge_tol
            || v < -edge_tol
            || u > (self.counts.0 - 1) as f64 + edge_tol
            || v > (self.counts.1 - 1) as f64 + edge_tol
        {
            return Err(Error::OutOfDomain { x1, x2 });
        }
        let i = (u.floor() as isize).clamp(0, self.counts.0 as isize - 2) as usize;
        let j = (v.floor() as isize).clamp(0, self.counts.1 as isize - 2) as usize;
        let fu = (u - i as f64).clamp(0.0, 1.0);
        let fv = (v - j as f64).clamp(0.0, 1.0);
        let g = |a, b| self.value(a, b);
        Ok(g(i, j) * (1.0 - fu) * (1.0 - fv)
            + g(i + 1, j) * fu * (1.0 - fv)
            + g(i, j + 1) * (1.0 - fu) * fv
            + g(i + 1, j + 1) * fu * fv)
    }
}

/// Bilinear sampling of a solved grid.
pub fn grid_sample(grid: &Grid2D, point: (f64, f64)) -> Result<f64> {
    grid.sample(point.0, point.1)
}

/// Rectangular computational domain `[x1_lo, x1_hi] x [x2_lo, x2_hi]`.
#[derive(Debug, Clone, Copy)]
pub struct Domain2D {
    pub x1: (f64, f64),
    pub x2: (f64, f64),
}

/// Sampling resolution used to bound the speed field for the artificial
/// viscosity coefficients, inflated by 5%.
const ALPHA_SAMPLES: usize = 200;
const ALPHA_INFLATION: f64 = 1.05;

/// Solves the terminal-value problem on `domain` from the horizon backward
/// over `duration`, explicit in time, with one-sided differences and
/// linear-extrapolation ghost cells. Returns the grid of values at
/// `T - duration`.
///
/// The update adds the artificial-viscosity term with the sign that keeps
/// the backward march monotone in the terminal data; the time step must
/// satisfy `dt * (a1/dx1 + a2/dx2) <= 1` where `a_i` bounds `|c|`.
pub fn lax_friedrichs_solve(
    problem: &EikonalProblem,
    domain: Domain2D,
    dx: (f64, f64),
    dt: f64,
    duration: f64,
) -> Result<Grid2D> {
    if problem.dim() != 2 {
        return Err(Error::InvalidProblem(
            "the reference solver handles two-dimensional problems only".into(),
        ));
    }
    if duration < 0.0 || !(dt > 0.0) {
        return Err(Error::InvalidConfig(
            "duration must be nonnegative and dt positive".into(),
        ));
    }
    let n1 = ((domain.x1.1 - domain.x1.0) / dx.0 + 0.5).floor() as usize + 1;
    let n2 = ((domain.x2.1 - domain.x2.0) / dx.1 + 0.5).floor() as usize + 1;
    let origin = (domain.x1.0, domain.x2.0);
    let sigma = problem.sigma();

    let mut grid = Grid2D::from_fn(origin, dx, (n1, n2), |x1, x2| sigma.value(&[x1, x2]))?;
    if duration == 0.0 {
        return Ok(grid);
    }

    // Speed bound for the viscosity coefficients, from a fixed sampling of
    // the domain.
    let speed = problem.speed();
    let mut cmax = 0.0f64;
    for i in 0..ALPHA_SAMPLES {
        for j in 0..ALPHA_SAMPLES {
            let x1 = domain.x1.0
                + (domain.x1.1 - domain.x1.0) * i as f64 / (ALPHA_SAMPLES - 1) as f64;
            let x2 = domain.x2.0
                + (domain.x2.1 - domain.x2.0) * j as f64 / (ALPHA_SAMPLES - 1) as f64;
            cmax = cmax.max(speed.value(&[x1, x2]).abs());
        }
    }
    let alpha = ALPHA_INFLATION * cmax;
    let bound = 1.0 / (alpha / dx.0 + alpha / dx.1);
    if dt > bound {
        return Err(Error::CflViolation { dt, bound });
    }

    // Speed and running cost frozen on the grid; also the sign check.
    let mut c_grid = vec![0.0; n1 * n2];
    let mut eta_grid = problem.running_cost().map(|_| vec![0.0; n1 * n2]);
    let mut pos = 0usize;
    let mut neg = 0usize;
    for i1 in 0..n1 {
        for i2 in 0..n2 {
            let (x1, x2) = grid.node(i1, i2);
            let c = speed.value(&[x1, x2]);
            if c > 0.0 {
                pos += 1;
            } else {
                neg += 1;
            }
            c_grid[i1 * n2 + i2] = c;
            if let (Some(eg), Some(eta)) = (eta_grid.as_mut(), problem.running_cost()) {
                eg[i1 * n2 + i2] = eta.value(&[x1, x2]);
            }
        }
    }
    if pos != 0 && neg != 0 {
        return Err(Error::InvalidProblem(
            "speed field changes sign on the grid".into(),
        ));
    }

    let steps = (duration / dt).round().max(1.0) as usize;
    let dt_eff = duration / steps as f64;
    let mut next = grid.values.clone();
    for _ in 0..steps {
        {
            let v = &grid.values;
            next.par_chunks_mut(n2).enumerate().for_each(|(i1, row)| {
                for (i2, out) in row.iter_mut().enumerate() {
                    let center = v[i1 * n2 + i2];
                    // Linear-extrapolation ghost values outside the grid.
                    let left = if i1 > 0 {
                        v[(i1 - 1) * n2 + i2]
                    } else {
                        2.0 * center - v[n2 + i2]
                    };
                    let right = if i1 + 1 < n1 {
                        v[(i1 + 1) * n2 + i2]
                    } else {
                        2.0 * center - v[(n1 - 2) * n2 + i2]
                    };
                    let down = if i2 > 0 {
                        v[i1 * n2 + i2 - 1]
                    } else {
                        2.0 * center - v[i1 * n2 + i2 + 1]
                    };
                    let up = if i2 + 1 < n2 {
                        v[i1 * n2 + i2 + 1]
                    } else {
                        2.0 * center - v[i1 * n2 + i2 - 1]
                    };
                    let p1m = (center - left) / dx.0;
                    let p1p = (right - center) / dx.0;
                    let p2m = (center - down) / dx.1;
                    let p2p = (up - center) / dx.1;
                    let pa1 = 0.5 * (p1m + p1p);
                    let pa2 = 0.5 * (p2m + p2p);
                    let mut h = c_grid[i1 * n2 + i2] * (pa1 * pa1 + pa2 * pa2).sqrt();
                    if let Some(eg) = &eta_grid {
                        h += eg[i1 * n2 + i2];
                    }
                    *out = center
                        + dt_eff * (h + 0.5 * alpha * (p1p - p1m) + 0.5 * alpha * (p2p - p2m));
                }
            });
        }
        std::mem::swap(&mut grid.values, &mut next);
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::ScalarField;
    use crate::hj::FieldRef;
    use std::sync::Arc;

    fn max_problem(offset: f64) -> EikonalProblem {
        let c: FieldRef = Arc::new(ScalarField::Constant { dim: 2, value: 1.0 });
        let sigma: FieldRef = Arc::new(ScalarField::quadratic_diag(&[0.25, 1.0], offset));
        EikonalProblem::mayer(c, sigma, 0.5, None).unwrap()
    }

    fn domain() -> Domain2D {
        Domain2D {
            x1: (-2.0, 2.0),
            x2: (-2.0, 2.0),
        }
    }

    #[test]
    fn zero_duration_returns_terminal_data() {
        let p = max_problem(-0.5);
        let g = lax_friedrichs_solve(&p, domain(), (0.1, 0.1), 0.01, 0.0).unwrap();
        let (x1, x2) = g.node(3, 7);
        assert_eq!(g.value(3, 7), p.sigma().value(&[x1, x2]));
    }

    #[test]
    fn cfl_violation_rejected() {
        let p = max_problem(-0.5);
        let err = lax_friedrichs_solve(&p, domain(), (0.1, 0.1), 0.1, 0.5).unwrap_err();
        match err {
            Error::CflViolation { bound, .. } => assert!(bound < 0.1),
            other => panic!("expected CFL rejection, got {other:?}"),
        }
    }

    #[test]
    fn ball_value_at_origin() {
        // Unit speed for 0.5 time units reaches the radius-0.5 ball; the
        // terminal cost maximum over it sits at (0, +-0.5) and equals -0.375.
        let p = max_problem(-0.5);
        let g = lax_friedrichs_solve(&p, domain(), (0.02, 0.02), 0.002, 0.5).unwrap();
        let v = g.sample(0.0, 0.0).unwrap();
        assert!((v - (-0.375)).abs() < 0.05, "got {v}");
    }

    #[test]
    fn monotone_in_terminal_data() {
        let pa = max_problem(-0.5);
        let pb = max_problem(-0.3);
        let ga = lax_friedrichs_solve(&pa, domain(), (0.05, 0.05), 0.005, 0.3).unwrap();
        let gb = lax_friedrichs_solve(&pb, domain(), (0.05, 0.05), 0.005, 0.3).unwrap();
        for (a, b) in ga.values().iter().zip(gb.values()) {
            assert!(a <= b, "monotonicity violated: {a} > {b}");
        }
    }

    #[test]
    fn sample_reproduces_nodes_and_affine_data() {
        let g = Grid2D::from_fn((0.0, 0.0), (0.5, 0.25), (5, 9), |x1, x2| {
            1.0 + 2.0 * x1 - 3.0 * x2
        })
        .unwrap();
        assert_eq!(g.sample(1.0, 1.0).unwrap(), g.value(2, 4));
        for (x1, x2) in [(0.3, 0.7), (1.9, 1.99), (0.0, 2.0)] {
            let exact = 1.0 + 2.0 * x1 - 3.0 * x2;
            assert!((g.sample(x1, x2).unwrap() - exact).abs() < 1e-12);
        }
        assert!(g.sample(-0.5, 0.0).is_err());
    }

    #[test]
    fn cell_midpoint_averages_corners() {
        let g = Grid2D::from_fn((0.0, 0.0), (1.0, 1.0), (2, 2), |x1, x2| {
            // Corner pattern 0, 1, 1, 0.
            if (x1 > 0.5) ^ (x2 > 0.5) {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        assert!((g.sample(0.5, 0.5).unwrap() - 0.5).abs() < 1e-15);
    }
}

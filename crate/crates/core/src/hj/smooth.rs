//! Value evaluation for smooth-Hamiltonian problems: characteristics carry
//! an accumulated cost `z`, and the terminal functional
//! `sigma(x(T)) - z(T)` is optimized over the initial adjoint.

use crate::error::{Error, Result};
use crate::hj::charsys::{norm, smooth_flat_rhs, ADJOINT_ZERO_EPS};
use crate::hj::eikonal::unit_candidates;
use crate::hj::problem::{Sense, SmoothHamiltonianProblem};
use crate::hj::ValueResult;
use crate::numerics::ode::{drive, Flow};
use crate::numerics::{integrate_adaptive, minimize_powell, Trajectory};

/// Search region for the initial adjoint of a smooth-Hamiltonian problem.
#[derive(Debug, Clone)]
pub enum SmoothSearch {
    /// Union of the unit sphere (tensor angle grid) and the origin; only
    /// valid when the problem declared the homogeneity property.
    SphereAndOrigin { counts: Vec<usize> },
    /// Unconstrained Powell searches from the supplied starting adjoints.
    /// Coverage of the global optimum is the caller's responsibility.
    FreeStarts { starts: Vec<Vec<f64>>, tol: f64 },
}

pub fn value_smooth_hopf_lax(
    problem: &SmoothHamiltonianProblem,
    t0: f64,
    x0: &[f64],
    search: &SmoothSearch,
) -> Result<ValueResult> {
    if x0.len() != problem.n {
        return Err(Error::DimensionMismatch {
            expected: problem.n,
            got: x0.len(),
        });
    }
    if t0 > problem.horizon {
        return Err(Error::EmptyHorizon {
            t0,
            horizon: problem.horizon,
        });
    }
    let n = problem.n;
    if t0 == problem.horizon {
        let mut flat = x0.to_vec();
        flat.extend(std::iter::repeat_n(0.0, n + 1));
        return Ok(ValueResult {
            value: problem.sigma.value(x0),
            p0_opt: vec![0.0; n],
            trajectory: Trajectory::single(t0, &flat),
            control_at_t0: vec![0.0; n],
            stop_time: None,
        });
    }

    let sense = problem.sense;
    let eval = |p0: &[f64]| -> Result<f64> {
        let mut y0 = Vec::with_capacity(2 * n + 1);
        y0.extend_from_slice(x0);
        y0.extend_from_slice(p0);
        y0.push(0.0);
        let (_te, ye, _fe) = drive(
            smooth_flat_rhs(problem),
            t0,
            problem.horizon,
            &y0,
            &problem.tol,
            |_seg| Flow::Continue,
        )?;
        Ok(problem.sigma.value(&ye[..n]) - ye[2 * n])
    };

    let (best_p0, best_value) = match search {
        SmoothSearch::SphereAndOrigin { counts } => {
            if !problem.homogeneous {
                return Err(Error::InvalidProblem(
                    "sphere-reduced search needs the declared homogeneity property".into(),
                ));
            }
            let mut candidates = unit_candidates(n, counts)?;
            candidates.push(vec![0.0; n]);
            let mut best: Option<(Vec<f64>, f64)> = None;
            for p0 in candidates {
                let v = eval(&p0)?;
                if best.as_ref().is_none_or(|(_, b)| sense.improves(v, *b)) {
                    best = Some((p0, v));
                }
            }
            best.expect("candidate list nonempty")
        }
        SmoothSearch::FreeStarts { starts, tol } => {
            if starts.is_empty() {
                return Err(Error::InvalidConfig(
                    "unconstrained search needs at least one starting adjoint".into(),
                ));
            }
            for s in starts {
                if s.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        got: s.len(),
                    });
                }
            }
            let sign = match sense {
                Sense::Min => 1.0,
                Sense::Max => -1.0,
            };
            let mut first_error: Option<Error> = None;
            let result = minimize_powell(
                |p0: &[f64]| match eval(p0) {
                    Ok(v) => sign * v,
                    Err(e) => {
                        if first_error.is_none() {
                            first_error = Some(e);
                        }
                        f64::INFINITY
                    }
                },
                &starts[0],
                *tol,
                &starts[1..],
            );
            if let Some(e) = first_error {
                return Err(e);
            }
            (result.x, sign * result.value)
        }
    };

    let mut y0 = Vec::with_capacity(2 * n + 1);
    y0.extend_from_slice(x0);
    y0.extend_from_slice(&best_p0);
    y0.push(0.0);
    let trajectory = integrate_adaptive(
        smooth_flat_rhs(problem),
        t0,
        problem.horizon,
        &y0,
        &problem.tol,
    )?;
    let pn = norm(&best_p0);
    let control = if pn < ADJOINT_ZERO_EPS {
        vec![0.0; n]
    } else {
        best_p0.iter().map(|v| v / pn).collect()
    };
    Ok(ValueResult {
        value: best_value,
        p0_opt: best_p0,
        trajectory,
        control_at_t0: control,
        stop_time: None,
    })
}

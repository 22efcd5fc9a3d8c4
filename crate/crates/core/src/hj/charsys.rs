//! Characteristic systems: state/adjoint dynamics along which the value
//! propagates, in structured and flattened forms.

use crate::error::{Error, Result};
use crate::hj::problem::{EikonalProblem, SmoothHamiltonianProblem};

/// Adjoint norms below this threshold are treated as zero; the extremal
/// control is then the zero vector (a measure-zero selection).
pub const ADJOINT_ZERO_EPS: f64 = 1e-12;

/// State of one characteristic curve: state `x`, adjoint `p`, accumulated
/// functional value `z`, and, for problems transformed from a running-cost
/// form, the extra pair (accumulated running cost, constant cost adjoint).
#[derive(Debug, Clone, PartialEq)]
pub struct CharState {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub z: f64,
    pub extended: Option<ExtendedPair>,
}

/// Running-cost extension: `cost_state` integrates the running cost along
/// the curve; `cost_adjoint` is constant along any one characteristic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtendedPair {
    pub cost_state: f64,
    pub cost_adjoint: f64,
}

impl CharState {
    pub fn new(x: Vec<f64>, p: Vec<f64>) -> Self {
        CharState {
            x,
            p,
            z: 0.0,
            extended: None,
        }
    }

    pub fn extended(x: Vec<f64>, p: Vec<f64>, cost_adjoint: f64) -> Self {
        CharState {
            x,
            p,
            z: 0.0,
            extended: Some(ExtendedPair {
                cost_state: 0.0,
                cost_adjoint,
            }),
        }
    }
}

#[inline]
pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl EikonalProblem {
    /// Time derivative of a characteristic state. With a running cost
    /// present the adjoint picks up the cost gradient scaled by the constant
    /// cost adjoint, and the extension accumulates the running cost itself.
    pub fn char_rhs(&self, _t: f64, s: &CharState) -> Result<CharState> {
        if s.x.len() != self.n || s.p.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: s.x.len().max(s.p.len()),
            });
        }
        let n = self.n;
        let mut dc = vec![0.0; n];
        let cval = self.c.eval_grad_into(&s.x, &mut dc);
        let pn = norm(&s.p);
        let mut dx = vec![0.0; n];
        if pn >= ADJOINT_ZERO_EPS {
            for i in 0..n {
                dx[i] = cval * s.p[i] / pn;
            }
        }
        let mut dp: Vec<f64> = dc.iter().map(|g| -g * pn).collect();
        let mut extended = None;
        if let Some(eta) = &self.eta {
            let pair = s.extended.ok_or_else(|| {
                Error::InvalidProblem(
                    "running-cost problem needs the extended characteristic state".into(),
                )
            })?;
            let mut deta = vec![0.0; n];
            let eta_val = eta.eval_grad_into(&s.x, &mut deta);
            for i in 0..n {
                dp[i] -= pair.cost_adjoint * deta[i];
            }
            extended = Some(ExtendedPair {
                cost_state: eta_val,
                cost_adjoint: 0.0,
            });
        }
        if !dx.iter().chain(dp.iter()).all(|v| v.is_finite()) {
            return Err(Error::DynamicsFailed { t: _t });
        }
        Ok(CharState {
            x: dx,
            p: dp,
            z: 0.0,
            extended,
        })
    }
}

impl SmoothHamiltonianProblem {
    /// Smooth characteristic derivative: the state follows the adjoint
    /// gradient of the Hamiltonian, the adjoint follows minus its state
    /// gradient, and `z` accumulates `<p, D_p H> - H`.
    pub fn char_rhs(&self, t: f64, s: &CharState) -> Result<CharState> {
        if s.x.len() != self.n || s.p.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: s.x.len().max(s.p.len()),
            });
        }
        let n = self.n;
        let mut dx = vec![0.0; n];
        let mut dp = vec![0.0; n];
        (self.dp)(t, &s.x, &s.p, &mut dx);
        (self.dx)(t, &s.x, &s.p, &mut dp);
        for v in dp.iter_mut() {
            *v = -*v;
        }
        let h = (self.hamiltonian)(t, &s.x, &s.p);
        let dz = s.p.iter().zip(&dx).map(|(pi, vi)| pi * vi).sum::<f64>() - h;
        if !dx.iter().chain(dp.iter()).all(|v| v.is_finite()) || !dz.is_finite() {
            return Err(Error::DynamicsFailed { t });
        }
        Ok(CharState {
            x: dx,
            p: dp,
            z: dz,
            extended: None,
        })
    }
}

/// Flattened right-hand side for the terminal-cost case; layout `[x, p]`.
pub(crate) fn mayer_flat_rhs(
    problem: &EikonalProblem,
) -> impl FnMut(f64, &[f64], &mut [f64]) + '_ {
    let n = problem.n;
    let mut dc = vec![0.0; n];
    move |_t, y, dy| {
        let (x, p) = y.split_at(n);
        let cval = problem.c.eval_grad_into(x, &mut dc);
        let pn = norm(p);
        if pn >= ADJOINT_ZERO_EPS {
            let scale = cval / pn;
            for i in 0..n {
                dy[i] = scale * p[i];
            }
        } else {
            dy[..n].fill(0.0);
        }
        for i in 0..n {
            dy[n + i] = -dc[i] * pn;
        }
    }
}

/// Flattened right-hand side for the running-cost transform; layout
/// `[x, p, accumulated_cost]` with the constant cost adjoint captured.
pub(crate) fn bolza_flat_rhs(
    problem: &EikonalProblem,
    cost_adjoint: f64,
) -> impl FnMut(f64, &[f64], &mut [f64]) + '_ {
    let n = problem.n;
    let eta = problem.eta.clone().expect("running cost present");
    let mut dc = vec![0.0; n];
    let mut deta = vec![0.0; n];
    move |_t, y, dy| {
        let (x, rest) = y.split_at(n);
        let p = &rest[..n];
        let cval = problem.c.eval_grad_into(x, &mut dc);
        let eta_val = eta.eval_grad_into(x, &mut deta);
        let pn = norm(p);
        if pn >= ADJOINT_ZERO_EPS {
            let scale = cval / pn;
            for i in 0..n {
                dy[i] = scale * p[i];
            }
        } else {
            dy[..n].fill(0.0);
        }
        for i in 0..n {
            dy[n + i] = -dc[i] * pn - cost_adjoint * deta[i];
        }
        dy[2 * n] = eta_val;
    }
}

/// Flattened smooth characteristic system; layout `[x, p, z]`.
pub(crate) fn smooth_flat_rhs(
    problem: &SmoothHamiltonianProblem,
) -> impl FnMut(f64, &[f64], &mut [f64]) + '_ {
    let n = problem.n;
    move |t, y, dy| {
        let (x, rest) = y.split_at(n);
        let p = &rest[..n];
        {
            let (dx_part, dp_tail) = dy.split_at_mut(n);
            (problem.dp)(t, x, p, dx_part);
            (problem.dx)(t, x, p, &mut dp_tail[..n]);
        }
        let mut dot = 0.0;
        for i in 0..n {
            dot += p[i] * dy[i];
            dy[n + i] = -dy[n + i];
        }
        dy[2 * n] = dot - (problem.hamiltonian)(t, x, p);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::ScalarField;
    use crate::hj::problem::{EtaCondition, FieldRef, DEFAULT_CRITICAL_TOL};
    use std::sync::Arc;

    #[test]
    fn constant_speed_rhs() {
        let c: FieldRef = Arc::new(ScalarField::Constant {
            dim: 2,
            value: -1.0,
        });
        let sigma: FieldRef = Arc::new(ScalarField::NormSquaredHalf { dim: 2 });
        let p = EikonalProblem::mayer(c, sigma, 1.0, None).unwrap();
        let d = p
            .char_rhs(0.0, &CharState::new(vec![0.0, 0.0], vec![0.0, 2.0]))
            .unwrap();
        assert_eq!(d.x, vec![0.0, -1.0]);
        assert_eq!(d.p, vec![0.0, 0.0]);
    }

    #[test]
    fn running_cost_drives_adjoint_at_zero() {
        let c: FieldRef = Arc::new(ScalarField::Constant {
            dim: 2,
            value: -1.0,
        });
        let sigma: FieldRef = Arc::new(ScalarField::Constant { dim: 2, value: 0.0 });
        let eta: FieldRef = Arc::new(ScalarField::NormSquaredHalf { dim: 2 });
        let p = EikonalProblem::bolza(
            c,
            sigma,
            eta,
            1.0,
            EtaCondition::CriticalPoint {
                point: vec![0.0, 0.0],
                tol: DEFAULT_CRITICAL_TOL,
            },
        )
        .unwrap();
        let s = CharState::extended(vec![1.0, 0.0], vec![0.0, 0.0], 1.0);
        let d = p.char_rhs(0.0, &s).unwrap();
        assert_eq!(d.p, vec![-1.0, 0.0]);
        assert_eq!(d.x, vec![0.0, 0.0]);
        assert_eq!(d.extended.unwrap().cost_state, 0.5);
        assert_eq!(d.extended.unwrap().cost_adjoint, 0.0);
    }

    #[test]
    fn quadratic_hamiltonian_rhs() {
        use crate::hj::problem::{Sense, SmoothHamiltonianProblem};
        let sigma: FieldRef = Arc::new(ScalarField::Constant { dim: 2, value: 0.0 });
        let prob = SmoothHamiltonianProblem::new(
            2,
            Arc::new(|_t, _x, p: &[f64]| 0.5 * p.iter().map(|v| v * v).sum::<f64>()),
            Arc::new(|_t, _x, _p: &[f64], g: &mut [f64]| g.fill(0.0)),
            Arc::new(|_t, _x, p: &[f64], g: &mut [f64]| g.copy_from_slice(p)),
            sigma,
            1.0,
            Sense::Max,
            false,
        )
        .unwrap();
        let d = prob
            .char_rhs(0.0, &CharState::new(vec![0.0, 0.0], vec![3.0, 4.0]))
            .unwrap();
        assert_eq!(d.x, vec![3.0, 4.0]);
        assert_eq!(d.p, vec![0.0, 0.0]);
        assert_eq!(d.z, 12.5);
    }
}

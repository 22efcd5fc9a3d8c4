//! Linear game data, state-transition (Cauchy) matrices, and the programmed
//! maximin evaluated through support functions of mapped control sets.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::games::convex::{arg_support, dot, support, ConvexSet};
use crate::hj::unit_candidates;
use crate::numerics::golden_max;
use crate::numerics::ode::{drive, Flow};
use crate::numerics::quad::{simpson_nodes, simpson_sum};
use crate::numerics::ToleranceSpec;

/// Constant or time-varying system matrix.
#[derive(Clone)]
pub enum SystemMatrix {
    Constant(DMatrix<f64>),
    TimeVarying(Arc<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>),
}

impl std::fmt::Debug for SystemMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SystemMatrix::Constant(m) => write!(f, "SystemMatrix::Constant({}x{})", m.nrows(), m.ncols()),
            SystemMatrix::TimeVarying(_) => write!(f, "SystemMatrix::TimeVarying"),
        }
    }
}

impl SystemMatrix {
    pub fn dim(&self) -> usize {
        match self {
            SystemMatrix::Constant(m) => m.nrows(),
            SystemMatrix::TimeVarying(f) => f(0.0).nrows(),
        }
    }
}

/// State-transition matrix mapping states at time `t` to the horizon:
/// the solution of `dM/dt = -M A(t)` with `M(T) = I`.
///
/// For a constant system matrix this is the matrix exponential of
/// `(T - t) A` (scaling-and-squaring); a time-varying matrix goes through
/// the adaptive ODE integrator on the time-reversed system.
pub fn cauchy_matrix(a: &SystemMatrix, horizon: f64, t: f64) -> Result<DMatrix<f64>> {
    if t > horizon {
        return Err(Error::InvalidConfig(
            "transition matrix requested past the horizon".into(),
        ));
    }
    let n = a.dim();
    match a {
        SystemMatrix::Constant(m) => Ok((m * (horizon - t)).exp()),
        SystemMatrix::TimeVarying(f) => {
            if t == horizon {
                return Ok(DMatrix::identity(n, n));
            }
            // Row-major flattening of M(s) := Phi(T, T - s), which satisfies
            // dM/ds = M A(T - s), M(0) = I.
            let y0: Vec<f64> = DMatrix::<f64>::identity(n, n)
                .transpose()
                .as_slice()
                .to_vec();
            let tol = ToleranceSpec {
                abs_tol: 1e-10,
                rel_tol: 1e-10,
                ..ToleranceSpec::default()
            };
            let rhs = |s: f64, y: &[f64], dy: &mut [f64]| {
                let a_now = f(horizon - s);
                for i in 0..n {
                    for j in 0..n {
                        let mut acc = 0.0;
                        for r in 0..n {
                            acc += y[i * n + r] * a_now[(r, j)];
                        }
                        dy[i * n + j] = acc;
                    }
                }
            };
            let (_s, y, _dy) = drive(rhs, 0.0, horizon - t, &y0, &tol, |_| Flow::Continue)?;
            Ok(DMatrix::from_fn(n, n, |i, j| y[i * n + j]))
        }
    }
}

/// Two-player linear game with a distance-to-target terminal payoff on the
/// first `k` coordinates: player 1 (through `b1`, set `u1`) minimizes,
/// player 2 (through `b2`, set `u2`) maximizes.
#[derive(Debug, Clone)]
pub struct LinearGame {
    pub n: usize,
    pub k: usize,
    pub a: SystemMatrix,
    pub b1: DMatrix<f64>,
    pub b2: DMatrix<f64>,
    pub u1: ConvexSet,
    pub u2: ConvexSet,
    pub target: ConvexSet,
    pub horizon: f64,
}

impl LinearGame {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > self.n {
            return Err(Error::InvalidProblem(
                "payoff dimension must satisfy 1 <= k <= n".into(),
            ));
        }
        if self.a.dim() != self.n || self.b1.nrows() != self.n || self.b2.nrows() != self.n {
            return Err(Error::InvalidProblem(
                "system matrices must share the state dimension".into(),
            ));
        }
        if self.u1.dim() != self.b1.ncols() || self.u2.dim() != self.b2.ncols() {
            return Err(Error::InvalidProblem(
                "control sets must match the input matrix widths".into(),
            ));
        }
        if self.target.dim() != self.k {
            return Err(Error::DimensionMismatch {
                expected: self.k,
                got: self.target.dim(),
            });
        }
        if !(self.horizon > 0.0) {
            return Err(Error::InvalidProblem("horizon must be positive".into()));
        }
        self.u1.validate()?;
        self.u2.validate()?;
        self.target.validate()
    }

    /// Equal-speed pursuit on all of `R^n`: both players steer the state
    /// directly inside balls of radii `a1` (minimizer) and `a2` (maximizer),
    /// and the payoff is the distance to the origin.
    pub fn isotropic_ball_game(n: usize, a1: f64, a2: f64, horizon: f64) -> Self {
        LinearGame {
            n,
            k: n,
            a: SystemMatrix::Constant(DMatrix::zeros(n, n)),
            b1: DMatrix::identity(n, n),
            b2: DMatrix::identity(n, n),
            u1: ConvexSet::ball2(n, a1),
            u2: ConvexSet::ball2(n, a2),
            target: ConvexSet::origin(n),
            horizon,
        }
    }
}

/// Programmed-maximin evaluation data.
#[derive(Debug, Clone)]
pub struct MaximinEval {
    /// The truncated maximin `max(v_tilde, 0)`.
    pub v_star: f64,
    /// The pre-truncation maximin.
    pub v_tilde: f64,
    /// The extremal direction attaining `v_tilde`.
    pub l_opt: Vec<f64>,
}

/// Per-node images of the control sets in the payoff coordinates, stored
/// transposed: `g_it[j]` is `(top-k block of Phi(T, t_j) B_i)'`, so mapping
/// a direction is one `m x k` matrix-vector product.
pub(crate) struct MappedInputs {
    pub nodes: Vec<f64>,
    pub g1t: Vec<DMatrix<f64>>,
    pub g2t: Vec<DMatrix<f64>>,
}

pub(crate) fn mapped_inputs(game: &LinearGame, t0: f64, quad_n: usize) -> Result<MappedInputs> {
    let nodes = simpson_nodes(t0, game.horizon, quad_n);
    let mut g1t = Vec::with_capacity(nodes.len());
    let mut g2t = Vec::with_capacity(nodes.len());
    for &t in &nodes {
        let phi = cauchy_matrix(&game.a, game.horizon, t)?;
        let full1 = &phi * &game.b1;
        let full2 = &phi * &game.b2;
        g1t.push(full1.rows(0, game.k).transpose());
        g2t.push(full2.rows(0, game.k).transpose());
    }
    Ok(MappedInputs { nodes, g1t, g2t })
}

/// Scratch buffers for the per-direction sweep.
pub(crate) struct RateScratch {
    w1: Vec<f64>,
    neg_w1: Vec<f64>,
    w2: Vec<f64>,
    rates: Vec<f64>,
}

impl RateScratch {
    pub(crate) fn new(game: &LinearGame, node_count: usize) -> Self {
        RateScratch {
            w1: vec![0.0; game.b1.ncols()],
            neg_w1: vec![0.0; game.b1.ncols()],
            w2: vec![0.0; game.b2.ncols()],
            rates: vec![0.0; node_count],
        }
    }
}

#[inline]
fn matvec_into(m: &DMatrix<f64>, x: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, xj) in x.iter().enumerate() {
            acc += m[(i, j)] * xj;
        }
        *o = acc;
    }
}

/// Integrand pair at one node for a fixed direction `l`: the minimizing
/// player contributes `-s(-G1' l; U1)`, the maximizing one `s(G2' l; U2)`.
pub(crate) fn node_rates(
    game: &LinearGame,
    inputs: &MappedInputs,
    j: usize,
    l: &[f64],
    scratch: &mut RateScratch,
) -> (f64, f64) {
    matvec_into(&inputs.g1t[j], l, &mut scratch.w1);
    matvec_into(&inputs.g2t[j], l, &mut scratch.w2);
    for (n, w) in scratch.neg_w1.iter_mut().zip(&scratch.w1) {
        *n = -w;
    }
    let k1 = -support(&game.u1, &scratch.neg_w1);
    let k2 = support(&game.u2, &scratch.w2);
    (k1, k2)
}

/// Objective of the programmed maximin for a fixed direction `l`, with the
/// time integrals taken by composite Simpson over precomputed nodes.
fn maximin_objective(
    game: &LinearGame,
    inputs: &MappedInputs,
    head: &[f64],
    t0: f64,
    l: &[f64],
    scratch: &mut RateScratch,
) -> f64 {
    for j in 0..inputs.nodes.len() {
        let (k1, k2) = node_rates(game, inputs, j, l, scratch);
        scratch.rates[j] = k1 + k2;
    }
    let integral = if t0 == game.horizon {
        0.0
    } else {
        simpson_sum(&scratch.rates, t0, game.horizon)
    };
    dot(l, head) + integral - support(&game.target, l)
}

/// Programmed maximin at `(t0, x0)`: the truncated-at-zero maximum over
/// unit directions in the payoff space of the mapped-position term plus the
/// integrated support-function rates minus the target support.
///
/// `l_counts` controls the direction grid (one count per sphere angle; for
/// a 2-D payoff space the best grid angle is refined by golden section);
/// `quad_n` is the Simpson subinterval count.
pub fn programmed_maximin_p36(
    game: &LinearGame,
    t0: f64,
    x0: &[f64],
    l_counts: &[usize],
    quad_n: usize,
) -> Result<MaximinEval> {
    game.validate()?;
    if x0.len() != game.n {
        return Err(Error::DimensionMismatch {
            expected: game.n,
            got: x0.len(),
        });
    }
    if t0 > game.horizon {
        return Err(Error::EmptyHorizon {
            t0,
            horizon: game.horizon,
        });
    }
    if quad_n < 2 || quad_n % 2 != 0 {
        return Err(Error::InvalidConfig(
            "Simpson rule needs an even subinterval count >= 2".into(),
        ));
    }

    let phi0 = cauchy_matrix(&game.a, game.horizon, t0)?;
    let head_full = &phi0 * DVector::from_column_slice(x0);
    let head: Vec<f64> = head_full.as_slice()[..game.k].to_vec();
    let inputs = mapped_inputs(game, t0, quad_n)?;

    let candidates = unit_candidates(game.k, l_counts)?;
    let mut scratch = RateScratch::new(game, inputs.nodes.len());
    let mut best_idx = 0;
    let mut best = f64::NEG_INFINITY;
    for (idx, l) in candidates.iter().enumerate() {
        let v = maximin_objective(game, &inputs, &head, t0, l, &mut scratch);
        if v > best {
            best = v;
            best_idx = idx;
        }
    }
    let mut l_opt = candidates[best_idx].clone();
    let mut v_tilde = best;

    // Angular refinement around the winning grid direction (2-D payoff
    // space only).
    if game.k == 2 && candidates.len() > 2 {
        let step = 2.0 * std::f64::consts::PI / candidates.len() as f64;
        let theta0 = best_idx as f64 * step;
        let (theta, v) = golden_max(
            |theta| {
                let l = [theta.sin(), theta.cos()];
                maximin_objective(game, &inputs, &head, t0, &l, &mut scratch)
            },
            theta0 - step,
            theta0 + step,
            1e-12,
            120,
        );
        if v > v_tilde {
            v_tilde = v;
            l_opt = vec![theta.sin(), theta.cos()];
        }
    }

    Ok(MaximinEval {
        v_star: v_tilde.max(0.0),
        v_tilde,
        l_opt,
    })
}

/// Worst deviation between the exponential and ODE evaluations of the
/// transition matrix on a fixed dense test matrix, sampled over several
/// times. Both code paths are live in production (constant vs time-varying
/// systems); this pins their mutual consistency.
pub fn transition_matrix_residual() -> Result<f64> {
    let m = DMatrix::from_row_slice(
        3,
        3,
        &[0.3, -1.2, 0.5, 0.8, 0.1, -0.4, -0.2, 0.6, -0.7],
    );
    let constant = SystemMatrix::Constant(m.clone());
    let varying = SystemMatrix::TimeVarying(Arc::new(move |_t| m.clone()));
    let mut worst: f64 = 0.0;
    for t in [0.0, 0.3, 0.9, 1.4, 2.0] {
        let a = cauchy_matrix(&constant, 2.0, t)?;
        let b = cauchy_matrix(&varying, 2.0, t)?;
        worst = worst.max((a - b).norm());
    }
    Ok(worst)
}

/// Saddle control pair for a fixed direction at time `t0`: the minimizing
/// player's extremal point against `l` and the maximizing player's one.
pub(crate) fn extremal_controls(
    game: &LinearGame,
    t0: f64,
    l: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let phi = cauchy_matrix(&game.a, game.horizon, t0)?;
    let lv = DVector::from_column_slice(l);
    let w1 = (&phi * &game.b1).rows(0, game.k).transpose() * &lv;
    let w2 = (&phi * &game.b2).rows(0, game.k).transpose() * &lv;
    let neg_w1: Vec<f64> = w1.iter().map(|v| -v).collect();
    Ok((
        arg_support(&game.u1, &neg_w1),
        arg_support(&game.u2, w2.as_slice()),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_matrix_gives_identity() {
        let a = SystemMatrix::Constant(DMatrix::zeros(3, 3));
        let phi = cauchy_matrix(&a, 2.0, 0.5).unwrap();
        assert_eq!(phi, DMatrix::identity(3, 3));
    }

    #[test]
    fn nilpotent_shift_matrix() {
        let a = SystemMatrix::Constant(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]));
        let phi = cauchy_matrix(&a, 3.0, 1.0).unwrap();
        assert!((phi[(0, 0)] - 1.0).abs() < 1e-14);
        assert!((phi[(0, 1)] - 2.0).abs() < 1e-14);
        assert!(phi[(1, 0)].abs() < 1e-14);
        assert!((phi[(1, 1)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn exponential_agrees_with_ode_path() {
        let m = DMatrix::from_row_slice(
            3,
            3,
            &[0.3, -1.2, 0.5, 0.8, 0.1, -0.4, -0.2, 0.6, -0.7],
        );
        let constant = SystemMatrix::Constant(m.clone());
        let varying = SystemMatrix::TimeVarying(Arc::new(move |_t| m.clone()));
        for t in [0.0, 0.7, 1.9] {
            let a = cauchy_matrix(&constant, 2.0, t).unwrap();
            let b = cauchy_matrix(&varying, 2.0, t).unwrap();
            let diff = (&a - &b).norm();
            assert!(diff < 1e-8, "paths disagree by {diff}");
        }
    }

    #[test]
    fn defining_ode_residual_small() {
        // Central finite difference of Phi(T, t) in t against -Phi * A.
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -0.3]);
        let a = SystemMatrix::Constant(m.clone());
        let eps = 1e-5;
        for t in [0.2, 0.9, 1.5] {
            let plus = cauchy_matrix(&a, 2.0, t + eps).unwrap();
            let minus = cauchy_matrix(&a, 2.0, t - eps).unwrap();
            let deriv = (plus - minus) / (2.0 * eps);
            let phi = cauchy_matrix(&a, 2.0, t).unwrap();
            let residual = (&deriv + &phi * &m).norm();
            assert!(residual < 1e-8, "residual {residual}");
        }
    }

    #[test]
    fn ball_game_closed_form() {
        // max(||x0|| + (a2 - a1)(T - t0), 0) for the isotropic ball game.
        let game = LinearGame::isotropic_ball_game(2, 2.0, 1.0, 1.0);
        let eval = programmed_maximin_p36(&game, 0.5, &[1.0, 0.0], &[2000], 64).unwrap();
        assert!((eval.v_star - 0.5).abs() < 1e-4, "got {}", eval.v_star);

        let game = LinearGame::isotropic_ball_game(2, 1.0, 2.0, 1.0);
        let x0 = [0.3 * (0.25f64).cos(), 0.3 * (0.25f64).sin()];
        let eval = programmed_maximin_p36(&game, 0.0, &x0, &[2000], 64).unwrap();
        assert!((eval.v_star - 1.3).abs() < 1e-4, "got {}", eval.v_star);
    }

    #[test]
    fn empty_horizon_gives_target_distance() {
        let game = LinearGame::isotropic_ball_game(2, 2.0, 1.0, 1.0);
        let eval = programmed_maximin_p36(&game, 1.0, &[0.6, -0.8], &[2000], 64).unwrap();
        assert!((eval.v_star - 1.0).abs() < 1e-6);
    }
}

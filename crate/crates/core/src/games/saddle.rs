//! Closed-loop game values for the one-iteration-exact classes: a declared
//! decomposition of the integrated maximin rates turns the closed-loop value
//! into `max(programmed maximin, running max of a scalar margin)`, with
//! extremal-aiming saddle strategies outside the indifference region.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::fields::{sphere_embed_into, sphere_random_angles};
use crate::games::convex::{dot, support, ConvexSet};
use crate::games::linear::{
    cauchy_matrix, extremal_controls, mapped_inputs, node_rates, programmed_maximin_p36,
    LinearGame, RateScratch, SystemMatrix,
};
use crate::games::GameEval;
use crate::numerics::quad::simpson_sum;
use crate::numerics::{golden_max, RngSeed};

/// Declared reduction of the integrated worst-case input rates: for every
/// unit direction `l` and time `t`,
/// `integral of the maxmin rate over [t, T] - s(l; target)` must equal
/// `<l, shift(t)> - s(l; envelope(t)) + margin(t)`.
/// The envelope sets must keep the left-hand side's positive part reachable
/// (their subtracted support never makes the maximum over directions
/// negative).
#[derive(Clone)]
pub struct GameDecomposition {
    pub margin: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub shift: Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>,
    pub envelope: Arc<dyn Fn(f64) -> ConvexSet + Send + Sync>,
}

/// Search and verification controls for the closed-loop evaluation.
#[derive(Debug, Clone)]
pub struct SaddleOptions {
    /// Direction-grid counts per sphere angle in the payoff space.
    pub l_counts: Vec<usize>,
    /// Simpson subintervals for the maximin time integrals.
    pub quad_n: usize,
    /// Dense-grid size for the running maximum of the margin.
    pub time_grid_points: usize,
    /// Random (t, l) samples for the decomposition consistency check.
    pub consistency_samples: usize,
    pub consistency_tol: f64,
    pub seed: RngSeed,
}

impl Default for SaddleOptions {
    fn default() -> Self {
        SaddleOptions {
            l_counts: vec![10_000],
            quad_n: 256,
            time_grid_points: 10_001,
            consistency_samples: 100,
            consistency_tol: 1e-6,
            seed: RngSeed::new(0x600D_5EED, 0),
        }
    }
}

/// Dense-grid maximum of `f` over `[a, b]` with golden-section refinement
/// around the best node. Returns `(argmax, max)`.
pub(crate) fn grid_refine_max<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    points: usize,
) -> (f64, f64) {
    if a == b || points < 2 {
        return (a, f(a));
    }
    let h = (b - a) / (points - 1) as f64;
    let mut best_t = a;
    let mut best = f(a);
    for j in 1..points {
        let t = if j + 1 == points { b } else { a + j as f64 * h };
        let v = f(t);
        if v > best {
            best = v;
            best_t = t;
        }
    }
    let lo = (best_t - h).max(a);
    let hi = (best_t + h).min(b);
    let (t_ref, v_ref) = golden_max(&f, lo, hi, 1e-12 * (b - a).max(1.0), 120);
    if v_ref > best {
        (t_ref, v_ref)
    } else {
        (best_t, best)
    }
}

fn random_unit<R: Rng>(k: usize, rng: &mut R) -> Vec<f64> {
    if k == 1 {
        return vec![if rng.random::<f64>() < 0.5 { -1.0 } else { 1.0 }];
    }
    let angles = sphere_random_angles(k, rng);
    let mut l = vec![0.0; k];
    sphere_embed_into(angles.angles(), &mut l);
    l
}

/// Verifies the declared decomposition on random `(t, l)` samples by
/// comparing both sides of its defining identity.
fn check_decomposition(
    game: &LinearGame,
    dec: &GameDecomposition,
    t0: f64,
    opts: &SaddleOptions,
) -> Result<()> {
    let mut rng = opts.seed.rng();
    for _ in 0..opts.consistency_samples {
        let t = t0 + (game.horizon - t0) * rng.random::<f64>();
        let l = random_unit(game.k, &mut rng);
        let inputs = mapped_inputs(game, t, opts.quad_n)?;
        let mut scratch = RateScratch::new(game, inputs.nodes.len());
        let mut rates = Vec::with_capacity(inputs.nodes.len());
        for j in 0..inputs.nodes.len() {
            let (k1, k2) = node_rates(game, &inputs, j, &l, &mut scratch);
            rates.push(k1 + k2);
        }
        let lhs = if t == game.horizon {
            0.0
        } else {
            simpson_sum(&rates, t, game.horizon)
        } - support(&game.target, &l);
        let shift = (dec.shift)(t);
        let envelope = (dec.envelope)(t);
        let rhs = dot(&l, &shift) - support(&envelope, &l) + (dec.margin)(t);
        let residual = (lhs - rhs).abs();
        if residual > opts.consistency_tol {
            return Err(Error::DecompositionInconsistent {
                residual,
                detail: format!("t = {t:.6}, l = {l:?}"),
            });
        }
    }
    Ok(())
}

/// Closed-loop value and saddle strategies at `(t0, x0)` for a game whose
/// declared decomposition makes one programmed iteration exact:
/// `V = max(V*, max over [t0, T] of the margin)`. Inside the indifference
/// region (`v_tilde <= max(0, margin(t0))`) every control is a saddle
/// selection and the strategy fields stay empty; otherwise the extremal
/// direction and the extremal-aiming controls are returned.
pub fn value_saddle_thm38(
    game: &LinearGame,
    dec: &GameDecomposition,
    t0: f64,
    x0: &[f64],
    opts: &SaddleOptions,
) -> Result<GameEval> {
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
    check_decomposition(game, dec, t0, opts)?;

    let maximin = programmed_maximin_p36(game, t0, x0, &opts.l_counts, opts.quad_n)?;
    let (_t_max, margin_max) =
        grid_refine_max(|t| (dec.margin)(t), t0, game.horizon, opts.time_grid_points);
    let v = maximin.v_star.max(margin_max);

    let threshold = (dec.margin)(t0).max(0.0);
    let mut eval = GameEval {
        v,
        v_star: maximin.v_star,
        v_tilde: maximin.v_tilde,
        lbar: None,
        ubar: None,
        vbar: None,
    };
    if maximin.v_tilde > threshold {
        let phi0 = cauchy_matrix(&game.a, game.horizon, t0)?;
        let head_full = &phi0 * DVector::from_column_slice(x0);
        let shift = (dec.shift)(t0);
        let envelope = (dec.envelope)(t0);
        let mut head: Vec<f64> = head_full.as_slice()[..game.k].to_vec();
        for (h, s) in head.iter_mut().zip(&shift) {
            *h += s;
        }
        let aiming = |l: &[f64]| dot(l, &head) - support(&envelope, l);

        let candidates = crate::hj::unit_candidates(game.k, &opts.l_counts)?;
        let mut best_idx = 0;
        let mut best = f64::NEG_INFINITY;
        for (idx, l) in candidates.iter().enumerate() {
            let v = aiming(l);
            if v > best {
                best = v;
                best_idx = idx;
            }
        }
        let mut lbar = candidates[best_idx].clone();
        if game.k == 2 && candidates.len() > 2 {
            let step = 2.0 * std::f64::consts::PI / candidates.len() as f64;
            let theta0 = best_idx as f64 * step;
            let (theta, v_ref) = golden_max(
                |theta| aiming(&[theta.sin(), theta.cos()]),
                theta0 - step,
                theta0 + step,
                1e-12,
                120,
            );
            if v_ref > best {
                lbar = vec![theta.sin(), theta.cos()];
            }
        }
        let (ubar, vbar) = extremal_controls(game, t0, &lbar)?;
        eval.lbar = Some(lbar);
        eval.ubar = Some(ubar);
        eval.vbar = Some(vbar);
    }
    Ok(eval)
}

/// Data of the damped planar pursuit game: the first player steers the
/// velocity pair through a segment-plus-disc set of size `a` around the
/// segment direction `u0`, the second player perturbs the positions inside
/// a disc of radius `b`, velocities decay at rate `alpha`, and the payoff
/// is the terminal distance of the position pair from the origin.
#[derive(Debug, Clone)]
pub struct DampedPursuitParams {
    pub alpha: f64,
    pub a: f64,
    pub b: f64,
    pub u0: [f64; 2],
    pub horizon: f64,
}

impl DampedPursuitParams {
    pub fn validate(&self) -> Result<()> {
        if self.alpha > 0.0 && self.a > 0.0 && self.b > 0.0 && self.horizon > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidConfig(
                "damped pursuit needs positive rate, radii and horizon".into(),
            ))
        }
    }

    /// Velocity-to-position response gain `(1 - exp(-alpha (T-t))) / alpha`.
    pub fn response_gain(&self, t: f64) -> f64 {
        (1.0 - (-self.alpha * (self.horizon - t)).exp()) / self.alpha
    }

    /// Time integral of the response gain over `[t, T]`.
    pub fn integrated_gain(&self, t: f64) -> f64 {
        let tau = self.horizon - t;
        tau / self.alpha - (1.0 - (-self.alpha * tau).exp()) / (self.alpha * self.alpha)
    }

    /// Margin the maximizing player can still force from time `t`:
    /// `(T - t) b - a * integrated_gain(t)`.
    pub fn margin(&self, t: f64) -> f64 {
        (self.horizon - t) * self.b - self.a * self.integrated_gain(t)
    }

    /// The full linear-game data.
    pub fn game(&self) -> LinearGame {
        let al = self.alpha;
        let a_mat = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0, 0.0, 1.0, 0.0, //
                0.0, 0.0, 0.0, 1.0, //
                0.0, 0.0, -al, 0.0, //
                0.0, 0.0, 0.0, -al,
            ],
        );
        LinearGame {
            n: 4,
            k: 2,
            a: SystemMatrix::Constant(a_mat),
            b1: DMatrix::from_row_slice(4, 2, &[0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0]),
            b2: DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]),
            u1: ConvexSet::segment(self.u0.to_vec()).minkowski_sum(ConvexSet::ball2(2, self.a)),
            u2: ConvexSet::ball2(2, self.b),
            target: ConvexSet::origin(2),
            horizon: self.horizon,
        }
    }

    /// The decomposition realized by this game: zero shift, the envelope is
    /// the segment scaled by the integrated gain, and the margin is
    /// [`Self::margin`].
    pub fn decomposition(&self) -> GameDecomposition {
        let p = self.clone();
        let p2 = self.clone();
        let p3 = self.clone();
        GameDecomposition {
            margin: Arc::new(move |t| p.margin(t)),
            shift: Arc::new(move |_t| vec![0.0; p2.game().k]),
            envelope: Arc::new(move |t| {
                ConvexSet::segment(p3.u0.to_vec()).scale(p3.integrated_gain(t))
            }),
        }
    }
}

/// Closed-form closed-loop evaluation of the damped pursuit game, with the
/// extremal direction found by one-dimensional angular maximization.
/// Inside the indifference region the strategies take the fixed selection
/// `(u0, origin)`.
pub fn damped_pursuit_eval(
    params: &DampedPursuitParams,
    t0: f64,
    x: &[f64],
    angle_count: usize,
) -> Result<GameEval> {
    params.validate()?;
    if x.len() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            got: x.len(),
        });
    }
    if t0 > params.horizon {
        return Err(Error::EmptyHorizon {
            t0,
            horizon: params.horizon,
        });
    }
    if angle_count == 0 {
        return Err(Error::InvalidConfig("angle grid must be nonempty".into()));
    }
    let r = params.response_gain(t0);
    let big_r = params.integrated_gain(t0);
    let xi = [x[0] + r * x[2], x[1] + r * x[3]];
    let u0 = params.u0;
    let objective = |theta: f64| {
        let l = [theta.sin(), theta.cos()];
        dot(&l, &xi) - big_r * dot(&l, &u0).abs()
    };

    let step = 2.0 * std::f64::consts::PI / angle_count as f64;
    let mut best_theta = 0.0;
    let mut best = objective(0.0);
    for j in 1..angle_count {
        let theta = j as f64 * step;
        let v = objective(theta);
        if v > best {
            best = v;
            best_theta = theta;
        }
    }
    let (theta_ref, v_ref) = golden_max(
        objective,
        best_theta - step,
        best_theta + step,
        1e-13,
        120,
    );
    if v_ref > best {
        best = v_ref;
        best_theta = theta_ref;
    }

    let v_tilde = best + params.margin(t0);
    let v_star = v_tilde.max(0.0);
    let (_tm, margin_max) = grid_refine_max(
        |t| params.margin(t),
        t0,
        params.horizon,
        10_001,
    );
    let v = v_star.max(margin_max);

    let threshold = params.margin(t0).max(0.0);
    if v_tilde > threshold {
        let lbar = vec![best_theta.sin(), best_theta.cos()];
        let s = dot(&lbar, &u0);
        let seg = if s < 0.0 {
            [u0[0], u0[1]]
        } else if s > 0.0 {
            [-u0[0], -u0[1]]
        } else {
            [0.0, 0.0]
        };
        let ubar = vec![-params.a * lbar[0] + seg[0], -params.a * lbar[1] + seg[1]];
        let vbar = vec![params.b * lbar[0], params.b * lbar[1]];
        Ok(GameEval {
            v,
            v_star,
            v_tilde,
            lbar: Some(lbar),
            ubar: Some(ubar),
            vbar: Some(vbar),
        })
    } else {
        Ok(GameEval {
            v,
            v_star,
            v_tilde,
            lbar: None,
            ubar: Some(u0.to_vec()),
            vbar: Some(vec![0.0, 0.0]),
        })
    }
}

/// Planar double-integrator pursuit: accelerations against direct position
/// disturbances, distance-to-origin payoff on the positions.
pub fn double_integrator_game(a1: f64, a2: f64, horizon: f64) -> LinearGame {
    let a_mat = DMatrix::from_row_slice(
        4,
        4,
        &[
            0.0, 0.0, 1.0, 0.0, //
            0.0, 0.0, 0.0, 1.0, //
            0.0, 0.0, 0.0, 0.0, //
            0.0, 0.0, 0.0, 0.0,
        ],
    );
    LinearGame {
        n: 4,
        k: 2,
        a: SystemMatrix::Constant(a_mat),
        b1: DMatrix::from_row_slice(4, 2, &[0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0]),
        b2: DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]),
        u1: ConvexSet::ball2(2, a1),
        u2: ConvexSet::ball2(2, a2),
        target: ConvexSet::origin(2),
        horizon,
    }
}

/// Damped pursuit with a box-bounded steering set and a mixed disturbance
/// acting on both the positions (disc around `-omega_pos`) and the
/// velocities (box around `omega_vel`).
#[allow(clippy::too_many_arguments)]
pub fn damped_mixed_game(
    alpha: f64,
    a: f64,
    omega0: [f64; 2],
    b_pos: f64,
    omega_pos: [f64; 2],
    b_vel: f64,
    omega_vel: [f64; 2],
    horizon: f64,
) -> LinearGame {
    let a_mat = DMatrix::from_row_slice(
        4,
        4,
        &[
            0.0, 0.0, 1.0, 0.0, //
            0.0, 0.0, 0.0, 1.0, //
            0.0, 0.0, -alpha, 0.0, //
            0.0, 0.0, 0.0, -alpha,
        ],
    );
    let neg_omega_pos = vec![-omega_pos[0], -omega_pos[1]];
    LinearGame {
        n: 4,
        k: 2,
        a: SystemMatrix::Constant(a_mat),
        b1: DMatrix::from_row_slice(4, 2, &[0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0]),
        b2: DMatrix::identity(4, 4),
        u1: ConvexSet::ball_inf(2, a).translate(omega0.to_vec()),
        u2: ConvexSet::ball2(2, b_pos)
            .translate(neg_omega_pos)
            .product(ConvexSet::ball_inf(2, b_vel).translate(omega_vel.to_vec())),
        target: ConvexSet::origin(2),
        horizon,
    }
}

/// Closed-form correction ("gap") terms added by the single programmed
/// iteration for the two worked game families; the closed-loop value is
/// `max(V*, gap)`.
#[derive(Debug, Clone)]
pub enum GapExample {
    /// Double-integrator pursuit: rate `(a2 - a1 (T-t)/2)(T-t)`.
    DoubleIntegrator { a1: f64, a2: f64 },
    /// Damped mixed-disturbance pursuit:
    /// rate `(T-t) b_pos - integrated_gain(t) (a - b_vel)`, needs
    /// `a >= b_vel`.
    DampedMixed {
        alpha: f64,
        a: f64,
        b_pos: f64,
        b_vel: f64,
    },
}

pub fn closed_form_gap(
    example: &GapExample,
    horizon: f64,
    t0: f64,
    grid_points: usize,
) -> Result<f64> {
    if t0 > horizon {
        return Err(Error::EmptyHorizon { t0, horizon });
    }
    match example {
        GapExample::DoubleIntegrator { a1, a2 } => {
            if *a1 < 0.0 || *a2 < 0.0 {
                return Err(Error::InvalidConfig("radii must be nonnegative".into()));
            }
            let f = |t: f64| {
                let tau = horizon - t;
                (a2 - a1 * tau / 2.0) * tau
            };
            Ok(grid_refine_max(f, t0, horizon, grid_points).1)
        }
        GapExample::DampedMixed {
            alpha,
            a,
            b_pos,
            b_vel,
        } => {
            if !(*alpha > 0.0) || *a < *b_vel || *b_pos < 0.0 || *b_vel < 0.0 {
                return Err(Error::InvalidConfig(
                    "damped mixed gap needs alpha > 0 and a >= b_vel >= 0".into(),
                ));
            }
            let f = |t: f64| {
                let tau = horizon - t;
                let gain_int = tau / alpha - (1.0 - (-alpha * tau).exp()) / (alpha * alpha);
                tau * b_pos - gain_int * (a - b_vel)
            };
            Ok(grid_refine_max(f, t0, horizon, grid_points).1)
        }
    }
}

/// Generic one-iteration correction `max over [t0, T] of (h21 - h3) - r_bar`
/// for caller-supplied rate functions.
pub fn generic_gap<F, G>(h21: F, h3: G, r_bar: f64, horizon: f64, t0: f64, grid_points: usize) -> f64
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    grid_refine_max(|t| h21(t) - h3(t), t0, horizon, grid_points).1 - r_bar
}

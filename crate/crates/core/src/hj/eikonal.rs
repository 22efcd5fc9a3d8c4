//! Value evaluation for the speed-field problems: unit-sphere parametrized
//! characteristic sweeps, Powell search over sphere angles, the horizon-scan
//! rule, the running-cost freeze rule, and the deliberately fallible
//! boundary-value alignment comparator.

use rand::Rng;

use crate::error::{Error, Result};
use crate::fields::{sphere_embed_into, sphere_grid, sphere_random_angles};
use crate::hj::charsys::{bolza_flat_rhs, mayer_flat_rhs, norm, ADJOINT_ZERO_EPS};
use crate::hj::problem::{EikonalProblem, Sense, SigmaCondition};
use crate::hj::ValueResult;
use crate::numerics::ode::{drive, terminal_with_stop, Flow};
use crate::numerics::{golden_max, golden_min, integrate_adaptive, integrate_with_stop,
    minimize_powell, RngSeed, Trajectory};

/// How the initial adjoint is searched.
#[derive(Debug, Clone)]
pub enum AdjointSearch {
    /// Deterministic tensor grid over the sphere angles (reference method);
    /// `counts` has one entry per angle.
    SphereGrid { counts: Vec<usize> },
    /// Powell minimization over the (periodic) angles from `restarts`
    /// randomly drawn starting points.
    Powell {
        restarts: usize,
        tol: f64,
        seed: RngSeed,
    },
}

impl AdjointSearch {
    pub fn grid(counts: Vec<usize>) -> Self {
        AdjointSearch::SphereGrid { counts }
    }

    pub fn powell(restarts: usize, tol: f64, seed: RngSeed) -> Self {
        AdjointSearch::Powell {
            restarts,
            tol,
            seed,
        }
    }
}

/// Where the terminal cost is evaluated along each characteristic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    /// At the horizon only (needs a declared terminal-gradient condition).
    Terminal,
    /// Inner optimum over all stopping times in `[t0, T]`.
    ScanHorizon,
}

/// Golden-section iterations for interior refinement of stopping times.
const SCAN_GOLDEN_ITERS: usize = 48;

/// Per-candidate outcome of one characteristic integration.
#[derive(Debug, Clone, Copy)]
struct CandidateOutcome {
    /// Objective per the evaluation mode.
    objective: f64,
    /// Stopping time realizing the objective (horizon in terminal mode).
    best_time: f64,
    /// Terminal cost at the horizon.
    sigma_terminal: f64,
    /// Alignment of the terminal adjoint with the terminal cost gradient.
    align: f64,
    /// Norm of the terminal cost gradient.
    grad_norm: f64,
}

struct MayerSweep<'a> {
    problem: &'a EikonalProblem,
    t0: f64,
    x0: &'a [f64],
    mode: EvalMode,
}

impl MayerSweep<'_> {
    fn eval_candidate(&self, p0: &[f64]) -> Result<CandidateOutcome> {
        let problem = self.problem;
        let n = problem.n;
        let horizon = problem.horizon;
        let mut y0 = Vec::with_capacity(2 * n);
        y0.extend_from_slice(self.x0);
        y0.extend_from_slice(p0);
        let mut rhs = mayer_flat_rhs(problem);

        let sense = problem.sense;
        let mut best = sense.worst();
        let mut best_time = self.t0;
        let mut scratch = vec![0.0; 2 * n];
        let scan = self.mode == EvalMode::ScanHorizon;
        let mut first = true;
        let time_tol = 1e-7 * (horizon - self.t0);

        let (_te, ye, _fe) = drive(&mut rhs, self.t0, horizon, &y0, &problem.tol, |seg| {
            if scan {
                if first {
                    first = false;
                    let v = problem.sigma.value(&seg.y0[..n]);
                    if sense.improves(v, best) {
                        best = v;
                        best_time = seg.t0;
                    }
                }
                let v_end = problem.sigma.value(&seg.y1[..n]);
                if sense.improves(v_end, best) {
                    best = v_end;
                    best_time = seg.t1;
                }
                let interior = |t: f64, scratch: &mut [f64]| {
                    seg.eval_into(t, scratch);
                    problem.sigma.value(&scratch[..n])
                };
                let (t_in, v_in) = match sense {
                    Sense::Min => golden_min(
                        |t| interior(t, &mut scratch),
                        seg.t0,
                        seg.t1,
                        time_tol,
                        SCAN_GOLDEN_ITERS,
                    ),
                    Sense::Max => golden_max(
                        |t| interior(t, &mut scratch),
                        seg.t0,
                        seg.t1,
                        time_tol,
                        SCAN_GOLDEN_ITERS,
                    ),
                };
                if sense.improves(v_in, best) {
                    best = v_in;
                    best_time = t_in;
                }
            }
            Flow::Continue
        })?;

        let x_t = &ye[..n];
        let p_t = &ye[n..];
        let mut sigma_grad = vec![0.0; n];
        let sigma_terminal = problem.sigma.eval_grad_into(x_t, &mut sigma_grad);
        let grad_norm = norm(&sigma_grad);
        let p_norm = norm(p_t);
        // Directional closeness of the terminal adjoint to the terminal
        // cost gradient (cosine; magnitudes would conflate alignment with
        // gradient size and mis-rank candidates even at smooth points).
        let align = if p_norm >= ADJOINT_ZERO_EPS && grad_norm >= ADJOINT_ZERO_EPS {
            p_t.iter()
                .zip(&sigma_grad)
                .map(|(pi, gi)| pi * gi)
                .sum::<f64>()
                / (p_norm * grad_norm)
        } else {
            f64::NEG_INFINITY
        };
        let (objective, best_time) = if scan {
            (best, best_time)
        } else {
            (sigma_terminal, horizon)
        };
        Ok(CandidateOutcome {
            objective,
            best_time,
            sigma_terminal,
            align,
            grad_norm,
        })
    }
}

/// Unit-vector candidates for a sphere search in `R^m`. The degenerate
/// one-dimensional sphere is the two signs.
pub(crate) fn unit_candidates(m: usize, counts: &[usize]) -> Result<Vec<Vec<f64>>> {
    if m == 1 {
        return Ok(vec![vec![1.0], vec![-1.0]]);
    }
    let grid = sphere_grid(m, counts)?;
    let mut out = Vec::with_capacity(grid.len());
    let mut buf = vec![0.0; m];
    for angles in &grid {
        sphere_embed_into(angles.angles(), &mut buf);
        out.push(buf.clone());
    }
    Ok(out)
}

fn expect_counts(search_counts: &[usize], angle_dims: usize) -> Result<Vec<usize>> {
    if angle_dims == 0 {
        return Ok(vec![]);
    }
    match search_counts.len() {
        0 => Err(Error::InvalidConfig(
            "sphere grid needs per-angle point counts".into(),
        )),
        1 if angle_dims > 1 => {
            // A single count is broadcast to every angle.
            Ok(vec![search_counts[0]; angle_dims])
        }
        l if l == angle_dims => Ok(search_counts.to_vec()),
        l => Err(Error::DimensionMismatch {
            expected: angle_dims,
            got: l,
        }),
    }
}

fn trivial_result(problem: &EikonalProblem, t0: f64, x0: &[f64], adjoint_dim: usize) -> ValueResult {
    let mut flat = x0.to_vec();
    flat.extend(std::iter::repeat_n(0.0, adjoint_dim));
    if problem.is_bolza() {
        flat.push(0.0);
    }
    ValueResult {
        value: problem.sigma.value(x0),
        p0_opt: vec![0.0; adjoint_dim],
        trajectory: Trajectory::single(t0, &flat),
        control_at_t0: vec![0.0; problem.n],
        stop_time: None,
    }
}

fn check_horizon(problem: &EikonalProblem, t0: f64) -> Result<()> {
    if t0 > problem.horizon {
        Err(Error::EmptyHorizon {
            t0,
            horizon: problem.horizon,
        })
    } else {
        Ok(())
    }
}

fn check_state_dim(problem: &EikonalProblem, x0: &[f64]) -> Result<()> {
    if x0.len() != problem.n {
        Err(Error::DimensionMismatch {
            expected: problem.n,
            got: x0.len(),
        })
    } else {
        Ok(())
    }
}

/// Value of the terminal-cost problem at `(t0, x0)`.
///
/// Sphere-grid search is the deterministic reference; Powell over the sphere
/// angles is the fast alternative. `Terminal` mode optimizes the terminal
/// cost at the horizon (plus the zero-adjoint stationary candidate when the
/// declared condition calls for it); `ScanHorizon` takes the inner optimum
/// of the terminal cost over all stopping times along each characteristic.
pub fn value_eikonal(
    problem: &EikonalProblem,
    t0: f64,
    x0: &[f64],
    search: &AdjointSearch,
    mode: EvalMode,
) -> Result<ValueResult> {
    if problem.is_bolza() {
        return Err(Error::InvalidProblem(
            "running-cost problems are evaluated by value_bolza_eikonal".into(),
        ));
    }
    check_horizon(problem, t0)?;
    check_state_dim(problem, x0)?;
    if t0 == problem.horizon {
        return Ok(trivial_result(problem, t0, x0, problem.n));
    }
    if mode == EvalMode::Terminal && problem.sigma_condition.is_none() {
        return Err(Error::InvalidProblem(
            "terminal mode requires a declared terminal-gradient condition".into(),
        ));
    }

    let sweep = MayerSweep {
        problem,
        t0,
        x0,
        mode,
    };
    let n = problem.n;
    let sense = problem.sense;

    let (mut best_p0, mut best): (Vec<f64>, CandidateOutcome) = match search {
        AdjointSearch::SphereGrid { counts } => {
            let counts = expect_counts(counts, n.saturating_sub(1))?;
            let candidates = unit_candidates(n, &counts)?;
            let mut best: Option<(Vec<f64>, CandidateOutcome)> = None;
            for p0 in candidates {
                let outcome = sweep.eval_candidate(&p0)?;
                if best
                    .as_ref()
                    .is_none_or(|(_, b)| sense.improves(outcome.objective, b.objective))
                {
                    best = Some((p0, outcome));
                }
            }
            best.expect("sphere grid is nonempty")
        }
        AdjointSearch::Powell {
            restarts,
            tol,
            seed,
        } => {
            if n == 1 {
                // One-dimensional sphere: just compare both signs.
                let mut best: Option<(Vec<f64>, CandidateOutcome)> = None;
                for p0 in unit_candidates(1, &[])? {
                    let outcome = sweep.eval_candidate(&p0)?;
                    if best
                        .as_ref()
                        .is_none_or(|(_, b)| sense.improves(outcome.objective, b.objective))
                    {
                        best = Some((p0, outcome));
                    }
                }
                best.expect("two sign candidates")
            } else {
                let (p0, _) = powell_sphere_search(
                    n,
                    *restarts,
                    *tol,
                    seed,
                    sense,
                    |p0: &[f64]| sweep.eval_candidate(p0).map(|o| o.objective),
                )?;
                let outcome = sweep.eval_candidate(&p0)?;
                (p0, outcome)
            }
        }
    };

    // Stationary zero-adjoint candidate: the constant trajectory. Under the
    // declared condition it can tie but never strictly beat the sphere, so
    // ties go to it (the freeze selection, reporting zero control).
    let mut stationary_won = false;
    if mode == EvalMode::Terminal
        && problem.sigma_condition == Some(SigmaCondition::CriticalAtOptimum)
    {
        let v0 = problem.sigma.value(x0);
        if !sense.improves(best.objective, v0) {
            stationary_won = true;
            best_p0 = vec![0.0; n];
            best.objective = v0;
            best.best_time = problem.horizon;
            best.sigma_terminal = v0;
        }
    }

    let trajectory = if stationary_won {
        constant_trajectory(problem, t0, x0)
    } else {
        let mut y0 = x0.to_vec();
        y0.extend_from_slice(&best_p0);
        integrate_adaptive(mayer_flat_rhs(problem), t0, problem.horizon, &y0, &problem.tol)?
    };
    let control = if stationary_won {
        vec![0.0; n]
    } else {
        normalized(&best_p0)
    };
    Ok(ValueResult {
        value: best.objective,
        p0_opt: best_p0,
        trajectory,
        control_at_t0: control,
        stop_time: (mode == EvalMode::ScanHorizon).then_some(best.best_time),
    })
}

fn constant_trajectory(problem: &EikonalProblem, t0: f64, x0: &[f64]) -> Trajectory {
    let mut flat = x0.to_vec();
    flat.extend(std::iter::repeat_n(0.0, problem.n));
    if problem.is_bolza() {
        flat.push(0.0);
    }
    let mut traj = Trajectory::with_capacity(flat.len(), 2);
    let zeros = vec![0.0; flat.len()];
    traj.push(t0, &flat, &zeros);
    traj.push(problem.horizon, &flat, &zeros);
    traj
}

fn normalized(p: &[f64]) -> Vec<f64> {
    let pn = norm(p);
    if pn < ADJOINT_ZERO_EPS {
        vec![0.0; p.len()]
    } else {
        p.iter().map(|v| v / pn).collect()
    }
}

/// Powell minimization/maximization over sphere angles in `R^m` from the
/// given angle starting points. Returns the winning angles, the embedded
/// unit vector, and the objective value at it.
fn powell_sphere_from<F>(
    m: usize,
    starts: &[Vec<f64>],
    tol: f64,
    sense: Sense,
    mut objective: F,
) -> Result<(Vec<f64>, Vec<f64>, f64)>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if starts.is_empty() {
        return Err(Error::InvalidConfig(
            "Powell search needs at least one starting point".into(),
        ));
    }
    let mut embed_buf = vec![0.0; m];
    let mut first_error: Option<Error> = None;
    let sign = match sense {
        Sense::Min => 1.0,
        Sense::Max => -1.0,
    };
    let result = minimize_powell(
        |angles: &[f64]| {
            sphere_embed_into(angles, &mut embed_buf);
            match objective(&embed_buf) {
                Ok(v) => sign * v,
                Err(e) => {
                    if first_error.is_none() {
                        first_error = Some(e);
                    }
                    f64::INFINITY
                }
            }
        },
        &starts[0],
        tol,
        &starts[1..],
    );
    if let Some(e) = first_error {
        return Err(e);
    }
    sphere_embed_into(&result.x, &mut embed_buf);
    Ok((result.x, embed_buf, sign * result.value))
}

fn powell_sphere_search<F>(
    m: usize,
    restarts: usize,
    tol: f64,
    seed: &RngSeed,
    sense: Sense,
    objective: F,
) -> Result<(Vec<f64>, f64)>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if restarts == 0 {
        return Err(Error::InvalidConfig(
            "Powell search needs at least one starting point".into(),
        ));
    }
    let mut rng = seed.rng();
    let starts: Vec<Vec<f64>> = (0..restarts)
        .map(|_| sphere_random_angles(m, &mut rng).angles().to_vec())
        .collect();
    let (_angles, point, value) = powell_sphere_from(m, &starts, tol, sense, objective)?;
    Ok((point, value))
}

/// Value of the running-cost problem at `(t0, x0)` through the extended
/// unit sphere of initial adjoints `(p0, cost_adjoint)`.
///
/// When a critical point is declared on the problem, each integration halts
/// on the running-cost trigger and the tail cost accrues analytically at the
/// frozen state.
pub fn value_bolza_eikonal(
    problem: &EikonalProblem,
    t0: f64,
    x0: &[f64],
    search: &AdjointSearch,
) -> Result<ValueResult> {
    let Some(eta) = problem.eta.clone() else {
        return Err(Error::InvalidProblem(
            "value_bolza_eikonal needs a running cost; use value_eikonal".into(),
        ));
    };
    check_horizon(problem, t0)?;
    check_state_dim(problem, x0)?;
    if t0 == problem.horizon {
        return Ok(trivial_result(problem, t0, x0, problem.n + 1));
    }

    let n = problem.n;
    let m = n + 1;
    let horizon = problem.horizon;
    let sense = problem.sense;
    let critical = problem.critical_spec().map(|(p, tol)| (p.to_vec(), tol));
    let eta_floor = critical.as_ref().map(|(p, _)| eta.value(p));

    // Objective for one extended adjoint candidate (p0, cost_adjoint).
    let eval = |ext: &[f64]| -> Result<(f64, Option<f64>)> {
        let p0 = &ext[..n];
        let cost_adjoint = ext[n];
        let mut y0 = Vec::with_capacity(2 * n + 1);
        y0.extend_from_slice(x0);
        y0.extend_from_slice(p0);
        y0.push(0.0);
        let mut rhs = bolza_flat_rhs(problem, cost_adjoint);
        if let (Some((_, trig_tol)), Some(floor)) = (critical.as_ref(), eta_floor) {
            let event =
                |_t: f64, y: &[f64]| eta.value(&y[..n]) - floor - trig_tol;
            // Trigger transits are brief; scan any step that dips within a
            // few orders of magnitude of the trigger level.
            let dip = 2e3 * trig_tol;
            let (te, ye, stop) =
                terminal_with_stop(&mut rhs, &event, t0, horizon, &y0, &problem.tol, dip)?;
            let x_end = &ye[..n];
            let accumulated = ye[2 * n];
            let value = if stop.is_some() {
                problem.sigma.value(x_end) + accumulated + eta.value(x_end) * (horizon - te)
            } else {
                problem.sigma.value(x_end) + accumulated
            };
            Ok((value, stop))
        } else {
            let (_te, ye, _fe) =
                drive(&mut rhs, t0, horizon, &y0, &problem.tol, |_seg| Flow::Continue)?;
            Ok((problem.sigma.value(&ye[..n]) + ye[2 * n], None))
        }
    };

    let (mut best_ext, mut best_value, mut best_stop) = match search {
        AdjointSearch::SphereGrid { counts } => {
            let counts = expect_counts(counts, m - 1)?;
            let candidates = unit_candidates(m, &counts)?;
            let mut best: Option<(Vec<f64>, f64, Option<f64>)> = None;
            for ext in candidates {
                // The zero cost-adjoint ring is excluded from the extended
                // sphere.
                if ext[n].abs() < ADJOINT_ZERO_EPS {
                    continue;
                }
                let (value, stop) = eval(&ext)?;
                if best
                    .as_ref()
                    .is_none_or(|(_, b, _)| sense.improves(value, *b))
                {
                    best = Some((ext, value, stop));
                }
            }
            best.ok_or_else(|| {
                Error::InvalidConfig("extended sphere grid left no usable candidates".into())
            })?
        }
        AdjointSearch::Powell {
            restarts,
            tol,
            seed,
        } => {
            let (ext, _) = powell_sphere_search(m, *restarts, *tol, seed, sense, |ext: &[f64]| {
                eval(ext).map(|(v, _)| v)
            })?;
            let (value, stop) = eval(&ext)?;
            (ext, value, stop)
        }
    };

    // Freeze-type optima live in narrow basins: each trajectory must pass
    // through the small critical trigger set, suboptimal entries form
    // separate valleys, and the cost landscape is nearly flat outside.
    // Polish in three moves: evaluate a scanned family of aimed candidates
    // directly, steer toward the trigger set when nothing stopped at all
    // (the closest approach is smooth in the adjoint), and re-optimize the
    // cost from whatever leads.
    if let (Some((crit_point, trig_tol)), Some(floor)) = (critical.as_ref(), eta_floor) {
        if m >= 2 {
            // Nearest running-cost approach along a candidate's trajectory.
            // Coarse per-segment sampling finds the dipping segments; only
            // the best two get golden refinement (on stored copies, after
            // the integration).
            let closest_approach = |ext: &[f64]| -> Result<f64> {
                let p0 = &ext[..n];
                let cost_adjoint = ext[n];
                let mut y0 = Vec::with_capacity(2 * n + 1);
                y0.extend_from_slice(x0);
                y0.extend_from_slice(p0);
                y0.push(0.0);
                let mut rhs = bolza_flat_rhs(problem, cost_adjoint);
                let mut nearest = f64::INFINITY;
                let mut scratch = vec![0.0; 2 * n + 1];
                type SegCopy = (f64, Vec<f64>, Vec<f64>, f64, Vec<f64>, Vec<f64>);
                let mut dips: [Option<(f64, SegCopy)>; 2] = [None, None];
                let time_tol = 1e-9 * (horizon - t0);
                drive(&mut rhs, t0, horizon, &y0, &problem.tol, |seg| {
                    let mut low = eta.value(&seg.y0[..n]).min(eta.value(&seg.y1[..n]));
                    for j in 1..=3 {
                        let ts = seg.t0 + (seg.t1 - seg.t0) * j as f64 / 4.0;
                        seg.eval_into(ts, &mut scratch);
                        low = low.min(eta.value(&scratch[..n]));
                    }
                    nearest = nearest.min(low);
                    let copy = || {
                        (
                            seg.t0,
                            seg.y0.to_vec(),
                            seg.f0.to_vec(),
                            seg.t1,
                            seg.y1.to_vec(),
                            seg.f1.to_vec(),
                        )
                    };
                    if dips[0].as_ref().is_none_or(|(b, _)| low < *b) {
                        dips.swap(0, 1);
                        dips[0] = Some((low, copy()));
                    } else if dips[1].as_ref().is_none_or(|(b, _)| low < *b) {
                        dips[1] = Some((low, copy()));
                    }
                    Flow::Continue
                })?;
                for dip in dips.iter().flatten() {
                    let (t0s, y0s, f0s, t1s, y1s, f1s) = &dip.1;
                    let (_t_in, v_in) = golden_min(
                        |t| {
                            crate::numerics::hermite_segment_eval(
                                *t0s, y0s, f0s, *t1s, y1s, f1s, t, &mut scratch,
                            );
                            eta.value(&scratch[..n])
                        },
                        *t0s,
                        *t1s,
                        time_tol,
                        SCAN_GOLDEN_ITERS,
                    );
                    nearest = nearest.min(v_in);
                }
                Ok(nearest - floor)
            };

            // Scanned family: the incumbent's state-adjoint direction and
            // the straight line to the declared critical point, over a
            // range of state-vs-cost adjoint balances. Along an optimal
            // characteristic the state adjoint shrinks toward zero while
            // the cost adjoint stays constant, so the right balance ranges
            // over the whole unit interval.
            const AIM_BALANCES: [f64; 9] = [0.02, 0.05, 0.1, 0.2, 0.35, 0.5, 0.65, 0.8, 0.95];
            let mut directions: Vec<Vec<f64>> = Vec::new();
            let p_part = &best_ext[..n];
            let p_norm = norm(p_part);
            if p_norm > ADJOINT_ZERO_EPS {
                directions.push(p_part.iter().map(|v| v / p_norm).collect());
            }
            let to_critical: Vec<f64> = x0.iter().zip(crit_point).map(|(a, c)| a - c).collect();
            let dist = norm(&to_critical);
            if dist > ADJOINT_ZERO_EPS {
                directions.push(match sense {
                    // Negative speed moves the state against the adjoint.
                    Sense::Min => to_critical.iter().map(|v| v / dist).collect(),
                    Sense::Max => to_critical.iter().map(|v| -v / dist).collect(),
                });
            }
            // The scan candidates compete directly; while the plain winner
            // has not stopped they also feed the aiming stage (tracking the
            // nearest miss among non-stopping ones).
            let winner_missed = best_stop.is_none();
            let plain_winner = best_ext.clone();
            let mut scan_nearest: Option<(f64, Vec<f64>)> = None;
            for direction in &directions {
                for balance in AIM_BALANCES {
                    let mut ext: Vec<f64> = direction.iter().map(|v| v * balance).collect();
                    ext.push((1.0 - balance * balance).max(0.0).sqrt());
                    let (value, stop) = eval(&ext)?;
                    if winner_missed && stop.is_none() {
                        let miss = closest_approach(&ext)?;
                        if scan_nearest.as_ref().is_none_or(|(b, _)| miss < *b) {
                            scan_nearest = Some((miss, ext.clone()));
                        }
                    }
                    if sense.improves(value, best_value) {
                        best_ext = ext;
                        best_value = value;
                        best_stop = stop;
                    }
                }
            }

            // Aim stage whenever the plain winner missed: minimize the miss
            // amount from the nearest scan candidate and from the plain
            // winner itself. Different starts reach different entry
            // valleys, so each qualifying entry is kept for refinement.
            let mut aim_entries: Vec<Vec<f64>> = Vec::new();
            if winner_missed {
                let mut aim_starts = Vec::new();
                if let Some((_, ext)) = &scan_nearest {
                    aim_starts.push(crate::fields::sphere_angles_of(ext));
                }
                aim_starts.push(crate::fields::sphere_angles_of(&plain_winner));
                for start in aim_starts {
                    let (_aim_angles, aim_ext, aim_miss) =
                        powell_sphere_from(m, &[start], 1e-10, Sense::Min, &closest_approach)?;
                    if aim_miss > *trig_tol {
                        continue;
                    }
                    let (value, stop) = eval(&aim_ext)?;
                    if sense.improves(value, best_value) {
                        best_ext = aim_ext.clone();
                        best_value = value;
                        best_stop = stop;
                    }
                    aim_entries.push(aim_ext);
                }
            }

            // Cost refinement from any new leader and from each distinct
            // aim entry. Refining an unimproved plain winner would just
            // repeat its own converged search.
            let cost_tol = match search {
                AdjointSearch::Powell { tol, .. } => *tol,
                AdjointSearch::SphereGrid { .. } => 1e-7,
            };
            let mut refine_starts = Vec::new();
            if best_ext != plain_winner {
                refine_starts.push(best_ext.clone());
            }
            for entry in aim_entries {
                if !refine_starts.contains(&entry) {
                    refine_starts.push(entry);
                }
            }
            for start in refine_starts {
                let (_a, refined_ext, _v) = powell_sphere_from(
                    m,
                    &[crate::fields::sphere_angles_of(&start)],
                    cost_tol,
                    sense,
                    |ext: &[f64]| eval(ext).map(|(v, _)| v),
                )?;
                let (value, stop) = eval(&refined_ext)?;
                if sense.improves(value, best_value) {
                    best_ext = refined_ext;
                    best_value = value;
                    best_stop = stop;
                }
            }
        }
    }

    // Re-run the winner with full recording.
    let p0 = &best_ext[..n];
    let cost_adjoint = best_ext[n];
    let mut y0 = Vec::with_capacity(2 * n + 1);
    y0.extend_from_slice(x0);
    y0.extend_from_slice(p0);
    y0.push(0.0);
    let (trajectory, stop_time) = if let (Some((_, trig_tol)), Some(floor)) =
        (critical.as_ref(), eta_floor)
    {
        let event = |_t: f64, y: &[f64]| eta.value(&y[..n]) - floor - trig_tol;
        integrate_with_stop(
            bolza_flat_rhs(problem, cost_adjoint),
            event,
            t0,
            horizon,
            &y0,
            &problem.tol,
        )?
    } else {
        (
            integrate_adaptive(
                bolza_flat_rhs(problem, cost_adjoint),
                t0,
                horizon,
                &y0,
                &problem.tol,
            )?,
            None,
        )
    };
    debug_assert_eq!(stop_time.is_some(), best_stop.is_some());

    let control = if stop_time.is_some_and(|ts| ts <= t0 + 1e-14 * (1.0 + t0.abs())) {
        vec![0.0; n]
    } else {
        normalized(p0)
    };
    Ok(ValueResult {
        value: best_value,
        p0_opt: best_ext,
        trajectory,
        control_at_t0: control,
        stop_time,
    })
}

/// Feedback control at `(t0, x0)`: the normalized optimal initial adjoint
/// (zero when the stationary or frozen candidate wins), extracted from the
/// integrated optimal characteristic rather than from derivatives of the
/// value function.
///
pub fn feedback_control(
    problem: &EikonalProblem,
    t0: f64,
    x0: &[f64],
    search: &AdjointSearch,
    mode: EvalMode,
) -> Result<Vec<f64>> {
    let result = if problem.is_bolza() {
        value_bolza_eikonal(problem, t0, x0, search)?
    } else {
        value_eikonal(problem, t0, x0, search, mode)?
    };
    Ok(result.control_at_t0)
}

/// Pontryagin-style comparator: among sphere-grid initial adjoints, pick the
/// characteristic whose terminal adjoint best aligns with the terminal cost
/// gradient and report the terminal cost along it. Kept deliberately
/// fallible; see [`mayer_value_and_alignment`] for the paired evaluation.
pub fn value_bvp_align(
    problem: &EikonalProblem,
    t0: f64,
    x0: &[f64],
    counts: &[usize],
) -> Result<ValueResult> {
    let (_, bvp) = mayer_value_and_alignment(problem, t0, x0, counts, EvalMode::Terminal)?;
    Ok(bvp)
}

/// One sphere-grid sweep yielding both the value (per `mode`) and the
/// alignment-comparator result, sharing every integrated characteristic.
pub fn mayer_value_and_alignment(
    problem: &EikonalProblem,
    t0: f64,
    x0: &[f64],
    counts: &[usize],
    mode: EvalMode,
) -> Result<(ValueResult, ValueResult)> {
    if problem.is_bolza() {
        return Err(Error::InvalidProblem(
            "the alignment comparator handles terminal-cost problems only".into(),
        ));
    }
    check_horizon(problem, t0)?;
    check_state_dim(problem, x0)?;
    if t0 == problem.horizon {
        let r = trivial_result(problem, t0, x0, problem.n);
        return Ok((r.clone(), r));
    }
    if mode == EvalMode::Terminal && problem.sigma_condition.is_none() {
        return Err(Error::InvalidProblem(
            "terminal mode requires a declared terminal-gradient condition".into(),
        ));
    }

    let n = problem.n;
    let sense = problem.sense;
    let counts = expect_counts(counts, n.saturating_sub(1))?;
    let candidates = unit_candidates(n, &counts)?;
    let sweep = MayerSweep {
        problem,
        t0,
        x0,
        mode,
    };

    let mut best_val: Option<(usize, CandidateOutcome)> = None;
    let mut best_align: Option<(usize, CandidateOutcome)> = None;
    let mut max_grad: f64 = 0.0;
    for (idx, p0) in candidates.iter().enumerate() {
        let outcome = sweep.eval_candidate(p0)?;
        max_grad = max_grad.max(outcome.grad_norm);
        if best_val
            .as_ref()
            .is_none_or(|(_, b)| sense.improves(outcome.objective, b.objective))
        {
            best_val = Some((idx, outcome));
        }
        if best_align
            .as_ref()
            .is_none_or(|(_, b)| outcome.align > b.align)
        {
            best_align = Some((idx, outcome));
        }
    }
    let (mut vi, mut vo) = best_val.expect("sphere grid nonempty");
    let (ai, ao) = best_align.expect("sphere grid nonempty");
    if max_grad < 1e-12 {
        return Err(Error::DegenerateAlignment);
    }

    // Stationary candidate for the value side; ties go to it.
    let mut stationary_won = false;
    if mode == EvalMode::Terminal
        && problem.sigma_condition == Some(SigmaCondition::CriticalAtOptimum)
    {
        let v0 = problem.sigma.value(x0);
        if !sense.improves(vo.objective, v0) {
            stationary_won = true;
            vo.objective = v0;
            vo.best_time = problem.horizon;
            vi = usize::MAX;
        }
    }

    let rebuild = |p0: &[f64]| -> Result<Trajectory> {
        let mut y0 = x0.to_vec();
        y0.extend_from_slice(p0);
        integrate_adaptive(mayer_flat_rhs(problem), t0, problem.horizon, &y0, &problem.tol)
    };
    let value_result = if stationary_won {
        ValueResult {
            value: vo.objective,
            p0_opt: vec![0.0; n],
            trajectory: constant_trajectory(problem, t0, x0),
            control_at_t0: vec![0.0; n],
            stop_time: (mode == EvalMode::ScanHorizon).then_some(vo.best_time),
        }
    } else {
        let p0 = &candidates[vi];
        ValueResult {
            value: vo.objective,
            p0_opt: p0.clone(),
            trajectory: rebuild(p0)?,
            control_at_t0: normalized(p0),
            stop_time: (mode == EvalMode::ScanHorizon).then_some(vo.best_time),
        }
    };
    let p0a = &candidates[ai];
    let align_result = ValueResult {
        value: ao.sigma_terminal,
        p0_opt: p0a.clone(),
        trajectory: rebuild(p0a)?,
        control_at_t0: normalized(p0a),
        stop_time: None,
    };
    Ok((value_result, align_result))
}

/// Draws `count` random angle starting points for an `m`-dimensional sphere
/// search, uniform per angle.
pub fn random_angle_starts(m: usize, count: usize, seed: &RngSeed) -> Vec<Vec<f64>> {
    let mut rng = seed.rng();
    (0..count)
        .map(|_| sphere_random_angles(m, &mut rng).angles().to_vec())
        .collect()
}

/// Uniform random point in the box `[lo, hi]^n` (test and sampling helper).
pub fn random_box_point<R: Rng>(n: usize, lo: f64, hi: f64, rng: &mut R) -> Vec<f64> {
    (0..n)
        .map(|_| lo + (hi - lo) * rng.random::<f64>())
        .collect()
}

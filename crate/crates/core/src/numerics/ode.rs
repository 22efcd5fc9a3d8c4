//! Adaptive fifth-order Runge-Kutta integration (Cash-Karp embedded pair)
//! with cubic Hermite dense output and scalar event location.

use crate::error::{Error, Result};
use crate::numerics::traj::{hermite_eval, ToleranceSpec, Trajectory};

// Cash-Karp 4(5) tableau.
const A2: f64 = 0.2;
const A3: f64 = 0.3;
const A4: f64 = 0.6;
const A5: f64 = 1.0;
const A6: f64 = 0.875;
const B21: f64 = 0.2;
const B31: f64 = 3.0 / 40.0;
const B32: f64 = 9.0 / 40.0;
const B41: f64 = 0.3;
const B42: f64 = -0.9;
const B43: f64 = 1.2;
const B51: f64 = -11.0 / 54.0;
const B52: f64 = 2.5;
const B53: f64 = -70.0 / 27.0;
const B54: f64 = 35.0 / 27.0;
const B61: f64 = 1631.0 / 55296.0;
const B62: f64 = 175.0 / 512.0;
const B63: f64 = 575.0 / 13824.0;
const B64: f64 = 44275.0 / 110592.0;
const B65: f64 = 253.0 / 4096.0;
const C1: f64 = 37.0 / 378.0;
const C3: f64 = 250.0 / 621.0;
const C4: f64 = 125.0 / 594.0;
const C6: f64 = 512.0 / 1771.0;
// Fifth-order minus embedded fourth-order weights.
const DC1: f64 = C1 - 2825.0 / 27648.0;
const DC3: f64 = C3 - 18575.0 / 48384.0;
const DC4: f64 = C4 - 13525.0 / 55296.0;
const DC5: f64 = -277.0 / 14336.0;
const DC6: f64 = C6 - 0.25;

const SAFETY: f64 = 0.9;
const MAX_GROW: f64 = 5.0;
const MAX_SHRINK: f64 = 0.1;

/// One accepted step, as seen by a driver observer. `eval_into` interpolates
/// anywhere inside `[t0, t1]` with the same cubic used for dense output.
pub(crate) struct Segment<'a> {
    pub t0: f64,
    pub y0: &'a [f64],
    pub f0: &'a [f64],
    pub t1: f64,
    pub y1: &'a [f64],
    pub f1: &'a [f64],
}

impl Segment<'_> {
    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        hermite_eval(self.t0, self.y0, self.f0, self.t1, self.y1, self.f1, t, out);
    }
}

/// Observer verdict after each accepted step.
pub(crate) enum Flow {
    Continue,
    /// Terminate the integration at the given interior time.
    StopAt(f64),
}

/// Core adaptive driver. Calls `observer` once per accepted step; on
/// `Flow::StopAt(ts)` the final state is interpolated at `ts` and returned.
/// Returns the final `(t, y, dy)`.
pub(crate) fn drive<F, O>(
    mut rhs: F,
    t0: f64,
    t1: f64,
    y0: &[f64],
    tol: &ToleranceSpec,
    mut observer: O,
) -> Result<(f64, Vec<f64>, Vec<f64>)>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    O: FnMut(&Segment<'_>) -> Flow,
{
    tol.validate()?;
    if !(t0 < t1) {
        return Err(Error::InvalidConfig(
            "integration span must satisfy t0 < t1".into(),
        ));
    }
    let dim = y0.len();
    let mut y = y0.to_vec();
    let mut f = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut k5 = vec![0.0; dim];
    let mut k6 = vec![0.0; dim];
    let mut ytmp = vec![0.0; dim];
    let mut ynew = vec![0.0; dim];
    let mut yerr = vec![0.0; dim];
    let mut fnew = vec![0.0; dim];

    let mut eval = |t: f64, y: &[f64], out: &mut [f64]| -> Result<()> {
        rhs(t, y, out);
        if out.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::DynamicsFailed { t })
        }
    };

    eval(t0, &y, &mut f)?;
    let mut t = t0;
    let mut h = tol.initial_step.min(t1 - t0);
    let mut attempts = 0usize;
    let span_eps = (t1 - t0).abs() * 1e-14;

    while t < t1 - span_eps {
        if attempts >= tol.max_steps {
            return Err(Error::BudgetExhausted { steps: attempts, t });
        }
        attempts += 1;
        h = h.min(t1 - t);

        // Six stages of the embedded pair.
        for i in 0..dim {
            ytmp[i] = y[i] + h * B21 * f[i];
        }
        eval(t + A2 * h, &ytmp, &mut k2)?;
        for i in 0..dim {
            ytmp[i] = y[i] + h * (B31 * f[i] + B32 * k2[i]);
        }
        eval(t + A3 * h, &ytmp, &mut k3)?;
        for i in 0..dim {
            ytmp[i] = y[i] + h * (B41 * f[i] + B42 * k2[i] + B43 * k3[i]);
        }
        eval(t + A4 * h, &ytmp, &mut k4)?;
        for i in 0..dim {
            ytmp[i] = y[i] + h * (B51 * f[i] + B52 * k2[i] + B53 * k3[i] + B54 * k4[i]);
        }
        eval(t + A5 * h, &ytmp, &mut k5)?;
        for i in 0..dim {
            ytmp[i] =
                y[i] + h * (B61 * f[i] + B62 * k2[i] + B63 * k3[i] + B64 * k4[i] + B65 * k5[i]);
        }
        eval(t + A6 * h, &ytmp, &mut k6)?;
        for i in 0..dim {
            ynew[i] = y[i] + h * (C1 * f[i] + C3 * k3[i] + C4 * k4[i] + C6 * k6[i]);
            yerr[i] = h * (DC1 * f[i] + DC3 * k3[i] + DC4 * k4[i] + DC5 * k5[i] + DC6 * k6[i]);
        }

        // RMS error normalized against mixed absolute/relative scale.
        let mut err_sq = 0.0;
        for i in 0..dim {
            let scale = tol.abs_tol + tol.rel_tol * y[i].abs().max(ynew[i].abs());
            let e = yerr[i] / scale;
            err_sq += e * e;
        }
        let err = (err_sq / dim as f64).sqrt();

        if err <= 1.0 {
            let t_next = if t + h >= t1 - span_eps { t1 } else { t + h };
            eval(t_next, &ynew, &mut fnew)?;
            let seg = Segment {
                t0: t,
                y0: &y,
                f0: &f,
                t1: t_next,
                y1: &ynew,
                f1: &fnew,
            };
            if let Flow::StopAt(ts) = observer(&seg) {
                let mut ystop = vec![0.0; dim];
                seg.eval_into(ts, &mut ystop);
                eval(ts, &ystop, &mut fnew)?;
                return Ok((ts, ystop, fnew));
            }
            t = t_next;
            std::mem::swap(&mut y, &mut ynew);
            std::mem::swap(&mut f, &mut fnew);
            let factor = if err == 0.0 {
                MAX_GROW
            } else {
                (SAFETY * err.powf(-0.2)).clamp(MAX_SHRINK, MAX_GROW)
            };
            h *= factor;
        } else {
            h *= (SAFETY * err.powf(-0.2)).clamp(MAX_SHRINK, 1.0);
            let floor = (t.abs() + 1.0) * 1e-15;
            if h < floor {
                return Err(Error::BudgetExhausted { steps: attempts, t });
            }
        }
    }
    Ok((t1, y, f))
}

/// Integrates `dy/dt = rhs(t, y)` over `[t0, t1]` with embedded-pair error
/// control, recording every accepted step for dense evaluation.
pub fn integrate_adaptive<F>(
    rhs: F,
    t0: f64,
    t1: f64,
    y0: &[f64],
    tol: &ToleranceSpec,
) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let mut traj = Trajectory::with_capacity(y0.len(), 64);
    let mut started = false;
    let (te, ye, fe) = drive(rhs, t0, t1, y0, tol, |seg| {
        if !started {
            traj.push(seg.t0, seg.y0, seg.f0);
            started = true;
        }
        traj.push(seg.t1, seg.y1, seg.f1);
        Flow::Continue
    })?;
    if !started {
        traj.push(te, &ye, &fe);
    }
    Ok(traj)
}

/// Number of interior samples per accepted step when scanning for an event
/// sign change (the step endpoints are always checked).
const EVENT_SAMPLES: usize = 4;

/// Time-window width at which event bisection stops.
const EVENT_TIME_TOL: f64 = 1e-10;

/// Golden-section iterations for the interior dip scan.
const EVENT_DIP_ITERS: usize = 32;

/// Integrates until `t1` or until the scalar event function first satisfies
/// `event(t, y) <= 0` on an accepted step; the trigger time is then refined
/// by bisection on the dense output. Returns the (possibly truncated)
/// trajectory and the trigger time, if any.
///
/// If the event already holds at `t0` the result is a single-point
/// trajectory with stop time `t0`.
pub fn integrate_with_stop<F, G>(
    rhs: F,
    event: G,
    t0: f64,
    t1: f64,
    y0: &[f64],
    tol: &ToleranceSpec,
) -> Result<(Trajectory, Option<f64>)>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    G: Fn(f64, &[f64]) -> f64,
{
    if event(t0, y0) <= 0.0 {
        return Ok((Trajectory::single(t0, y0), Some(t0)));
    }
    let dim = y0.len();
    let mut traj = Trajectory::with_capacity(dim, 64);
    let mut started = false;
    let mut stop_time = None;
    let mut scratch = vec![0.0; dim];
    let (te, ye, fe) = drive(rhs, t0, t1, y0, tol, |seg| {
        if !started {
            traj.push(seg.t0, seg.y0, seg.f0);
            started = true;
        }
        match locate_event(&event, seg, tol.abs_tol, &mut scratch, f64::INFINITY) {
            Some(ts) => {
                stop_time = Some(ts);
                Flow::StopAt(ts)
            }
            None => {
                traj.push(seg.t1, seg.y1, seg.f1);
                Flow::Continue
            }
        }
    })?;
    if let Some(ts) = stop_time {
        if !started || ts > traj.end_time() {
            traj.push(ts, &ye, &fe);
        }
        debug_assert!((te - ts).abs() <= EVENT_TIME_TOL + te.abs() * 1e-12);
    } else if !started {
        traj.push(te, &ye, &fe);
    }
    Ok((traj, stop_time))
}

/// Like [`integrate_with_stop`] but without recording the path; returns the
/// final time, final state, and trigger time if the event fired.
/// `dip_threshold` controls when a sampled-positive step is additionally
/// golden-scanned for an interior dip of the event function (pass infinity
/// to always scan).
pub(crate) fn terminal_with_stop<F, G>(
    rhs: F,
    event: &G,
    t0: f64,
    t1: f64,
    y0: &[f64],
    tol: &ToleranceSpec,
    dip_threshold: f64,
) -> Result<(f64, Vec<f64>, Option<f64>)>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    G: Fn(f64, &[f64]) -> f64,
{
    if event(t0, y0) <= 0.0 {
        return Ok((t0, y0.to_vec(), Some(t0)));
    }
    let mut scratch = vec![0.0; y0.len()];
    let mut stop_time = None;
    let (te, ye, _fe) = drive(rhs, t0, t1, y0, tol, |seg| {
        match locate_event(event, seg, tol.abs_tol, &mut scratch, dip_threshold) {
            Some(ts) => {
                stop_time = Some(ts);
                Flow::StopAt(ts)
            }
            None => Flow::Continue,
        }
    })?;
    Ok((te, ye, stop_time))
}

/// Scans one accepted step for the first sign change of `event` and refines
/// it by bisection to `EVENT_TIME_TOL` in time or `value_tol` in the event
/// quantity, whichever comes first.
///
/// A brief interior crossing can slip between the fixed samples when the
/// step is long; if every sample stays positive but dips below
/// `dip_threshold`, the interior minimum of the interpolated event function
/// is located by golden section and checked for a sign change.
pub(crate) fn locate_event<G>(
    event: &G,
    seg: &Segment<'_>,
    value_tol: f64,
    scratch: &mut [f64],
    dip_threshold: f64,
) -> Option<f64>
where
    G: Fn(f64, &[f64]) -> f64,
{
    let mut t_lo = seg.t0;
    let mut t_hi = None;
    let mut min_sampled = f64::INFINITY;
    for j in 1..=EVENT_SAMPLES {
        let frac = j as f64 / EVENT_SAMPLES as f64;
        let ts = seg.t0 + frac * (seg.t1 - seg.t0);
        let g = if j == EVENT_SAMPLES {
            event(seg.t1, seg.y1)
        } else {
            seg.eval_into(ts, scratch);
            event(ts, scratch)
        };
        if g <= 0.0 {
            t_hi = Some(ts);
            break;
        }
        min_sampled = min_sampled.min(g);
        t_lo = ts;
    }
    if t_hi.is_none() && min_sampled <= dip_threshold {
        let (t_dip, g_dip) = crate::numerics::optim::golden_min(
            |t| {
                seg.eval_into(t, scratch);
                event(t, scratch)
            },
            seg.t0,
            seg.t1,
            EVENT_TIME_TOL,
            EVENT_DIP_ITERS,
        );
        if g_dip <= 0.0 {
            t_hi = Some(t_dip);
            t_lo = seg.t0;
        }
    }
    let mut hi = t_hi?;
    let mut lo = t_lo;
    while hi - lo > EVENT_TIME_TOL {
        let mid = 0.5 * (lo + hi);
        seg.eval_into(mid, scratch);
        let g = event(mid, scratch);
        if g <= 0.0 {
            hi = mid;
            if g.abs() <= value_tol * 1e-3 {
                break;
            }
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> ToleranceSpec {
        ToleranceSpec::default()
    }

    #[test]
    fn constant_rhs_exact() {
        let tr = integrate_adaptive(|_t, _y, dy| dy[0] = 0.0, 0.0, 1.0, &[3.7], &tol()).unwrap();
        assert_eq!(tr.end_state()[0], 3.7);
        assert_eq!(tr.end_time(), 1.0);
    }

    #[test]
    fn exponential_decay_to_1e6() {
        let tr = integrate_adaptive(|_t, y, dy| dy[0] = -y[0], 0.0, 1.0, &[1.0], &tol()).unwrap();
        assert!((tr.end_state()[0] - (-1.0f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn harmonic_energy_drift_small() {
        let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -y[0];
        };
        let tr = integrate_adaptive(
            rhs,
            0.0,
            2.0 * std::f64::consts::PI,
            &[1.0, 0.0],
            &ToleranceSpec {
                abs_tol: 1e-8,
                rel_tol: 1e-8,
                ..tol()
            },
        )
        .unwrap();
        let e = tr.end_state()[0].powi(2) + tr.end_state()[1].powi(2);
        assert!((e - 1.0).abs() < 1e-5);
    }

    #[test]
    fn tighter_tolerance_reduces_error() {
        // A large initial step keeps the controller error-limited rather
        // than limited by the step-growth cap.
        let run = |atol: f64| {
            let t = ToleranceSpec {
                abs_tol: atol,
                rel_tol: atol,
                initial_step: 0.1,
                ..tol()
            };
            let tr = integrate_adaptive(|_t, y, dy| dy[0] = -y[0], 0.0, 1.0, &[1.0], &t).unwrap();
            (tr.end_state()[0] - (-1.0f64).exp()).abs()
        };
        for atol in [1e-5, 1e-6, 1e-7] {
            let coarse = run(atol);
            let fine = run(atol / 2.0);
            assert!(
                fine < coarse,
                "error must drop when tolerance halves ({coarse:e} -> {fine:e} at {atol:e})"
            );
            assert!(coarse <= 10.0 * atol, "error {coarse} vs tolerance {atol}");
        }
    }

    #[test]
    fn dense_output_matches_stored_stamps() {
        let t = ToleranceSpec {
            abs_tol: 1e-7,
            rel_tol: 1e-7,
            ..tol()
        };
        let tr = integrate_adaptive(|t, _y, dy| dy[0] = t.cos(), 0.0, 3.0, &[0.0], &t).unwrap();
        for (k, &tk) in tr.times().iter().enumerate() {
            assert_eq!(tr.state_at(tk)[0], tr.states()[k][0]);
        }
        // Interior accuracy against the analytic solution sin(t).
        for j in 0..30 {
            let t = 0.1 * j as f64;
            assert!((tr.state_at(t)[0] - t.sin()).abs() < 1e-4);
        }
    }

    #[test]
    fn budget_exhaustion_reported() {
        let t = ToleranceSpec {
            max_steps: 3,
            ..tol()
        };
        let err = integrate_adaptive(|_t, y, dy| dy[0] = -y[0], 0.0, 10.0, &[1.0], &t).unwrap_err();
        assert!(matches!(err, Error::BudgetExhausted { .. }));
    }

    #[test]
    fn non_finite_rhs_reported() {
        let err =
            integrate_adaptive(|_t, _y, dy| dy[0] = f64::NAN, 0.0, 1.0, &[1.0], &tol()).unwrap_err();
        assert!(matches!(err, Error::DynamicsFailed { .. }));
    }

    #[test]
    fn stop_time_for_decay_is_ln2() {
        let (tr, ts) = integrate_with_stop(
            |_t, y, dy| dy[0] = -y[0],
            |_t, y| y[0] - 0.5,
            0.0,
            2.0,
            &[1.0],
            &tol(),
        )
        .unwrap();
        let ts = ts.expect("event must trigger");
        assert!((ts - std::f64::consts::LN_2).abs() < 1e-4);
        assert!((tr.end_time() - ts).abs() < 1e-9);
    }

    #[test]
    fn stop_never_triggering_reaches_t1() {
        let (tr, ts) = integrate_with_stop(
            |_t, y, dy| dy[0] = -y[0],
            |_t, y| y[0] + 1.0,
            0.0,
            1.0,
            &[1.0],
            &tol(),
        )
        .unwrap();
        assert!(ts.is_none());
        assert_eq!(tr.end_time(), 1.0);
    }

    #[test]
    fn stop_at_start_is_single_point() {
        let (tr, ts) = integrate_with_stop(
            |_t, y, dy| dy[0] = -y[0],
            |_t, y| y[0] - 2.0,
            0.0,
            1.0,
            &[1.0],
            &tol(),
        )
        .unwrap();
        assert_eq!(ts, Some(0.0));
        assert_eq!(tr.len(), 1);
    }
}

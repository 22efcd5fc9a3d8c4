//! Monte Carlo validation of open-loop vs recomputed-feedback control of
//! the noise-perturbed speed-field system. Runs are independent
//! Euler-Maruyama paths (stream index = base stream + run index); the
//! statistics reduction is chunked in a fixed order so results do not
//! depend on the worker count.

use std::cell::RefCell;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hj::{
    feedback_control, value_bolza_eikonal, AdjointSearch, EikonalProblem, EvalMode,
    ADJOINT_ZERO_EPS,
};
use crate::numerics::sde::{em_observe, step_count};
use crate::numerics::{RngSeed, Trajectory};

/// Monte Carlo configuration. The recomputation period must be an integer
/// multiple of the SDE step.
#[derive(Debug, Clone)]
pub struct McConfig {
    pub dt_sde: f64,
    pub dt_recomp: f64,
    pub runs: usize,
    pub seed: RngSeed,
    pub noise_diag: Vec<f64>,
}

impl McConfig {
    pub fn recomp_stride(&self) -> Result<usize> {
        if !(self.dt_sde > 0.0) || !(self.dt_recomp > 0.0) {
            return Err(Error::InvalidConfig("steps must be positive".into()));
        }
        let ratio = self.dt_recomp / self.dt_sde;
        let stride = ratio.round();
        if (ratio - stride).abs() > 1e-6 * ratio.max(1.0) {
            return Err(Error::InvalidConfig(format!(
                "recomputation period must be an integer multiple of the SDE step (ratio {ratio})"
            )));
        }
        Ok(stride as usize)
    }

    pub fn validate(&self, state_dim: usize) -> Result<()> {
        self.recomp_stride()?;
        if self.runs == 0 {
            return Err(Error::InvalidConfig("need at least one run".into()));
        }
        if self.noise_diag.len() != state_dim {
            return Err(Error::DimensionMismatch {
                expected: state_dim,
                got: self.noise_diag.len(),
            });
        }
        Ok(())
    }
}

/// Per-time Monte Carlo statistics of the running cost, plus the
/// time-integrated cost estimate. `j_estimate` is the trapezoidal integral
/// of `mean_eta` over the grid; `j_std_error` is the standard error of the
/// per-run trapezoidal costs.
#[derive(Debug, Clone)]
pub struct RunStats {
    pub times: Vec<f64>,
    pub mean_eta: Vec<f64>,
    pub std_eta: Vec<f64>,
    pub j_estimate: f64,
    pub j_std_error: f64,
    pub runs: usize,
}

/// Deterministic optimal control stored as the winning characteristic plus
/// the critical-point hit time: the control follows the normalized adjoint
/// until the hit and is zero afterwards.
#[derive(Debug, Clone)]
pub struct OpenLoopSchedule {
    state_dim: usize,
    trajectory: Trajectory,
    hit_time: Option<f64>,
    /// Deterministic optimal cost realized by the schedule.
    pub optimal_cost: f64,
}

impl OpenLoopSchedule {
    pub fn hit_time(&self) -> Option<f64> {
        self.hit_time
    }

    pub fn control_into(&self, t: f64, out: &mut [f64], scratch: &mut [f64]) {
        let n = self.state_dim;
        if self.hit_time.is_some_and(|h| t >= h) {
            out.fill(0.0);
            return;
        }
        self.trajectory.state_at_into(t, scratch);
        let p = &scratch[n..2 * n];
        let pn = p.iter().map(|v| v * v).sum::<f64>().sqrt();
        if pn < ADJOINT_ZERO_EPS {
            out.fill(0.0);
        } else {
            for (o, pi) in out.iter_mut().zip(p) {
                *o = pi / pn;
            }
        }
    }
}

/// Solves the deterministic running-cost problem at `(t0, x0)` and packages
/// the optimal control for replay.
pub fn build_open_loop(
    problem: &EikonalProblem,
    t0: f64,
    x0: &[f64],
    search: &AdjointSearch,
) -> Result<OpenLoopSchedule> {
    if !problem.is_bolza() {
        return Err(Error::InvalidProblem(
            "open-loop schedules are built from running-cost problems".into(),
        ));
    }
    let result = value_bolza_eikonal(problem, t0, x0, search)?;
    Ok(OpenLoopSchedule {
        state_dim: problem.dim(),
        trajectory: result.trajectory,
        hit_time: result.stop_time,
        optimal_cost: result.value,
    })
}

/// Control law applied during simulation.
pub enum ControlLaw<'a> {
    /// Replay a fixed schedule.
    OpenLoop(&'a OpenLoopSchedule),
    /// Recompute the feedback control at every recomputation instant from
    /// the current position.
    Mpc { search: AdjointSearch },
}

/// Fixed chunking of runs; the reduction merges chunk accumulators in chunk
/// order, independent of how rayon schedules them.
const RUN_CHUNK: usize = 4;

struct ChunkStats {
    count: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
    costs: Vec<f64>,
}

impl ChunkStats {
    fn new(len: usize) -> Self {
        ChunkStats {
            count: 0,
            mean: vec![0.0; len],
            m2: vec![0.0; len],
            costs: Vec::new(),
        }
    }

    fn push_series(&mut self, eta: &[f64], cost: f64) {
        self.count += 1;
        let c = self.count as f64;
        for (k, &v) in eta.iter().enumerate() {
            let delta = v - self.mean[k];
            self.mean[k] += delta / c;
            self.m2[k] += delta * (v - self.mean[k]);
        }
        self.costs.push(cost);
    }

    fn merge(mut self, other: ChunkStats) -> ChunkStats {
        if other.count == 0 {
            return self;
        }
        if self.count == 0 {
            return other;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        for k in 0..self.mean.len() {
            let delta = other.mean[k] - self.mean[k];
            self.mean[k] += delta * nb / n;
            self.m2[k] += other.m2[k] + delta * delta * na * nb / n;
        }
        self.count += other.count;
        self.costs.extend(other.costs);
        self
    }
}

/// Runs the Monte Carlo batch and accumulates per-time mean and standard
/// deviation of the running cost along with the integrated cost. A failing
/// run aborts the whole batch, reporting its index.
pub fn simulate_runs(
    problem: &EikonalProblem,
    law: &ControlLaw<'_>,
    cfg: &McConfig,
    t0: f64,
    x0: &[f64],
) -> Result<RunStats> {
    let n = problem.dim();
    cfg.validate(n)?;
    if x0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x0.len(),
        });
    }
    let Some(eta) = problem.running_cost() else {
        return Err(Error::InvalidProblem(
            "the Monte Carlo harness needs a running-cost problem".into(),
        ));
    };
    let horizon = problem.horizon();
    let steps = step_count(t0, horizon, cfg.dt_sde)?;
    let grid_len = steps + 1;
    let stride = cfg.recomp_stride()?;
    let dt_eff = if steps == 0 {
        0.0
    } else {
        (horizon - t0) / steps as f64
    };

    let run_indices: Vec<usize> = (0..cfg.runs).collect();
    let chunk_results: Vec<Result<ChunkStats>> = run_indices
        .par_chunks(RUN_CHUNK)
        .map(|chunk| {
            let mut acc = ChunkStats::new(grid_len);
            let mut eta_series = vec![0.0; grid_len];
            for &run in chunk {
                let cost = simulate_one(
                    problem,
                    eta,
                    law,
                    cfg,
                    t0,
                    x0,
                    run,
                    stride,
                    dt_eff,
                    &mut eta_series,
                )
                .map_err(|e| Error::RunFailed {
                    run,
                    source: Box::new(e),
                })?;
                acc.push_series(&eta_series, cost);
            }
            Ok(acc)
        })
        .collect();

    let mut total = ChunkStats::new(grid_len);
    for r in chunk_results {
        total = total.merge(r?);
    }

    let times: Vec<f64> = (0..grid_len)
        .map(|k| {
            if k == steps {
                horizon
            } else {
                t0 + k as f64 * dt_eff
            }
        })
        .collect();
    let std_eta: Vec<f64> = total
        .m2
        .iter()
        .map(|m2| (m2 / total.count as f64).sqrt())
        .collect();
    let j_estimate = trapezoid(&total.mean, dt_eff);
    let mean_cost = total.costs.iter().sum::<f64>() / total.count as f64;
    let var_cost = total
        .costs
        .iter()
        .map(|c| (c - mean_cost) * (c - mean_cost))
        .sum::<f64>()
        / total.count as f64;
    let j_std_error = (var_cost / total.count as f64).sqrt();

    Ok(RunStats {
        times,
        mean_eta: total.mean,
        std_eta,
        j_estimate,
        j_std_error,
        runs: total.count,
    })
}

fn trapezoid(values: &[f64], dt: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let inner: f64 = values[1..values.len() - 1].iter().sum();
    dt * (0.5 * values[0] + inner + 0.5 * values[values.len() - 1])
}

#[allow(clippy::too_many_arguments)]
fn simulate_one(
    problem: &EikonalProblem,
    eta: &dyn crate::fields::Field,
    law: &ControlLaw<'_>,
    cfg: &McConfig,
    t0: f64,
    x0: &[f64],
    run: usize,
    stride: usize,
    dt_eff: f64,
    eta_series: &mut [f64],
) -> Result<f64> {
    let n = problem.dim();
    let horizon = problem.horizon();
    let mut rng = cfg.seed.with_stream_offset(run as u64).rng();
    let control = RefCell::new(vec![0.0; n]);
    let mut schedule_scratch = vec![0.0; 2 * n + 1];
    let feedback_error = RefCell::new(None::<Error>);
    let mut cost = 0.0;
    let steps = eta_series.len() - 1;

    {
        let speed = problem.speed();
        let mut drift = |_t: f64, y: &[f64], dy: &mut [f64]| {
            let u = control.borrow();
            let c = speed.value(y);
            for i in 0..n {
                dy[i] = c * u[i];
            }
        };
        let observe = |k: usize, t: f64, y: &[f64]| {
            if k < steps && k % stride == 0 {
                let mut u = control.borrow_mut();
                match law {
                    ControlLaw::OpenLoop(schedule) => {
                        schedule.control_into(t, &mut u, &mut schedule_scratch);
                    }
                    ControlLaw::Mpc { search } => {
                        match feedback_control(problem, t, y, search, EvalMode::ScanHorizon) {
                            Ok(fb) => u.copy_from_slice(&fb),
                            Err(e) => {
                                // Poison the drift so the step loop aborts;
                                // the stored error is reported instead.
                                *feedback_error.borrow_mut() = Some(e);
                                u.fill(f64::NAN);
                            }
                        }
                    }
                }
            }
            let v = eta.value(y);
            eta_series[k] = v;
            let w = if k == 0 || k == steps { 0.5 } else { 1.0 };
            cost += w * v * dt_eff;
        };
        em_observe(
            &mut drift,
            &cfg.noise_diag,
            cfg.dt_sde,
            t0,
            horizon,
            x0,
            &mut rng,
            observe,
        )
        .map_err(|e| feedback_error.borrow_mut().take().unwrap_or(e))?;
    }
    Ok(cost)
}

/// Side-by-side summary of an open-loop batch against a recomputed-feedback
/// batch on the same time grid.
#[derive(Debug, Clone)]
pub struct CompareReport {
    pub j_open_loop: f64,
    pub se_open_loop: f64,
    pub j_closed_loop: f64,
    pub se_closed_loop: f64,
    /// `j_open_loop - j_closed_loop`.
    pub difference: f64,
    /// True when the recomputed feedback achieved a strictly lower cost.
    pub feedback_better: bool,
}

pub fn compare_report(stats_ol: &RunStats, stats_cl: &RunStats) -> Result<CompareReport> {
    if stats_ol.times.len() != stats_cl.times.len() {
        return Err(Error::DimensionMismatch {
            expected: stats_ol.times.len(),
            got: stats_cl.times.len(),
        });
    }
    for (a, b) in stats_ol.times.iter().zip(&stats_cl.times) {
        if (a - b).abs() > 1e-12 * (1.0 + a.abs()) {
            return Err(Error::InvalidConfig(
                "statistics were collected on different time grids".into(),
            ));
        }
    }
    Ok(CompareReport {
        j_open_loop: stats_ol.j_estimate,
        se_open_loop: stats_ol.j_std_error,
        j_closed_loop: stats_cl.j_estimate,
        se_closed_loop: stats_cl.j_std_error,
        difference: stats_ol.j_estimate - stats_cl.j_estimate,
        feedback_better: stats_cl.j_estimate < stats_ol.j_estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hj::{EikonalProblem, EtaCondition, DEFAULT_CRITICAL_TOL};
    use crate::fields::ScalarField;
    use std::sync::Arc;

    fn oracle_1d() -> EikonalProblem {
        EikonalProblem::bolza(
            Arc::new(ScalarField::Constant {
                dim: 1,
                value: -1.0,
            }),
            Arc::new(ScalarField::Constant { dim: 1, value: 0.0 }),
            Arc::new(ScalarField::NormSquaredHalf { dim: 1 }),
            1.0,
            EtaCondition::CriticalPoint {
                point: vec![0.0],
                tol: DEFAULT_CRITICAL_TOL,
            },
        )
        .unwrap()
    }

    fn quiet_cfg(runs: usize, noise: f64) -> McConfig {
        McConfig {
            dt_sde: 1e-3,
            dt_recomp: 0.05,
            runs,
            seed: RngSeed::new(77, 0),
            noise_diag: vec![noise],
        }
    }

    #[test]
    fn schedule_from_critical_point_is_zero() {
        let p = oracle_1d();
        let s = build_open_loop(&p, 0.0, &[0.0], &AdjointSearch::grid(vec![360])).unwrap();
        assert_eq!(s.hit_time(), Some(0.0));
        let mut u = [7.0];
        let mut scratch = vec![0.0; 3];
        for t in [0.0, 0.3, 0.9] {
            s.control_into(t, &mut u, &mut scratch);
            assert_eq!(u[0], 0.0);
        }
    }

    #[test]
    fn one_dimensional_schedule_drives_then_freezes() {
        let p = oracle_1d();
        let s = build_open_loop(&p, 0.0, &[1.0], &AdjointSearch::grid(vec![360])).unwrap();
        let hit = s.hit_time().expect("must reach the critical point");
        assert!((hit - 1.0).abs() < 0.01, "hit at {hit}");
        let mut u = [0.0];
        let mut scratch = vec![0.0; 3];
        s.control_into(0.2, &mut u, &mut scratch);
        assert!((u[0] - 1.0).abs() < 1e-6, "u = {}", u[0]);
        s.control_into(hit + 1e-6, &mut u, &mut scratch);
        assert_eq!(u[0], 0.0);
    }

    #[test]
    fn zero_noise_replay_reproduces_deterministic_cost() {
        let p = oracle_1d();
        let s = build_open_loop(&p, 0.0, &[1.0], &AdjointSearch::grid(vec![360])).unwrap();
        let stats = simulate_runs(&p, &ControlLaw::OpenLoop(&s), &quiet_cfg(1, 0.0), 0.0, &[1.0])
            .unwrap();
        assert!(
            (stats.j_estimate - s.optimal_cost).abs() < 1e-3,
            "replay {} vs optimal {}",
            stats.j_estimate,
            s.optimal_cost
        );
        assert!(stats.std_eta.iter().all(|s| *s == 0.0));
    }

    #[test]
    fn zero_noise_feedback_matches_open_loop() {
        let p = oracle_1d();
        let s = build_open_loop(&p, 0.0, &[1.0], &AdjointSearch::grid(vec![360])).unwrap();
        let cfg = quiet_cfg(1, 0.0);
        let ol = simulate_runs(&p, &ControlLaw::OpenLoop(&s), &cfg, 0.0, &[1.0]).unwrap();
        let cl = simulate_runs(
            &p,
            &ControlLaw::Mpc {
                search: AdjointSearch::grid(vec![90]),
            },
            &cfg,
            0.0,
            &[1.0],
        )
        .unwrap();
        let report = compare_report(&ol, &cl).unwrap();
        assert!(
            report.difference.abs() < 1e-3,
            "OL {} vs CL {}",
            report.j_open_loop,
            report.j_closed_loop
        );
    }

    #[test]
    fn batch_is_reproducible_and_worker_independent() {
        let p = oracle_1d();
        let s = build_open_loop(&p, 0.0, &[1.0], &AdjointSearch::grid(vec![360])).unwrap();
        let cfg = quiet_cfg(16, 0.25);
        let run = || simulate_runs(&p, &ControlLaw::OpenLoop(&s), &cfg, 0.0, &[1.0]).unwrap();
        let a = run();
        let b = run();
        assert_eq!(a.j_estimate.to_bits(), b.j_estimate.to_bits());
        assert_eq!(a.mean_eta, b.mean_eta);

        let pool1 = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let c = pool1.install(run);
        assert_eq!(a.j_estimate.to_bits(), c.j_estimate.to_bits());
        assert_eq!(a.std_eta, c.std_eta);
    }

    #[test]
    fn standard_error_shrinks_with_run_count() {
        let p = oracle_1d();
        let s = build_open_loop(&p, 0.0, &[1.0], &AdjointSearch::grid(vec![360])).unwrap();
        let se = |runs: usize| {
            simulate_runs(&p, &ControlLaw::OpenLoop(&s), &quiet_cfg(runs, 0.3), 0.0, &[1.0])
                .unwrap()
                .j_std_error
        };
        let ratio = se(60) / se(120);
        assert!(
            (1.2..=1.7).contains(&ratio),
            "standard error ratio {ratio}"
        );
    }

    #[test]
    fn misaligned_steps_rejected() {
        let cfg = McConfig {
            dt_sde: 0.003,
            dt_recomp: 0.05,
            runs: 1,
            seed: RngSeed::new(1, 0),
            noise_diag: vec![0.0],
        };
        assert!(cfg.recomp_stride().is_err());
    }

    #[test]
    fn report_is_antisymmetric() {
        let p = oracle_1d();
        let s = build_open_loop(&p, 0.0, &[1.0], &AdjointSearch::grid(vec![360])).unwrap();
        let a = simulate_runs(&p, &ControlLaw::OpenLoop(&s), &quiet_cfg(4, 0.2), 0.0, &[1.0])
            .unwrap();
        let b = simulate_runs(&p, &ControlLaw::OpenLoop(&s), &quiet_cfg(4, 0.0), 0.0, &[1.0])
            .unwrap();
        let fwd = compare_report(&a, &b).unwrap();
        let rev = compare_report(&b, &a).unwrap();
        assert_eq!(fwd.difference, -rev.difference);
        let same = compare_report(&a, &a).unwrap();
        assert_eq!(same.difference, 0.0);
        assert!(!same.feedback_better);
    }
}

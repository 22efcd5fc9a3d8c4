//! The acceptance criteria, each pinned to its stated tolerance. Every
//! check is deterministic: randomness goes through fixed seeds.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::Result;
use crate::fd::{grid_sample, lax_friedrichs_solve, Domain2D};
use crate::games::{
    closed_form_gap, damped_pursuit_eval, programmed_maximin_p36, transition_matrix_residual,
    DampedPursuitParams, GapExample, LinearGame,
};
use crate::hj::{
    mayer_value_and_alignment, value_bolza_eikonal, value_eikonal, AdjointSearch, EvalMode, Sense,
};
use crate::mpc::{build_open_loop, compare_report, simulate_runs, ControlLaw, McConfig};
use crate::numerics::{integrate_adaptive, quad_simpson, RngSeed, ToleranceSpec};
use crate::selftest::{data, oracle};

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub details: String,
    pub seconds: f64,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "criterion {:02} {} [{}] {:.1}s: {}",
            self.id,
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.seconds,
            self.details
        )
    }
}

struct Check {
    passed: bool,
    details: Vec<String>,
}

impl Check {
    fn new() -> Self {
        Check {
            passed: true,
            details: Vec::new(),
        }
    }

    fn require(&mut self, ok: bool, what: impl Into<String>) {
        let what = what.into();
        if !ok {
            self.passed = false;
            self.details.push(format!("FAILED: {what}"));
        } else {
            self.details.push(what);
        }
    }

    fn finish(self, id: usize, name: &'static str, started: Instant) -> CriterionResult {
        CriterionResult {
            id,
            name,
            passed: self.passed,
            details: self.details.join("; "),
            seconds: started.elapsed().as_secs_f64(),
        }
    }
}

fn fail(id: usize, name: &'static str, started: Instant, err: impl std::fmt::Display) -> CriterionResult {
    CriterionResult {
        id,
        name,
        passed: false,
        details: format!("error: {err}"),
        seconds: started.elapsed().as_secs_f64(),
    }
}

const PURSUIT_MARGIN_PEAK: f64 = 0.0307;

fn standard_pursuit() -> DampedPursuitParams {
    DampedPursuitParams {
        alpha: 1.0,
        a: 0.2,
        b: 0.1,
        u0: [0.0, 0.0],
        horizon: 2.0,
    }
}

/// Criterion 1: the pursuit margin peak matches the reported value and the
/// analytic expression.
pub fn criterion_01() -> CriterionResult {
    let started = Instant::now();
    let mut check = Check::new();
    let params = standard_pursuit();
    let eval = match damped_pursuit_eval(&params, 0.0, &[0.0; 4], 10_000) {
        Ok(e) => e,
        Err(e) => return fail(1, "pursuit margin peak", started, e),
    };
    let analytic = 0.1 - 0.1 * std::f64::consts::LN_2;
    check.require(
        (eval.v - PURSUIT_MARGIN_PEAK).abs() <= 5e-4,
        format!("value at origin {:.6} within 5e-4 of {PURSUIT_MARGIN_PEAK}", eval.v),
    );
    check.require(
        (eval.v - analytic).abs() <= 5e-4,
        format!("matches analytic 0.1 - 0.1 ln 2 = {analytic:.7}"),
    );
    check.finish(1, "pursuit margin peak", started)
}

/// Criterion 2: value vs maximin surfaces on the 41 x 41 grid.
pub fn criterion_02() -> CriterionResult {
    let started = Instant::now();
    let mut check = Check::new();
    let params = standard_pursuit();
    let evals: Vec<_> = (0..41 * 41)
        .into_par_iter()
        .map(|flat| {
            let i = flat / 41;
            let j = flat % 41;
            let x = [-0.2 + 0.01 * i as f64, -0.2 + 0.01 * j as f64, 0.0, 0.0];
            damped_pursuit_eval(&params, 0.0, &x, 10_000)
        })
        .collect();
    let mut max_gap = f64::NEG_INFINITY;
    let mut dominated = true;
    let mut indifference_clean = true;
    let h_max = 0.1 - 0.1 * std::f64::consts::LN_2;
    for e in &evals {
        let e = match e {
            Ok(e) => e,
            Err(err) => return fail(2, "pursuit value surfaces", started, err),
        };
        if e.v < e.v_star {
            dominated = false;
        }
        max_gap = max_gap.max(e.v - e.v_star);
        if e.v_tilde > h_max && (e.v - e.v_star).abs() > 1e-12 {
            indifference_clean = false;
        }
    }
    check.require(dominated, "V >= V* at every node");
    check.require(
        (max_gap - h_max).abs() <= 1e-3,
        format!("max(V - V*) = {max_gap:.6} within 1e-3 of the margin peak"),
    );
    check.require(
        indifference_clean,
        "V = V* wherever the pre-truncation maximin exceeds the margin peak",
    );
    check.finish(2, "pursuit value surfaces", started)
}

fn sample_positions(count: usize, x1: (f64, f64), x2: (f64, f64), seed: u64) -> Vec<[f64; 2]> {
    use rand::Rng;
    let mut rng = RngSeed::new(seed, 0).rng();
    (0..count)
        .map(|_| {
            [
                x1.0 + (x1.1 - x1.0) * rng.random::<f64>(),
                x2.0 + (x2.1 - x2.0) * rng.random::<f64>(),
            ]
        })
        .collect()
}

/// Criterion 3: constant-speed surrogate against the reachable-disc oracle,
/// for both the characteristics path and the reference solver.
pub fn criterion_03(paper_scale: bool) -> CriterionResult {
    let started = Instant::now();
    let mut check = Check::new();
    let horizon = 0.5;
    let problem = match data::constant_speed_surrogate(2, 1.0, horizon) {
        Ok(p) => p,
        Err(e) => return fail(3, "reachable-disc oracle", started, e),
    };
    let points = sample_positions(10, (-1.5, 1.5), (-1.0, 1.0), 03_001);
    let domain = Domain2D {
        x1: (-3.0, 3.0),
        x2: (-2.5, 2.5),
    };
    let run = || -> Result<(f64, f64, f64, f64)> {
        let mut max_moc: f64 = 0.0;
        let mut oracle_vals = Vec::new();
        for x in &points {
            let o = oracle::disc_extremum(problem.sigma(), x, horizon, Sense::Max, 128, 1024);
            let r = value_eikonal(
                &problem,
                0.0,
                x,
                &AdjointSearch::grid(vec![1000]),
                EvalMode::Terminal,
            )?;
            max_moc = max_moc.max((r.value - o).abs());
            oracle_vals.push(o);
        }
        let fd_err = |dx: f64| -> Result<f64> {
            let alpha = 1.05;
            let dt = 0.9 / (alpha / dx + alpha / dx);
            let grid = lax_friedrichs_solve(&problem, domain, (dx, dx), dt, horizon)?;
            let mut worst: f64 = 0.0;
            for (x, o) in points.iter().zip(&oracle_vals) {
                worst = worst.max((grid_sample(&grid, (x[0], x[1]))? - o).abs());
            }
            Ok(worst)
        };
        let coarse_dx = if paper_scale { 0.01 } else { 0.02 };
        let coarse = fd_err(coarse_dx)?;
        let fine = fd_err(coarse_dx / 2.0)?;
        Ok((max_moc, coarse, fine, coarse_dx))
    };
    match run() {
        Ok((max_moc, coarse, fine, dx)) => {
            check.require(
                max_moc <= 1e-3,
                format!("characteristics within 1e-3 of the oracle (max {max_moc:.2e})"),
            );
            check.require(
                coarse <= 5e-2,
                format!("reference solver within 5e-2 at dx = {dx} (max {coarse:.3})"),
            );
            check.require(
                fine < coarse,
                format!("halving dx shrinks the error ({coarse:.4} -> {fine:.4})"),
            );
        }
        Err(e) => return fail(3, "reachable-disc oracle", started, e),
    }
    check.finish(3, "reachable-disc oracle", started)
}

/// Criterion 4: cross-method agreement on the bump-speed benchmark.
pub fn criterion_04(paper_scale: bool) -> CriterionResult {
    let started = Instant::now();
    let mut check = Check::new();
    let horizon = 0.5;
    let problem = match data::mayer_benchmark(2, horizon) {
        Ok(p) => p,
        Err(e) => return fail(4, "cross-method agreement", started, e),
    };
    // 13 x 7 samples of [-3, 3] x [-1.5, 1.5].
    let samples: Vec<[f64; 2]> = (0..13)
        .flat_map(|i| (0..7).map(move |j| [-3.0 + 0.5 * i as f64, -1.5 + 0.5 * j as f64]))
        .collect();
    let moc: Vec<Result<f64>> = samples
        .par_iter()
        .map(|x| {
            value_eikonal(
                &problem,
                0.0,
                x,
                &AdjointSearch::grid(vec![1000]),
                EvalMode::Terminal,
            )
            .map(|r| r.value)
        })
        .collect();
    let moc: Result<Vec<f64>> = moc.into_iter().collect();
    let moc = match moc {
        Ok(v) => v,
        Err(e) => return fail(4, "cross-method agreement", started, e),
    };
    let domain = Domain2D {
        x1: (-5.0, 5.0),
        x2: (-3.0, 3.0),
    };
    let chain: &[(f64, f64)] = if paper_scale {
        &[(0.02, 2e-3), (0.01, 1e-3), (5e-3, 5e-4)]
    } else {
        &[(0.04, 4e-3), (0.02, 2e-3), (0.01, 1e-3)]
    };
    let mut max_diffs = Vec::new();
    let mut median_finest = f64::NAN;
    for (dx, dt) in chain {
        let grid = match lax_friedrichs_solve(&problem, domain, (*dx, *dx), *dt, horizon) {
            Ok(g) => g,
            Err(e) => return fail(4, "cross-method agreement", started, e),
        };
        let mut diffs: Vec<f64> = Vec::new();
        for (x, v) in samples.iter().zip(&moc) {
            match grid_sample(&grid, (x[0], x[1])) {
                Ok(fd) => diffs.push((v - fd).abs()),
                Err(e) => return fail(4, "cross-method agreement", started, e),
            }
        }
        diffs.sort_by(f64::total_cmp);
        max_diffs.push(*diffs.last().unwrap());
        median_finest = diffs[diffs.len() / 2];
    }
    check.require(
        median_finest <= 0.03,
        format!("median |difference| = {median_finest:.4} <= 0.03 at the finest step"),
    );
    let monotone = max_diffs.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    check.require(
        monotone,
        format!("max |difference| non-increasing along the step chain {max_diffs:?}"),
    );
    check.finish(4, "cross-method agreement", started)
}

/// Criterion 5: the alignment comparator never beats the value and loses
/// strictly somewhere.
pub fn criterion_05() -> CriterionResult {
    let started = Instant::now();
    let mut check = Check::new();
    let problem = match data::mayer_benchmark(2, 0.5) {
        Ok(p) => p,
        Err(e) => return fail(5, "alignment comparator bound", started, e),
    };
    let n1 = 61;
    let n2 = 31;
    let rows: Vec<Result<(f64, f64)>> = (0..n1 * n2)
        .into_par_iter()
        .map(|flat| {
            let i = flat / n2;
            let j = flat % n2;
            let x = [-3.0 + 0.1 * i as f64, -1.5 + 0.1 * j as f64];
            mayer_value_and_alignment(&problem, 0.0, &x, &[1000], EvalMode::Terminal)
                .map(|(v, b)| (v.value, b.value))
        })
        .collect();
    let mut min_gap = f64::INFINITY;
    let mut max_gap = f64::NEG_INFINITY;
    for r in rows {
        let (v, b) = match r {
            Ok(p) => p,
            Err(e) => return fail(5, "alignment comparator bound", started, e),
        };
        min_gap = min_gap.min(v - b);
        max_gap = max_gap.max(v - b);
    }
    check.require(
        min_gap >= -1e-6,
        format!("value - comparator >= -1e-6 everywhere (min {min_gap:.2e})"),
    );
    check.require(
        max_gap > 0.01,
        format!("strict failure of the comparator somewhere (max gap {max_gap:.4})"),
    );
    check.finish(5, "alignment comparator bound", started)
}

/// Criterion 6: direction-grid refinement stability.
pub fn criterion_06() -> CriterionResult {
    let started = Instant::now();
    let mut check = Check::new();
    let problem = match data::mayer_benchmark(2, 0.5) {
        Ok(p) => p,
        Err(e) => return fail(6, "sphere-grid stability", started, e),
    };
    let points = sample_positions(20, (-3.0, 3.0), (-1.5, 1.5), 06_001);
    let deviations: Vec<Result<f64>> = points
        .par_iter()
        .map(|x| {
            let a = value_eikonal(
                &problem,
                0.0,
                x,
                &AdjointSearch::grid(vec![1000]),
                EvalMode::Terminal,
            )?;
            let b = value_eikonal(
                &problem,
                0.0,
                x,
                &AdjointSearch::grid(vec![2000]),
                EvalMode::Terminal,
            )?;
            Ok((a.value - b.value).abs())
        })
        .collect();
    let mut worst: f64 = 0.0;
    for d in deviations {
        match d {
            Ok(d) => worst = worst.max(d),
            Err(e) => return fail(6, "sphere-grid stability", started, e),
        }
    }
    check.require(
        worst <= 1e-3,
        format!("1000- vs 2000-point grids agree within 1e-3 (max {worst:.2e})"),
    );
    check.finish(6, "sphere-grid stability", started)
}

/// Criterion 7: search equivalences in low and high dimension.
pub fn criterion_07() -> CriterionResult {
    let started = Instant::now();
    let mut check = Check::new();
    let planar = match data::mayer_benchmark(2, 0.5) {
        Ok(p) => p,
        Err(e) => return fail(7, "search equivalence", started, e),
    };
    let spots = [
        [2.0, 0.0],
        [-1.0, 0.5],
        [0.5, -1.0],
        [1.5, 1.0],
        [-2.5, -0.5],
    ];
    let mut worst_2d: f64 = 0.0;
    for x in &spots {
        let brute = match value_eikonal(
            &planar,
            0.0,
            x,
            &AdjointSearch::grid(vec![2000]),
            EvalMode::Terminal,
        ) {
            Ok(r) => r.value,
            Err(e) => return fail(7, "search equivalence", started, e),
        };
        let fast = match value_eikonal(
            &planar,
            0.0,
            x,
            &AdjointSearch::powell(5, 1e-7, RngSeed::new(7_100, 0)),
            EvalMode::Terminal,
        ) {
            Ok(r) => r.value,
            Err(e) => return fail(7, "search equivalence", started, e),
        };
        worst_2d = worst_2d.max((brute - fast).abs());
    }
    check.require(
        worst_2d <= 1e-3,
        format!("planar Powell matches the 2000-point brute force (max {worst_2d:.2e})"),
    );

    let highd = match data::mayer_benchmark(5, 0.5) {
        Ok(p) => p,
        Err(e) => return fail(7, "search equivalence", started, e),
    };
    let mut worst_5d: f64 = 0.0;
    for x in &spots {
        let x5 = [x[0], x[1], 0.0, 0.0, 0.0];
        let run = |seed: u64| {
            value_eikonal(
                &highd,
                0.0,
                &x5,
                &AdjointSearch::powell(5, 1e-7, RngSeed::new(seed, 0)),
                EvalMode::Terminal,
            )
            .map(|r| r.value)
        };
        match (run(7_201), run(7_202)) {
            (Ok(a), Ok(b)) => worst_5d = worst_5d.max((a - b).abs()),
            (Err(e), _) | (_, Err(e)) => return fail(7, "search equivalence", started, e),
        }
    }
    check.require(
        worst_5d <= 1e-3,
        format!("independent restart batches agree in dimension five (max {worst_5d:.2e})"),
    );
    check.finish(7, "search equivalence", started)
}

/// Criterion 8: programmed maximin against the ball-game closed form.
pub fn criterion_08() -> CriterionResult {
    let started = Instant::now();
    let mut check = Check::new();
    use rand::Rng;
    let mut rng = RngSeed::new(08_001, 0).rng();
    let game = LinearGame::isotropic_ball_game(2, 2.0, 1.0, 1.0);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let x0 = [
            rng.random::<f64>() * 4.0 - 2.0,
            rng.random::<f64>() * 4.0 - 2.0,
        ];
        let t0 = rng.random::<f64>() * 0.99;
        let closed =
            ((x0[0] * x0[0] + x0[1] * x0[1]).sqrt() + (1.0 - 2.0) * (1.0 - t0)).max(0.0);
        match programmed_maximin_p36(&game, t0, &x0, &[2000], 64) {
            Ok(eval) => worst = worst.max((eval.v_star - closed).abs()),
            Err(e) => return fail(8, "ball-game closed form", started, e),
        }
    }
    check.require(
        worst <= 1e-4,
        format!("maximin matches the closed form within 1e-4 (max {worst:.2e})"),
    );
    check.finish(8, "ball-game closed form", started)
}

/// Criterion 9: one-dimensional running-cost oracle.
pub fn criterion_09() -> CriterionResult {
    let started = Instant::now();
    let mut check = Check::new();
    use crate::fields::ScalarField;
    use crate::hj::{EikonalProblem, EtaCondition, DEFAULT_CRITICAL_TOL};
    use std::sync::Arc;
    let problem = EikonalProblem::bolza(
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
    );
    let problem = match problem {
        Ok(p) => p,
        Err(e) => return fail(9, "running-cost oracle", started, e),
    };
    let value = match value_bolza_eikonal(&problem, 0.0, &[1.0], &AdjointSearch::grid(vec![720])) {
        Ok(r) => r.value,
        Err(e) => return fail(9, "running-cost oracle", started, e),
    };
    let brute = oracle::best_piecewise_cost_1d(1.0, 1.0, 8);
    check.require(
        (value - 1.0 / 6.0).abs() <= 1e-3,
        format!("value {value:.6} within 1e-3 of 1/6"),
    );
    check.require(
        (value - brute).abs() <= 1e-3,
        format!("agrees with the piecewise-control brute force {brute:.6}"),
    );
    check.finish(9, "running-cost oracle", started)
}

/// Criterion 10: open-loop vs recomputed feedback under noise.
pub fn criterion_10(paper_scale: bool) -> CriterionResult {
    let started = Instant::now();
    let mut check = Check::new();
    let n = 6;
    let problem = match data::running_cost_benchmark(n, 2.0) {
        Ok(p) => p,
        Err(e) => return fail(10, "noise-mitigation experiment", started, e),
    };
    let x0 = [-0.5, 0.5, 0.3, -0.3, 0.3, -0.3];
    let mut noise = vec![0.0; n];
    noise[0] = 0.3;
    noise[1] = 0.3;
    let search = AdjointSearch::powell(5, 1e-5, RngSeed::new(10_001, 0));
    let (dt_sde, runs) = if paper_scale { (1e-5, 1000) } else { (1e-3, 200) };
    let cfg = McConfig {
        dt_sde,
        dt_recomp: 0.05,
        runs,
        seed: RngSeed::new(10_002, 0),
        noise_diag: noise.clone(),
    };
    let schedule = match build_open_loop(&problem, 0.0, &x0, &search) {
        Ok(s) => s,
        Err(e) => return fail(10, "noise-mitigation experiment", started, e),
    };
    check.require(
        schedule.hit_time().is_some(),
        format!(
            "open-loop drive reaches the critical set (cost {:.4}, hit {:?})",
            schedule.optimal_cost,
            schedule.hit_time()
        ),
    );
    let run = |law: &ControlLaw<'_>, cfg: &McConfig| simulate_runs(&problem, law, cfg, 0.0, &x0);
    let ol = match run(&ControlLaw::OpenLoop(&schedule), &cfg) {
        Ok(s) => s,
        Err(e) => return fail(10, "noise-mitigation experiment", started, e),
    };
    let cl = match run(
        &ControlLaw::Mpc {
            search: search.clone(),
        },
        &cfg,
    ) {
        Ok(s) => s,
        Err(e) => return fail(10, "noise-mitigation experiment", started, e),
    };
    let report = match compare_report(&ol, &cl) {
        Ok(r) => r,
        Err(e) => return fail(10, "noise-mitigation experiment", started, e),
    };
    check.require(
        report.feedback_better,
        format!(
            "recomputed feedback wins: {:.4} < {:.4}",
            report.j_closed_loop, report.j_open_loop
        ),
    );
    check.require(
        (0.09..=0.15).contains(&report.j_closed_loop),
        format!("closed-loop cost {:.4} in [0.09, 0.15]", report.j_closed_loop),
    );
    check.require(
        (0.15..=0.23).contains(&report.j_open_loop),
        format!("open-loop cost {:.4} in [0.15, 0.23]", report.j_open_loop),
    );

    // Zero-noise degeneracy: recomputation is idle without disturbances.
    let quiet = McConfig {
        runs: 1,
        noise_diag: vec![0.0; n],
        ..cfg.clone()
    };
    let q_ol = match run(&ControlLaw::OpenLoop(&schedule), &quiet) {
        Ok(s) => s,
        Err(e) => return fail(10, "noise-mitigation experiment", started, e),
    };
    let q_cl = match run(
        &ControlLaw::Mpc {
            search: search.clone(),
        },
        &quiet,
    ) {
        Ok(s) => s,
        Err(e) => return fail(10, "noise-mitigation experiment", started, e),
    };
    check.require(
        (q_cl.j_estimate - q_ol.j_estimate).abs() <= 1e-3,
        format!(
            "zero-noise degeneracy: {:.5} vs {:.5}",
            q_cl.j_estimate, q_ol.j_estimate
        ),
    );
    check.finish(10, "noise-mitigation experiment", started)
}

/// Criterion 11: numerics cluster (integrator, quadrature, transition
/// matrices, gap term).
pub fn criterion_11() -> CriterionResult {
    let started = Instant::now();
    let mut check = Check::new();
    let tol = ToleranceSpec::default();
    match integrate_adaptive(|_t, y, dy| dy[0] = -y[0], 0.0, 1.0, &[1.0], &tol) {
        Ok(tr) => {
            let err = (tr.end_state()[0] - (-1.0f64).exp()).abs();
            check.require(err <= 1e-6, format!("decay endpoint error {err:.2e} <= 1e-6"));
        }
        Err(e) => return fail(11, "numerics cluster", started, e),
    }
    let exact = 1.0f64.exp() - 1.0;
    let simpson_err = |n: usize| {
        quad_simpson(|x| x.exp(), 0.0, 1.0, n)
            .map(|v| (v - exact).abs())
            .unwrap_or(f64::NAN)
    };
    let ratio = simpson_err(32) / simpson_err(64);
    check.require(
        ratio >= 8.0,
        format!("Simpson halving gain {ratio:.1}x >= 8x"),
    );
    match transition_matrix_residual() {
        Ok(residual) => check.require(
            residual <= 1e-8,
            format!("transition matrix exponential vs ODE within {residual:.2e} <= 1e-8"),
        ),
        Err(e) => return fail(11, "numerics cluster", started, e),
    }
    let analytic = 0.1 - 0.1 * std::f64::consts::LN_2;
    match closed_form_gap(
        &GapExample::DampedMixed {
            alpha: 1.0,
            a: 0.2,
            b_pos: 0.1,
            b_vel: 0.0,
        },
        2.0,
        0.0,
        10_001,
    ) {
        Ok(g) => check.require(
            (g - analytic).abs() <= 5e-4,
            format!("mixed-game gap {g:.6} within 5e-4 of the analytic value"),
        ),
        Err(e) => return fail(11, "numerics cluster", started, e),
    }
    check.finish(11, "numerics cluster", started)
}

/// Runs every criterion in order.
pub fn run_all(paper_scale: bool) -> Vec<CriterionResult> {
    vec![
        criterion_01(),
        criterion_02(),
        criterion_03(paper_scale),
        criterion_04(paper_scale),
        criterion_05(),
        criterion_06(),
        criterion_07(),
        criterion_08(),
        criterion_09(),
        criterion_10(paper_scale),
        criterion_11(),
    ]
}

//! Subcommand implementations: each produces CSV/JSON files under the
//! output directory and stays byte-deterministic for a fixed config + seed.

use std::path::Path;

use rayon::prelude::*;

use hjcore::fd::{grid_sample, lax_friedrichs_solve, Domain2D};
use hjcore::fields::Field;
use hjcore::games::{closed_form_gap, damped_pursuit_eval, programmed_maximin_p36, GameEval};
use hjcore::hj::{
    eval_value_grid, mayer_value_and_alignment, value_bolza_eikonal, value_eikonal,
    value_smooth_hopf_lax, AxisSpec, EikonalProblem, EvalMode, GridRow, RectangleGrid,
    SmoothSearch, ValueResult, ValueTable,
};
use hjcore::mpc::{build_open_loop, compare_report, simulate_runs, ControlLaw, McConfig};
use hjcore::numerics::RngSeed;
use hjcore::report::{sig9, value_table_csv};
use hjcore::selftest;
use hjcore::{Error, Result};

use crate::config::{
    BuiltProblem, FdConfig, RectangleConfig, ScenarioConfig, PAPER_DT_SDE, PAPER_FD_DT,
    PAPER_FD_DX, PAPER_RUNS,
};

pub struct Ctx<'a> {
    pub config: &'a ScenarioConfig,
    pub out_dir: &'a Path,
    pub seed_override: Option<u64>,
    pub paper_scale: bool,
}

fn write_file(out_dir: &Path, name: &str, contents: &str) -> Result<()> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| Error::InvalidConfig(format!("cannot create output directory: {e}")))?;
    std::fs::write(out_dir.join(name), contents)
        .map_err(|e| Error::InvalidConfig(format!("cannot write {name}: {e}")))
}

fn rectangle(config: &RectangleConfig) -> Result<RectangleGrid> {
    RectangleGrid::new(
        config
            .axes
            .iter()
            .map(|a| AxisSpec::new(a.lo, a.hi, a.step))
            .collect(),
        config.tail.clone(),
    )
}

/// Pointwise evaluator for the built problem; the closure is reused by the
/// `value` and `grid` commands.
fn point_evaluator<'a>(
    ctx: &'a Ctx<'_>,
    built: &'a BuiltProblem,
) -> Result<(
    usize,
    usize,
    Box<dyn Fn(f64, &[f64]) -> Result<ValueResult> + Sync + 'a>,
)> {
    let search = ctx.config.search(ctx.seed_override);
    let mode = ctx.config.mode();
    match built {
        BuiltProblem::Eikonal(problem) => {
            let n = problem.dim();
            let adjoint_dim = if problem.is_bolza() { n + 1 } else { n };
            let eval = move |t0: f64, x: &[f64]| {
                if problem.is_bolza() {
                    value_bolza_eikonal(problem, t0, x, &search)
                } else {
                    value_eikonal(problem, t0, x, &search, mode)
                }
            };
            Ok((n, adjoint_dim, Box::new(eval)))
        }
        BuiltProblem::Smooth(problem) => {
            let n = problem.dim();
            let solver = &ctx.config.solver;
            let counts = solver.sphere_counts.clone();
            let restarts = solver.powell_restarts;
            let tol = solver.powell_tol;
            let seed = ctx.seed_override.unwrap_or(solver.seed);
            let eval = move |t0: f64, x: &[f64]| {
                let search = if problem.is_homogeneous() {
                    SmoothSearch::SphereAndOrigin {
                        counts: counts.clone(),
                    }
                } else {
                    SmoothSearch::FreeStarts {
                        starts: hjcore::hj::random_angle_starts(
                            n + 1,
                            restarts,
                            &RngSeed::new(seed, 0),
                        )
                        .into_iter()
                        .map(|angles| angles[..n].to_vec())
                        .collect(),
                        tol,
                    }
                };
                value_smooth_hopf_lax(problem, t0, x, &search)
            };
            Ok((n, n, Box::new(eval)))
        }
        _ => Err(Error::InvalidConfig(
            "game scenarios are evaluated by the `game` subcommand".into(),
        )),
    }
}

pub fn cmd_value(ctx: &Ctx<'_>) -> Result<()> {
    let built = ctx.config.build_problem()?;
    let (n, adjoint_dim, eval) = point_evaluator(ctx, &built)?;
    let points = ctx
        .config
        .query
        .points
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("`value` needs query.points".into()))?;
    let t0 = ctx.config.query.t0;
    let rows: Vec<GridRow> = points
        .iter()
        .map(|x| GridRow {
            coords: x.clone(),
            outcome: eval(t0, x)
                .map(|r| hjcore::hj::RowValue {
                    value: r.value,
                    control: r.control_at_t0,
                    p0: r.p0_opt,
                    stop_time: r.stop_time,
                })
                .map_err(|e| e.to_string()),
        })
        .collect();
    let table = ValueTable {
        t0,
        state_dim: n,
        adjoint_dim,
        rows,
    };
    write_file(ctx.out_dir, "value.csv", &value_table_csv(&table))
}

pub fn cmd_grid(ctx: &Ctx<'_>) -> Result<()> {
    let built = ctx.config.build_problem()?;
    let (_n, adjoint_dim, eval) = point_evaluator(ctx, &built)?;
    let rect = ctx
        .config
        .query
        .rectangle
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("`grid` needs query.rectangle".into()))?;
    let grid = rectangle(rect)?;
    let table = eval_value_grid(ctx.config.query.t0, &grid, adjoint_dim, |t0, x| eval(t0, x));
    write_file(ctx.out_dir, "grid.csv", &value_table_csv(&table))
}

fn fd_settings(ctx: &Ctx<'_>, problem: &EikonalProblem, fd: &FdConfig) -> (Domain2D, (f64, f64), f64) {
    let domain = Domain2D {
        x1: (fd.domain[0][0], fd.domain[0][1]),
        x2: (fd.domain[1][0], fd.domain[1][1]),
    };
    let dx = if ctx.paper_scale {
        (PAPER_FD_DX, PAPER_FD_DX)
    } else {
        (fd.dx[0], fd.dx[1])
    };
    let dt = if ctx.paper_scale {
        PAPER_FD_DT
    } else {
        fd.dt.unwrap_or_else(|| {
            // 90% of the stability bound from a coarse speed sampling.
            let mut cmax: f64 = 0.0;
            for i in 0..100 {
                for j in 0..100 {
                    let x1 = domain.x1.0 + (domain.x1.1 - domain.x1.0) * i as f64 / 99.0;
                    let x2 = domain.x2.0 + (domain.x2.1 - domain.x2.0) * j as f64 / 99.0;
                    cmax = cmax.max(problem.speed().value(&[x1, x2]).abs());
                }
            }
            0.9 / (1.05 * cmax * (1.0 / dx.0 + 1.0 / dx.1))
        })
    };
    (domain, dx, dt)
}

pub fn cmd_fd_compare(ctx: &Ctx<'_>) -> Result<()> {
    let built = ctx.config.build_problem()?;
    let BuiltProblem::Eikonal(problem) = &built else {
        return Err(Error::InvalidConfig(
            "`fd-compare` needs a speed-field problem".into(),
        ));
    };
    if problem.dim() != 2 {
        return Err(Error::InvalidConfig(
            "the reference solver is two-dimensional".into(),
        ));
    }
    let fd = ctx
        .config
        .fd
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("`fd-compare` needs the fd section".into()))?;
    let rect = ctx
        .config
        .query
        .rectangle
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("`fd-compare` needs query.rectangle".into()))?;
    let grid = rectangle(rect)?;
    let t0 = ctx.config.query.t0;
    let (_n, _adjoint, eval) = point_evaluator(ctx, &built)?;

    let (domain, dx, dt) = fd_settings(ctx, problem, fd);
    let fd_grid = lax_friedrichs_solve(problem, domain, dx, dt, problem.horizon() - t0)?;

    let moc: Vec<Result<f64>> = (0..grid.node_count())
        .into_par_iter()
        .map(|flat| eval(t0, &grid.node(flat)).map(|r| r.value))
        .collect();
    let mut out = String::from("t,x1,x2,v_moc,v_fd,diff\n");
    for (flat, v) in moc.into_iter().enumerate() {
        let coords = grid.node(flat);
        let v = v?;
        let fd_v = grid_sample(&fd_grid, (coords[0], coords[1]))?;
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            sig9(t0),
            sig9(coords[0]),
            sig9(coords[1]),
            sig9(v),
            sig9(fd_v),
            sig9(v - fd_v)
        ));
    }
    write_file(ctx.out_dir, "fd_compare.csv", &out)
}

pub fn cmd_bvp_compare(ctx: &Ctx<'_>) -> Result<()> {
    let built = ctx.config.build_problem()?;
    let BuiltProblem::Eikonal(problem) = &built else {
        return Err(Error::InvalidConfig(
            "`bvp-compare` needs a terminal-cost speed-field problem".into(),
        ));
    };
    if problem.is_bolza() {
        return Err(Error::InvalidConfig(
            "the alignment comparator handles terminal-cost problems only".into(),
        ));
    }
    let rect = ctx
        .config
        .query
        .rectangle
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("`bvp-compare` needs query.rectangle".into()))?;
    let grid = rectangle(rect)?;
    let t0 = ctx.config.query.t0;
    let counts = ctx.config.solver.sphere_counts.clone();
    let mode = ctx.config.mode();

    let rows: Vec<Result<(Vec<f64>, f64, f64)>> = (0..grid.node_count())
        .into_par_iter()
        .map(|flat| {
            let coords = grid.node(flat);
            let (value, bvp) = mayer_value_and_alignment(problem, t0, &coords, &counts, mode)?;
            Ok((coords, value.value, bvp.value))
        })
        .collect();
    let n = problem.dim();
    let mut out = String::from("t,");
    for i in 1..=n {
        out.push_str(&format!("x{i},"));
    }
    out.push_str("v_moc,v_bvp,diff\n");
    for row in rows {
        let (coords, v, b) = row?;
        out.push_str(&sig9(t0));
        for c in &coords {
            out.push(',');
            out.push_str(&sig9(*c));
        }
        out.push_str(&format!(",{},{},{}\n", sig9(v), sig9(b), sig9(v - b)));
    }
    write_file(ctx.out_dir, "bvp_compare.csv", &out)
}

fn game_eval_csv(t0: f64, rows: &[(Vec<f64>, GameEval)], k: usize, m1: usize, m2: usize) -> String {
    let state_dim = rows.first().map(|(c, _)| c.len()).unwrap_or(0);
    let mut out = String::from("t,");
    for i in 1..=state_dim {
        out.push_str(&format!("x{i},"));
    }
    out.push_str("V,Vstar,Vtilde");
    for i in 1..=k {
        out.push_str(&format!(",lbar_{i}"));
    }
    for i in 1..=m1 {
        out.push_str(&format!(",ubar_{i}"));
    }
    for i in 1..=m2 {
        out.push_str(&format!(",vbar_{i}"));
    }
    out.push('\n');
    let push_opt = |out: &mut String, v: &Option<Vec<f64>>, len: usize| {
        for i in 0..len {
            out.push(',');
            if let Some(vals) = v {
                out.push_str(&sig9(vals[i]));
            }
        }
    };
    for (coords, eval) in rows {
        out.push_str(&sig9(t0));
        for c in coords {
            out.push(',');
            out.push_str(&sig9(*c));
        }
        out.push_str(&format!(
            ",{},{},{}",
            sig9(eval.v),
            sig9(eval.v_star),
            sig9(eval.v_tilde)
        ));
        push_opt(&mut out, &eval.lbar, k);
        push_opt(&mut out, &eval.ubar, m1);
        push_opt(&mut out, &eval.vbar, m2);
        out.push('\n');
    }
    out
}

pub fn cmd_game(ctx: &Ctx<'_>) -> Result<()> {
    let built = ctx.config.build_problem()?;
    let t0 = ctx.config.query.t0;
    let solver = &ctx.config.solver;

    // Query points: either explicit or a rectangle over leading coordinates.
    let points: Vec<Vec<f64>> = if let Some(points) = &ctx.config.query.points {
        points.clone()
    } else if let Some(rect) = &ctx.config.query.rectangle {
        let grid = rectangle(rect)?;
        (0..grid.node_count()).map(|flat| grid.node(flat)).collect()
    } else {
        return Err(Error::InvalidConfig(
            "`game` needs query.points or query.rectangle".into(),
        ));
    };

    let (rows, k, m1, m2) = match &built {
        BuiltProblem::PursuitClosedForm(params) => {
            let evals: Vec<Result<(Vec<f64>, GameEval)>> = points
                .par_iter()
                .map(|x| {
                    damped_pursuit_eval(params, t0, x, solver.angle_count)
                        .map(|e| (x.clone(), e))
                })
                .collect();
            let rows: Result<Vec<_>> = evals.into_iter().collect();
            (rows?, 2, 2, 2)
        }
        BuiltProblem::Game { game, gap } => {
            let gap_value = match gap {
                Some(g) => closed_form_gap(g, game.horizon, t0, solver.time_grid)?,
                None => 0.0,
            };
            let evals: Vec<Result<(Vec<f64>, GameEval)>> = points
                .par_iter()
                .map(|x| {
                    let maximin =
                        programmed_maximin_p36(game, t0, x, &solver.l_counts, solver.quad_n)?;
                    Ok((
                        x.clone(),
                        GameEval {
                            v: maximin.v_star.max(gap_value),
                            v_star: maximin.v_star,
                            v_tilde: maximin.v_tilde,
                            lbar: Some(maximin.l_opt),
                            ubar: None,
                            vbar: None,
                        },
                    ))
                })
                .collect();
            let rows: Result<Vec<_>> = evals.into_iter().collect();
            (rows?, game.k, game.b1.ncols(), game.b2.ncols())
        }
        _ => {
            return Err(Error::InvalidConfig(
                "`game` needs a game scenario".into(),
            ))
        }
    };
    write_file(ctx.out_dir, "game.csv", &game_eval_csv(t0, &rows, k, m1, m2))
}

pub fn cmd_mpc(ctx: &Ctx<'_>) -> Result<()> {
    let built = ctx.config.build_problem()?;
    let BuiltProblem::Eikonal(problem) = &built else {
        return Err(Error::InvalidConfig(
            "`mpc` needs a running-cost speed-field problem".into(),
        ));
    };
    if !problem.is_bolza() {
        return Err(Error::InvalidConfig(
            "`mpc` needs a running-cost problem".into(),
        ));
    }
    let section = ctx
        .config
        .mpc
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("`mpc` needs the mpc section".into()))?;
    let x0 = ctx
        .config
        .query
        .points
        .as_ref()
        .and_then(|p| p.first())
        .ok_or_else(|| Error::InvalidConfig("`mpc` needs query.points[0] as start".into()))?;
    let t0 = ctx.config.query.t0;
    let search = ctx.config.search(ctx.seed_override);
    let cfg = McConfig {
        dt_sde: if ctx.paper_scale {
            PAPER_DT_SDE
        } else {
            section.dt_sde
        },
        dt_recomp: section.dt_recomp,
        runs: if ctx.paper_scale {
            PAPER_RUNS
        } else {
            section.runs
        },
        seed: RngSeed::new(ctx.seed_override.unwrap_or(section.seed), 0),
        noise_diag: section.noise.clone(),
    };

    let schedule = build_open_loop(problem, t0, x0, &search)?;
    let ol = simulate_runs(problem, &ControlLaw::OpenLoop(&schedule), &cfg, t0, x0)?;
    let cl = simulate_runs(
        problem,
        &ControlLaw::Mpc {
            search: search.clone(),
        },
        &cfg,
        t0,
        x0,
    )?;
    let report = compare_report(&ol, &cl)?;

    let mut stats = String::from("t,mean_eta_ol,std_eta_ol,mean_eta_cl,std_eta_cl\n");
    for i in 0..ol.times.len() {
        stats.push_str(&format!(
            "{},{},{},{},{}\n",
            sig9(ol.times[i]),
            sig9(ol.mean_eta[i]),
            sig9(ol.std_eta[i]),
            sig9(cl.mean_eta[i]),
            sig9(cl.std_eta[i])
        ));
    }
    write_file(ctx.out_dir, "mpc_stats.csv", &stats)?;

    let summary = serde_json::json!({
        "j_open_loop": report.j_open_loop,
        "se_open_loop": report.se_open_loop,
        "j_closed_loop": report.j_closed_loop,
        "se_closed_loop": report.se_closed_loop,
        "difference": report.difference,
        "feedback_better": report.feedback_better,
        "deterministic_optimal_cost": schedule.optimal_cost,
        "hit_time": schedule.hit_time(),
        "runs": cfg.runs,
        "dt_sde": cfg.dt_sde,
    });
    let mut text = serde_json::to_string_pretty(&summary)
        .map_err(|e| Error::InvalidConfig(format!("summary serialization failed: {e}")))?;
    text.push('\n');
    write_file(ctx.out_dir, "mpc_summary.json", &text)
}

/// Runs the acceptance checks; returns true when everything passed.
pub fn cmd_selftest(paper_scale: bool) -> bool {
    let results = selftest::run_all(paper_scale);
    let mut ok = true;
    for r in &results {
        println!("{}", r.line());
        ok &= r.passed;
    }
    ok
}

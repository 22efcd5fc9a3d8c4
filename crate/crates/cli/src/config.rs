//! Scenario configuration: JSON schema and conversion into solver types.
//! Unknown keys are rejected everywhere; defaults follow the shipped
//! experiment settings.

use std::sync::Arc;

use serde::Deserialize;

use hjcore::fields::ScalarField;
use hjcore::games::{ConvexSet, DampedPursuitParams, GapExample, LinearGame, SystemMatrix};
use hjcore::hj::{
    AdjointSearch, EikonalProblem, EtaCondition, EvalMode, Sense, SigmaCondition,
    SmoothHamiltonianProblem, DEFAULT_CRITICAL_TOL,
};
use hjcore::numerics::{RngSeed, ToleranceSpec};
use hjcore::{Error, Result};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub query: QueryConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub fd: Option<FdConfig>,
    #[serde(default)]
    pub mpc: Option<MpcSection>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    Eikonal {
        horizon: f64,
        speed: ScalarField,
        terminal: ScalarField,
        #[serde(default)]
        terminal_condition: Option<ConditionConfig>,
    },
    BolzaEikonal {
        horizon: f64,
        speed: ScalarField,
        terminal: ScalarField,
        running: ScalarField,
        #[serde(default)]
        critical_point: Option<Vec<f64>>,
        #[serde(default)]
        critical_tol: Option<f64>,
    },
    SmoothH {
        dim: usize,
        horizon: f64,
        hamiltonian: HamiltonianConfig,
        terminal: ScalarField,
        sense: SenseConfig,
        #[serde(default)]
        homogeneous: bool,
    },
    GameEx28 {
        dim: usize,
        a1: f64,
        a2: f64,
        horizon: f64,
    },
    GameEx39 {
        a1: f64,
        a2: f64,
        horizon: f64,
    },
    GameEx40 {
        alpha: f64,
        a: f64,
        b: f64,
        u0: [f64; 2],
        horizon: f64,
    },
    GameEx34 {
        alpha: f64,
        a: f64,
        #[serde(default)]
        omega0: [f64; 2],
        b_pos: f64,
        #[serde(default)]
        omega_pos: [f64; 2],
        b_vel: f64,
        #[serde(default)]
        omega_vel: [f64; 2],
        horizon: f64,
    },
    GameP36 {
        game: GameConfig,
    },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionConfig {
    GradNonzero,
    CriticalAtOptimum,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SenseConfig {
    Min,
    Max,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HamiltonianConfig {
    /// `H(p) = 0.5 ||p||^2`.
    HalfNormSq,
    /// `H(p) = <velocity, p>`; degree-one homogeneous.
    Transport { velocity: Vec<f64> },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameConfig {
    pub n: usize,
    pub k: usize,
    pub a: Vec<Vec<f64>>,
    pub b1: Vec<Vec<f64>>,
    pub b2: Vec<Vec<f64>>,
    pub u1: ConvexSet,
    pub u2: ConvexSet,
    pub target: ConvexSet,
    pub horizon: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryConfig {
    #[serde(default)]
    pub t0: f64,
    #[serde(default)]
    pub points: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub rectangle: Option<RectangleConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RectangleConfig {
    pub axes: Vec<AxisConfig>,
    #[serde(default)]
    pub tail: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_evaluator")]
    pub evaluator: EvaluatorConfig,
    #[serde(default = "default_mode")]
    pub mode: ModeConfig,
    /// Per-angle counts of the adjoint sphere grid.
    #[serde(default = "default_sphere_counts")]
    pub sphere_counts: Vec<usize>,
    #[serde(default = "default_restarts")]
    pub powell_restarts: usize,
    #[serde(default = "default_powell_tol")]
    pub powell_tol: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_abs_tol")]
    pub abs_tol: f64,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_initial_step")]
    pub initial_step: f64,
    /// Direction-grid counts for game evaluations.
    #[serde(default = "default_l_counts")]
    pub l_counts: Vec<usize>,
    #[serde(default = "default_quad_n")]
    pub quad_n: usize,
    /// Angle grid for the damped-pursuit closed form.
    #[serde(default = "default_angle_count")]
    pub angle_count: usize,
    /// Dense time grid for running maxima.
    #[serde(default = "default_time_grid")]
    pub time_grid: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults are complete")
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum EvaluatorConfig {
    SphereGrid,
    Powell,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ModeConfig {
    Terminal,
    Scan,
}

fn default_evaluator() -> EvaluatorConfig {
    EvaluatorConfig::SphereGrid
}
fn default_mode() -> ModeConfig {
    ModeConfig::Terminal
}
fn default_sphere_counts() -> Vec<usize> {
    vec![1000]
}
fn default_restarts() -> usize {
    5
}
fn default_powell_tol() -> f64 {
    1e-7
}
fn default_seed() -> u64 {
    1_000
}
fn default_abs_tol() -> f64 {
    1e-5
}
fn default_rel_tol() -> f64 {
    1e-5
}
fn default_initial_step() -> f64 {
    1e-3
}
fn default_l_counts() -> Vec<usize> {
    vec![10_000]
}
fn default_quad_n() -> usize {
    256
}
fn default_angle_count() -> usize {
    10_000
}
fn default_time_grid() -> usize {
    10_001
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FdConfig {
    pub domain: [[f64; 2]; 2],
    #[serde(default = "default_dx")]
    pub dx: [f64; 2],
    /// Defaults to 90% of the stability bound when absent.
    #[serde(default)]
    pub dt: Option<f64>,
}

fn default_dx() -> [f64; 2] {
    [0.02, 0.02]
}

/// Full-resolution grid steps used under `--paper-scale`.
pub const PAPER_FD_DX: f64 = 5e-3;
pub const PAPER_FD_DT: f64 = 5e-4;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MpcSection {
    #[serde(default = "default_dt_sde")]
    pub dt_sde: f64,
    #[serde(default = "default_dt_recomp")]
    pub dt_recomp: f64,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub noise: Vec<f64>,
}

fn default_dt_sde() -> f64 {
    1e-3
}
fn default_dt_recomp() -> f64 {
    0.05
}
fn default_runs() -> usize {
    200
}

pub const PAPER_DT_SDE: f64 = 1e-5;
pub const PAPER_RUNS: usize = 1000;

/// A problem converted into solver types.
pub enum BuiltProblem {
    Eikonal(EikonalProblem),
    Smooth(SmoothHamiltonianProblem),
    PursuitClosedForm(DampedPursuitParams),
    Game {
        game: LinearGame,
        /// Closed-form correction, when the family has one.
        gap: Option<GapExample>,
    },
}

impl ScenarioConfig {
    pub fn tolerances(&self) -> ToleranceSpec {
        ToleranceSpec {
            abs_tol: self.solver.abs_tol,
            rel_tol: self.solver.rel_tol,
            initial_step: self.solver.initial_step,
            ..ToleranceSpec::default()
        }
    }

    pub fn search(&self, seed_override: Option<u64>) -> AdjointSearch {
        match self.solver.evaluator {
            EvaluatorConfig::SphereGrid => AdjointSearch::SphereGrid {
                counts: self.solver.sphere_counts.clone(),
            },
            EvaluatorConfig::Powell => AdjointSearch::Powell {
                restarts: self.solver.powell_restarts,
                tol: self.solver.powell_tol,
                seed: RngSeed::new(seed_override.unwrap_or(self.solver.seed), 0),
            },
        }
    }

    pub fn mode(&self) -> EvalMode {
        match self.solver.mode {
            ModeConfig::Terminal => EvalMode::Terminal,
            ModeConfig::Scan => EvalMode::ScanHorizon,
        }
    }

    pub fn build_problem(&self) -> Result<BuiltProblem> {
        let tol = self.tolerances();
        match &self.problem {
            ProblemConfig::Eikonal {
                horizon,
                speed,
                terminal,
                terminal_condition,
            } => {
                speed.validate()?;
                terminal.validate()?;
                let condition = terminal_condition.map(|c| match c {
                    ConditionConfig::GradNonzero => SigmaCondition::GradNonzero,
                    ConditionConfig::CriticalAtOptimum => SigmaCondition::CriticalAtOptimum,
                });
                let problem = EikonalProblem::mayer(
                    Arc::new(speed.clone()),
                    Arc::new(terminal.clone()),
                    *horizon,
                    condition,
                )?
                .with_tolerances(tol);
                Ok(BuiltProblem::Eikonal(problem))
            }
            ProblemConfig::BolzaEikonal {
                horizon,
                speed,
                terminal,
                running,
                critical_point,
                critical_tol,
            } => {
                speed.validate()?;
                terminal.validate()?;
                running.validate()?;
                let condition = match critical_point {
                    Some(point) => EtaCondition::CriticalPoint {
                        point: point.clone(),
                        tol: critical_tol.unwrap_or(DEFAULT_CRITICAL_TOL),
                    },
                    None => EtaCondition::GradNonzero,
                };
                let problem = EikonalProblem::bolza(
                    Arc::new(speed.clone()),
                    Arc::new(terminal.clone()),
                    Arc::new(running.clone()),
                    *horizon,
                    condition,
                )?
                .with_tolerances(tol);
                Ok(BuiltProblem::Eikonal(problem))
            }
            ProblemConfig::SmoothH {
                dim,
                horizon,
                hamiltonian,
                terminal,
                sense,
                homogeneous,
            } => {
                terminal.validate()?;
                let sense = match sense {
                    SenseConfig::Min => Sense::Min,
                    SenseConfig::Max => Sense::Max,
                };
                let problem = match hamiltonian {
                    HamiltonianConfig::HalfNormSq => SmoothHamiltonianProblem::new(
                        *dim,
                        Arc::new(|_t, _x, p: &[f64]| {
                            0.5 * p.iter().map(|v| v * v).sum::<f64>()
                        }),
                        Arc::new(|_t, _x, _p: &[f64], g: &mut [f64]| g.fill(0.0)),
                        Arc::new(|_t, _x, p: &[f64], g: &mut [f64]| g.copy_from_slice(p)),
                        Arc::new(terminal.clone()),
                        *horizon,
                        sense,
                        *homogeneous,
                    )?,
                    HamiltonianConfig::Transport { velocity } => {
                        if velocity.len() != *dim {
                            return Err(Error::DimensionMismatch {
                                expected: *dim,
                                got: velocity.len(),
                            });
                        }
                        let v1 = velocity.clone();
                        let v2 = velocity.clone();
                        SmoothHamiltonianProblem::new(
                            *dim,
                            Arc::new(move |_t, _x, p: &[f64]| {
                                v1.iter().zip(p).map(|(a, b)| a * b).sum()
                            }),
                            Arc::new(|_t, _x, _p: &[f64], g: &mut [f64]| g.fill(0.0)),
                            Arc::new(move |_t, _x, _p: &[f64], g: &mut [f64]| {
                                g.copy_from_slice(&v2)
                            }),
                            Arc::new(terminal.clone()),
                            *horizon,
                            sense,
                            *homogeneous,
                        )?
                    }
                };
                Ok(BuiltProblem::Smooth(problem.with_tolerances(tol)))
            }
            ProblemConfig::GameEx28 {
                dim,
                a1,
                a2,
                horizon,
            } => Ok(BuiltProblem::Game {
                game: LinearGame::isotropic_ball_game(*dim, *a1, *a2, *horizon),
                gap: None,
            }),
            ProblemConfig::GameEx39 { a1, a2, horizon } => Ok(BuiltProblem::Game {
                game: hjcore::games::double_integrator_game(*a1, *a2, *horizon),
                gap: Some(GapExample::DoubleIntegrator { a1: *a1, a2: *a2 }),
            }),
            ProblemConfig::GameEx40 {
                alpha,
                a,
                b,
                u0,
                horizon,
            } => {
                let params = DampedPursuitParams {
                    alpha: *alpha,
                    a: *a,
                    b: *b,
                    u0: *u0,
                    horizon: *horizon,
                };
                params.validate()?;
                Ok(BuiltProblem::PursuitClosedForm(params))
            }
            ProblemConfig::GameEx34 {
                alpha,
                a,
                omega0,
                b_pos,
                omega_pos,
                b_vel,
                omega_vel,
                horizon,
            } => Ok(BuiltProblem::Game {
                game: hjcore::games::damped_mixed_game(
                    *alpha, *a, *omega0, *b_pos, *omega_pos, *b_vel, *omega_vel, *horizon,
                ),
                gap: Some(GapExample::DampedMixed {
                    alpha: *alpha,
                    a: *a,
                    b_pos: *b_pos,
                    b_vel: *b_vel,
                }),
            }),
            ProblemConfig::GameP36 { game } => {
                let n = game.n;
                let to_matrix = |rows: &Vec<Vec<f64>>, name: &str| -> Result<nalgebra::DMatrix<f64>> {
                    let r = rows.len();
                    let c = rows.first().map(|row| row.len()).unwrap_or(0);
                    if rows.iter().any(|row| row.len() != c) {
                        return Err(Error::InvalidConfig(format!("{name} must be rectangular")));
                    }
                    Ok(nalgebra::DMatrix::from_fn(r, c, |i, j| rows[i][j]))
                };
                let a = to_matrix(&game.a, "a")?;
                if a.nrows() != n || a.ncols() != n {
                    return Err(Error::InvalidConfig("a must be n x n".into()));
                }
                let built = LinearGame {
                    n,
                    k: game.k,
                    a: SystemMatrix::Constant(a),
                    b1: to_matrix(&game.b1, "b1")?,
                    b2: to_matrix(&game.b2, "b2")?,
                    u1: game.u1.clone(),
                    u2: game.u2.clone(),
                    target: game.target.clone(),
                    horizon: game.horizon,
                };
                built.validate()?;
                Ok(BuiltProblem::Game {
                    game: built,
                    gap: None,
                })
            }
        }
    }
}

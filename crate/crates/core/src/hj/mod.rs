//! Pointwise value evaluation along adjoint-parametrized characteristics,
//! feedback extraction, and the boundary-value alignment comparator.

mod charsys;
mod eikonal;
mod grid;
mod problem;
mod smooth;

pub use charsys::{CharState, ExtendedPair, ADJOINT_ZERO_EPS};
pub(crate) use eikonal::unit_candidates;
pub use eikonal::{
    feedback_control, mayer_value_and_alignment, random_angle_starts, random_box_point,
    value_bvp_align, value_bolza_eikonal, value_eikonal, AdjointSearch, EvalMode,
};
pub use grid::{eval_value_grid, AxisSpec, GridRow, RectangleGrid, RowValue, ValueTable};
pub use problem::{
    EikonalProblem, EtaCondition, FieldRef, HamiltonianFn, HamiltonianGradFn, Sense,
    SigmaCondition, SmoothHamiltonianProblem, DEFAULT_CRITICAL_TOL,
};
pub use smooth::{value_smooth_hopf_lax, SmoothSearch};

use crate::numerics::Trajectory;

/// Value at one position together with the optimizer that produced it.
///
/// `p0_opt` is the winning initial adjoint (extended by the constant cost
/// adjoint for running-cost problems). The trajectory stores the flattened
/// characteristic: `[x, p]`, plus one trailing accumulated-cost coordinate
/// for running-cost and smooth-Hamiltonian problems. `control_at_t0` lies in
/// the closed unit ball and has unit norm whenever the state part of
/// `p0_opt` is nonzero.
#[derive(Debug, Clone)]
pub struct ValueResult {
    pub value: f64,
    pub p0_opt: Vec<f64>,
    pub trajectory: Trajectory,
    pub control_at_t0: Vec<f64>,
    pub stop_time: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::fields::{Field, ScalarField};
    use crate::numerics::RngSeed;
    use crate::selftest::{data, oracle};
    use std::sync::Arc;

    fn min_ball_problem() -> EikonalProblem {
        // Unit inward speed, half-squared-norm terminal cost.
        EikonalProblem::mayer(
            Arc::new(ScalarField::Constant {
                dim: 2,
                value: -1.0,
            }),
            Arc::new(ScalarField::NormSquaredHalf { dim: 2 }),
            0.5,
            None,
        )
        .unwrap()
    }

    fn grid_search(count: usize) -> AdjointSearch {
        AdjointSearch::grid(vec![count])
    }

    #[test]
    fn trivial_horizon_returns_terminal_cost() {
        let p = data::mayer_benchmark(2, 0.5).unwrap();
        let r = value_eikonal(
            &p,
            0.5,
            &[0.7, -0.3],
            &grid_search(100),
            EvalMode::Terminal,
        )
        .unwrap();
        assert_eq!(r.value, p.sigma().value(&[0.7, -0.3]));
        assert_eq!(r.trajectory.len(), 1);
        assert_eq!(r.control_at_t0, vec![0.0, 0.0]);
    }

    #[test]
    fn past_horizon_rejected() {
        let p = data::mayer_benchmark(2, 0.5).unwrap();
        let err = value_eikonal(
            &p,
            0.6,
            &[0.0, 0.0],
            &grid_search(10),
            EvalMode::Terminal,
        )
        .unwrap_err();
        assert!(matches!(err, Error::EmptyHorizon { .. }));
    }

    #[test]
    fn terminal_mode_needs_declared_condition() {
        let p = min_ball_problem();
        let err = value_eikonal(
            &p,
            0.0,
            &[1.0, 0.0],
            &grid_search(10),
            EvalMode::Terminal,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidProblem(_)));
    }

    #[test]
    fn inward_drive_matches_disc_oracle() {
        let p = min_ball_problem();
        let r = value_eikonal(
            &p,
            0.0,
            &[1.0, 0.0],
            &grid_search(1000),
            EvalMode::ScanHorizon,
        )
        .unwrap();
        let want = oracle::disc_extremum(p.sigma(), &[1.0, 0.0], 0.5, Sense::Min, 64, 512);
        assert!((want - 0.125).abs() < 1e-6);
        assert!((r.value - 0.125).abs() < 1e-3, "value {}", r.value);
        // The optimal drive points at the origin.
        assert!((r.control_at_t0[0] - 1.0).abs() < 1e-2, "{:?}", r.control_at_t0);
        assert!(r.control_at_t0[1].abs() < 1e-2);
    }

    #[test]
    fn outward_expansion_matches_disc_oracle() {
        let p = data::constant_speed_surrogate(2, 1.0, 0.5).unwrap();
        let r = value_eikonal(
            &p,
            0.0,
            &[0.0, 0.0],
            &grid_search(1000),
            EvalMode::Terminal,
        )
        .unwrap();
        assert!((r.value - (-0.375)).abs() < 1e-3, "value {}", r.value);
        let o = oracle::disc_extremum(p.sigma(), &[0.0, 0.0], 0.5, Sense::Max, 64, 512);
        assert!((r.value - o).abs() < 1e-3);
    }

    #[test]
    fn powell_search_agrees_with_grid() {
        let p = data::mayer_benchmark(2, 0.5).unwrap();
        for x0 in [[2.0, 0.0], [-1.0, 0.5], [0.3, -1.2]] {
            let g = value_eikonal(&p, 0.0, &x0, &grid_search(2000), EvalMode::Terminal).unwrap();
            let w = value_eikonal(
                &p,
                0.0,
                &x0,
                &AdjointSearch::powell(5, 1e-7, RngSeed::new(11, 0)),
                EvalMode::Terminal,
            )
            .unwrap();
            assert!((g.value - w.value).abs() < 1e-3, "{} vs {}", g.value, w.value);
        }
    }

    #[test]
    fn powell_search_is_deterministic() {
        let p = data::mayer_benchmark(2, 0.5).unwrap();
        let search = AdjointSearch::powell(5, 1e-7, RngSeed::new(3, 9));
        let a = value_eikonal(&p, 0.0, &[1.3, 0.4], &search, EvalMode::Terminal).unwrap();
        let b = value_eikonal(&p, 0.0, &[1.3, 0.4], &search, EvalMode::Terminal).unwrap();
        assert_eq!(a.value, b.value);
        assert_eq!(a.p0_opt, b.p0_opt);
    }

    #[test]
    fn adjoint_norm_stays_positive_on_benchmark() {
        let p = data::mayer_benchmark(2, 0.5).unwrap();
        let r = value_eikonal(
            &p,
            0.0,
            &[2.0, 0.5],
            &grid_search(64),
            EvalMode::Terminal,
        )
        .unwrap();
        let tr = &r.trajectory;
        let mut probe = vec![0.0; tr.dim()];
        for j in 0..=200 {
            let t = 0.5 * j as f64 / 200.0;
            tr.state_at_into(t, &mut probe);
            let pn = (probe[2] * probe[2] + probe[3] * probe[3]).sqrt();
            assert!(pn >= 1e-8, "adjoint norm {pn} at t = {t}");
        }
    }

    #[test]
    fn state_path_invariant_under_adjoint_scaling() {
        use crate::hj::charsys::mayer_flat_rhs;
        use crate::numerics::integrate_adaptive;
        let p = data::mayer_benchmark(2, 0.5).unwrap();
        let angle: f64 = 0.93;
        let base = [angle.sin(), angle.cos()];
        let mut run = |scale: f64| {
            let y0 = vec![1.1, -0.4, scale * base[0], scale * base[1]];
            integrate_adaptive(mayer_flat_rhs(&p), 0.0, 0.5, &y0, p.tolerances()).unwrap()
        };
        let a = run(1.0);
        let b = run(2.0);
        for (ya, yb) in a.end_state()[..2].iter().zip(&b.end_state()[..2]) {
            assert!((ya - yb).abs() < 1e-5, "{ya} vs {yb}");
        }
    }

    #[test]
    fn stationary_tie_reports_zero_control() {
        // Constant terminal cost: every candidate ties, the stationary
        // freeze selection wins.
        let p = EikonalProblem::mayer(
            Arc::new(ScalarField::Constant {
                dim: 2,
                value: -1.0,
            }),
            Arc::new(ScalarField::Constant { dim: 2, value: 3.0 }),
            0.5,
            Some(SigmaCondition::CriticalAtOptimum),
        )
        .unwrap();
        let r = value_eikonal(
            &p,
            0.0,
            &[1.0, 1.0],
            &grid_search(16),
            EvalMode::Terminal,
        )
        .unwrap();
        assert_eq!(r.value, 3.0);
        assert_eq!(r.control_at_t0, vec![0.0, 0.0]);
        assert_eq!(r.p0_opt, vec![0.0, 0.0]);
    }

    #[test]
    fn running_cost_from_critical_point_is_free() {
        let p = data::running_cost_benchmark(2, 1.0).unwrap();
        let r = value_bolza_eikonal(&p, 0.0, &[0.0, 0.0], &grid_search(24)).unwrap();
        assert!(r.value.abs() < 1e-9, "value {}", r.value);
        assert_eq!(r.control_at_t0, vec![0.0, 0.0]);
        assert_eq!(r.stop_time, Some(0.0));
    }

    #[test]
    fn one_dimensional_running_cost_oracle() {
        let p = EikonalProblem::bolza(
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
        .unwrap();
        let r = value_bolza_eikonal(&p, 0.0, &[1.0], &grid_search(720)).unwrap();
        assert!((r.value - 1.0 / 6.0).abs() < 1e-3, "value {}", r.value);
        let brute = oracle::best_piecewise_cost_1d(1.0, 1.0, 8);
        assert!((r.value - brute).abs() < 1e-3);
        // The winner drives toward the origin the whole way.
        assert!((r.control_at_t0[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn bolza_trivial_horizon() {
        let p = data::running_cost_benchmark(2, 1.0).unwrap();
        let r = value_bolza_eikonal(&p, 1.0, &[0.4, 0.2], &grid_search(8)).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.trajectory.len(), 1);
    }

    #[test]
    fn bolza_and_mayer_entry_points_guard_their_shapes() {
        let mayer = data::mayer_benchmark(2, 0.5).unwrap();
        assert!(value_bolza_eikonal(&mayer, 0.0, &[0.0; 2], &grid_search(8)).is_err());
        let bolza = data::running_cost_benchmark(2, 1.0).unwrap();
        assert!(value_eikonal(
            &bolza,
            0.0,
            &[0.0; 2],
            &grid_search(8),
            EvalMode::ScanHorizon
        )
        .is_err());
    }

    struct LinearField {
        b: Vec<f64>,
    }

    impl Field for LinearField {
        fn dim(&self) -> usize {
            self.b.len()
        }
        fn value(&self, x: &[f64]) -> f64 {
            self.b.iter().zip(x).map(|(bi, xi)| bi * xi).sum()
        }
        fn eval_grad_into(&self, x: &[f64], grad: &mut [f64]) -> f64 {
            grad.copy_from_slice(&self.b);
            self.value(x)
        }
    }

    #[test]
    fn quadratic_hamiltonian_free_search() {
        // Characteristics are straight lines; the optimum over the initial
        // adjoint sits at the cost gradient.
        let problem = SmoothHamiltonianProblem::new(
            2,
            Arc::new(|_t, _x, p: &[f64]| 0.5 * p.iter().map(|v| v * v).sum::<f64>()),
            Arc::new(|_t, _x, _p: &[f64], g: &mut [f64]| g.fill(0.0)),
            Arc::new(|_t, _x, p: &[f64], g: &mut [f64]| g.copy_from_slice(p)),
            Arc::new(LinearField { b: vec![1.0, 0.0] }),
            1.0,
            Sense::Max,
            false,
        )
        .unwrap();
        let r = value_smooth_hopf_lax(
            &problem,
            0.0,
            &[0.0, 0.0],
            &SmoothSearch::FreeStarts {
                starts: vec![vec![0.3, -0.8], vec![-1.0, 1.0]],
                tol: 1e-10,
            },
        )
        .unwrap();
        assert!((r.value - 0.5).abs() < 1e-4, "value {}", r.value);
        assert!((r.p0_opt[0] - 1.0).abs() < 1e-3 && r.p0_opt[1].abs() < 1e-3);
    }

    #[test]
    fn transport_hamiltonian_shifts_the_cost() {
        let a = [0.4, -0.7];
        let problem = SmoothHamiltonianProblem::new(
            2,
            Arc::new(move |_t, _x, p: &[f64]| a[0] * p[0] + a[1] * p[1]),
            Arc::new(|_t, _x, _p: &[f64], g: &mut [f64]| g.fill(0.0)),
            Arc::new(move |_t, _x, _p: &[f64], g: &mut [f64]| g.copy_from_slice(&a)),
            Arc::new(ScalarField::NormSquaredHalf { dim: 2 }),
            1.0,
            Sense::Max,
            true,
        )
        .unwrap();
        // Degree-one homogeneity holds, so the sphere-and-origin search is
        // permitted; every candidate gives the same shifted cost.
        let x0 = [1.0, 2.0];
        let r = value_smooth_hopf_lax(
            &problem,
            0.25,
            &x0,
            &SmoothSearch::SphereAndOrigin { counts: vec![16] },
        )
        .unwrap();
        let shifted = [x0[0] + 0.75 * a[0], x0[1] + 0.75 * a[1]];
        let want = 0.5 * (shifted[0] * shifted[0] + shifted[1] * shifted[1]);
        assert!((r.value - want).abs() < 1e-6, "{} vs {want}", r.value);
    }

    #[test]
    fn smooth_trivial_horizon_and_sphere_guard() {
        let problem = SmoothHamiltonianProblem::new(
            1,
            Arc::new(|_t, _x, p: &[f64]| 0.5 * p[0] * p[0]),
            Arc::new(|_t, _x, _p: &[f64], g: &mut [f64]| g.fill(0.0)),
            Arc::new(|_t, _x, p: &[f64], g: &mut [f64]| g.copy_from_slice(p)),
            Arc::new(ScalarField::NormSquaredHalf { dim: 1 }),
            1.0,
            Sense::Max,
            false,
        )
        .unwrap();
        let r = value_smooth_hopf_lax(
            &problem,
            1.0,
            &[2.0],
            &SmoothSearch::FreeStarts {
                starts: vec![vec![0.0]],
                tol: 1e-8,
            },
        )
        .unwrap();
        assert_eq!(r.value, 2.0);
        // Sphere search without the homogeneity declaration is rejected.
        assert!(value_smooth_hopf_lax(
            &problem,
            0.0,
            &[2.0],
            &SmoothSearch::SphereAndOrigin { counts: vec![8] }
        )
        .is_err());
    }

    #[test]
    fn feedback_points_toward_the_minimum() {
        let p = min_ball_problem();
        let u = feedback_control(
            &p,
            0.0,
            &[1.0, 0.0],
            &grid_search(2000),
            EvalMode::ScanHorizon,
        )
        .unwrap();
        assert!((u[0] - 1.0).abs() < 1e-2 && u[1].abs() < 1e-2, "{u:?}");
    }

    #[test]
    fn alignment_comparator_agrees_where_smooth() {
        let p = data::mayer_benchmark(2, 0.5).unwrap();
        let (value, bvp) =
            mayer_value_and_alignment(&p, 0.0, &[2.0, 0.0], &[1000], EvalMode::Terminal).unwrap();
        assert!(
            (value.value - bvp.value).abs() < 1e-3,
            "{} vs {}",
            value.value,
            bvp.value
        );
        // Max-sense domination: every characteristic is feasible.
        for x0 in [[0.5, 0.5], [-1.0, 0.2], [1.5, -1.0]] {
            let (v, b) =
                mayer_value_and_alignment(&p, 0.0, &x0, &[500], EvalMode::Terminal).unwrap();
            assert!(b.value <= v.value + 1e-6);
        }
        let r = value_bvp_align(&p, 0.5, &[2.0, 0.0], &[100]).unwrap();
        assert_eq!(r.value, p.sigma().value(&[2.0, 0.0]));
    }

    #[test]
    fn value_grid_shape_and_determinism() {
        let p = data::mayer_benchmark(2, 0.5).unwrap();
        let grid = RectangleGrid::new(
            vec![AxisSpec::new(-1.0, 1.0, 1.0), AxisSpec::new(-0.5, 0.5, 0.5)],
            vec![],
        )
        .unwrap();
        let eval = |t0: f64, x: &[f64]| {
            value_eikonal(&p, t0, x, &grid_search(64), EvalMode::Terminal)
        };
        let table = eval_value_grid(0.0, &grid, 2, eval);
        assert_eq!(table.rows.len(), 9);
        // Each row equals the pointwise evaluation.
        let lone = eval(0.0, &table.rows[4].coords).unwrap();
        assert_eq!(table.rows[4].outcome.as_ref().unwrap().value, lone.value);

        // Worker count must not change a single bit.
        let pool1 = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let pool4 = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        let t1 = pool1.install(|| eval_value_grid(0.0, &grid, 2, eval));
        let t4 = pool4.install(|| eval_value_grid(0.0, &grid, 2, eval));
        for (a, b) in t1.rows.iter().zip(&t4.rows) {
            let (a, b) = (a.outcome.as_ref().unwrap(), b.outcome.as_ref().unwrap());
            assert_eq!(a.value.to_bits(), b.value.to_bits());
            assert_eq!(a.control, b.control);
        }
    }
}

//! Linear zero-sum differential-game values: support-function algebra,
//! state-transition matrices, programmed maximin, closed-loop values with
//! saddle strategies, and the worked game families.
//!
//! Evaluations are pure; positions can be processed in parallel.

mod convex;
mod linear;
mod saddle;

pub use convex::{arg_support, support, ConvexSet};
pub use linear::{
    cauchy_matrix, programmed_maximin_p36, transition_matrix_residual, LinearGame, MaximinEval,
    SystemMatrix,
};
pub use saddle::{
    closed_form_gap, damped_mixed_game, damped_pursuit_eval, double_integrator_game, generic_gap,
    value_saddle_thm38, DampedPursuitParams, GameDecomposition, GapExample, SaddleOptions,
};

/// Closed-loop evaluation at one position: the value `v`, the programmed
/// maximin `v_star` with its pre-truncation variant `v_tilde`, and, outside
/// the indifference region, the extremal direction `lbar` with the saddle
/// controls `ubar` (minimizer) and `vbar` (maximizer).
#[derive(Debug, Clone)]
pub struct GameEval {
    pub v: f64,
    pub v_star: f64,
    pub v_tilde: f64,
    pub lbar: Option<Vec<f64>>,
    pub ubar: Option<Vec<f64>>,
    pub vbar: Option<Vec<f64>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngSeed;
    use rand::Rng;

    fn standard_params() -> DampedPursuitParams {
        DampedPursuitParams {
            alpha: 1.0,
            a: 0.2,
            b: 0.1,
            u0: [0.0, 0.0],
            horizon: 2.0,
        }
    }

    #[test]
    fn margin_peak_matches_analytic_value() {
        // Analytic peak of the margin: 0.1 - 0.1 ln 2 at tau = ln 2.
        let p = standard_params();
        let (t_max, m_max) = saddle::grid_refine_max(|t| p.margin(t), 0.0, 2.0, 10_001);
        let exact = 0.1 - 0.1 * std::f64::consts::LN_2;
        assert!((m_max - exact).abs() < 1e-10, "peak {m_max}");
        assert!((2.0 - t_max - std::f64::consts::LN_2).abs() < 1e-5);
    }

    #[test]
    fn pursuit_value_at_origin_is_margin_peak() {
        let p = standard_params();
        let eval = damped_pursuit_eval(&p, 0.0, &[0.0; 4], 10_000).unwrap();
        assert!((eval.v - 0.0307).abs() < 5e-4, "v = {}", eval.v);
        assert_eq!(eval.ubar, Some(vec![0.0, 0.0]));
        assert_eq!(eval.vbar, Some(vec![0.0, 0.0]));
        assert!(eval.lbar.is_none());
    }

    #[test]
    fn pursuit_value_far_from_origin() {
        let p = standard_params();
        let eval = damped_pursuit_eval(&p, 0.0, &[10.0, 0.0, 0.0, 0.0], 10_000).unwrap();
        assert!((eval.v - 9.9729).abs() < 1e-3, "v = {}", eval.v);
        let lbar = eval.lbar.unwrap();
        assert!((lbar[0] - 1.0).abs() < 1e-6 && lbar[1].abs() < 1e-6);
        let ubar = eval.ubar.unwrap();
        assert!((ubar[0] + 0.2).abs() < 1e-6 && ubar[1].abs() < 1e-6);
        let vbar = eval.vbar.unwrap();
        assert!((vbar[0] - 0.1).abs() < 1e-6 && vbar[1].abs() < 1e-6);
    }

    #[test]
    fn closed_loop_agrees_with_decomposition_path() {
        let p = standard_params();
        let game = p.game();
        let dec = p.decomposition();
        let opts = SaddleOptions {
            l_counts: vec![4096],
            quad_n: 256,
            ..Default::default()
        };
        let mut rng = RngSeed::new(42, 0).rng();
        for _ in 0..50 {
            let x: Vec<f64> = (0..4).map(|_| rng.random::<f64>() * 0.4 - 0.2).collect();
            let a = value_saddle_thm38(&game, &dec, 0.0, &x, &opts).unwrap();
            let b = damped_pursuit_eval(&p, 0.0, &x, 4096).unwrap();
            assert!(
                (a.v - b.v).abs() < 1e-6,
                "x = {x:?}: {} vs {}",
                a.v,
                b.v
            );
            assert!((a.v_star - b.v_star).abs() < 1e-6);
            assert!((a.v_tilde - b.v_tilde).abs() < 1e-6);
        }
    }

    #[test]
    fn saddle_empty_horizon_is_payoff() {
        let p = standard_params();
        let game = p.game();
        let dec = p.decomposition();
        let opts = SaddleOptions {
            l_counts: vec![4096],
            ..Default::default()
        };
        let x = [0.3, -0.4, 7.0, 7.0];
        let eval = value_saddle_thm38(&game, &dec, 2.0, &x, &opts).unwrap();
        assert!((eval.v - 0.5).abs() < 1e-9, "v = {}", eval.v);
    }

    #[test]
    fn inconsistent_decomposition_rejected() {
        let p = standard_params();
        let game = p.game();
        let mut dec = p.decomposition();
        let margin = dec.margin.clone();
        dec.margin = std::sync::Arc::new(move |t| margin(t) + 1e-3);
        let err =
            value_saddle_thm38(&game, &dec, 0.0, &[0.0; 4], &SaddleOptions::default()).unwrap_err();
        assert!(matches!(
            err,
            crate::error::Error::DecompositionInconsistent { .. }
        ));
    }

    #[test]
    fn gap_families() {
        let g = closed_form_gap(
            &GapExample::DoubleIntegrator { a1: 1.0, a2: 1.0 },
            1.0,
            0.0,
            10_001,
        )
        .unwrap();
        assert!((g - 0.5).abs() < 1e-10);

        let g = closed_form_gap(
            &GapExample::DampedMixed {
                alpha: 1.0,
                a: 0.2,
                b_pos: 0.1,
                b_vel: 0.0,
            },
            2.0,
            0.0,
            10_001,
        )
        .unwrap();
        assert!((g - 0.0307).abs() < 5e-4, "gap {g}");
        let exact = 0.1 - 0.1 * std::f64::consts::LN_2;
        assert!((g - exact).abs() < 1e-10);

        // With no disturbance radius the rate is nonpositive everywhere and
        // the running maximum degenerates to its boundary value zero.
        let g = closed_form_gap(
            &GapExample::DoubleIntegrator { a1: 1.0, a2: 0.0 },
            1.0,
            0.0,
            10_001,
        )
        .unwrap();
        assert!(g.abs() < 1e-12, "degenerate gap {g}");
    }

    #[test]
    fn generic_gap_matches_damped_mixed() {
        let alpha = 1.0;
        let gain_int =
            move |t: f64| (2.0 - t) / alpha - (1.0 - (-alpha * (2.0 - t)).exp()) / (alpha * alpha);
        let g = generic_gap(
            |t| (2.0 - t) * 0.1,
            move |t| gain_int(t) * 0.2,
            0.0,
            2.0,
            0.0,
            10_001,
        );
        assert!((g - (0.1 - 0.1 * std::f64::consts::LN_2)).abs() < 1e-10);
    }

    #[test]
    fn value_dominates_maximin_and_time_consistency() {
        let p = standard_params();
        let mut rng = RngSeed::new(7, 0).rng();
        for _ in 0..40 {
            let x: Vec<f64> = (0..4).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let t0 = 1.9 * rng.random::<f64>();
            let e = damped_pursuit_eval(&p, t0, &x, 4000).unwrap();
            assert!(e.v >= e.v_star && e.v_star >= 0.0);
            assert!((e.v_star - e.v_tilde.max(0.0)).abs() < 1e-14);
        }
        // At the origin the value is the margin peak, nonincreasing in t0.
        let mut last = f64::INFINITY;
        for j in 0..20 {
            let t0 = j as f64 * 0.1;
            let e = damped_pursuit_eval(&p, t0, &[0.0; 4], 2000).unwrap();
            assert!(e.v <= last + 1e-12, "value increased at t0 = {t0}");
            last = e.v;
        }
    }

    #[test]
    fn support_homogeneity_and_additivity_on_composites() {
        let mut rng = RngSeed::new(99, 0).rng();
        for _ in 0..50 {
            let a = ConvexSet::ball2(3, rng.random::<f64>())
                .translate(vec![rng.random(), rng.random(), rng.random()]);
            let b = ConvexSet::segment(vec![rng.random(), rng.random(), rng.random()])
                .scale(rng.random::<f64>() * 2.0);
            let sum = a.clone().minkowski_sum(b.clone());
            let l: Vec<f64> = (0..3).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let alpha = rng.random::<f64>() * 3.0 + 0.1;
            let scaled: Vec<f64> = l.iter().map(|v| alpha * v).collect();
            assert!(
                (support(&sum, &scaled) - alpha * support(&sum, &l)).abs() < 1e-12,
                "positive homogeneity"
            );
            assert!(
                (support(&sum, &l) - support(&a, &l) - support(&b, &l)).abs() < 1e-12,
                "additivity over the sum"
            );
        }
    }
}

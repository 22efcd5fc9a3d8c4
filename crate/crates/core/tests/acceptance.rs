//! Acceptance suite: every shipped claim checked at its pinned tolerance,
//! one test per criterion. Run with `--nocapture` to see the detail lines;
//! the same checks back the CLI `selftest` subcommand.

use hjcore::selftest::{criteria, CriterionResult};

fn assert_pass(result: CriterionResult) {
    println!("{}", result.line());
    assert!(result.passed, "{}", result.line());
}

#[test]
fn acceptance_01_pursuit_margin_peak() {
    assert_pass(criteria::criterion_01());
}

#[test]
fn acceptance_02_pursuit_value_surfaces() {
    assert_pass(criteria::criterion_02());
}

#[test]
fn acceptance_03_reachable_disc_oracle() {
    assert_pass(criteria::criterion_03(false));
}

#[test]
fn acceptance_04_cross_method_agreement() {
    assert_pass(criteria::criterion_04(false));
}

#[test]
fn acceptance_05_alignment_comparator_bound() {
    assert_pass(criteria::criterion_05());
}

#[test]
fn acceptance_06_sphere_grid_stability() {
    assert_pass(criteria::criterion_06());
}

#[test]
fn acceptance_07_search_equivalence() {
    assert_pass(criteria::criterion_07());
}

#[test]
fn acceptance_08_ball_game_closed_form() {
    assert_pass(criteria::criterion_08());
}

#[test]
fn acceptance_09_running_cost_oracle() {
    assert_pass(criteria::criterion_09());
}

#[test]
fn acceptance_10_noise_mitigation_experiment() {
    assert_pass(criteria::criterion_10(false));
}

#[test]
fn acceptance_11_numerics_cluster() {
    assert_pass(criteria::criterion_11());
}

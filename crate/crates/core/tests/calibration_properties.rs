mod common;

use common::direct_tail_prob;
use hawkscan::bench::reference_fisher;
use hawkscan::calibration::normal;
use hawkscan::calibration::tilting::RectangleProblem;
use hawkscan::calibration::*;
use hawkscan::fixtures::{fig1, fig1_case};
use hawkscan::rng::replicate_rng;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand_distr::{Distribution, StandardNormal};

fn fig1_cal() -> CalibrationModel {
    let fx = fig1();
    gamma_covariance(&reference_fisher(&fx.model, &fx.clusters).unwrap(), &fx.clusters).unwrap()
}

/// Correlation matrix from random factor loadings, kept away from singular.
fn correlation(loadings: &[f64], l: usize) -> DMatrix<f64> {
    let f = DMatrix::from_row_slice(l, 2, loadings);
    let cov = &f * f.transpose() + DMatrix::identity(l, l) * 0.3;
    let d = DVector::from_iterator(l, (0..l).map(|i| 1.0 / cov[(i, i)].sqrt()));
    DMatrix::from_fn(l, l, |i, j| cov[(i, j)] * d[i] * d[j])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn tail_respects_union_bounds(loadings in prop::collection::vec(-1.0f64..1.0, 6), b in 2.0f64..3.5) {
        let cal = CalibrationModel::new(correlation(&loadings, 3), 20, true).unwrap();
        let est = tail_probability(&cal, b, &TailOptions::default()).unwrap();
        let single = 2.0 * normal::sf(b);
        let slack = 4.0 * est.rel_std_err * est.alarm_prob;
        prop_assert!(est.alarm_prob >= single - slack, "{} < {}", est.alarm_prob, single);
        prop_assert!(est.alarm_prob <= 3.0 * single + slack, "{} > {}", est.alarm_prob, 3.0 * single);
    }

    #[test]
    fn tail_decreases_in_threshold(loadings in prop::collection::vec(-1.0f64..1.0, 6), b in 2.0f64..3.5, step in 0.01f64..0.5) {
        let cal = CalibrationModel::new(correlation(&loadings, 3), 20, true).unwrap();
        let opts = TailOptions::default();
        let p0 = tail_probability(&cal, b, &opts).unwrap().alarm_prob;
        let p1 = tail_probability(&cal, b + step, &opts).unwrap().alarm_prob;
        prop_assert!(p1 < p0);
    }

    #[test]
    fn alpha_threshold_decreases_in_alpha(alpha in 0.002f64..0.05, factor in 1.2f64..3.0) {
        let cal = fig1_cal();
        let opts = TailOptions::default();
        let b0 = threshold_for_alpha(&cal, alpha, &opts).unwrap();
        let b1 = threshold_for_alpha(&cal, alpha * factor, &opts).unwrap();
        prop_assert!(b1 < b0);
    }

    #[test]
    fn tilted_rectangle_estimate_is_unbiased(loadings in prop::collection::vec(-1.0f64..1.0, 6), lo in 0.5f64..1.5) {
        let cov = correlation(&loadings, 3);
        let lower = [lo, -0.5, -1.0];
        let upper = [f64::INFINITY, 1.0, f64::INFINITY];
        let problem = RectangleProblem::new(&cov, &lower, &upper).unwrap();
        let est = problem.estimate(20_000, &mut replicate_rng(7, 0));
        let chol = cov.clone().cholesky().unwrap().l();
        let mut rng = replicate_rng(8, 0);
        let n = 200_000;
        let mut hits = 0;
        for _ in 0..n {
            let z = DVector::from_iterator(3, (0..3).map(|_| StandardNormal.sample(&mut rng)));
            let x = &chol * z;
            hits += (0..3).all(|i| x[i] >= lower[i] && x[i] <= upper[i]) as usize;
        }
        let p = hits as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64 + est.std_err.powi(2)).sqrt();
        prop_assert!((est.prob - p).abs() <= 4.0 * se, "{} vs {} (se {})", est.prob, p, se);
    }
}

#[test]
fn single_cluster_tail_matches_normal_tail() {
    let est = tail_probability(&CalibrationModel::single().with_two_sided(false), 3.0, &TailOptions::default()).unwrap();
    assert!((est.prob / 1.3499e-3 - 1.0).abs() < 0.02);
}

#[test]
fn independent_clusters_match_closed_form_and_plain_monte_carlo() {
    let cal = CalibrationModel::new(DMatrix::identity(4, 4), 20, true).unwrap();
    let b = 3.0;
    // one-sided maximum of independent coordinates
    let exact = 1.0 - (1.0 - normal::sf(b)).powi(4);
    let est = tail_probability(&cal, b, &TailOptions::default()).unwrap();
    let se = est.rel_std_err * est.prob;
    assert!((est.prob - exact).abs() <= 3.0 * se.max(1e-4 * exact), "{} vs {exact}", est.prob);
    let (direct, direct_se) = direct_tail_prob(cal.sigma(), b, false, 10_000_000, 3);
    assert!((direct - exact).abs() <= 3.0 * direct_se, "{direct} vs {exact}");
    // doubling the one-sided tail over-counts two-sided exceedances only at second order
    let two_sided = 1.0 - (1.0 - 2.0 * normal::sf(b)).powi(4);
    assert!(est.alarm_prob >= two_sided && est.alarm_prob - two_sided < 12.0 * normal::sf(b).powi(2) + 3.0 * se);
}

#[test]
fn fig1_alpha_thresholds() {
    let cal = fig1_cal();
    let opts = TailOptions::default();
    let b02 = threshold_for_alpha(&cal, 0.02, &opts).unwrap();
    assert!((b02 - 2.8).abs() < 0.03, "{b02}");
    let b01 = threshold_for_alpha(&cal, 0.01, &opts).unwrap();
    assert!((b01 - 3.0).abs() < 0.03, "{b01}");
}

#[test]
fn arl_thresholds_for_longer_target() {
    let cal = fig1_cal();
    let opts = ArlOptions { replicates: 100_000, seed: 11, ..ArlOptions::default() };
    let th = threshold_for_arl(&cal, 20_000.0, 50, 10.0, &opts).unwrap();
    assert!((th.b_est1 - 3.5867).abs() < 0.05, "{}", th.b_est1);
    assert!(th.b_est2 > th.b_est1);
}

#[test]
fn single_update_routes_agree() {
    let cal = fig1_cal();
    let opts = ArlOptions { replicates: 1000, seed: 12, ..ArlOptions::default() };
    let th = threshold_for_arl(&cal, 5_000.0, 1, 10.0, &opts).unwrap();
    assert_eq!(th.b_est1, th.b_est2);
}

#[test]
fn stronger_change_needs_shorter_window() {
    let fx = fig1();
    let fisher = reference_fisher(&fx.model, &fx.clusters).unwrap();
    let cluster = &fx.clusters.clusters()[0];
    let opts = PowerOptions { replicates: 200, seed: 13, ..PowerOptions::default() };
    let weak = min_window_for_power(&fx.model, &fig1_case("i").unwrap(), cluster, &fisher, 3.0, &opts).unwrap();
    let strong = min_window_for_power(&fx.model, &fig1_case("ii").unwrap(), cluster, &fisher, 3.0, &opts).unwrap();
    let (weak, strong) = (weak.expect("case i reaches b"), strong.expect("case ii reaches b"));
    assert!(strong < weak, "{strong} vs {weak}");
}

#[test]
fn unreachable_power_returns_none() {
    let fx = fig1();
    let fisher = reference_fisher(&fx.model, &fx.clusters).unwrap();
    let cluster = &fx.clusters.clusters()[3];
    let opts = PowerOptions { replicates: 20, seed: 14, w_max: 200.0, ..PowerOptions::default() };
    // case i changes only the first cluster's edges
    let w = min_window_for_power(&fx.model, &fig1_case("i").unwrap(), cluster, &fisher, 3.0, &opts).unwrap();
    assert_eq!(w, None);
}

#[test]
fn fdr_estimate_shrinks_with_discoveries() {
    let rho = expected_false_discoveries(2.0, 20);
    assert!((rho - 0.910).abs() < 0.001);
    assert!(fdr_estimate(3, 2.0, 20) < fdr_estimate(0, 2.0, 20));
    assert!((fdr_estimate(0, 2.0, 20) - rho).abs() < 1e-15);
}

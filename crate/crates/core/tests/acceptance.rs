//! Acceptance suite. Runs every benchmark criterion at full size and prints one
//! PASS/FAIL line per criterion; exits nonzero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use hawkscan::bench::*;
use hawkscan::calibration::*;
use hawkscan::error::Result;
use hawkscan::fixtures::*;
use hawkscan::glr::{em_fit, glr_stat, GlrConfig};
use hawkscan::model::{EventStream, HawkesModel};
use hawkscan::rng::{map_replicates, replicate_rng};
use hawkscan::scan::{Monitor, MonitorConfig};
use hawkscan::score::{cumulative_scores, fisher_closed_form, fisher_estimate, EdgeSet};
use hawkscan::simulate::{simulate, simulate_with_rng};
use nalgebra::DMatrix;

use common::*;

struct Outcome {
    pass: bool,
    details: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome { pass: true, details: Vec::new() }
    }

    fn check(&mut self, ok: bool, detail: String) {
        self.pass &= ok;
        self.details.push(if ok { detail } else { format!("{detail} [miss]") });
    }

    fn within(&mut self, name: &str, value: f64, lo: f64, hi: f64) {
        self.check(value >= lo && value <= hi, format!("{name} {value:.4} in [{lo:.4}, {hi:.4}]"));
    }
}

/// Values shared between criteria.
struct Shared {
    b_est1_m50: f64,
}

const W: f64 = 200.0;
const DELTA: f64 = 10.0;

fn criterion1() -> Result<Outcome> {
    let mut out = Outcome::new();
    let rows = snapshot_frequency(&fig1(), W, 50.0, &[3.0, 2.8], 1000, 100, 101)?;
    out.check(rows[0].snapshots >= 100_000, format!("{} snapshots", rows[0].snapshots));
    out.within("freq(b=3.0)", rows[0].frequency, 0.010, 0.014);
    out.within("freq(b=2.8)", rows[1].frequency, 0.019, 0.025);
    Ok(out)
}

fn criterion2() -> Result<Outcome> {
    let mut out = Outcome::new();
    let fx = fig1();
    let edges = EdgeSet::new(vec![(4, 4), (3, 4), (8, 4)])?;
    let t = 500.0;
    let scores = map_replicates(2000, |r| -> Result<Vec<f64>> {
        let stream = simulate_with_rng(&fx.model, t, replicate_rng(202, r as u64))?;
        Ok(cumulative_scores(&fx.model, &stream, &edges)?.iter().map(|s| s / t.sqrt()).collect())
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let col = |j: usize| scores.iter().map(|s| s[j]).collect::<Vec<_>>();
    out.within("var self edge", sample_var(&col(0)), 1.42, 1.58);
    out.within("cov shared target", sample_cov(&col(1), &col(2)), 0.92, 1.08);

    let union = fx.clusters.union_edges();
    let exact = fisher_closed_form(&fx.model, union)?;
    let max_rel = |horizon: f64| -> Result<f64> {
        let est = fisher_estimate(&simulate(&fx.model, horizon, 203)?, &fx.model, union)?;
        Ok((0..union.len())
            .map(|i| (est.info.matrix[(i, i)] / exact.matrix[(i, i)] - 1.0).abs())
            .fold(0.0, f64::max))
    };
    out.within("plug-in Fisher max diagonal rel. error (T=2000)", max_rel(2000.0)?, 0.0, 0.05);
    // not gated: shows the estimator converging once sampling noise is small
    out.details.push(format!("(T=50000 max diagonal rel. error {:.4})", max_rel(50_000.0)?));
    Ok(out)
}

fn criterion3() -> Result<Outcome> {
    let mut out = Outcome::new();
    let fx = fig1();
    let fisher = reference_fisher(&fx.model, &fx.clusters)?;
    // window (w, 2w] so the score history has reached stationarity
    let cfg = MonitorConfig::new(W, W, f64::MAX)?;
    let gammas = map_replicates(2000, |r| -> Result<Vec<f64>> {
        let mut mon = Monitor::new(&fx.model, &fx.clusters, &fisher, cfg)?;
        for e in simulate_with_rng(&fx.model, 2.0 * W, replicate_rng(303, r as u64))?.events() {
            mon.push(*e)?;
        }
        mon.advance_to(2.0 * W)?;
        Ok(mon.latest().expect("snapshot at 2w").per_cluster.clone())
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    for i in 0..fx.clusters.len() {
        let g: Vec<f64> = gammas.iter().map(|v| v[i]).collect();
        let (mean, _) = mean_and_se(&g);
        out.within(&format!("mean gamma_{}", i + 1), mean, -0.05, 0.05);
        out.within(&format!("var gamma_{}", i + 1), sample_var(&g), 0.9, 1.1);
    }
    Ok(out)
}

fn fig1_sigma_pattern() -> DMatrix<f64> {
    // clusters centred on 4, 5, 8, 9: diagonal pairs (4, 9) and (5, 8) share
    // two leaves, grid neighbours share none
    let third = 1.0 / 3.0;
    DMatrix::from_row_slice(4, 4, &[
        1.0, 0.0, 0.0, third,
        0.0, 1.0, third, 0.0,
        0.0, third, 1.0, 0.0,
        third, 0.0, 0.0, 1.0,
    ])
}

fn criterion4() -> Result<Outcome> {
    let mut out = Outcome::new();
    let fx = fig1();
    let expected = fig1_sigma_pattern();
    let analytic = gamma_covariance(&reference_fisher(&fx.model, &fx.clusters)?, &fx.clusters)?;
    let err = (analytic.sigma() - &expected).amax();
    out.within("analytic max error", err, 0.0, 1e-12);
    let training = simulate(&fx.model, 20_000.0, 404)?;
    let est = fisher_estimate(&training, &fx.model, fx.clusters.union_edges())?;
    let estimated = gamma_covariance(&est.info, &fx.clusters)?;
    out.within("estimated max error", (estimated.sigma() - &expected).amax(), 0.0, 0.03);
    Ok(out)
}

fn criterion5_6(shared: &mut Shared) -> Result<(Outcome, Outcome)> {
    let mut out = Outcome::new();
    let fx = fig1();
    let fisher = reference_fisher(&fx.model, &fx.clusters)?;
    let cal = gamma_covariance(&fisher, &fx.clusters)?.with_resolution((W / DELTA) as usize);
    let opts = ArlOptions { replicates: 100_000, seed: 505, ..ArlOptions::default() };
    let t50 = threshold_for_arl(&cal, 10_000.0, 50, DELTA, &opts)?;
    let t100 = threshold_for_arl(&cal, 10_000.0, 100, DELTA, &opts)?;
    out.within("b_est1(m=50)", t50.b_est1, 3.3359, 3.4359);
    out.within("b_est1(m=100)", t100.b_est1, 3.3218, 3.4218);
    out.within("b_est2", t50.b_est2, 3.6325, 3.6925);
    shared.b_est1_m50 = t50.b_est1;

    let runs = null_run_lengths(&fx, &fisher, MonitorConfig::new(W, DELTA, t50.b_est1)?, 500, 60_000.0, 506)?;
    out.within("simulated ARL at b_est1(m=50)", runs.mean().0, 7600.0, 11_500.0);
    let runs2 = null_run_lengths(&fx, &fisher, MonitorConfig::new(W, DELTA, t50.b_est2)?, 500, 60_000.0, 507)?;
    let arl2 = runs2.mean().0;
    out.check(arl2 > 15_000.0, format!("simulated ARL at b_est2 {arl2:.0} > 15000 ({} censored at cap)", runs2.censored));

    let mut ks = Outcome::new();
    ks.within("KS distance", runs.ks_distance(), 0.0, 0.08);
    Ok((out, ks))
}

fn criterion7(shared: &Shared) -> Result<Outcome> {
    let mut out = Outcome::new();
    let fx = fig1();
    let fisher = reference_fisher(&fx.model, &fx.clusters)?;
    let mut glr_cfg = GlrConfig::new(W, DELTA, fx.clusters.union_edges().clone(), f64::INFINITY)?;
    let glr_cal = calibrate_glr(&fx, &glr_cfg, true, 10_000.0, 100_000.0, 4, 707)?;
    glr_cfg.threshold = glr_cal.threshold;
    out.details.push(format!("GLR-C threshold {:.3} ({} null alarms)", glr_cal.threshold, glr_cal.alarms));
    let proposed = Method::Proposed { cfg: MonitorConfig::new(W, DELTA, shared.b_est1_m50)? };
    let glr_c = Method::GlrC { cfg: glr_cfg };
    for (case, target) in [("i", 104.5), ("ii", 44.43), ("iii", 46.89), ("vii", 159.0)] {
        let post = fig1_case(case)?;
        let p = detection_delays(&fx, &fisher, &post, &proposed, 500.0, 300, 5000.0, 708)?.edd().0;
        let g = detection_delays(&fx, &fisher, &post, &glr_c, 500.0, 300, 5000.0, 708)?.edd().0;
        out.within(&format!("EDD case {case}"), p, 0.85 * target, 1.15 * target);
        if case == "vii" {
            out.check(p > g, format!("case {case} proposed {p:.1} > GLR-C {g:.1}"));
        } else {
            out.check(p < g, format!("case {case} proposed {p:.1} < GLR-C {g:.1}"));
        }
    }
    Ok(out)
}

fn criterion8() -> Result<Outcome> {
    let mut out = Outcome::new();
    let fx = fig1();
    let methods = [
        Method::Proposed { cfg: MonitorConfig::new(W, DELTA, f64::MAX)? },
        Method::Glr { cfg: GlrConfig::new(W, DELTA, fx.clusters.union_edges().clone(), f64::INFINITY)? },
    ];
    let rows = runtime_benchmark(&fx, &methods, 50_000.0, 808)?;
    let ratio = rows[1].seconds / rows[0].seconds;
    out.check(
        ratio >= 5.0,
        format!("proposed {:.3}s, GLR {:.3}s, speedup {ratio:.1} >= 5", rows[0].seconds, rows[1].seconds),
    );
    Ok(out)
}

fn criterion9() -> Result<Outcome> {
    let mut out = Outcome::new();
    let changed = LINE20_CLUSTERS / 2 - 1;
    let rows = fdr_experiment(&[2.0, 2.4, 3.0], 350.0, 50.0, changed, 0.2, 200, 909)?;
    for (row, (ev, rho)) in rows.iter().zip([(0.8, 0.91), (0.28, 0.328), (0.055, 0.054)]) {
        out.within(&format!("E(V) b={}", row.b), row.false_discoveries, 0.65 * ev, 1.35 * ev);
        out.within(&format!("rho b={}", row.b), row.rho, 0.98 * rho, 1.02 * rho);
    }
    Ok(out)
}

fn criterion10() -> Result<Outcome> {
    let mut out = Outcome::new();
    let fx = fig1();
    let fisher = reference_fisher(&fx.model, &fx.clusters)?;
    let cal = gamma_covariance(&fisher, &fx.clusters)?;
    let b = threshold_for_alpha(&cal, 0.01, &TailOptions::default())?;
    let rates = conditional_alarm_rates(&fx, &fisher, MonitorConfig::new(W, DELTA, b)?, 100, 2000, 1010)?;
    let worst = rates.iter().max_by(|a, c| a.rate.total_cmp(&c.rate)).expect("rates");
    out.details.push(format!("b = {b:.4}"));
    out.within(&format!("max conditional rate (update {})", worst.index), worst.rate, 0.0, 0.015);
    Ok(out)
}

fn criterion11() -> Result<Outcome> {
    let mut out = Outcome::new();

    // streaming score against the quadratic oracle, with an excited reference model
    let mut model = HawkesModel::poisson(vec![0.7, 1.1, 0.4], 1.5)?;
    model.set_alpha(0, 1, 0.3);
    model.set_alpha(1, 1, 0.2);
    model.set_alpha(2, 0, 0.4);
    let edges = vec![(0, 1), (1, 1), (2, 0), (1, 2), (2, 2)];
    let stream = simulate(&model, 150.0, 1111)?;
    let fast = cumulative_scores(&model, &stream, &EdgeSet::new(edges.clone())?)?;
    let slow = batch_scores(&model, stream.events(), stream.horizon(), &edges);
    let diff = fast.iter().zip(&slow).map(|(a, b)| (a - b).abs() / b.abs().max(1.0)).fold(0.0, f64::max);
    out.within("streaming vs batch score", diff, 0.0, 1e-10);

    let fx = fig1();
    let union = fx.clusters.union_edges();
    let exact = fisher_closed_form(&fx.model, union)?;
    let est = fisher_estimate(&simulate(&fx.model, 1000.0, 1112)?, &fx.model, union)?.info;
    out.check(
        exact.is_target_block_diagonal() && est.is_target_block_diagonal(),
        "Fisher block-diagonal by target".into(),
    );
    out.within("Fisher min eigenvalue (closed form)", exact.eigen_range().0, 0.0, f64::INFINITY);
    out.within("Fisher min eigenvalue (estimate)", est.eigen_range().0, -1e-10, f64::INFINITY);
    let cal = gamma_covariance(&exact, &fx.clusters)?;
    let sigma_min = cal.sigma().clone().symmetric_eigen().eigenvalues.min();
    out.within("Sigma min eigenvalue", sigma_min, 0.0, f64::INFINITY);

    let cfg = GlrConfig::new(W, DELTA, union.clone(), f64::INFINITY)?;
    let mut em_ok = true;
    let mut glr_min = f64::INFINITY;
    for r in 0..10u64 {
        let window = simulate(&fig1_case("i")?, W, 1113 + r)?;
        let fit = em_fit(&window, &fx.model, None, &cfg)?;
        em_ok &= fit.trace.windows(2).all(|p| p[1] >= p[0] - 1e-9 * p[0].abs().max(1.0));
        let null: EventStream = simulate(&fx.model, W, 1213 + r)?;
        glr_min = glr_min.min(glr_stat(&null, &fx.model, &cfg)?);
    }
    out.check(em_ok, "EM log-likelihood nondecreasing".into());
    out.within("min null GLR", glr_min, -1e-6, f64::INFINITY);

    let tail = TailOptions::default();
    let b01 = threshold_for_alpha(&cal, 0.01, &tail)?;
    let b05 = threshold_for_alpha(&cal, 0.05, &tail)?;
    out.check(b01 > b05, format!("b(alpha=0.01) {b01:.4} > b(alpha=0.05) {b05:.4}"));
    let opts = ArlOptions { replicates: 20_000, seed: 1114, ..ArlOptions::default() };
    let cal20 = cal.clone().with_resolution(20);
    let lo = threshold_for_arl(&cal20, 5_000.0, 50, DELTA, &opts)?;
    let hi = threshold_for_arl(&cal20, 20_000.0, 50, DELTA, &opts)?;
    out.check(
        hi.b_est1 > lo.b_est1 && hi.b_est2 > lo.b_est2,
        format!("thresholds increase with target ARL ({:.4} < {:.4})", lo.b_est1, hi.b_est1),
    );

    let ident = CalibrationModel::new(DMatrix::identity(4, 4), 20, true)?;
    for (name, model) in [("I4", &ident), ("fig1", &cal)] {
        for b in [2.8, 3.0, 3.4] {
            let decomposed = tail_probability(model, b, &tail)?;
            let (direct, se_direct) = direct_tail_prob(model.sigma(), b, false, 2_000_000, 1115);
            let se = (se_direct.powi(2) + (decomposed.prob * decomposed.rel_std_err).powi(2)).sqrt();
            let z = (decomposed.prob - direct).abs() / se;
            out.check(z <= 3.0, format!("{name} b={b}: decomposition {:.5} vs direct {direct:.5} ({z:.1} SE)", decomposed.prob));
        }
    }
    Ok(out)
}

fn report(n: &str, title: &str, result: Result<Outcome>, start: Instant, failures: &mut usize) {
    let secs = start.elapsed().as_secs_f64();
    match result {
        Ok(o) => {
            if !o.pass {
                *failures += 1;
            }
            let tag = if o.pass { "PASS" } else { "FAIL" };
            println!("criterion {n:>2} {tag} {title} ({secs:.1}s): {}", o.details.join("; "));
        }
        Err(e) => {
            *failures += 1;
            println!("criterion {n:>2} FAIL {title} ({secs:.1}s): error: {e}");
        }
    }
}

fn main() -> ExitCode {
    let mut failures = 0;
    let mut shared = Shared { b_est1_m50: f64::NAN };

    let t = Instant::now();
    report("1", "instantaneous false-alarm frequency", criterion1(), t, &mut failures);
    let t = Instant::now();
    report("2", "score covariance and plug-in Fisher", criterion2(), t, &mut failures);
    let t = Instant::now();
    report("3", "self-normalized cluster statistics", criterion3(), t, &mut failures);
    let t = Instant::now();
    report("4", "cluster correlation structure", criterion4(), t, &mut failures);
    let t = Instant::now();
    match criterion5_6(&mut shared) {
        Ok((arl, ks)) => {
            report("5", "ARL calibration", Ok(arl), t, &mut failures);
            report("6", "run-length exponentiality", Ok(ks), t, &mut failures);
        }
        Err(e) => {
            let msg = e.to_string();
            report("5", "ARL calibration", Err(e), t, &mut failures);
            println!("criterion  6 FAIL run-length exponentiality: skipped ({msg})");
            failures += 1;
        }
    }
    let t = Instant::now();
    if shared.b_est1_m50.is_nan() {
        println!("criterion  7 FAIL detection delay: no calibrated threshold");
        failures += 1;
    } else {
        report("7", "detection delay", criterion7(&shared), t, &mut failures);
    }
    let t = Instant::now();
    report("8", "runtime against GLR", criterion8(), t, &mut failures);
    let t = Instant::now();
    report("9", "false discoveries on line20", criterion9(), t, &mut failures);
    let t = Instant::now();
    report("10", "per-update false-alarm rate", criterion10(), t, &mut failures);
    let t = Instant::now();
    report("11", "property checks", criterion11(), t, &mut failures);

    println!("acceptance: {} of 11 criteria passed", 11 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

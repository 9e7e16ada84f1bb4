//! Experiment drivers: false-alarm frequency, ARL, detection delay,
//! conditional false-alarm rate, FDR and runtime. Every driver is
//! deterministic given its seed; replicate `r` always uses the RNG stream
//! `(seed, r)` regardless of scheduling.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::calibration::{
    expected_false_discoveries, fdr_estimate, gamma_covariance, tail_probability, threshold_for_alpha,
    threshold_for_arl, ArlOptions, TailOptions,
};
use crate::error::{Error, Result};
use crate::fixtures::{fig1_case, fixture, line20_change, Fixture, LINE20_CLUSTERS};
use crate::glr::{calibrate_threshold, renewal_arl, GlrConfig, GlrMonitor};
use crate::model::{ChangeScenario, Event, HawkesModel};
use crate::rng::{derive_seed, map_replicates, replicate_rng};
use crate::scan::{localize, ClusterSet, GammaSnapshot, Monitor, MonitorConfig};
use crate::score::{fisher_closed_form, FisherInfo};
use crate::simulate::Simulator;

/// Common surface of the scan monitor and the GLR monitors.
pub trait Detector {
    fn push(&mut self, event: Event) -> Result<bool>;
    fn advance_to(&mut self, t: f64) -> Result<bool>;
    fn alarm(&self) -> Option<&GammaSnapshot>;
    fn updates(&self) -> u64;
}

impl Detector for Monitor {
    fn push(&mut self, event: Event) -> Result<bool> {
        Monitor::push(self, event)
    }
    fn advance_to(&mut self, t: f64) -> Result<bool> {
        Monitor::advance_to(self, t)
    }
    fn alarm(&self) -> Option<&GammaSnapshot> {
        Monitor::alarm(self)
    }
    fn updates(&self) -> u64 {
        Monitor::updates(self)
    }
}

impl Detector for GlrMonitor {
    fn push(&mut self, event: Event) -> Result<bool> {
        GlrMonitor::push(self, event)
    }
    fn advance_to(&mut self, t: f64) -> Result<bool> {
        GlrMonitor::advance_to(self, t)
    }
    fn alarm(&self) -> Option<&GammaSnapshot> {
        GlrMonitor::alarm(self)
    }
    fn updates(&self) -> u64 {
        GlrMonitor::updates(self)
    }
}

/// Feeds simulated events until the detector alarms or the simulation ends.
/// Returns the alarm time, if any.
pub fn run_until_alarm<D: Detector>(detector: &mut D, sim: Simulator, horizon: f64) -> Result<Option<f64>> {
    for e in sim {
        if detector.push(e)? {
            return Ok(detector.alarm().map(|s| s.t));
        }
    }
    detector.advance_to(horizon)?;
    Ok(detector.alarm().map(|s| s.t))
}

/// Fisher information of a Poisson reference model in closed form.
pub fn reference_fisher(model: &HawkesModel, clusters: &ClusterSet) -> Result<FisherInfo> {
    fisher_closed_form(model, clusters.union_edges())
}

pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Kolmogorov-Smirnov distance between a sample and `Exponential(mean)`.
pub fn ks_exponential(sample: &[f64], mean: f64) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = 1.0 - (-x / mean).exp();
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// A CSV table with a header row.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(headers: &[&str]) -> Self {
        Table { headers: headers.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&self.headers)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

macro_rules! row {
    ($($v:expr),* $(,)?) => { vec![$(format!("{}", $v)),*] };
}

/// Experiment output: a deterministic result table plus wall-clock timings
/// kept apart so the results stay byte-identical across runs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Report {
    pub table: Table,
    pub timing: Table,
}

fn timing_table(entries: &[(&str, f64)]) -> Table {
    let mut t = Table::new(&["stage", "wall_s"]);
    for (stage, secs) in entries {
        t.push(row![stage, secs]);
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnapshotFrequency {
    pub w: f64,
    pub b: f64,
    pub snapshots: u64,
    pub exceedances: u64,
    pub frequency: f64,
    /// Across-replicate standard error (accounts for overlapping windows).
    pub std_err: f64,
    /// Instantaneous false-alarm probability from the Gaussian calibration.
    pub predicted: f64,
}

/// Fraction of null snapshots with `max_i |Gamma_i| > b`. Each replicate is
/// an independent null stream sampled every `spacing` time units after the
/// first full window.
pub fn snapshot_frequency(
    fx: &Fixture,
    w: f64,
    spacing: f64,
    thresholds: &[f64],
    snapshots_per_replicate: usize,
    replicates: usize,
    seed: u64,
) -> Result<Vec<SnapshotFrequency>> {
    let fisher = reference_fisher(&fx.model, &fx.clusters)?;
    let cfg = MonitorConfig::new(w, spacing, f64::MAX)?;
    let horizon = w + (snapshots_per_replicate.max(1) - 1) as f64 * spacing;
    let counts = map_replicates(replicates, |r| -> Result<Vec<u64>> {
        let mut mon = Monitor::new(&fx.model, &fx.clusters, &fisher, cfg)?;
        let sim = Simulator::new(&fx.model, horizon, replicate_rng(seed, r as u64))?;
        let mut counts = vec![0u64; thresholds.len() + 1];
        let tally = |snaps: Vec<GammaSnapshot>, counts: &mut Vec<u64>| {
            for s in snaps {
                counts[thresholds.len()] += 1;
                for (c, &b) in counts.iter_mut().zip(thresholds) {
                    *c += (s.max_abs > b) as u64;
                }
            }
        };
        for e in sim {
            mon.push(e)?;
            if mon.updates() % 256 == 0 {
                tally(mon.take_trajectory(), &mut counts);
            }
        }
        mon.advance_to(horizon)?;
        tally(mon.take_trajectory(), &mut counts);
        Ok(counts)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let cal = gamma_covariance(&fisher, &fx.clusters)?;
    let nb = thresholds.len();
    thresholds
        .iter()
        .enumerate()
        .map(|(j, &b)| {
            let per_rep: Vec<f64> = counts.iter().map(|c| c[j] as f64 / c[nb].max(1) as f64).collect();
            let snapshots: u64 = counts.iter().map(|c| c[nb]).sum();
            let exceedances: u64 = counts.iter().map(|c| c[j]).sum();
            let (_, se) = mean_and_se(&per_rep);
            Ok(SnapshotFrequency {
                w,
                b,
                snapshots,
                exceedances,
                frequency: exceedances as f64 / snapshots.max(1) as f64,
                std_err: se,
                predicted: tail_probability(&cal, b, &TailOptions::default())?.alarm_prob,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLengths {
    pub b: f64,
    /// Alarm times, or the cap for censored replicates.
    pub values: Vec<f64>,
    pub censored: usize,
    pub cap: f64,
}

impl RunLengths {
    /// Sample mean with censored runs counted at the cap (a lower bound).
    pub fn mean(&self) -> (f64, f64) {
        mean_and_se(&self.values)
    }

    /// Exponential maximum-likelihood ARL: total time over alarms.
    pub fn arl_mle(&self) -> f64 {
        let alarms = self.values.len() - self.censored;
        if alarms == 0 {
            return f64::INFINITY;
        }
        self.values.iter().sum::<f64>() / alarms as f64
    }

    pub fn ks_distance(&self) -> f64 {
        ks_exponential(&self.values, self.arl_mle())
    }
}

/// Null run lengths of the scan monitor.
pub fn null_run_lengths(
    fx: &Fixture,
    fisher: &FisherInfo,
    cfg: MonitorConfig,
    replicates: usize,
    cap: f64,
    seed: u64,
) -> Result<RunLengths> {
    let runs = map_replicates(replicates, |r| -> Result<Option<f64>> {
        let mut mon = Monitor::new(&fx.model, &fx.clusters, fisher, cfg)?.without_trajectory();
        let sim = Simulator::new(&fx.model, cap, replicate_rng(seed, r as u64))?;
        run_until_alarm(&mut mon, sim, cap)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(RunLengths {
        b: cfg.b,
        censored: runs.iter().filter(|r| r.is_none()).count(),
        values: runs.iter().map(|r| r.unwrap_or(cap)).collect(),
        cap,
    })
}

/// Which detector an experiment runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Method {
    Proposed { cfg: MonitorConfig },
    /// GLR over the union of cluster edges.
    Glr { cfg: GlrConfig },
    /// Per-cluster GLR, maximum over clusters.
    GlrC { cfg: GlrConfig },
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Proposed { .. } => "proposed",
            Method::Glr { .. } => "glr",
            Method::GlrC { .. } => "glr_c",
        }
    }

    pub fn threshold(&self) -> f64 {
        match self {
            Method::Proposed { cfg } => cfg.b,
            Method::Glr { cfg } | Method::GlrC { cfg } => cfg.threshold,
        }
    }
}

enum AnyDetector {
    Scan(Monitor),
    Glr(GlrMonitor),
}

impl AnyDetector {
    fn build(method: &Method, fx: &Fixture, fisher: &FisherInfo) -> Result<Self> {
        Ok(match method {
            Method::Proposed { cfg } => AnyDetector::Scan(Monitor::new(&fx.model, &fx.clusters, fisher, *cfg)?.without_trajectory()),
            Method::Glr { cfg } => AnyDetector::Glr(GlrMonitor::new(&fx.model, cfg.clone(), None)?.without_trajectory()),
            Method::GlrC { cfg } => {
                AnyDetector::Glr(GlrMonitor::new(&fx.model, cfg.clone(), Some(&fx.clusters))?.without_trajectory())
            }
        })
    }

    fn run(&mut self, sim: Simulator, horizon: f64) -> Result<Option<f64>> {
        match self {
            AnyDetector::Scan(m) => run_until_alarm(m, sim, horizon),
            AnyDetector::Glr(m) => run_until_alarm(m, sim, horizon),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Delays {
    pub method: String,
    pub threshold: f64,
    pub delays: Vec<f64>,
    /// Replicates redrawn because of an alarm at or before the change.
    pub redraws: usize,
    /// Replicates with no alarm within `post_cap` after the change.
    pub censored: usize,
}

impl Delays {
    pub fn edd(&self) -> (f64, f64) {
        mean_and_se(&self.delays)
    }
}

/// Detection delays after a change at `tau_star` (history truncated at the
/// change). Replicates that alarm at or before `tau_star` are redrawn with a
/// fresh stream.
pub fn detection_delays(
    fx: &Fixture,
    fisher: &FisherInfo,
    post: &HawkesModel,
    method: &Method,
    tau_star: f64,
    replicates: usize,
    post_cap: f64,
    seed: u64,
) -> Result<Delays> {
    let scn = ChangeScenario::new(fx.model.clone(), post.clone(), tau_star)?;
    let horizon = tau_star + post_cap;
    let runs = map_replicates(replicates, |r| -> Result<(f64, usize, bool)> {
        for attempt in 0..1000u64 {
            let rng = replicate_rng(derive_seed(seed, attempt), r as u64);
            let sim = Simulator::with_change(&scn, horizon, rng)?;
            let mut det = AnyDetector::build(method, fx, fisher)?;
            match det.run(sim, horizon)? {
                Some(t) if t <= tau_star => continue,
                Some(t) => return Ok((t - tau_star, attempt as usize, false)),
                None => return Ok((post_cap, attempt as usize, true)),
            }
        }
        Err(Error::Calibration("false alarms before the change in 1000 consecutive draws".into()))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(Delays {
        method: method.name().into(),
        threshold: method.threshold(),
        delays: runs.iter().map(|r| r.0).collect(),
        redraws: runs.iter().map(|r| r.1).sum(),
        censored: runs.iter().filter(|r| r.2).count(),
    })
}

/// Null GLR statistic paths `(t, statistic)` recorded without stopping.
pub fn glr_null_paths(
    fx: &Fixture,
    cfg: &GlrConfig,
    per_cluster: bool,
    horizon: f64,
    paths: usize,
    seed: u64,
) -> Result<Vec<Vec<(f64, f64)>>> {
    let mut cfg = cfg.clone();
    cfg.threshold = f64::INFINITY;
    map_replicates(paths, |r| -> Result<Vec<(f64, f64)>> {
        let clusters = per_cluster.then_some(&fx.clusters);
        let mut mon = GlrMonitor::new(&fx.model, cfg.clone(), clusters)?;
        let sim = Simulator::new(&fx.model, horizon, replicate_rng(seed, r as u64))?;
        for e in sim {
            mon.push(e)?;
        }
        mon.advance_to(horizon)?;
        Ok(mon.into_result().trajectory.iter().map(|s| (s.t, s.max_abs)).collect())
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlrCalibration {
    pub threshold: f64,
    pub target_arl: f64,
    pub alarms: usize,
    pub total_time: f64,
}

/// GLR threshold for a target ARL from long null simulations.
pub fn calibrate_glr(
    fx: &Fixture,
    cfg: &GlrConfig,
    per_cluster: bool,
    target_arl: f64,
    horizon: f64,
    paths: usize,
    seed: u64,
) -> Result<GlrCalibration> {
    let null = glr_null_paths(fx, cfg, per_cluster, horizon, paths, seed)?;
    let threshold = calibrate_threshold(&null, target_arl, cfg.window)?;
    let (_, alarms) = renewal_arl(&null, threshold, cfg.window);
    Ok(GlrCalibration { threshold, target_arl, alarms, total_time: horizon * paths as f64 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalRate {
    pub index: usize,
    pub t: f64,
    pub at_risk: usize,
    pub alarms: usize,
    pub rate: f64,
    pub std_err: f64,
}

/// Per-update conditional alarm probability under the null over the first
/// `updates` updates.
pub fn conditional_alarm_rates(
    fx: &Fixture,
    fisher: &FisherInfo,
    cfg: MonitorConfig,
    updates: usize,
    replicates: usize,
    seed: u64,
) -> Result<Vec<ConditionalRate>> {
    let horizon = cfg.w + (updates.max(1) - 1) as f64 * cfg.delta;
    let stops = map_replicates(replicates, |r| -> Result<Option<f64>> {
        let mut mon = Monitor::new(&fx.model, &fx.clusters, fisher, cfg)?.without_trajectory();
        let sim = Simulator::new(&fx.model, horizon, replicate_rng(seed, r as u64))?;
        run_until_alarm(&mut mon, sim, horizon)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut at_risk = replicates;
    Ok((0..updates)
        .map(|n| {
            let t = cfg.w + n as f64 * cfg.delta;
            let alarms = stops.iter().filter(|s| s.is_some_and(|x| (x - t).abs() < 1e-6 * cfg.delta)).count();
            let rate = if at_risk > 0 { alarms as f64 / at_risk as f64 } else { f64::NAN };
            let row = ConditionalRate {
                index: n + 1,
                t,
                at_risk,
                alarms,
                rate,
                std_err: (rate * (1.0 - rate) / at_risk.max(1) as f64).sqrt(),
            };
            at_risk -= alarms;
            row
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdrRow {
    pub b: f64,
    pub replicates: usize,
    /// Mean of `V / (kappa + 1)`.
    pub fdr: f64,
    pub fdr_se: f64,
    /// Mean number of false discoveries.
    pub false_discoveries: f64,
    pub false_se: f64,
    /// Mean number of true discoveries.
    pub true_discoveries: f64,
    pub true_se: f64,
    /// `2 L P(Z > b)`.
    pub rho: f64,
    /// Mean of the plug-in estimate `rho / (kappa + 1)`.
    pub fdr_estimate: f64,
}

/// FDR protocol on `line20`: Poisson until `t0`, then cluster `changed`
/// becomes a Hawkes process with center-to-leaf excitation `alpha`; all
/// clusters are scanned once at `t0 + t1` with a window covering all data.
pub fn fdr_experiment(
    thresholds: &[f64],
    t0: f64,
    t1: f64,
    changed: usize,
    alpha: f64,
    replicates: usize,
    seed: u64,
) -> Result<Vec<FdrRow>> {
    let fx = fixture("line20")?;
    let fisher = reference_fisher(&fx.model, &fx.clusters)?;
    let post = line20_change(changed, alpha)?;
    let scn = ChangeScenario::new(fx.model.clone(), post, t0)?;
    let w = t0 + t1;
    let cfg = MonitorConfig::new(w, w, f64::MAX)?;
    let snaps = map_replicates(replicates, |r| -> Result<GammaSnapshot> {
        let mut mon = Monitor::new(&fx.model, &fx.clusters, &fisher, cfg)?;
        for e in Simulator::with_change(&scn, w, replicate_rng(seed, r as u64))? {
            mon.push(e)?;
        }
        mon.advance_to(w)?;
        mon.latest().cloned().ok_or(Error::MissingCheckpoint(w))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let l = fx.clusters.len();
    Ok(thresholds
        .iter()
        .map(|&b| {
            let mut fdr = Vec::new();
            let mut fv = Vec::new();
            let mut tv = Vec::new();
            let mut est = Vec::new();
            for s in &snaps {
                let found = localize(s, b);
                let kappa = found.len();
                let v = found.iter().filter(|&&i| i != changed).count();
                fdr.push(v as f64 / (kappa as f64 + 1.0));
                fv.push(v as f64);
                tv.push((kappa - v) as f64);
                est.push(fdr_estimate(kappa, b, l));
            }
            let (fdr_m, fdr_se) = mean_and_se(&fdr);
            let (f_m, f_se) = mean_and_se(&fv);
            let (t_m, t_se) = mean_and_se(&tv);
            FdrRow {
                b,
                replicates,
                fdr: fdr_m,
                fdr_se,
                false_discoveries: f_m,
                false_se: f_se,
                true_discoveries: t_m,
                true_se: t_se,
                rho: expected_false_discoveries(b, l),
                fdr_estimate: mean_and_se(&est).0,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeRow {
    pub method: String,
    pub horizon: f64,
    pub events: usize,
    pub updates: u64,
    pub seconds: f64,
}

/// Time to compute each detection statistic over one null stream
/// (simulation excluded).
pub fn runtime_benchmark(fx: &Fixture, methods: &[Method], horizon: f64, seed: u64) -> Result<Vec<RuntimeRow>> {
    let fisher = reference_fisher(&fx.model, &fx.clusters)?;
    let events: Vec<Event> = Simulator::new(&fx.model, horizon, replicate_rng(seed, 0))?.collect();
    methods
        .iter()
        .map(|method| {
            let mut method = method.clone();
            match &mut method {
                Method::Proposed { cfg } => cfg.b = f64::MAX,
                Method::Glr { cfg } | Method::GlrC { cfg } => cfg.threshold = f64::INFINITY,
            }
            let mut det = AnyDetector::build(&method, fx, &fisher)?;
            let start = Instant::now();
            let updates = match &mut det {
                AnyDetector::Scan(m) => {
                    for e in &events {
                        m.push(*e)?;
                    }
                    m.advance_to(horizon)?;
                    m.updates()
                }
                AnyDetector::Glr(m) => {
                    for e in &events {
                        m.push(*e)?;
                    }
                    m.advance_to(horizon)?;
                    m.updates()
                }
            };
            Ok(RuntimeRow {
                method: method.name().into(),
                horizon,
                events: events.len(),
                updates,
                seconds: start.elapsed().as_secs_f64(),
            })
        })
        .collect()
}

/// Kind of experiment run by [`run_experiment`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Arl,
    Edd,
    Far,
    Fdr,
    Runtime,
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::Config(format!("unknown experiment kind {s:?} (arl, edd, far, fdr, runtime)")))
    }
}

/// Experiment configuration; unset fields take the defaults of the
/// fig1/line20 studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    #[serde(default = "d_fixture")]
    pub fixture: String,
    #[serde(default = "d_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d_w")]
    pub w: f64,
    #[serde(default = "d_delta")]
    pub delta: f64,
    /// Explicit thresholds; calibrated when empty.
    #[serde(default)]
    pub thresholds: Vec<f64>,
    #[serde(default = "d_targets")]
    pub target_arl: Vec<f64>,
    #[serde(default = "d_m")]
    pub m: Vec<usize>,
    /// Target instantaneous false-alarm probability (far).
    #[serde(default = "d_alpha")]
    pub alpha: f64,
    /// Named change cases (edd).
    #[serde(default = "d_cases")]
    pub cases: Vec<String>,
    #[serde(default = "d_methods")]
    pub methods: Vec<String>,
    /// Change time for edd; stationary burn-in before it.
    #[serde(default = "d_tau")]
    pub tau_star: f64,
    /// Censoring time: null run cap (arl) or post-change cap (edd).
    #[serde(default = "d_cap")]
    pub cap: f64,
    /// Explicit GLR / GLR-C thresholds; calibrated by simulation otherwise.
    #[serde(default)]
    pub glr_threshold: Option<f64>,
    #[serde(default)]
    pub glr_c_threshold: Option<f64>,
    /// Null time simulated per GLR calibration path, and path count.
    #[serde(default = "d_glr_horizon")]
    pub glr_calibration_horizon: f64,
    #[serde(default = "d_glr_paths")]
    pub glr_calibration_paths: usize,
    /// Number of updates tracked (far) .
    #[serde(default = "d_updates")]
    pub updates: usize,
    /// FDR protocol.
    #[serde(default = "d_t0")]
    pub t0: f64,
    #[serde(default = "d_t1")]
    pub t1: f64,
    #[serde(default = "d_change_alpha")]
    pub change_alpha: f64,
    /// Runtime horizon.
    #[serde(default = "d_runtime_horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub sampler: ArlOptions,
}

fn d_fixture() -> String {
    "fig1".into()
}
fn d_replicates() -> usize {
    500
}
fn d_w() -> f64 {
    200.0
}
fn d_delta() -> f64 {
    10.0
}
fn d_targets() -> Vec<f64> {
    vec![10_000.0]
}
fn d_m() -> Vec<usize> {
    vec![50]
}
fn d_alpha() -> f64 {
    0.01
}
fn d_cases() -> Vec<String> {
    ["i", "ii", "iii", "vii"].map(String::from).to_vec()
}
fn d_methods() -> Vec<String> {
    vec!["proposed".into(), "glr_c".into()]
}
fn d_tau() -> f64 {
    500.0
}
fn d_cap() -> f64 {
    60_000.0
}
fn d_glr_horizon() -> f64 {
    125_000.0
}
fn d_glr_paths() -> usize {
    8
}
fn d_updates() -> usize {
    100
}
fn d_t0() -> f64 {
    350.0
}
fn d_t1() -> f64 {
    50.0
}
fn d_change_alpha() -> f64 {
    0.2
}
fn d_runtime_horizon() -> f64 {
    50_000.0
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind) -> Self {
        serde_json::from_value(serde_json::json!({ "kind": kind })).expect("defaults deserialize")
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        fixture(&self.fixture)?;
        MonitorConfig::new(self.w, self.delta, 1.0)?;
        if self.kind == ExperimentKind::Fdr && self.fixture != "line20" {
            return Err(Error::Config("the fdr experiment runs on the line20 fixture".into()));
        }
        for m in &self.methods {
            if !["proposed", "glr", "glr_c"].contains(&m.as_str()) {
                return Err(Error::Config(format!("unknown method {m:?} (proposed, glr, glr_c)")));
            }
        }
        if self.kind == ExperimentKind::Edd {
            for c in &self.cases {
                fig1_case(c)?;
            }
        }
        if self.thresholds.iter().any(|b| !(*b > 0.0)) {
            return Err(Error::Config("thresholds must be positive".into()));
        }
        Ok(())
    }

    fn glr_config(&self, fx: &Fixture, threshold: f64) -> Result<GlrConfig> {
        GlrConfig::new(self.w, self.delta, fx.clusters.union_edges().clone(), threshold)
    }
}

/// Runs an experiment end to end.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Report> {
    spec.validate()?;
    let fx = fixture(&spec.fixture)?;
    let fisher = reference_fisher(&fx.model, &fx.clusters)?;
    let cal = gamma_covariance(&fisher, &fx.clusters)?
        .with_resolution((spec.w / spec.delta).round() as usize);
    let clock = Instant::now();
    let mut timings: Vec<(String, f64)> = Vec::new();
    let lap = |name: String, timings: &mut Vec<(String, f64)>| {
        timings.push((name, clock.elapsed().as_secs_f64()));
    };
    let table = match spec.kind {
        ExperimentKind::Arl => {
            let mut t = Table::new(&[
                "target_arl", "m", "method", "b", "replicates", "mean_run_length", "std_err", "arl_mle", "censored",
                "ks_distance",
            ]);
            for &target in &spec.target_arl {
                for &m in &spec.m {
                    let th = threshold_for_arl(&cal, target, m, spec.delta, &spec.sampler)?;
                    lap(format!("calibrate target={target} m={m}"), &mut timings);
                    for (name, b) in [("est1", th.b_est1), ("est2", th.b_est2)] {
                        let cfg = MonitorConfig::new(spec.w, spec.delta, b)?;
                        let runs = null_run_lengths(&fx, &fisher, cfg, spec.replicates, spec.cap, spec.seed)?;
                        lap(format!("simulate {name} target={target} m={m}"), &mut timings);
                        let (mean, se) = runs.mean();
                        t.push(row![target, m, name, b, spec.replicates, mean, se, runs.arl_mle(), runs.censored, runs.ks_distance()]);
                    }
                }
            }
            t
        }
        ExperimentKind::Edd => {
            let target = spec.target_arl[0];
            let b = match spec.thresholds.first() {
                Some(&b) => b,
                None => threshold_for_arl(&cal, target, spec.m[0], spec.delta, &spec.sampler)?.b_est1,
            };
            let mut methods = Vec::new();
            for name in &spec.methods {
                let method = match name.as_str() {
                    "proposed" => Method::Proposed { cfg: MonitorConfig::new(spec.w, spec.delta, b)? },
                    "glr" | "glr_c" => {
                        let per_cluster = name == "glr_c";
                        let given = if per_cluster { spec.glr_c_threshold } else { spec.glr_threshold };
                        let threshold = match given {
                            Some(v) => v,
                            None => {
                                calibrate_glr(
                                    &fx,
                                    &spec.glr_config(&fx, f64::INFINITY)?,
                                    per_cluster,
                                    target,
                                    spec.glr_calibration_horizon,
                                    spec.glr_calibration_paths,
                                    derive_seed(spec.seed, 0x61c),
                                )?
                                .threshold
                            }
                        };
                        let cfg = spec.glr_config(&fx, threshold)?;
                        if per_cluster {
                            Method::GlrC { cfg }
                        } else {
                            Method::Glr { cfg }
                        }
                    }
                    other => return Err(Error::Config(format!("unknown method {other:?}"))),
                };
                lap(format!("calibrate {name}"), &mut timings);
                methods.push(method);
            }
            let mut t = Table::new(&[
                "method", "threshold", "target_arl", "case", "replicates", "edd", "std_err", "redraws", "censored",
            ]);
            for method in &methods {
                for case in &spec.cases {
                    let post = fig1_case(case)?;
                    let d = detection_delays(&fx, &fisher, &post, method, spec.tau_star, spec.replicates, spec.cap, spec.seed)?;
                    lap(format!("{} case {case}", method.name()), &mut timings);
                    let (edd, se) = d.edd();
                    t.push(row![method.name(), method.threshold(), target, case, spec.replicates, edd, se, d.redraws, d.censored]);
                }
            }
            t
        }
        ExperimentKind::Far => {
            let b = match spec.thresholds.first() {
                Some(&b) => b,
                None => threshold_for_alpha(&cal, spec.alpha, &spec.sampler.tail)?,
            };
            let cfg = MonitorConfig::new(spec.w, spec.delta, b)?;
            let rates = conditional_alarm_rates(&fx, &fisher, cfg, spec.updates, spec.replicates, spec.seed)?;
            lap("simulate".into(), &mut timings);
            let mut t = Table::new(&["index", "t", "b", "alpha", "at_risk", "alarms", "rate", "std_err"]);
            for r in rates {
                t.push(row![r.index, r.t, b, spec.alpha, r.at_risk, r.alarms, r.rate, r.std_err]);
            }
            t
        }
        ExperimentKind::Fdr => {
            let bs = if spec.thresholds.is_empty() {
                (0..10).map(|i| 1.6 + 0.2 * i as f64).map(|b| (b * 10.0_f64).round() / 10.0).collect()
            } else {
                spec.thresholds.clone()
            };
            let rows = fdr_experiment(&bs, spec.t0, spec.t1, LINE20_CLUSTERS / 2 - 1, spec.change_alpha, spec.replicates, spec.seed)?;
            lap("simulate".into(), &mut timings);
            let mut t = Table::new(&[
                "b", "replicates", "fdr", "fdr_se", "false_discoveries", "false_se", "true_discoveries", "true_se", "rho",
                "fdr_estimate",
            ]);
            for r in rows {
                t.push(row![r.b, r.replicates, r.fdr, r.fdr_se, r.false_discoveries, r.false_se, r.true_discoveries, r.true_se, r.rho, r.fdr_estimate]);
            }
            t
        }
        ExperimentKind::Runtime => {
            let mut methods = Vec::new();
            for name in &spec.methods {
                methods.push(match name.as_str() {
                    "proposed" => Method::Proposed { cfg: MonitorConfig::new(spec.w, spec.delta, f64::MAX)? },
                    "glr" => Method::Glr { cfg: spec.glr_config(&fx, f64::INFINITY)? },
                    _ => Method::GlrC { cfg: spec.glr_config(&fx, f64::INFINITY)? },
                });
            }
            let rows = runtime_benchmark(&fx, &methods, spec.horizon, spec.seed)?;
            lap("run".into(), &mut timings);
            let base = rows.iter().find(|r| r.method == "proposed").map(|r| r.seconds);
            let mut t = Table::new(&["method", "horizon", "events", "updates", "seconds", "relative_to_proposed"]);
            for r in rows {
                let rel = base.map_or(f64::NAN, |b| r.seconds / b);
                t.push(row![r.method, r.horizon, r.events, r.updates, r.seconds, rel]);
            }
            t
        }
    };
    let entries: Vec<(&str, f64)> = timings.iter().map(|(s, v)| (s.as_str(), *v)).collect();
    Ok(Report { table, timing: timing_table(&entries) })
}

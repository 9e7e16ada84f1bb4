//! Windowed generalized likelihood ratio baseline.
//!
//! Each evaluation refits the influence entries in `edge_scope` (and the
//! base rates of the affected nodes) on the events of the last `window`
//! time units by EM, then compares the window log-likelihood with that of
//! the reference model. Both likelihoods restart at the window start. The
//! log-likelihood splits by target node, so only targets of scoped edges
//! enter the ratio.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Event, EventStream, HawkesModel};
use crate::scan::{ClusterSet, DetectionResult, GammaSnapshot};
use crate::score::EdgeSet;

pub const MU_FLOOR: f64 = 1e-6;

/// Warm starts lift free entries to at least this value, since EM cannot
/// move an entry away from zero.
pub const WARM_FLOOR: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuScope {
    /// Every base rate is refitted.
    All,
    /// Base rates of nodes that receive a scoped edge are refitted.
    ScopeTargets,
    /// Base rates stay at their reference values.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlrConfig {
    pub window: f64,
    pub eval_interval: f64,
    pub edge_scope: EdgeSet,
    #[serde(default = "default_em_iters")]
    pub em_iters: usize,
    pub threshold: f64,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_mu_scope")]
    pub mu_scope: MuScope,
    #[serde(default = "default_warm")]
    pub warm_start: bool,
    /// Starting value for free influence entries on a cold start.
    #[serde(default = "default_alpha_init")]
    pub alpha_init: f64,
}

fn default_em_iters() -> usize {
    30
}
fn default_rel_tol() -> f64 {
    1e-6
}
fn default_mu_scope() -> MuScope {
    MuScope::ScopeTargets
}
fn default_warm() -> bool {
    true
}
fn default_alpha_init() -> f64 {
    0.1
}

impl GlrConfig {
    pub fn new(window: f64, eval_interval: f64, edge_scope: EdgeSet, threshold: f64) -> Result<Self> {
        let cfg = GlrConfig {
            window,
            eval_interval,
            edge_scope,
            em_iters: default_em_iters(),
            threshold,
            rel_tol: default_rel_tol(),
            mu_scope: default_mu_scope(),
            warm_start: default_warm(),
            alpha_init: default_alpha_init(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eval_interval > 0.0 && self.eval_interval <= self.window && self.window.is_finite()) {
            return Err(Error::Config(format!(
                "need 0 < eval_interval <= window, got {} and {}",
                self.eval_interval, self.window
            )));
        }
        if self.em_iters == 0 {
            return Err(Error::Config("em_iters must be at least 1".into()));
        }
        if self.edge_scope.is_empty() {
            return Err(Error::Config("edge_scope is empty".into()));
        }
        if !(self.alpha_init > 0.0) {
            return Err(Error::Config("alpha_init must be positive".into()));
        }
        Ok(())
    }

    pub fn with_scope(&self, scope: EdgeSet) -> Self {
        GlrConfig { edge_scope: scope, ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmFit {
    /// Fitted model: scoped entries and free base rates estimated, the rest
    /// copied from the reference model.
    pub model: HawkesModel,
    pub mu_hat: Vec<f64>,
    /// Fitted values of the scoped edges, in scope order.
    pub a_hat: Vec<f64>,
    /// Window log-likelihood of the events at the fitted targets.
    pub loglik: f64,
    pub iters: usize,
    pub converged: bool,
    /// The window held no events.
    pub degenerate: bool,
    pub trace: Vec<f64>,
}

/// One target node's data: per-event decayed source counts.
#[derive(Debug, Clone)]
struct TargetData {
    node: usize,
    sources: Vec<usize>,
    free: Vec<bool>,
    // row-major: events x sources
    r: Vec<f64>,
    n_events: usize,
}

#[derive(Debug, Clone)]
struct WindowData {
    horizon: f64,
    targets: Vec<TargetData>,
    // integrated kernel mass per source node, sum of (1 - e^{-beta (T - t_k)}) / beta
    g: Vec<f64>,
    n_events: usize,
}

fn fitted_targets(model0: &HawkesModel, scope: &EdgeSet, mu_scope: MuScope) -> Vec<usize> {
    let m = model0.num_nodes();
    let mut on = vec![false; m];
    for (_, q) in scope.iter() {
        on[q] = true;
    }
    if mu_scope == MuScope::All {
        on.iter_mut().for_each(|v| *v = true);
    }
    (0..m).filter(|&q| on[q]).collect()
}

impl WindowData {
    fn new(events: &[Event], horizon: f64, model0: &HawkesModel, scope: &EdgeSet, mu_scope: MuScope) -> Self {
        let m = model0.num_nodes();
        let beta = model0.beta();
        let targets: Vec<usize> = fitted_targets(model0, scope, mu_scope);
        let mut slot = vec![usize::MAX; m];
        let mut data: Vec<TargetData> = targets
            .iter()
            .enumerate()
            .map(|(i, &q)| {
                slot[q] = i;
                let mut sources = Vec::new();
                let mut free = Vec::new();
                for p in 0..m {
                    let scoped = scope.contains((p, q));
                    if scoped || model0.alpha(p, q) > 0.0 {
                        sources.push(p);
                        free.push(scoped);
                    }
                }
                TargetData { node: q, sources, free, r: Vec::new(), n_events: 0 }
            })
            .collect();
        let mut relevant = vec![false; m];
        for t in &data {
            for &p in &t.sources {
                relevant[p] = true;
            }
        }
        let sources: Vec<usize> = (0..m).filter(|&p| relevant[p]).collect();
        let mut decayed = vec![0.0; m];
        let mut g = vec![0.0; m];
        let mut last = 0.0;
        for e in events {
            if !relevant[e.node] && slot[e.node] == usize::MAX {
                continue;
            }
            let f = (-beta * (e.time - last)).exp();
            for &p in &sources {
                decayed[p] *= f;
            }
            last = e.time;
            if slot[e.node] != usize::MAX {
                let t = &mut data[slot[e.node]];
                t.r.extend(t.sources.iter().map(|&p| decayed[p]));
                t.n_events += 1;
            }
            if relevant[e.node] {
                decayed[e.node] += 1.0;
                g[e.node] += -(-beta * (horizon - e.time)).exp_m1() / beta;
            }
        }
        WindowData { horizon, targets: data, g, n_events: events.len() }
    }
}

/// Sum of logarithms taken as the log of running products, which saves most
/// `ln` calls; intensities are bounded well inside the exponent range.
#[derive(Debug, Default)]
struct LogSum {
    sum: f64,
    product: f64,
    pending: u32,
}

impl LogSum {
    #[inline]
    fn add(&mut self, x: f64) {
        let x = x.max(1e-300);
        if self.pending == 0 {
            self.product = x;
        } else {
            self.product *= x;
        }
        self.pending += 1;
        if self.pending == 16 || !(1e-150..1e150).contains(&self.product) {
            self.sum += self.product.ln();
            self.pending = 0;
        }
    }

    fn total(&self) -> f64 {
        if self.pending > 0 {
            self.sum + self.product.ln()
        } else {
            self.sum
        }
    }
}

/// Parameters of one target during EM.
#[derive(Debug, Clone)]
struct TargetParams {
    mu: f64,
    alpha: Vec<f64>,
}

/// Log-likelihood of a target's events and compensator at given parameters.
fn target_loglik(t: &TargetData, p: &TargetParams, g: &[f64], horizon: f64) -> f64 {
    let s = t.sources.len();
    let mut logs = LogSum::default();
    for k in 0..t.n_events {
        let row = &t.r[k * s..(k + 1) * s];
        logs.add(p.mu + row.iter().zip(&p.alpha).map(|(r, a)| r * a).sum::<f64>());
    }
    logs.total() - p.mu * horizon - t.sources.iter().zip(&p.alpha).map(|(&src, a)| a * g[src]).sum::<f64>()
}

fn em_core(
    data: &WindowData,
    model0: &HawkesModel,
    init: Option<&HawkesModel>,
    scope: &EdgeSet,
    cfg: &GlrConfig,
) -> EmFit {
    let horizon = data.horizon;
    let mu_free = |q: usize| match cfg.mu_scope {
        MuScope::All => true,
        MuScope::ScopeTargets => scope.iter().any(|(_, t)| t == q),
        MuScope::None => false,
    };
    let mut params: Vec<TargetParams> = data
        .targets
        .iter()
        .map(|t| {
            let start = init.unwrap_or(model0);
            let mu = if mu_free(t.node) { start.mu()[t.node].max(MU_FLOOR) } else { model0.mu()[t.node] };
            let alpha = t
                .sources
                .iter()
                .zip(&t.free)
                .map(|(&p, &free)| match (free, init) {
                    (false, _) => model0.alpha(p, t.node),
                    (true, Some(m)) => m.alpha(p, t.node).max(WARM_FLOOR),
                    (true, None) => model0.alpha(p, t.node).max(cfg.alpha_init),
                })
                .collect();
            TargetParams { mu, alpha }
        })
        .collect();

    let degenerate = data.n_events == 0;
    let mut trace: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut iters = 0;
    for it in 0..=cfg.em_iters {
        // E-step quantities and current log-likelihood
        let mut logs = LogSum::default();
        let mut ll = 0.0;
        let mut updates = Vec::with_capacity(params.len());
        for (t, p) in data.targets.iter().zip(&params) {
            let s = t.sources.len();
            let mut inv_sum = 0.0;
            let mut b = vec![0.0; s];
            for k in 0..t.n_events {
                let row = &t.r[k * s..(k + 1) * s];
                let l = (p.mu + row.iter().zip(&p.alpha).map(|(r, a)| r * a).sum::<f64>()).max(1e-300);
                logs.add(l);
                inv_sum += 1.0 / l;
                for (bj, r) in b.iter_mut().zip(row) {
                    *bj += r / l;
                }
            }
            ll -= p.mu * horizon + t.sources.iter().zip(&p.alpha).map(|(&src, a)| a * data.g[src]).sum::<f64>();
            updates.push((inv_sum, b));
        }
        ll += logs.total();
        if let Some(&prev) = trace.last() {
            let gain = ll - prev;
            if gain.abs() <= cfg.rel_tol * prev.abs().max(1.0) {
                trace.push(ll);
                converged = true;
                break;
            }
        }
        trace.push(ll);
        if it == cfg.em_iters {
            break;
        }
        iters = it + 1;
        // M-step
        for ((t, p), (inv_sum, b)) in data.targets.iter().zip(params.iter_mut()).zip(updates) {
            if mu_free(t.node) {
                p.mu = (p.mu * inv_sum / horizon).max(MU_FLOOR);
            }
            for (j, (&src, &free)) in t.sources.iter().zip(&t.free).enumerate() {
                if free {
                    let g = data.g[src];
                    p.alpha[j] = if g > 0.0 { p.alpha[j] * b[j] / g } else { 0.0 };
                }
            }
        }
    }

    let mut model = model0.clone();
    for (t, p) in data.targets.iter().zip(&params) {
        model.set_mu(t.node, p.mu);
        for (&src, a) in t.sources.iter().zip(&p.alpha) {
            model.set_alpha(src, t.node, *a);
        }
    }
    let a_hat = scope.iter().map(|(p, q)| model.alpha(p, q)).collect();
    EmFit {
        mu_hat: model.mu().to_vec(),
        a_hat,
        loglik: *trace.last().unwrap_or(&0.0),
        iters,
        converged,
        degenerate,
        trace,
        model,
    }
}

/// EM fit of the scoped influence entries on a window (times relative to the
/// window start, horizon = window length). `init` warm-starts the iteration;
/// otherwise free entries start at `cfg.alpha_init`.
pub fn em_fit(
    window: &EventStream,
    model0: &HawkesModel,
    init: Option<&HawkesModel>,
    cfg: &GlrConfig,
) -> Result<EmFit> {
    cfg.validate()?;
    window.check_nodes(model0.num_nodes())?;
    cfg.edge_scope.check_nodes(model0.num_nodes())?;
    let data = WindowData::new(window.events(), window.horizon(), model0, &cfg.edge_scope, cfg.mu_scope);
    Ok(em_core(&data, model0, init, &cfg.edge_scope, cfg))
}

fn null_loglik(data: &WindowData, model0: &HawkesModel) -> f64 {
    data.targets
        .iter()
        .map(|t| {
            let p = TargetParams {
                mu: model0.mu()[t.node],
                alpha: t.sources.iter().map(|&s| model0.alpha(s, t.node)).collect(),
            };
            target_loglik(t, &p, &data.g, data.horizon)
        })
        .sum()
}

/// GLR on one window together with the fit that produced it.
fn glr_with_fit(
    events: &[Event],
    horizon: f64,
    model0: &HawkesModel,
    init: Option<&HawkesModel>,
    scope: &EdgeSet,
    cfg: &GlrConfig,
) -> (f64, EmFit) {
    let data = WindowData::new(events, horizon, model0, scope, cfg.mu_scope);
    let fit = em_core(&data, model0, init, scope, cfg);
    let null = null_loglik(&data, model0);
    // the reference model is itself a candidate, so the ratio is at least 0
    ((fit.loglik - null).max(0.0), fit)
}

/// Log GLR of the window against the reference model.
pub fn glr_stat(window: &EventStream, model0: &HawkesModel, cfg: &GlrConfig) -> Result<f64> {
    cfg.validate()?;
    window.check_nodes(model0.num_nodes())?;
    cfg.edge_scope.check_nodes(model0.num_nodes())?;
    Ok(glr_with_fit(window.events(), window.horizon(), model0, None, &cfg.edge_scope, cfg).0)
}

/// Push-based GLR monitor; with clusters it takes the per-cluster maximum
/// (each cluster's edges as the scope).
#[derive(Debug, Clone)]
pub struct GlrMonitor {
    model0: HawkesModel,
    cfg: GlrConfig,
    scopes: Vec<EdgeSet>,
    warm: Vec<Option<HawkesModel>>,
    buffer: VecDeque<Event>,
    scratch: Vec<Event>,
    next_index: u64,
    first_index: u64,
    keep_trajectory: bool,
    trajectory: Vec<GammaSnapshot>,
    last: Option<GammaSnapshot>,
    alarm: Option<GammaSnapshot>,
    updates: u64,
}

impl GlrMonitor {
    pub fn new(model0: &HawkesModel, cfg: GlrConfig, clusters: Option<&ClusterSet>) -> Result<Self> {
        cfg.validate()?;
        let scopes: Vec<EdgeSet> = match clusters {
            Some(c) => c.clusters().iter().map(|c| c.edges.clone()).collect(),
            None => vec![cfg.edge_scope.clone()],
        };
        for s in &scopes {
            s.check_nodes(model0.num_nodes())?;
        }
        let ratio = cfg.window / cfg.eval_interval;
        Ok(GlrMonitor {
            model0: model0.clone(),
            warm: vec![None; scopes.len()],
            scopes,
            buffer: VecDeque::new(),
            scratch: Vec::new(),
            next_index: 1,
            first_index: (ratio - 1e-9).ceil().max(1.0) as u64,
            keep_trajectory: true,
            trajectory: Vec::new(),
            last: None,
            alarm: None,
            updates: 0,
            cfg,
        })
    }

    pub fn without_trajectory(mut self) -> Self {
        self.keep_trajectory = false;
        self
    }

    pub fn alarm(&self) -> Option<&GammaSnapshot> {
        self.alarm.as_ref()
    }

    pub fn latest(&self) -> Option<&GammaSnapshot> {
        self.last.as_ref()
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    fn evaluate(&mut self, t: f64) -> GammaSnapshot {
        let start = t - self.cfg.window;
        while self.buffer.front().is_some_and(|e| e.time < start) {
            self.buffer.pop_front();
        }
        self.scratch.clear();
        self.scratch.extend(
            self.buffer
                .iter()
                .filter(|e| e.time < t)
                .map(|e| Event::new(e.time - start, e.node)),
        );
        let mut values = Vec::with_capacity(self.scopes.len());
        for (i, scope) in self.scopes.iter().enumerate() {
            let init = if self.cfg.warm_start { self.warm[i].as_ref() } else { None };
            let (stat, fit) = glr_with_fit(&self.scratch, self.cfg.window, &self.model0, init, scope, &self.cfg);
            if self.cfg.warm_start {
                self.warm[i] = Some(fit.model);
            }
            values.push(stat);
        }
        GammaSnapshot::new(t, values, false)
    }

    pub fn advance_to(&mut self, t: f64) -> Result<bool> {
        while self.alarm.is_none() {
            let tc = self.next_index as f64 * self.cfg.eval_interval;
            if tc > t {
                break;
            }
            let n = self.next_index;
            self.next_index += 1;
            if n < self.first_index {
                continue;
            }
            let snap = self.evaluate(tc);
            self.updates += 1;
            if snap.max_abs > self.cfg.threshold {
                self.alarm = Some(snap.clone());
            }
            if self.keep_trajectory {
                self.trajectory.push(snap.clone());
            }
            self.last = Some(snap);
        }
        Ok(self.alarm.is_some())
    }

    pub fn push(&mut self, event: Event) -> Result<bool> {
        if self.alarm.is_some() {
            return Ok(true);
        }
        if event.node >= self.model0.num_nodes() {
            return Err(Error::Argument(format!("event node {} out of range", event.node)));
        }
        if let Some(last) = self.buffer.back() {
            if event.time < last.time {
                return Err(Error::Ordering { time: event.time, previous: last.time });
            }
        }
        if self.advance_to(event.time)? {
            return Ok(true);
        }
        self.buffer.push_back(event);
        Ok(false)
    }

    pub fn into_result(self) -> DetectionResult {
        let threshold = self.cfg.threshold;
        let flagged = self
            .alarm
            .as_ref()
            .map(|s| {
                s.per_cluster
                    .iter()
                    .enumerate()
                    .filter(|(_, g)| **g > threshold)
                    .map(|(i, _)| i)
                    .collect()
            })
            .unwrap_or_default();
        DetectionResult {
            stopped: self.alarm.is_some(),
            stop_time: self.alarm.as_ref().map(|s| s.t),
            trajectory: if self.keep_trajectory { self.trajectory } else { self.last.into_iter().collect() },
            flagged_clusters: flagged,
        }
    }
}

/// Runs the GLR monitor (GLR-C when `clusters` is given) over a stream.
pub fn run_glr_monitor(
    stream: &EventStream,
    model0: &HawkesModel,
    cfg: &GlrConfig,
    clusters: Option<&ClusterSet>,
) -> Result<DetectionResult> {
    stream.check_nodes(model0.num_nodes())?;
    let mut monitor = GlrMonitor::new(model0, cfg.clone(), clusters)?;
    for e in stream.events() {
        if monitor.push(*e)? {
            break;
        }
    }
    monitor.advance_to(stream.horizon())?;
    Ok(monitor.into_result())
}

/// Renewal estimate of the ARL at `threshold` from null statistic paths
/// recorded without stopping: after each alarm the monitor restarts and its
/// next statistic uses a full fresh window.
pub fn renewal_arl(paths: &[Vec<(f64, f64)>], threshold: f64, window: f64) -> (f64, usize) {
    let mut time = 0.0;
    let mut alarms = 0;
    for path in paths {
        let Some(&(end, _)) = path.last() else { continue };
        let mut start = 0.0;
        for &(t, s) in path {
            if t < start + window - 1e-9 {
                continue;
            }
            if s > threshold {
                alarms += 1;
                time += t - start;
                start = t;
            }
        }
        time += end - start;
    }
    (if alarms > 0 { time / alarms as f64 } else { f64::INFINITY }, alarms)
}

/// Smallest threshold whose renewal ARL reaches `target`.
pub fn calibrate_threshold(paths: &[Vec<(f64, f64)>], target: f64, window: f64) -> Result<f64> {
    let mut values: Vec<f64> = paths.iter().flatten().map(|&(_, s)| s).collect();
    values.sort_by(|a, b| a.total_cmp(b));
    values.dedup();
    if values.is_empty() {
        return Err(Error::Calibration("no statistic values to calibrate on".into()));
    }
    if renewal_arl(paths, values[0] - 1.0, window).0 >= target {
        return Ok(values[0] - 1.0);
    }
    // ARL is a nondecreasing step function of the threshold
    let (mut lo, mut hi) = (0usize, values.len() - 1);
    if renewal_arl(paths, values[hi], window).0 < target {
        return Err(Error::Calibration(format!(
            "recorded paths are too short to reach ARL {target}"
        )));
    }
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if renewal_arl(paths, values[mid], window).0 >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(values[hi])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::simulate;

    fn one_node_cfg(window: f64) -> GlrConfig {
        GlrConfig::new(window, window, EdgeSet::new(vec![(0, 0)]).unwrap(), 1e9).unwrap()
    }

    #[test]
    fn recovers_self_excitation() {
        let truth = HawkesModel::new(vec![1.0], vec![vec![0.5]], 1.0).unwrap();
        let s = simulate(&truth, 5000.0, 3).unwrap();
        let model0 = HawkesModel::poisson(vec![1.0], 1.0).unwrap();
        let mut cfg = one_node_cfg(5000.0);
        cfg.em_iters = 500;
        cfg.rel_tol = 1e-12;
        let fit = em_fit(&s, &model0, None, &cfg).unwrap();
        assert!((fit.a_hat[0] - 0.5).abs() < 0.07, "{:?}", fit.a_hat);
        assert!(fit.trace.windows(2).all(|w| w[1] >= w[0] - 1e-8));
    }

    #[test]
    fn poisson_data_gives_small_alpha() {
        let model0 = HawkesModel::poisson(vec![1.0, 2.0], 1.0).unwrap();
        let s = simulate(&model0, 5000.0, 4).unwrap();
        let mut cfg = GlrConfig::new(5000.0, 5000.0, EdgeSet::new(vec![(0, 1), (1, 1)]).unwrap(), 1e9).unwrap();
        cfg.em_iters = 3000;
        cfg.rel_tol = 1e-13;
        let fit = em_fit(&s, &model0, None, &cfg).unwrap();
        assert!(fit.a_hat.iter().all(|&a| a <= 0.05), "{:?}", fit.a_hat);
        assert!((fit.mu_hat[1] / 2.0 - 1.0).abs() < 0.05);
        // node 0 is not a target, so its rate stays put
        assert_eq!(fit.mu_hat[0], 1.0);
    }

    #[test]
    fn single_event_is_background() {
        let model0 = HawkesModel::poisson(vec![1.0], 1.0).unwrap();
        let s = EventStream::new(vec![Event::new(3.0, 0)], 50.0).unwrap();
        let fit = em_fit(&s, &model0, None, &one_node_cfg(50.0)).unwrap();
        assert!((fit.mu_hat[0] - 1.0 / 50.0).abs() < 1e-9);
    }

    #[test]
    fn empty_window_closed_form() {
        let model0 = HawkesModel::poisson(vec![1.5], 1.0).unwrap();
        let s = EventStream::new(vec![], 20.0).unwrap();
        let cfg = one_node_cfg(20.0);
        let fit = em_fit(&s, &model0, None, &cfg).unwrap();
        assert!(fit.degenerate);
        assert_eq!(fit.mu_hat[0], MU_FLOOR);
        let g = glr_stat(&s, &model0, &cfg).unwrap();
        assert!((g - (1.5 - MU_FLOOR) * 20.0).abs() < 1e-9);
    }

    #[test]
    fn glr_monitor_never_stops_at_infinite_threshold() {
        let model0 = HawkesModel::poisson(vec![1.0; 3], 1.0).unwrap();
        let s = simulate(&model0, 400.0, 5).unwrap();
        let cfg = GlrConfig::new(200.0, 10.0, EdgeSet::new(vec![(0, 1), (0, 2)]).unwrap(), f64::INFINITY).unwrap();
        let r = run_glr_monitor(&s, &model0, &cfg, None).unwrap();
        assert!(!r.stopped);
        assert_eq!(r.trajectory.len(), 21);
        assert!(r.trajectory.iter().all(|g| g.max_abs >= 0.0));
    }

    #[test]
    fn renewal_arl_counts_cycles() {
        let path: Vec<(f64, f64)> = (1..=10).map(|i| (i as f64 * 10.0, if i == 4 || i == 9 { 5.0 } else { 0.0 })).collect();
        // alarm at 40; restart, next eligible at 40 + 20 = 60; alarm at 90
        let (arl, n) = renewal_arl(std::slice::from_ref(&path), 1.0, 20.0);
        assert_eq!(n, 2);
        assert!((arl - 50.0).abs() < 1e-12);
        let b = calibrate_threshold(&[path], 60.0, 20.0).unwrap();
        assert_eq!(b, 5.0);
    }
}

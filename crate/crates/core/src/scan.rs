//! Cluster scan statistics and the online stopping rule.
//!
//! For cluster `i` with edges `E_i` (`R_i = |E_i|`) and windowed score vector
//! `S`, the standardized statistic is
//! `Gamma_i = (w R_i)^{-1/2} 1^T I_i^{-1/2} S`, asymptotically `N(0, 1)` under
//! the reference model. The monitor alarms at the first update with
//! `max_i |Gamma_i| > b`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::inverse_sqrt;
use crate::model::{Event, EventStream, HawkesModel};
use crate::score::{EdgeSet, FisherInfo, ScoreState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub name: String,
    pub nodes: Vec<usize>,
    pub edges: EdgeSet,
}

/// Candidate clusters; the union of their edges is what gets tracked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ClusterFile", into = "ClusterFile")]
pub struct ClusterSet {
    clusters: Vec<Cluster>,
    union_edges: EdgeSet,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterFile {
    pub clusters: Vec<Cluster>,
}

impl TryFrom<ClusterFile> for ClusterSet {
    type Error = Error;

    fn try_from(file: ClusterFile) -> Result<Self> {
        ClusterSet::new(file.clusters)
    }
}

impl From<ClusterSet> for ClusterFile {
    fn from(set: ClusterSet) -> Self {
        ClusterFile { clusters: set.clusters }
    }
}

impl ClusterSet {
    pub fn new(clusters: Vec<Cluster>) -> Result<Self> {
        if clusters.is_empty() {
            return Err(Error::Config("at least one cluster is required".into()));
        }
        for c in &clusters {
            if c.edges.is_empty() {
                return Err(Error::Config(format!("cluster {} has no edges", c.name)));
            }
            if let Some((p, q)) = c
                .edges
                .iter()
                .find(|(p, q)| !c.nodes.contains(p) || !c.nodes.contains(q))
            {
                return Err(Error::Config(format!(
                    "edge ({p}, {q}) of cluster {} leaves its node set",
                    c.name
                )));
            }
        }
        let union_edges = EdgeSet::union(clusters.iter().map(|c| &c.edges));
        Ok(ClusterSet { clusters, union_edges })
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn union_edges(&self) -> &EdgeSet {
        &self.union_edges
    }

    pub fn num_nodes_required(&self) -> usize {
        self.clusters
            .iter()
            .flat_map(|c| c.nodes.iter())
            .map(|&n| n + 1)
            .max()
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorConfig {
    /// Window length `w`.
    pub w: f64,
    /// Update interval `delta`; `w / delta` must be an integer.
    pub delta: f64,
    /// Alarm threshold `b`.
    pub b: f64,
    #[serde(default = "default_two_sided")]
    pub two_sided: bool,
}

fn default_two_sided() -> bool {
    true
}

impl MonitorConfig {
    pub fn new(w: f64, delta: f64, b: f64) -> Result<Self> {
        let cfg = MonitorConfig { w, delta, b, two_sided: true };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn one_sided(mut self) -> Self {
        self.two_sided = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta <= self.w && self.w.is_finite()) {
            return Err(Error::Config(format!(
                "need 0 < delta <= w, got delta={} w={}",
                self.delta, self.w
            )));
        }
        let ratio = self.w / self.delta;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio {
            return Err(Error::Config(format!(
                "w/delta must be an integer, got {}",
                ratio
            )));
        }
        if !(self.b > 0.0) {
            return Err(Error::Config(format!("threshold must be positive, got {}", self.b)));
        }
        Ok(())
    }

    pub fn window_steps(&self) -> u64 {
        (self.w / self.delta).round() as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaSnapshot {
    pub t: f64,
    pub per_cluster: Vec<f64>,
    /// `max_i |Gamma_i|`, or `max_i Gamma_i` for a one-sided monitor.
    pub max_abs: f64,
}

impl GammaSnapshot {
    pub fn new(t: f64, per_cluster: Vec<f64>, two_sided: bool) -> Self {
        let max_abs = if two_sided {
            per_cluster.iter().map(|g| g.abs()).fold(f64::NEG_INFINITY, f64::max)
        } else {
            per_cluster.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        };
        GammaSnapshot { t, per_cluster, max_abs }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DetectionResult {
    pub stopped: bool,
    pub stop_time: Option<f64>,
    pub trajectory: Vec<GammaSnapshot>,
    pub flagged_clusters: Vec<usize>,
}

impl DetectionResult {
    /// True when the stream ended before the first full window.
    pub fn insufficient_data(&self) -> bool {
        self.trajectory.is_empty()
    }
}

/// Clusters whose statistic exceeds `b` in absolute value.
pub fn localize(snapshot: &GammaSnapshot, b: f64) -> Vec<usize> {
    snapshot
        .per_cluster
        .iter()
        .enumerate()
        .filter(|(_, g)| g.abs() > b)
        .map(|(i, _)| i)
        .collect()
}

/// Standardized statistic for one cluster from its windowed score vector and
/// the Fisher information restricted to its edges.
pub fn cluster_stat(score: &[f64], fisher: &FisherInfo, w: f64) -> Result<f64> {
    let r = fisher.edges.len();
    if score.len() != r {
        return Err(Error::Argument(format!(
            "score has {} entries but the cluster has {r} edges",
            score.len()
        )));
    }
    let weights = cluster_weights(&fisher.matrix)?;
    Ok(weights.iter().zip(score).map(|(a, s)| a * s).sum::<f64>() / w.sqrt())
}

/// `R^{-1/2} I^{-1/2} 1`: the linear functional applied to a window score
/// (before the `w^{-1/2}` factor).
pub fn cluster_weights(fisher: &DMatrix<f64>) -> Result<Vec<f64>> {
    let r = fisher.nrows();
    let inv = inverse_sqrt(fisher)?;
    let ones = DVector::from_element(r, 1.0);
    Ok((inv * ones / (r as f64).sqrt()).iter().copied().collect())
}

/// Precomputed per-cluster weights over the union edge coordinates.
#[derive(Debug, Clone)]
pub struct ScanWeights {
    // (index into union edges, weight) per cluster
    terms: Vec<Vec<(usize, f64)>>,
}

impl ScanWeights {
    pub fn new(clusters: &ClusterSet, fisher: &FisherInfo) -> Result<Self> {
        let union = clusters.union_edges();
        let terms = clusters
            .clusters()
            .iter()
            .map(|c| {
                let local = fisher.restrict(&c.edges)?;
                let weights = cluster_weights(&local.matrix)?;
                let idx = union.indices_of(&c.edges)?;
                Ok(idx.into_iter().zip(weights).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ScanWeights { terms })
    }

    /// Per-cluster statistics from a union-edge window score.
    pub fn apply(&self, window_score: &[f64], w: f64) -> Vec<f64> {
        let scale = 1.0 / w.sqrt();
        self.terms
            .iter()
            .map(|t| t.iter().map(|&(i, a)| a * window_score[i]).sum::<f64>() * scale)
            .collect()
    }

    pub fn num_clusters(&self) -> usize {
        self.terms.len()
    }
}

/// Computes the scan snapshot at checkpoint time `t` from a score state that
/// tracks (at least) the union of the cluster edges.
pub fn scan_snapshot(
    state: &ScoreState,
    clusters: &ClusterSet,
    fisher: &FisherInfo,
    cfg: &MonitorConfig,
    t: f64,
) -> Result<GammaSnapshot> {
    let weights = ScanWeights::new(clusters, fisher)?;
    let window = state.window_score(t, cfg.w, clusters.union_edges())?;
    Ok(GammaSnapshot::new(t, weights.apply(&window, cfg.w), cfg.two_sided))
}

/// Push-based online monitor: feed events in time order, it updates at every
/// multiple of `delta` from `w` on and stops at the first exceedance.
#[derive(Debug, Clone)]
pub struct Monitor {
    state: ScoreState,
    weights: ScanWeights,
    cfg: MonitorConfig,
    steps: u64,
    next_index: u64,
    keep_trajectory: bool,
    trajectory: Vec<GammaSnapshot>,
    last: Option<GammaSnapshot>,
    updates: u64,
    alarm: Option<GammaSnapshot>,
}

impl Monitor {
    pub fn new(
        model0: &HawkesModel,
        clusters: &ClusterSet,
        fisher: &FisherInfo,
        cfg: MonitorConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if clusters.num_nodes_required() > model0.num_nodes() {
            return Err(Error::Config(format!(
                "clusters reference {} nodes but the model has {}",
                clusters.num_nodes_required(),
                model0.num_nodes()
            )));
        }
        let weights = ScanWeights::new(clusters, fisher)?;
        let state = ScoreState::new(model0.clone(), clusters.union_edges().clone())?
            .with_checkpoints(cfg.delta, cfg.w)?;
        Ok(Monitor {
            state,
            weights,
            steps: cfg.window_steps(),
            cfg,
            next_index: 1,
            keep_trajectory: true,
            trajectory: Vec::new(),
            last: None,
            updates: 0,
            alarm: None,
        })
    }

    /// Keep only the latest snapshot instead of the whole trajectory.
    pub fn without_trajectory(mut self) -> Self {
        self.keep_trajectory = false;
        self
    }

    pub fn config(&self) -> &MonitorConfig {
        &self.cfg
    }

    pub fn alarm(&self) -> Option<&GammaSnapshot> {
        self.alarm.as_ref()
    }

    pub fn latest(&self) -> Option<&GammaSnapshot> {
        self.last.as_ref()
    }

    /// Number of snapshots computed so far.
    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// Removes and returns the snapshots recorded so far.
    pub fn take_trajectory(&mut self) -> Vec<GammaSnapshot> {
        std::mem::take(&mut self.trajectory)
    }

    /// Runs all updates due at or before `t`. Returns true once alarmed.
    pub fn advance_to(&mut self, t: f64) -> Result<bool> {
        while self.alarm.is_none() {
            let tc = self.next_index as f64 * self.cfg.delta;
            if tc > t {
                break;
            }
            self.state.advance_to(tc)?;
            let n = self.next_index;
            self.next_index += 1;
            if n < self.steps {
                continue;
            }
            let window = self
                .state
                .window_scores_by_index(n, self.steps)
                .ok_or(Error::MissingCheckpoint(tc))?;
            let snap = GammaSnapshot::new(tc, self.weights.apply(&window, self.cfg.w), self.cfg.two_sided);
            self.updates += 1;
            if snap.max_abs > self.cfg.b {
                self.alarm = Some(snap.clone());
            }
            if self.keep_trajectory {
                self.trajectory.push(snap.clone());
            }
            self.last = Some(snap);
        }
        if self.alarm.is_none() {
            self.state.advance_to(t)?;
        }
        Ok(self.alarm.is_some())
    }

    /// Feeds one event. Returns true once alarmed; later events are ignored.
    pub fn push(&mut self, event: Event) -> Result<bool> {
        if self.alarm.is_some() {
            return Ok(true);
        }
        if self.advance_to(event.time)? {
            return Ok(true);
        }
        self.state.ingest(event)?;
        Ok(false)
    }

    pub fn into_result(self) -> DetectionResult {
        let flagged = self
            .alarm
            .as_ref()
            .map(|s| localize(s, self.cfg.b))
            .unwrap_or_default();
        let trajectory = if self.keep_trajectory {
            self.trajectory
        } else {
            self.last.into_iter().collect()
        };
        DetectionResult {
            stopped: self.alarm.is_some(),
            stop_time: self.alarm.map(|s| s.t),
            trajectory,
            flagged_clusters: flagged,
        }
    }
}

/// Runs the monitor over a whole stream up to its horizon.
pub fn run_monitor(
    stream: &EventStream,
    model0: &HawkesModel,
    clusters: &ClusterSet,
    fisher: &FisherInfo,
    cfg: MonitorConfig,
) -> Result<DetectionResult> {
    stream.check_nodes(model0.num_nodes())?;
    let mut monitor = Monitor::new(model0, clusters, fisher, cfg)?;
    for e in stream.events() {
        if monitor.push(*e)? {
            break;
        }
    }
    monitor.advance_to(stream.horizon())?;
    Ok(monitor.into_result())
}

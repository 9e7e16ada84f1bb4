//! Streaming score statistics with respect to the influence matrix, and the
//! Fisher information used to standardize them.
//!
//! For a tracked edge `(p, q)` the cumulative score at time `T` is
//!
//! ```text
//! S^{(p,q)}_T = sum_{k: u_k = q, t_k < T} R_p(t_k) / lambda_q(t_k)  +  (R_p(T) - N_p(T)) / beta
//! ```
//!
//! where `R_p(t) = sum_{i: u_i = p, t_i < t} exp(-beta (t - t_i))` and
//! `lambda_q` is the intensity under the reference model. The jump part is
//! accumulated per event; the compensator part is materialized when read.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Event, EventStream, HawkesModel};

/// Denominator floor for intensities in the score and Fisher accumulators.
pub const INTENSITY_FLOOR: f64 = 1e-12;

/// Ordered set of directed `(source, target)` edges. The order defines vector
/// coordinates everywhere an edge-indexed vector appears.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<(usize, usize)>", into = "Vec<(usize, usize)>")]
pub struct EdgeSet {
    edges: Vec<(usize, usize)>,
}

impl TryFrom<Vec<(usize, usize)>> for EdgeSet {
    type Error = Error;

    fn try_from(edges: Vec<(usize, usize)>) -> Result<Self> {
        EdgeSet::new(edges)
    }
}

impl From<EdgeSet> for Vec<(usize, usize)> {
    fn from(set: EdgeSet) -> Self {
        set.edges
    }
}

impl EdgeSet {
    pub fn new(edges: Vec<(usize, usize)>) -> Result<Self> {
        for (i, e) in edges.iter().enumerate() {
            if edges[..i].contains(e) {
                return Err(Error::Config(format!("duplicate edge ({}, {})", e.0, e.1)));
            }
        }
        Ok(EdgeSet { edges })
    }

    /// Deduplicated union, keeping first-seen order.
    pub fn union<'a>(sets: impl IntoIterator<Item = &'a EdgeSet>) -> EdgeSet {
        let mut edges = Vec::new();
        for set in sets {
            for e in &set.edges {
                if !edges.contains(e) {
                    edges.push(*e);
                }
            }
        }
        EdgeSet { edges }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn as_slice(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn position(&self, edge: (usize, usize)) -> Option<usize> {
        self.edges.iter().position(|&e| e == edge)
    }

    pub fn contains(&self, edge: (usize, usize)) -> bool {
        self.edges.contains(&edge)
    }

    pub fn check_nodes(&self, num_nodes: usize) -> Result<()> {
        match self.edges.iter().find(|(p, q)| *p >= num_nodes || *q >= num_nodes) {
            Some((p, q)) => Err(Error::Config(format!(
                "edge ({p}, {q}) references a node outside 0..{num_nodes}"
            ))),
            None => Ok(()),
        }
    }

    /// Indices of `other`'s edges within `self`; errors naming the first missing edge.
    pub fn indices_of(&self, other: &EdgeSet) -> Result<Vec<usize>> {
        other
            .iter()
            .map(|e| {
                self.position(e).ok_or_else(|| {
                    Error::Config(format!("edge ({}, {}) is not tracked", e.0, e.1))
                })
            })
            .collect()
    }
}

/// Per-unit-time asymptotic covariance of `T^{-1/2} S_T` over an edge set.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherInfo {
    pub edges: EdgeSet,
    pub matrix: DMatrix<f64>,
}

/// Serialized form: edge list plus row-major matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FisherFile {
    pub edges: Vec<(usize, usize)>,
    pub matrix: Vec<Vec<f64>>,
}

impl FisherInfo {
    pub fn new(edges: EdgeSet, matrix: DMatrix<f64>) -> Result<Self> {
        let n = edges.len();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::Config(format!(
                "fisher matrix is {}x{} but there are {n} edges",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(FisherInfo { edges, matrix })
    }

    /// Sub-matrix for `subset`, in `subset`'s order.
    pub fn restrict(&self, subset: &EdgeSet) -> Result<FisherInfo> {
        let idx = self.edges.indices_of(subset)?;
        let n = idx.len();
        Ok(FisherInfo {
            edges: subset.clone(),
            matrix: DMatrix::from_fn(n, n, |i, j| self.matrix[(idx[i], idx[j])]),
        })
    }

    /// Cross-covariance block between two edge subsets.
    pub fn cross(&self, rows: &EdgeSet, cols: &EdgeSet) -> Result<DMatrix<f64>> {
        let ri = self.edges.indices_of(rows)?;
        let ci = self.edges.indices_of(cols)?;
        Ok(DMatrix::from_fn(ri.len(), ci.len(), |i, j| self.matrix[(ri[i], ci[j])]))
    }

    pub fn to_file(&self) -> FisherFile {
        FisherFile {
            edges: self.edges.as_slice().to_vec(),
            matrix: self
                .matrix
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
        }
    }

    pub fn from_file(file: FisherFile) -> Result<Self> {
        let n = file.edges.len();
        if file.matrix.len() != n || file.matrix.iter().any(|r| r.len() != n) {
            return Err(Error::Config(format!("fisher matrix must be {n}x{n}")));
        }
        let flat: Vec<f64> = file.matrix.into_iter().flatten().collect();
        FisherInfo::new(EdgeSet::new(file.edges)?, DMatrix::from_row_slice(n, n, &flat))
    }

    /// Smallest and largest eigenvalues.
    pub fn eigen_range(&self) -> (f64, f64) {
        if self.edges.is_empty() {
            return (0.0, 0.0);
        }
        let eig = self.matrix.clone().symmetric_eigen();
        let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        let max = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (min, max)
    }

    /// Whether entries for edges with distinct targets are exactly zero.
    pub fn is_target_block_diagonal(&self) -> bool {
        let e = self.edges.as_slice();
        (0..e.len()).all(|i| (0..e.len()).all(|j| e[i].1 == e[j].1 || self.matrix[(i, j)] == 0.0))
    }
}

/// Closed-form Fisher information at a Poisson reference model (`A = 0`).
pub fn fisher_closed_form(model0: &HawkesModel, edges: &EdgeSet) -> Result<FisherInfo> {
    if !model0.is_poisson() {
        return Err(Error::Argument(
            "closed-form Fisher information needs a zero influence matrix; use fisher_estimate".into(),
        ));
    }
    edges.check_nodes(model0.num_nodes())?;
    let mu = model0.mu();
    let beta = model0.beta();
    let e = edges.as_slice();
    let matrix = DMatrix::from_fn(e.len(), e.len(), |i, j| {
        let (p, q) = e[i];
        let (p2, q2) = e[j];
        if q != q2 {
            0.0
        } else if p == p2 {
            mu[p] / mu[q] * (0.5 / beta + mu[p] / (beta * beta))
        } else {
            mu[p] * mu[p2] / (mu[q] * beta * beta)
        }
    });
    FisherInfo::new(edges.clone(), matrix)
}

#[derive(Debug, Clone)]
pub struct FisherEstimate {
    pub info: FisherInfo,
    /// Set when the estimate is degenerate (no events).
    pub warning: Option<String>,
    pub floor_hits: u64,
}

/// Plug-in Fisher information from an observed stream, normalized by its horizon.
pub fn fisher_estimate(stream: &EventStream, model: &HawkesModel, edges: &EdgeSet) -> Result<FisherEstimate> {
    if !(stream.horizon() > 0.0) {
        return Err(Error::Argument("fisher estimation needs a positive horizon".into()));
    }
    stream.check_nodes(model.num_nodes())?;
    let mut state = ScoreState::new(model.clone(), edges.clone())?.with_fisher();
    for e in stream.events() {
        state.ingest(*e)?;
    }
    let info = state.fisher_info(stream.horizon())?;
    let warning = stream
        .is_empty()
        .then(|| "stream has no events; Fisher information is zero".to_string());
    Ok(FisherEstimate {
        info,
        warning,
        floor_hits: state.floor_hits(),
    })
}

#[derive(Debug, Clone)]
struct Checkpoints {
    delta: f64,
    capacity: usize,
    next_index: u64,
    snapshots: VecDeque<(u64, Vec<f64>)>,
}

/// Streaming score state for a fixed reference model and tracked edge set.
#[derive(Debug, Clone)]
pub struct ScoreState {
    model0: HawkesModel,
    edges: EdgeSet,
    // tracked edge indices grouped by target node
    by_target: Vec<Vec<usize>>,
    // nonzero reference influences into each target: (source, alpha)
    inputs: Vec<Vec<(usize, f64)>>,
    last_time: f64,
    decayed: Vec<f64>,
    counts: Vec<f64>,
    jump: Vec<f64>,
    fisher: Option<Vec<Vec<f64>>>,
    checkpoints: Option<Checkpoints>,
    floor_hits: u64,
}

impl ScoreState {
    pub fn new(model0: HawkesModel, edges: EdgeSet) -> Result<Self> {
        let m = model0.num_nodes();
        edges.check_nodes(m)?;
        let mut by_target = vec![Vec::new(); m];
        for (i, (_, q)) in edges.iter().enumerate() {
            by_target[q].push(i);
        }
        let inputs = (0..m)
            .map(|q| {
                (0..m)
                    .filter_map(|p| {
                        let a = model0.alpha(p, q);
                        (a != 0.0).then_some((p, a))
                    })
                    .collect()
            })
            .collect();
        Ok(ScoreState {
            jump: vec![0.0; edges.len()],
            decayed: vec![0.0; m],
            counts: vec![0.0; m],
            model0,
            edges,
            by_target,
            inputs,
            last_time: 0.0,
            fisher: None,
            checkpoints: None,
            floor_hits: 0,
        })
    }

    /// Also accumulate the plug-in Fisher information.
    pub fn with_fisher(mut self) -> Self {
        self.fisher = Some(
            self.by_target
                .iter()
                .map(|idx| vec![0.0; idx.len() * idx.len()])
                .collect(),
        );
        self
    }

    /// Record cumulative-score snapshots at every multiple of `delta`, keeping
    /// enough of them to difference across a window of length `window`.
    pub fn with_checkpoints(mut self, delta: f64, window: f64) -> Result<Self> {
        if !(delta > 0.0 && window >= delta) {
            return Err(Error::Config(format!(
                "update interval {delta} must be positive and at most the window {window}"
            )));
        }
        let ratio = window / delta;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::Config(format!(
                "window {window} must be an integer multiple of the update interval {delta}"
            )));
        }
        let capacity = ratio.round() as usize + 1;
        let mut cp = Checkpoints {
            delta,
            capacity,
            next_index: 0,
            snapshots: VecDeque::with_capacity(capacity),
        };
        if self.last_time == 0.0 {
            cp.snapshots.push_back((0, self.scores_at(0.0)));
            cp.next_index = 1;
        }
        self.checkpoints = Some(cp);
        Ok(self)
    }

    pub fn model(&self) -> &HawkesModel {
        &self.model0
    }

    pub fn edges(&self) -> &EdgeSet {
        &self.edges
    }

    pub fn last_time(&self) -> f64 {
        self.last_time
    }

    /// How often an intensity hit [`INTENSITY_FLOOR`].
    pub fn floor_hits(&self) -> u64 {
        self.floor_hits
    }

    /// Per-source decayed counts at the last ingested time.
    pub fn decayed_sources(&self) -> &[f64] {
        &self.decayed
    }

    /// Index of the most recent checkpoint, if any.
    pub fn last_checkpoint(&self) -> Option<u64> {
        self.checkpoints
            .as_ref()
            .and_then(|cp| cp.snapshots.back().map(|(n, _)| *n))
    }

    fn decay_to(&mut self, t: f64) {
        let f = (-self.model0.beta() * (t - self.last_time)).exp();
        self.decayed.iter_mut().for_each(|r| *r *= f);
        self.last_time = t;
    }

    /// Records checkpoints at all multiples of delta up to and including `t`.
    /// Events at exactly a checkpoint time are not part of that checkpoint.
    pub fn advance_to(&mut self, t: f64) -> Result<()> {
        if t < self.last_time {
            return Err(Error::Ordering { time: t, previous: self.last_time });
        }
        let Some(cp) = self.checkpoints.as_ref() else {
            self.decay_to(t);
            return Ok(());
        };
        let delta = cp.delta;
        let mut n = cp.next_index;
        loop {
            let tc = n as f64 * delta;
            if tc > t {
                break;
            }
            self.decay_to(tc);
            let snap = self.scores_at(tc);
            let cp = self.checkpoints.as_mut().unwrap();
            if cp.snapshots.len() == cp.capacity {
                cp.snapshots.pop_front();
            }
            cp.snapshots.push_back((n, snap));
            n += 1;
            cp.next_index = n;
        }
        self.decay_to(t);
        Ok(())
    }

    /// Adds one event. Checkpoints falling at or before the event time are recorded first.
    pub fn ingest(&mut self, event: Event) -> Result<()> {
        if event.time < self.last_time {
            return Err(Error::Ordering { time: event.time, previous: self.last_time });
        }
        let q = event.node;
        if q >= self.decayed.len() {
            return Err(Error::Argument(format!("event node {q} out of range")));
        }
        self.advance_to(event.time)?;

        let targets = &self.by_target[q];
        if !targets.is_empty() {
            let mut lambda = self.model0.mu()[q]
                + self.inputs[q]
                    .iter()
                    .map(|&(p, a)| a * self.decayed[p])
                    .sum::<f64>();
            if lambda < INTENSITY_FLOOR {
                lambda = INTENSITY_FLOOR;
                self.floor_hits += 1;
            }
            let inv = 1.0 / lambda;
            for &i in targets {
                let p = self.edges.as_slice()[i].0;
                self.jump[i] += self.decayed[p] * inv;
            }
            if let Some(fisher) = self.fisher.as_mut() {
                let block = &mut fisher[q];
                let n = targets.len();
                let inv2 = inv * inv;
                for (a, &i) in targets.iter().enumerate() {
                    let ri = self.decayed[self.edges.as_slice()[i].0];
                    for (b, &j) in targets.iter().enumerate() {
                        let rj = self.decayed[self.edges.as_slice()[j].0];
                        block[a * n + b] += ri * rj * inv2;
                    }
                }
            }
        }
        self.decayed[q] += 1.0;
        self.counts[q] += 1.0;
        Ok(())
    }

    /// Cumulative scores at `t >= last_time` for all tracked edges, without
    /// mutating state.
    pub fn scores_at(&self, t: f64) -> Vec<f64> {
        let beta = self.model0.beta();
        let f = (-beta * (t - self.last_time)).exp();
        self.edges
            .iter()
            .zip(&self.jump)
            .map(|((p, _), j)| j + (self.decayed[p] * f - self.counts[p]) / beta)
            .collect()
    }

    /// Cumulative score at checkpoint index `n`.
    pub fn checkpoint(&self, n: u64) -> Option<&[f64]> {
        let cp = self.checkpoints.as_ref()?;
        let (first, _) = cp.snapshots.front()?;
        if n < *first {
            return None;
        }
        cp.snapshots
            .get((n - first) as usize)
            .filter(|(k, _)| *k == n)
            .map(|(_, s)| s.as_slice())
    }

    fn checkpoint_index(&self, t: f64) -> Result<u64> {
        let cp = self
            .checkpoints
            .as_ref()
            .ok_or_else(|| Error::Config("score state has no checkpoints configured".into()))?;
        let n = (t / cp.delta).round();
        if n < 0.0 || (n * cp.delta - t).abs() > 1e-9 * t.abs().max(1.0) {
            return Err(Error::MissingCheckpoint(t));
        }
        Ok(n as u64)
    }

    /// Windowed scores `S_t - S_{t-w}` for all tracked edges, by checkpoint indices.
    pub fn window_scores_by_index(&self, end: u64, width: u64) -> Option<Vec<f64>> {
        let hi = self.checkpoint(end)?;
        let lo = self.checkpoint(end.checked_sub(width)?)?;
        Some(hi.iter().zip(lo).map(|(a, b)| a - b).collect())
    }

    /// Windowed score over `[t - w, t]` for `edges`, in `edges`' order.
    pub fn window_score(&self, t: f64, w: f64, edges: &EdgeSet) -> Result<Vec<f64>> {
        if w > t + 1e-9 {
            return Err(Error::Argument(format!("window {w} is longer than elapsed time {t}")));
        }
        let end = self.checkpoint_index(t)?;
        let start = self.checkpoint_index(t - w)?;
        let idx = self.edges.indices_of(edges)?;
        let hi = self.checkpoint(end).ok_or(Error::MissingCheckpoint(t))?;
        let lo = self.checkpoint(start).ok_or(Error::MissingCheckpoint(t - w))?;
        Ok(idx.iter().map(|&i| hi[i] - lo[i]).collect())
    }

    /// Accumulated Fisher information divided by `horizon`.
    pub fn fisher_info(&self, horizon: f64) -> Result<FisherInfo> {
        let fisher = self
            .fisher
            .as_ref()
            .ok_or_else(|| Error::Config("Fisher accumulation was not enabled".into()))?;
        let n = self.edges.len();
        let mut matrix = DMatrix::zeros(n, n);
        for (q, idx) in self.by_target.iter().enumerate() {
            let k = idx.len();
            for (a, &i) in idx.iter().enumerate() {
                for (b, &j) in idx.iter().enumerate() {
                    matrix[(i, j)] = fisher[q][a * k + b] / horizon;
                }
            }
        }
        FisherInfo::new(self.edges.clone(), matrix)
    }
}

/// Cumulative scores at `horizon` for a whole stream.
pub fn cumulative_scores(model0: &HawkesModel, stream: &EventStream, edges: &EdgeSet) -> Result<Vec<f64>> {
    stream.check_nodes(model0.num_nodes())?;
    let mut state = ScoreState::new(model0.clone(), edges.clone())?;
    for e in stream.events() {
        state.ingest(*e)?;
    }
    Ok(state.scores_at(stream.horizon()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edges(v: &[(usize, usize)]) -> EdgeSet {
        EdgeSet::new(v.to_vec()).unwrap()
    }

    #[test]
    fn edge_set_rejects_duplicates() {
        assert!(EdgeSet::new(vec![(0, 1), (0, 1)]).is_err());
        let u = EdgeSet::union([&edges(&[(0, 1), (1, 2)]), &edges(&[(1, 2), (2, 0)])]);
        assert_eq!(u.as_slice(), &[(0, 1), (1, 2), (2, 0)]);
    }

    #[test]
    fn no_events_means_zero_score() {
        let model = HawkesModel::poisson(vec![1.0, 1.0], 1.0).unwrap();
        let state = ScoreState::new(model, edges(&[(0, 1), (1, 1)])).unwrap();
        assert!(state.scores_at(7.5).iter().all(|&s| s == 0.0));
    }

    #[test]
    fn two_node_hand_value() {
        let model = HawkesModel::poisson(vec![1.0, 1.0], 1.0).unwrap();
        let s = EventStream::new(vec![Event::new(0.0, 0), Event::new(1.0, 1)], 2.0).unwrap();
        let sc = cumulative_scores(&model, &s, &edges(&[(0, 1)])).unwrap();
        let expected = (-1.0f64).exp() + ((-2.0f64).exp() - 1.0);
        assert!((sc[0] - expected).abs() < 1e-12);
        assert!((sc[0] + 0.496_785_2).abs() < 1e-6);
    }

    #[test]
    fn single_node_hand_value() {
        let model = HawkesModel::poisson(vec![1.0], 1.0).unwrap();
        let s = EventStream::new(vec![Event::new(0.5, 0)], 1.0).unwrap();
        let sc = cumulative_scores(&model, &s, &edges(&[(0, 0)])).unwrap();
        assert!((sc[0] - ((-0.5f64).exp() - 1.0)).abs() < 1e-12);
        assert!((sc[0] + 0.393_469_34).abs() < 1e-7);
    }

    #[test]
    fn rejects_time_regression() {
        let model = HawkesModel::poisson(vec![1.0], 1.0).unwrap();
        let mut state = ScoreState::new(model, edges(&[(0, 0)])).unwrap();
        state.ingest(Event::new(2.0, 0)).unwrap();
        assert!(matches!(state.ingest(Event::new(1.0, 0)), Err(Error::Ordering { .. })));
    }

    #[test]
    fn checkpoint_configuration_is_validated() {
        let model = HawkesModel::poisson(vec![1.0], 1.0).unwrap();
        let st = ScoreState::new(model, edges(&[(0, 0)])).unwrap();
        assert!(st.clone().with_checkpoints(3.0, 10.0).is_err());
        assert!(st.clone().with_checkpoints(0.0, 10.0).is_err());
        assert!(st.with_checkpoints(2.5, 10.0).is_ok());
    }

    #[test]
    fn window_equal_to_elapsed_time_is_cumulative_score() {
        let model = HawkesModel::poisson(vec![1.0, 2.0], 1.0).unwrap();
        let es = edges(&[(0, 1), (1, 1)]);
        let mut st = ScoreState::new(model, es.clone()).unwrap().with_checkpoints(1.0, 4.0).unwrap();
        for e in [Event::new(0.3, 0), Event::new(1.2, 1), Event::new(2.9, 1), Event::new(3.5, 0)] {
            st.ingest(e).unwrap();
        }
        st.advance_to(4.0).unwrap();
        let w = st.window_score(4.0, 4.0, &es).unwrap();
        let direct = st.scores_at(4.0);
        for (a, b) in w.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn missing_checkpoint_is_an_error() {
        let model = HawkesModel::poisson(vec![1.0], 1.0).unwrap();
        let es = edges(&[(0, 0)]);
        let mut st = ScoreState::new(model, es.clone()).unwrap().with_checkpoints(1.0, 2.0).unwrap();
        st.advance_to(10.0).unwrap();
        assert!(matches!(st.window_score(10.5, 2.0, &es), Err(Error::MissingCheckpoint(_))));
        // evicted from the ring buffer
        assert!(matches!(st.window_score(5.0, 2.0, &es), Err(Error::MissingCheckpoint(_))));
        assert!(st.window_score(10.0, 2.0, &es).is_ok());
    }

    #[test]
    fn closed_form_values() {
        let model = HawkesModel::poisson(vec![1.0, 1.0, 1.0], 1.0).unwrap();
        let f = fisher_closed_form(&model, &edges(&[(2, 2), (0, 2), (1, 2), (0, 1)])).unwrap();
        assert_eq!(f.matrix[(0, 0)], 1.5);
        assert_eq!(f.matrix[(1, 2)], 1.0);
        assert_eq!(f.matrix[(1, 3)], 0.0);
        assert!(f.is_target_block_diagonal());

        let model = HawkesModel::poisson(vec![2.0, 1.0], 2.0).unwrap();
        let f = fisher_closed_form(&model, &edges(&[(0, 1)])).unwrap();
        assert!((f.matrix[(0, 0)] - 1.5).abs() < 1e-15);
    }

    #[test]
    fn closed_form_rejects_excitation() {
        let model = HawkesModel::new(vec![1.0], vec![vec![0.2]], 1.0).unwrap();
        assert!(fisher_closed_form(&model, &edges(&[(0, 0)])).is_err());
    }

    #[test]
    fn estimate_blocks_are_empty_without_target_events() {
        let model = HawkesModel::poisson(vec![1.0, 1.0, 1.0], 1.0).unwrap();
        let s = EventStream::new(
            vec![Event::new(0.5, 0), Event::new(1.0, 1), Event::new(1.5, 0), Event::new(2.0, 1)],
            3.0,
        )
        .unwrap();
        let es = edges(&[(0, 2), (1, 2), (0, 1), (1, 0)]);
        let est = fisher_estimate(&s, &model, &es).unwrap();
        assert!(est.warning.is_none());
        let m = &est.info.matrix;
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(m[(i, j)], 0.0);
            }
        }
        assert!(m[(2, 2)] > 0.0);
        assert!(est.info.is_target_block_diagonal());
    }

    #[test]
    fn empty_stream_estimate_warns() {
        let model = HawkesModel::poisson(vec![1.0], 1.0).unwrap();
        let s = EventStream::new(vec![], 3.0).unwrap();
        let est = fisher_estimate(&s, &model, &edges(&[(0, 0)])).unwrap();
        assert!(est.warning.is_some());
        assert_eq!(est.info.matrix[(0, 0)], 0.0);
    }

    #[test]
    fn fisher_file_round_trip() {
        let model = HawkesModel::poisson(vec![1.0, 2.0], 1.0).unwrap();
        let f = fisher_closed_form(&model, &edges(&[(0, 1), (1, 1)])).unwrap();
        let text = serde_json::to_string(&f.to_file()).unwrap();
        let back = FisherInfo::from_file(serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, f);
    }
}

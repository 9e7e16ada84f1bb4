//! Process parameterization and observed event data.

use nalgebra::{DMatrix, Schur};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Offset applied to exactly tied event times when a stream is canonicalized.
pub const TIE_EPSILON: f64 = 1e-9;

/// Multivariate Hawkes process with exponential kernel
/// `g_ij(t) = alpha_ij * exp(-beta * t)`.
///
/// `alpha(i, j)` is the influence of node `i`'s events on node `j`'s intensity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelFile", into = "ModelFile")]
pub struct HawkesModel {
    mu: Vec<f64>,
    // row-major, alpha[i * m + j]
    alpha: Vec<f64>,
    beta: f64,
}

/// On-disk form of a model: `{"mu": [...], "beta": b, "A": [[...], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub mu: Vec<f64>,
    pub beta: f64,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
}

impl TryFrom<ModelFile> for HawkesModel {
    type Error = Error;

    fn try_from(file: ModelFile) -> Result<Self> {
        HawkesModel::new(file.mu, file.a, file.beta)
    }
}

impl From<HawkesModel> for ModelFile {
    fn from(model: HawkesModel) -> Self {
        ModelFile {
            a: model.alpha_rows(),
            mu: model.mu,
            beta: model.beta,
        }
    }
}

impl HawkesModel {
    /// Builds a validated, stationary model.
    pub fn new(mu: Vec<f64>, alpha: Vec<Vec<f64>>, beta: f64) -> Result<Self> {
        let model = Self::new_unchecked(mu, alpha, beta)?;
        model.validate()?;
        Ok(model)
    }

    /// Builds a model checking only shapes and signs, not stationarity.
    ///
    /// Used for fitted parameters, which may land outside the stationary region.
    pub fn new_unchecked(mu: Vec<f64>, alpha: Vec<Vec<f64>>, beta: f64) -> Result<Self> {
        let m = mu.len();
        if m == 0 {
            return Err(Error::Model("model needs at least one node".into()));
        }
        if alpha.len() != m || alpha.iter().any(|row| row.len() != m) {
            return Err(Error::Model(format!("influence matrix must be {m}x{m}")));
        }
        let model = HawkesModel {
            mu,
            alpha: alpha.into_iter().flatten().collect(),
            beta,
        };
        model.validate_signs()?;
        Ok(model)
    }

    /// Poisson model: no excitation.
    pub fn poisson(mu: Vec<f64>, beta: f64) -> Result<Self> {
        let m = mu.len();
        Self::new(mu, vec![vec![0.0; m]; m], beta)
    }

    /// Same base rates and decay, different influence matrix.
    pub fn with_alpha(&self, alpha: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(self.mu.clone(), alpha, self.beta)
    }

    pub fn num_nodes(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    #[inline]
    pub fn alpha(&self, from: usize, to: usize) -> f64 {
        self.alpha[from * self.mu.len() + to]
    }

    pub fn set_alpha(&mut self, from: usize, to: usize, value: f64) {
        let m = self.mu.len();
        self.alpha[from * m + to] = value;
    }

    pub fn set_mu(&mut self, node: usize, value: f64) {
        self.mu[node] = value;
    }

    /// Row-major flat view of the influence matrix.
    pub fn alpha_flat(&self) -> &[f64] {
        &self.alpha
    }

    pub fn alpha_rows(&self) -> Vec<Vec<f64>> {
        self.alpha
            .chunks(self.mu.len())
            .map(<[f64]>::to_vec)
            .collect()
    }

    pub fn is_poisson(&self) -> bool {
        self.alpha.iter().all(|&a| a == 0.0)
    }

    fn validate_signs(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Model(format!("decay must be positive, got {}", self.beta)));
        }
        if let Some((m, &mu)) = self
            .mu
            .iter()
            .enumerate()
            .find(|(_, &mu)| !(mu > 0.0 && mu.is_finite()))
        {
            return Err(Error::Model(format!("base rate of node {m} must be positive, got {mu}")));
        }
        if let Some(k) = self.alpha.iter().position(|&a| !(a >= 0.0 && a.is_finite())) {
            let m = self.mu.len();
            return Err(Error::Model(format!(
                "influence ({}, {}) must be nonnegative, got {}",
                k / m,
                k % m,
                self.alpha[k]
            )));
        }
        Ok(())
    }

    /// Checks signs and stationarity (branching matrix `A / beta` has spectral
    /// radius below one).
    pub fn validate(&self) -> Result<()> {
        self.validate_signs()?;
        let rho = self.branching_radius()?;
        if rho >= 1.0 {
            return Err(Error::Model(format!(
                "branching matrix has spectral radius {rho:.6} >= 1 (explosive process)"
            )));
        }
        Ok(())
    }

    /// Spectral radius of the branching matrix `A / beta`.
    pub fn branching_radius(&self) -> Result<f64> {
        let m = self.mu.len();
        if self.is_poisson() {
            return Ok(0.0);
        }
        let k = DMatrix::from_row_slice(m, m, &self.alpha) / self.beta;
        let schur = Schur::try_new(k, 1e-12, 10_000)
            .ok_or_else(|| Error::Numeric("eigenvalue iteration did not converge".into()))?;
        Ok(schur
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max))
    }

    /// Stationary mean event rate per node, `(I - A^T / beta)^{-1} mu`.
    pub fn stationary_rates(&self) -> Result<Vec<f64>> {
        let m = self.mu.len();
        let k = DMatrix::from_row_slice(m, m, &self.alpha).transpose() / self.beta;
        let lhs = DMatrix::identity(m, m) - k;
        let rhs = nalgebra::DVector::from_column_slice(&self.mu);
        lhs.lu()
            .solve(&rhs)
            .map(|v| v.iter().copied().collect())
            .ok_or_else(|| Error::Numeric("singular stationarity system".into()))
    }
}

/// A single marked event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub node: usize,
}

impl Event {
    pub fn new(time: f64, node: usize) -> Self {
        Event { time, node }
    }
}

/// Time-ordered events observed on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventStream {
    events: Vec<Event>,
    horizon: f64,
}

impl EventStream {
    /// Validates strict time ordering and `0 <= t <= horizon`.
    pub fn new(events: Vec<Event>, horizon: f64) -> Result<Self> {
        if !(horizon >= 0.0 && horizon.is_finite()) {
            return Err(Error::Argument(format!("horizon must be finite and >= 0, got {horizon}")));
        }
        let mut previous = f64::NEG_INFINITY;
        for e in &events {
            if !(e.time >= 0.0 && e.time.is_finite()) {
                return Err(Error::Argument(format!("event time {} is not a nonnegative number", e.time)));
            }
            if e.time <= previous {
                return Err(Error::Ordering { time: e.time, previous });
            }
            if e.time > horizon {
                return Err(Error::Argument(format!(
                    "event at t={} lies beyond the horizon {horizon}",
                    e.time
                )));
            }
            previous = e.time;
        }
        Ok(EventStream { events, horizon })
    }

    /// Sorts events and breaks exact ties by shifting later duplicates forward
    /// by [`TIE_EPSILON`], in (time, node) order. The horizon is extended if a
    /// shifted event would cross it.
    pub fn canonicalize(mut events: Vec<Event>, horizon: f64) -> Result<Self> {
        events.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.node.cmp(&b.node)));
        let mut previous = f64::NEG_INFINITY;
        for e in &mut events {
            if e.time <= previous {
                e.time = previous + TIE_EPSILON;
            }
            previous = e.time;
        }
        let horizon = horizon.max(previous);
        Self::new(events, horizon)
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Errors if any node index is `>= num_nodes`.
    pub fn check_nodes(&self, num_nodes: usize) -> Result<()> {
        match self.events.iter().find(|e| e.node >= num_nodes) {
            Some(e) => Err(Error::Argument(format!(
                "event node {} out of range for a {num_nodes}-node model",
                e.node
            ))),
            None => Ok(()),
        }
    }

    /// Events with `start <= t < end`, re-timed relative to `start`, on horizon `end - start`.
    pub fn window(&self, start: f64, end: f64) -> EventStream {
        let lo = self.events.partition_point(|e| e.time < start);
        let hi = self.events.partition_point(|e| e.time < end);
        EventStream {
            events: self.events[lo..hi]
                .iter()
                .map(|e| Event::new(e.time - start, e.node))
                .collect(),
            horizon: end - start,
        }
    }

    /// Per-node event counts.
    pub fn counts(&self, num_nodes: usize) -> Vec<usize> {
        let mut counts = vec![0; num_nodes];
        for e in &self.events {
            counts[e.node] += 1;
        }
        counts
    }

    pub fn into_events(self) -> Vec<Event> {
        self.events
    }
}

/// Pre/post-change pair: only the influence matrix changes at `tau_star`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangeScenario {
    pub pre: HawkesModel,
    pub post: HawkesModel,
    pub tau_star: f64,
    /// Keep pre-change excitation after the change. The default (`false`)
    /// restarts the excitation history at `tau_star`.
    pub carry_history: bool,
}

impl ChangeScenario {
    pub fn new(pre: HawkesModel, post: HawkesModel, tau_star: f64) -> Result<Self> {
        if pre.mu != post.mu || pre.beta != post.beta {
            return Err(Error::Model(
                "pre- and post-change models must share base rates and decay".into(),
            ));
        }
        if !(tau_star >= 0.0 && tau_star.is_finite()) {
            return Err(Error::Argument(format!("change time must be >= 0, got {tau_star}")));
        }
        pre.validate()?;
        post.validate()?;
        Ok(ChangeScenario {
            pre,
            post,
            tau_star,
            carry_history: false,
        })
    }

    pub fn carrying_history(mut self, carry: bool) -> Self {
        self.carry_history = carry;
        self
    }
}

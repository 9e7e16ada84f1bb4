//! False-alarm calibration for the scan monitor.
//!
//! The cluster statistics at one update are approximated by `N(0, Sigma)`;
//! at lag `e` (as a fraction of the window) their covariance is
//! `(1 - e)^+ Sigma`. `P(max_i Gamma_i >= b)` is computed as a sum of `L`
//! disjoint "cluster `i` is the largest and exceeds `b`" terms, each a
//! Gaussian orthant probability estimated by tilted importance sampling.

pub mod normal;
pub mod tilting;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_psd, inverse_sqrt};
use crate::model::HawkesModel;
use crate::rng::{map_replicates, replicate_rng};
use crate::scan::{cluster_weights, Cluster, ClusterSet};
use crate::score::{cumulative_scores, FisherInfo};
use crate::simulate::simulate_with_rng;
use tilting::RectangleProblem;

/// Default `w / delta`, i.e. `w = 200`, `delta = 10`.
pub const DEFAULT_W_OVER_DELTA: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CalibrationFile", into = "CalibrationFile")]
pub struct CalibrationModel {
    sigma: DMatrix<f64>,
    pub w_over_delta: usize,
    pub two_sided: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationFile {
    pub sigma: Vec<Vec<f64>>,
    pub w_over_delta: usize,
    #[serde(default = "yes")]
    pub two_sided: bool,
}

fn yes() -> bool {
    true
}

impl TryFrom<CalibrationFile> for CalibrationModel {
    type Error = Error;

    fn try_from(f: CalibrationFile) -> Result<Self> {
        let l = f.sigma.len();
        if f.sigma.iter().any(|r| r.len() != l) {
            return Err(Error::Config("sigma must be square".into()));
        }
        let m = DMatrix::from_fn(l, l, |i, j| f.sigma[i][j]);
        CalibrationModel::new(m, f.w_over_delta, f.two_sided)
    }
}

impl From<CalibrationModel> for CalibrationFile {
    fn from(c: CalibrationModel) -> Self {
        let l = c.sigma.nrows();
        CalibrationFile {
            sigma: (0..l).map(|i| (0..l).map(|j| c.sigma[(i, j)]).collect()).collect(),
            w_over_delta: c.w_over_delta,
            two_sided: c.two_sided,
        }
    }
}

impl CalibrationModel {
    pub fn new(sigma: DMatrix<f64>, w_over_delta: usize, two_sided: bool) -> Result<Self> {
        let l = sigma.nrows();
        if l == 0 || sigma.ncols() != l {
            return Err(Error::Config("sigma must be a non-empty square matrix".into()));
        }
        if w_over_delta == 0 {
            return Err(Error::Config("w_over_delta must be at least 1".into()));
        }
        for i in 0..l {
            if (sigma[(i, i)] - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!("sigma[{i}][{i}] = {} is not 1", sigma[(i, i)])));
            }
            for j in 0..i {
                if (sigma[(i, j)] - sigma[(j, i)]).abs() > 1e-9 {
                    return Err(Error::Config(format!("sigma is not symmetric at ({i}, {j})")));
                }
            }
        }
        cholesky_psd(&sigma)?;
        Ok(CalibrationModel { sigma, w_over_delta, two_sided })
    }

    pub fn single() -> Self {
        CalibrationModel { sigma: DMatrix::identity(1, 1), w_over_delta: DEFAULT_W_OVER_DELTA, two_sided: true }
    }

    pub fn with_resolution(mut self, w_over_delta: usize) -> Self {
        self.w_over_delta = w_over_delta.max(1);
        self
    }

    pub fn with_two_sided(mut self, two_sided: bool) -> Self {
        self.two_sided = two_sided;
        self
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn num_clusters(&self) -> usize {
        self.sigma.nrows()
    }

    /// The decomposition needs an almost surely unique argmax.
    fn check_distinct(&self) -> Result<()> {
        let l = self.num_clusters();
        for i in 0..l {
            for j in 0..i {
                if self.sigma[(i, j)] >= 1.0 - 1e-10 {
                    return Err(Error::Config(format!(
                        "clusters {j} and {i} are perfectly correlated; remove the duplicate"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Correlation of the cluster statistics at a common update time.
pub fn gamma_covariance(fisher: &FisherInfo, clusters: &ClusterSet) -> Result<CalibrationModel> {
    let parts = clusters
        .clusters()
        .iter()
        .map(|c| {
            let local = fisher.restrict(&c.edges)?;
            let r = c.edges.len() as f64;
            let v = inverse_sqrt(&local.matrix)? * DVector::from_element(c.edges.len(), 1.0) / r.sqrt();
            Ok(v)
        })
        .collect::<Result<Vec<_>>>()?;
    let l = clusters.len();
    let mut sigma = DMatrix::identity(l, l);
    let cs = clusters.clusters();
    for i in 0..l {
        for j in 0..i {
            let cross = fisher.cross(&cs[i].edges, &cs[j].edges)?;
            let value = parts[i].dot(&(cross * &parts[j]));
            sigma[(i, j)] = value;
            sigma[(j, i)] = value;
        }
    }
    CalibrationModel::new(sigma, DEFAULT_W_OVER_DELTA, true)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TailOptions {
    /// Importance samples per decomposition term.
    pub samples: usize,
    pub seed: u64,
    /// Relative standard error above which the estimate is flagged.
    pub rel_err_cap: f64,
}

impl Default for TailOptions {
    fn default() -> Self {
        TailOptions { samples: 20_000, seed: 0, rel_err_cap: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    /// `P(max_i Gamma_i >= b)`, the sum of `per_term`.
    pub prob: f64,
    /// `min(1, 2 prob)` for two-sided models, `prob` otherwise.
    pub alarm_prob: f64,
    pub rel_std_err: f64,
    pub n_samples: usize,
    pub per_term: Vec<f64>,
    pub low_confidence: bool,
}

/// Covariance of `(Gamma_i, Gamma_i - Gamma_j, ...)` for term `i`.
fn term_covariance(sigma: &DMatrix<f64>, i: usize) -> DMatrix<f64> {
    let l = sigma.nrows();
    let others: Vec<usize> = (0..l).filter(|&j| j != i).collect();
    let mut c = DMatrix::zeros(l, l);
    c[(0, 0)] = sigma[(i, i)];
    for (a, &j) in others.iter().enumerate() {
        c[(0, a + 1)] = sigma[(i, i)] - sigma[(i, j)];
        c[(a + 1, 0)] = c[(0, a + 1)];
        for (bb, &k) in others.iter().enumerate() {
            c[(a + 1, bb + 1)] = sigma[(i, i)] - sigma[(i, j)] - sigma[(i, k)] + sigma[(j, k)];
        }
    }
    c
}

/// Instantaneous false-alarm probability at threshold `b`.
pub fn tail_probability(cal: &CalibrationModel, b: f64, opts: &TailOptions) -> Result<TailEstimate> {
    if !(b > 0.0) {
        return Err(Error::Argument(format!("threshold must be positive, got {b}")));
    }
    cal.check_distinct()?;
    let l = cal.num_clusters();
    let mut lower = vec![0.0; l];
    lower[0] = b;
    let upper = vec![f64::INFINITY; l];
    let terms = map_replicates(l, |i| {
        let cov = term_covariance(&cal.sigma, i);
        let problem = RectangleProblem::new(&cov, &lower, &upper)?;
        Ok(problem.estimate(opts.samples, &mut replicate_rng(opts.seed, i as u64)))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let prob: f64 = terms.iter().map(|t| t.prob).sum();
    let se = terms.iter().map(|t| t.std_err.powi(2)).sum::<f64>().sqrt();
    let rel = if prob > 0.0 { se / prob } else { 0.0 };
    Ok(TailEstimate {
        prob,
        alarm_prob: if cal.two_sided { (2.0 * prob).min(1.0) } else { prob },
        rel_std_err: rel,
        n_samples: terms.iter().map(|t| t.samples).sum(),
        per_term: terms.iter().map(|t| t.prob).collect(),
        low_confidence: rel > opts.rel_err_cap,
    })
}

/// Threshold whose instantaneous false-alarm probability equals `alpha`.
pub fn threshold_for_alpha(cal: &CalibrationModel, alpha: f64, opts: &TailOptions) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Argument(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let f = |b: f64| tail_probability(cal, b, opts).map(|t| t.alarm_prob);
    let (mut lo, mut hi) = (0.0_f64, 10.0_f64);
    let at_zero = f(1e-12)?;
    if alpha >= at_zero {
        return Err(Error::Argument(format!(
            "alpha {alpha} is not reachable (false-alarm probability at b = 0 is {at_zero})"
        )));
    }
    if f(hi)? > alpha {
        return Err(Error::Calibration(format!("alpha {alpha} needs a threshold above {hi}")));
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        let p = f(mid)?;
        if (p / alpha - 1.0).abs() < 1e-3 {
            return Ok(mid);
        }
        if p > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-9 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArlOptions {
    /// Replicated Gaussian paths of `m` updates for the clumping estimate.
    pub replicates: usize,
    pub seed: u64,
    pub tail: TailOptions,
}

impl Default for ArlOptions {
    fn default() -> Self {
        ArlOptions { replicates: 100_000, seed: 0, tail: TailOptions::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArlRate {
    /// Per-update alarm rate from runs of `m` correlated updates.
    pub lambda_est1: f64,
    pub std_err_est1: f64,
    /// Per-update alarm rate from a single update.
    pub lambda_est2: f64,
    pub arl_est1: f64,
    pub arl_est2: f64,
    pub flagged: bool,
}

/// Maximum over `m` consecutive updates of the surrogate Gaussian sequence,
/// one value per replicate. Each update is the normalized moving sum of the
/// last `w/delta` i.i.d. `N(0, Sigma)` increments.
pub fn path_maxima(cal: &CalibrationModel, m: usize, replicates: usize, seed: u64) -> Result<Vec<f64>> {
    let chol = cholesky_psd(&cal.sigma)?;
    let l = cal.num_clusters();
    let k = cal.w_over_delta;
    let scale = 1.0 / (k as f64).sqrt();
    let two_sided = cal.two_sided;
    Ok(map_replicates(replicates, |r| {
        let mut rng = replicate_rng(seed, r as u64);
        let mut ring = vec![0.0; k * l];
        let mut sum = vec![0.0; l];
        let mut z = DVector::zeros(l);
        let mut best = f64::NEG_INFINITY;
        for step in 0..(m + k - 1) {
            for v in z.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            let xi = &chol * &z;
            let slot = (step % k) * l;
            for i in 0..l {
                sum[i] += xi[i] - ring[slot + i];
                ring[slot + i] = xi[i];
            }
            if step + 1 >= k {
                for s in &sum {
                    let g = s * scale;
                    best = best.max(if two_sided { g.abs() } else { g });
                }
            }
        }
        best
    }))
}

/// Per-update false-alarm rates at threshold `b`.
pub fn arl_rate_estimate(cal: &CalibrationModel, b: f64, m: usize, delta: f64, opts: &ArlOptions) -> Result<ArlRate> {
    if m == 0 || !(delta > 0.0) {
        return Err(Error::Argument("need m >= 1 and delta > 0".into()));
    }
    let tail = tail_probability(cal, b, &opts.tail)?;
    let est2 = tail.alarm_prob;
    let (est1, se1) = if m == 1 {
        (est2, tail.rel_std_err * est2)
    } else {
        let maxima = path_maxima(cal, m, opts.replicates, opts.seed)?;
        let n = maxima.len() as f64;
        let hits = maxima.iter().filter(|&&x| x > b).count() as f64;
        let p = hits / n;
        (p / m as f64, (p * (1.0 - p) / n).sqrt() / m as f64)
    };
    Ok(ArlRate {
        lambda_est1: est1,
        std_err_est1: se1,
        lambda_est2: est2,
        arl_est1: delta / est1,
        arl_est2: delta / est2,
        flagged: tail.low_confidence || (m > 1 && se1 > 0.05 * est1),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArlThresholds {
    pub b_est1: f64,
    pub b_est2: f64,
    pub target_arl: f64,
    pub m: usize,
    pub delta: f64,
}

/// Thresholds whose approximate ARL equals `target_arl`.
///
/// The clumping route solves `P(max over m updates > b) = m delta / target`
/// exactly on the stored replicate maxima (an empirical quantile), which is
/// the limit of bisection with common random numbers.
pub fn threshold_for_arl(
    cal: &CalibrationModel,
    target_arl: f64,
    m: usize,
    delta: f64,
    opts: &ArlOptions,
) -> Result<ArlThresholds> {
    if !(target_arl > delta && delta > 0.0) || m == 0 {
        return Err(Error::Argument(format!(
            "need target ARL > delta > 0 and m >= 1 (target {target_arl}, delta {delta}, m {m})"
        )));
    }
    let lambda = delta / target_arl;
    let b_est2 = threshold_for_alpha(cal, lambda, &opts.tail)?;
    let b_est1 = if m == 1 {
        b_est2
    } else {
        let p = lambda * m as f64;
        if p >= 1.0 {
            return Err(Error::Argument(format!(
                "m = {m} updates span more than the target ARL {target_arl}"
            )));
        }
        let mut maxima = path_maxima(cal, m, opts.replicates, opts.seed)?;
        maxima.sort_by(|a, b| b.total_cmp(a));
        let allowed = (p * maxima.len() as f64).floor() as usize;
        if allowed == 0 {
            return Err(Error::Calibration(format!(
                "{} replicates are too few for a per-path rate of {p:e}",
                maxima.len()
            )));
        }
        maxima[allowed.min(maxima.len() - 1)]
    };
    Ok(ArlThresholds { b_est1, b_est2, target_arl, m, delta })
}

/// Expected number of clusters exceeding `b` under the null,
/// `2 L P(Z > b)`.
pub fn expected_false_discoveries(b: f64, num_clusters: usize) -> f64 {
    2.0 * num_clusters as f64 * normal::sf(b)
}

/// FDR estimate `rho / (kappa + 1)` after `kappa` discoveries.
pub fn fdr_estimate(kappa: usize, b: f64, num_clusters: usize) -> f64 {
    expected_false_discoveries(b, num_clusters) / (kappa as f64 + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerOptions {
    pub replicates: usize,
    pub seed: u64,
    pub w_start: f64,
    pub w_max: f64,
    /// Relative width at which bisection stops.
    pub rel_tol: f64,
}

impl Default for PowerOptions {
    fn default() -> Self {
        PowerOptions { replicates: 100, seed: 0, w_start: 10.0, w_max: 10_000.0, rel_tol: 0.01 }
    }
}

/// Monte Carlo mean of a cluster statistic over a window of length `w`
/// observed entirely after the change.
pub fn mean_cluster_stat(
    pre: &HawkesModel,
    post: &HawkesModel,
    cluster: &Cluster,
    fisher: &FisherInfo,
    w: f64,
    opts: &PowerOptions,
) -> Result<f64> {
    let local = fisher.restrict(&cluster.edges)?;
    let weights = cluster_weights(&local.matrix)?;
    let values = map_replicates(opts.replicates, |r| {
        let stream = simulate_with_rng(post, w, replicate_rng(opts.seed, r as u64))?;
        let s = cumulative_scores(pre, &stream, &cluster.edges)?;
        Ok(weights.iter().zip(&s).map(|(a, x)| a * x).sum::<f64>() / w.sqrt())
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    Ok(values.iter().sum::<f64>() / values.len().max(1) as f64)
}

/// Smallest window with `|E Gamma| >= b` after the change, or `None` when no
/// window up to `opts.w_max` has enough power.
pub fn min_window_for_power(
    pre: &HawkesModel,
    post: &HawkesModel,
    cluster: &Cluster,
    fisher: &FisherInfo,
    b: f64,
    opts: &PowerOptions,
) -> Result<Option<f64>> {
    if pre.num_nodes() != post.num_nodes() || pre.beta() != post.beta() {
        return Err(Error::Model("pre and post models must share nodes and decay".into()));
    }
    let enough = |w: f64| mean_cluster_stat(pre, post, cluster, fisher, w, opts).map(|g| g.abs() >= b);
    let mut lo = 0.0;
    let mut hi = opts.w_start;
    loop {
        if hi > opts.w_max {
            return Ok(None);
        }
        if enough(hi)? {
            break;
        }
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > opts.rel_tol * hi {
        let mid = 0.5 * (lo + hi);
        if enough(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

/// Everything a monitor run needs to reproduce a calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub sigma: Vec<Vec<f64>>,
    pub w_over_delta: usize,
    pub two_sided: bool,
    pub b: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_arl: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_est2: Option<f64>,
    pub m: usize,
    pub delta: f64,
    pub tail: TailEstimate,
    pub rates: ArlRate,
    pub sampler: ArlOptions,
}

/// How a threshold is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdTarget {
    Fixed(f64),
    /// Instantaneous false-alarm probability.
    Alpha(f64),
    /// Average run length, through the `m`-update clumping route.
    Arl(f64),
}

/// Chooses a threshold and reports its false-alarm rates.
pub fn calibration_report(
    cal: &CalibrationModel,
    target: ThresholdTarget,
    m: usize,
    delta: f64,
    opts: &ArlOptions,
) -> Result<CalibrationReport> {
    let (b, b_est2) = match target {
        ThresholdTarget::Fixed(b) => (b, None),
        ThresholdTarget::Alpha(a) => (threshold_for_alpha(cal, a, &opts.tail)?, None),
        ThresholdTarget::Arl(arl) => {
            let th = threshold_for_arl(cal, arl, m, delta, opts)?;
            (th.b_est1, Some(th.b_est2))
        }
    };
    Ok(CalibrationReport {
        sigma: cal.sigma.row_iter().map(|r| r.iter().copied().collect()).collect(),
        w_over_delta: cal.w_over_delta,
        two_sided: cal.two_sided,
        b,
        target_alpha: match target {
            ThresholdTarget::Alpha(a) => Some(a),
            _ => None,
        },
        target_arl: match target {
            ThresholdTarget::Arl(a) => Some(a),
            _ => None,
        },
        b_est2,
        m,
        delta,
        tail: tail_probability(cal, b, &opts.tail)?,
        rates: arl_rate_estimate(cal, b, m, delta, opts)?,
        sampler: *opts,
    })
}

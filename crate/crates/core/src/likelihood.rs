//! Conditional intensity and log-likelihood of exponential-kernel Hawkes processes.

use crate::error::{Error, Result};
use crate::model::{EventStream, HawkesModel};

/// Conditional intensity of `node` at time `t`.
///
/// Only events strictly before `t` contribute, so the intensity at an event's
/// own time excludes that event's jump.
pub fn intensity(model: &HawkesModel, stream: &EventStream, node: usize, t: f64) -> Result<f64> {
    let m = model.num_nodes();
    if node >= m {
        return Err(Error::Argument(format!("node {node} out of range for {m} nodes")));
    }
    if !(t >= 0.0) {
        return Err(Error::Argument(format!("query time must be >= 0, got {t}")));
    }
    let beta = model.beta();
    let excitation: f64 = stream
        .events()
        .iter()
        .take_while(|e| e.time < t)
        .map(|e| model.alpha(e.node, node) * (-beta * (t - e.time)).exp())
        .sum();
    Ok(model.mu()[node] + excitation)
}

/// Log-likelihood of `stream` on `[0, stream.horizon()]`.
///
/// Evaluated in one pass with per-source decayed sums, `O(K M)`.
pub fn log_likelihood(model: &HawkesModel, stream: &EventStream) -> Result<f64> {
    stream.check_nodes(model.num_nodes())?;
    let m = model.num_nodes();
    let beta = model.beta();
    let horizon = stream.horizon();
    let mu = model.mu();

    let mut decayed = vec![0.0; m];
    let mut last = 0.0;
    let mut sum_log = 0.0;
    // per-source (1/beta) * sum_k (1 - exp(-beta (T - t_k)))
    let mut reach = vec![0.0; m];

    for (index, e) in stream.events().iter().enumerate() {
        let decay = (-beta * (e.time - last)).exp();
        decayed.iter_mut().for_each(|r| *r *= decay);
        last = e.time;
        let q = e.node;
        let lambda = mu[q]
            + decayed
                .iter()
                .enumerate()
                .map(|(p, r)| model.alpha(p, q) * r)
                .sum::<f64>();
        if !(lambda > 0.0) {
            return Err(Error::ZeroIntensity { index, node: q, time: e.time });
        }
        sum_log += lambda.ln();
        decayed[q] += 1.0;
        reach[q] += -(-beta * (horizon - e.time)).exp_m1() / beta;
    }

    let base: f64 = mu.iter().sum::<f64>() * horizon;
    let excitation: f64 = (0..m)
        .map(|p| reach[p] * (0..m).map(|j| model.alpha(p, j)).sum::<f64>())
        .sum();
    Ok(sum_log - base - excitation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Event;

    fn one_node(alpha: f64) -> HawkesModel {
        HawkesModel::new(vec![1.0], vec![vec![alpha]], 1.0).unwrap()
    }

    #[test]
    fn poisson_intensity_is_base_rate() {
        let model = HawkesModel::poisson(vec![1.0, 2.0], 1.0).unwrap();
        let s = EventStream::new(vec![Event::new(1.0, 0), Event::new(2.0, 1)], 10.0).unwrap();
        assert_eq!(intensity(&model, &s, 0, 5.0).unwrap(), 1.0);
    }

    #[test]
    fn intensity_hand_value() {
        let s = EventStream::new(vec![Event::new(0.0, 0)], 2.0).unwrap();
        let v = intensity(&one_node(0.5), &s, 0, 1.0).unwrap();
        assert!((v - 1.183_939_720_585_721).abs() < 1e-12);
    }

    #[test]
    fn intensity_excludes_event_at_query_time() {
        let s = EventStream::new(vec![Event::new(1.0, 0)], 2.0).unwrap();
        assert_eq!(intensity(&one_node(0.5), &s, 0, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn intensity_rejects_bad_node() {
        let s = EventStream::new(vec![], 1.0).unwrap();
        assert!(intensity(&one_node(0.5), &s, 3, 0.5).is_err());
    }

    #[test]
    fn intensity_jumps_by_alpha_at_events() {
        let model = HawkesModel::new(vec![1.0, 0.5], vec![vec![0.3, 0.2], vec![0.1, 0.4]], 1.3).unwrap();
        let s = EventStream::new(vec![Event::new(0.4, 0), Event::new(1.1, 1)], 3.0).unwrap();
        let eps = 1e-9;
        for target in 0..2 {
            let before = intensity(&model, &s, target, 1.1).unwrap();
            let after = intensity(&model, &s, target, 1.1 + eps).unwrap();
            assert!((after - before - model.alpha(1, target)).abs() < 1e-7);
        }
    }

    #[test]
    fn empty_stream_likelihood_is_compensator() {
        let model = HawkesModel::new(vec![1.0, 1.0], vec![vec![0.2, 0.1], vec![0.0, 0.3]], 1.0).unwrap();
        let s = EventStream::new(vec![], 3.0).unwrap();
        assert!((log_likelihood(&model, &s).unwrap() + 6.0).abs() < 1e-12);
    }

    #[test]
    fn likelihood_hand_value() {
        let s = EventStream::new(vec![Event::new(0.5, 0)], 1.0).unwrap();
        let ll = log_likelihood(&one_node(0.5), &s).unwrap();
        let expected = 0.0 - 1.0 + 0.5 * ((-0.5f64).exp() - 1.0);
        assert!((ll - expected).abs() < 1e-12);
        assert!((ll + 1.196_734_670_143_683).abs() < 1e-9);
    }

    #[test]
    fn poisson_likelihood_reduction() {
        let model = HawkesModel::poisson(vec![0.5, 2.0], 1.0).unwrap();
        let s = EventStream::new(
            vec![Event::new(0.1, 1), Event::new(0.7, 0), Event::new(1.5, 1)],
            2.0,
        )
        .unwrap();
        let expected = 2.0f64.ln() + 0.5f64.ln() + 2.0f64.ln() - 2.5 * 2.0;
        assert!((log_likelihood(&model, &s).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn matches_direct_summation() {
        let model = HawkesModel::new(vec![0.7, 1.2], vec![vec![0.3, 0.5], vec![0.2, 0.1]], 1.7).unwrap();
        let events = vec![
            Event::new(0.2, 0),
            Event::new(0.9, 1),
            Event::new(1.0, 1),
            Event::new(2.4, 0),
            Event::new(3.3, 1),
        ];
        let s = EventStream::new(events.clone(), 4.0).unwrap();
        let mut direct = 0.0;
        for e in &events {
            direct += intensity(&model, &s, e.node, e.time).unwrap().ln();
        }
        direct -= (0.7 + 1.2) * 4.0;
        for e in &events {
            for j in 0..2 {
                direct += model.alpha(e.node, j) / 1.7 * ((-1.7 * (4.0 - e.time)).exp() - 1.0);
            }
        }
        assert!((log_likelihood(&model, &s).unwrap() - direct).abs() < 1e-10);
    }
}

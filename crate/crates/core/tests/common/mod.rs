#![allow(dead_code)]

use hawkscan::model::{Event, HawkesModel};
use hawkscan::rng::replicate_rng;
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

/// Score by brute force over all event pairs. Quadratic in the number of events.
pub fn batch_scores(model0: &HawkesModel, events: &[Event], horizon: f64, edges: &[(usize, usize)]) -> Vec<f64> {
    let beta = model0.beta();
    let kernel_sum = |p: usize, k: usize| -> f64 {
        events[..k]
            .iter()
            .filter(|e| e.node == p && e.time < events[k].time)
            .map(|e| (-beta * (events[k].time - e.time)).exp())
            .sum()
    };
    let intensity = |k: usize| -> f64 {
        let q = events[k].node;
        let mut lam = model0.mu()[q];
        for i in 0..model0.num_nodes() {
            let a = model0.alpha(i, q);
            if a != 0.0 {
                lam += a * kernel_sum(i, k);
            }
        }
        lam
    };
    edges
        .iter()
        .map(|&(p, q)| {
            let mut s = 0.0;
            for (k, e) in events.iter().enumerate() {
                if e.node == q {
                    s += kernel_sum(p, k) / intensity(k);
                }
            }
            let comp: f64 = events
                .iter()
                .filter(|e| e.node == p)
                .map(|e| (1.0 - (-beta * (horizon - e.time)).exp()) / beta)
                .sum();
            s - comp
        })
        .collect()
}

/// Direct Monte Carlo of `P(max_i Z_i > b)` (or `P(max_i |Z_i| > b)`) for
/// `Z ~ N(0, sigma)`; returns the estimate and its standard error.
pub fn direct_tail_prob(sigma: &DMatrix<f64>, b: f64, two_sided: bool, n: usize, seed: u64) -> (f64, f64) {
    let l = sigma.nrows();
    let chol = sigma.clone().cholesky().expect("positive definite").l();
    let mut rng = replicate_rng(seed, 0);
    let mut hits = 0usize;
    let mut z = DVector::zeros(l);
    for _ in 0..n {
        for v in z.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        let x = &chol * &z;
        if x.iter().any(|&v| if two_sided { v.abs() > b } else { v > b }) {
            hits += 1;
        }
    }
    let p = hits as f64 / n as f64;
    (p, (p * (1.0 - p) / n as f64).sqrt())
}

pub fn sample_var(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
}

pub fn sample_cov(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / (n - 1.0)
}

//! Exact simulation by Ogata thinning.
//!
//! The excitation of each target node is carried as a decayed sum, so the total
//! intensity right after the current time bounds the intensity until the next
//! event (kernels are nonincreasing). Each candidate costs `O(M)`.

use rand::Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::model::{ChangeScenario, Event, EventStream, HawkesModel};
use crate::rng::{replicate_rng, ReplicateRng};

struct PendingChange {
    tau: f64,
    alpha: Vec<f64>,
    carry_history: bool,
}

/// Streaming event generator; yields events in time order until `horizon`.
pub struct Simulator {
    mu: Vec<f64>,
    mu_total: f64,
    alpha: Vec<f64>,
    beta: f64,
    excited: bool,
    // per-target decayed excitation
    excitation: Vec<f64>,
    // per-source decayed event count, needed to re-weight history at a change
    source: Vec<f64>,
    time: f64,
    horizon: f64,
    change: Option<PendingChange>,
    rng: ReplicateRng,
}

impl Simulator {
    pub fn new(model: &HawkesModel, horizon: f64, rng: ReplicateRng) -> Result<Self> {
        model.validate()?;
        if !(horizon >= 0.0) {
            return Err(Error::Argument(format!("horizon must be >= 0, got {horizon}")));
        }
        let m = model.num_nodes();
        Ok(Simulator {
            mu: model.mu().to_vec(),
            mu_total: model.mu().iter().sum(),
            alpha: model.alpha_flat().to_vec(),
            beta: model.beta(),
            excited: !model.is_poisson(),
            excitation: vec![0.0; m],
            source: vec![0.0; m],
            time: 0.0,
            horizon,
            change: None,
            rng,
        })
    }

    pub fn with_change(scn: &ChangeScenario, horizon: f64, rng: ReplicateRng) -> Result<Self> {
        if scn.tau_star > horizon {
            return Err(Error::Argument(format!(
                "change time {} exceeds horizon {horizon}",
                scn.tau_star
            )));
        }
        scn.post.validate()?;
        let mut sim = Simulator::new(&scn.pre, horizon, rng)?;
        sim.change = Some(PendingChange {
            tau: scn.tau_star,
            alpha: scn.post.alpha_flat().to_vec(),
            carry_history: scn.carry_history,
        });
        if scn.carry_history || !scn.post.is_poisson() {
            sim.excited = true;
        }
        // A change at time zero applies before any event.
        sim.apply_change_if_due(0.0);
        Ok(sim)
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    fn decay_to(&mut self, t: f64) {
        if self.excited {
            let f = (-self.beta * (t - self.time)).exp();
            self.excitation.iter_mut().for_each(|x| *x *= f);
            self.source.iter_mut().for_each(|x| *x *= f);
        }
        self.time = t;
    }

    /// Applies the pending change if it happens no later than `t`. Returns true
    /// if a change was applied.
    fn apply_change_if_due(&mut self, t: f64) -> bool {
        let due = matches!(&self.change, Some(c) if c.tau <= t);
        if !due {
            return false;
        }
        let change = self.change.take().unwrap();
        self.decay_to(change.tau.max(self.time));
        let m = self.mu.len();
        self.alpha = change.alpha;
        if change.carry_history {
            for q in 0..m {
                self.excitation[q] = (0..m).map(|p| self.alpha[p * m + q] * self.source[p]).sum();
            }
        } else {
            self.excitation.iter_mut().for_each(|x| *x = 0.0);
            self.source.iter_mut().for_each(|x| *x = 0.0);
        }
        true
    }
}

impl Iterator for Simulator {
    type Item = Event;

    fn next(&mut self) -> Option<Event> {
        let m = self.mu.len();
        loop {
            let bound = self.mu_total + self.excitation.iter().sum::<f64>();
            let wait: f64 = self.rng.sample::<f64, _>(Exp1) / bound;
            let candidate = self.time + wait;
            if let Some(c) = &self.change {
                if candidate >= c.tau && c.tau <= self.horizon {
                    // memoryless restart at the change point
                    self.apply_change_if_due(candidate);
                    continue;
                }
            }
            if candidate > self.horizon {
                self.time = self.horizon;
                return None;
            }
            self.decay_to(candidate);
            let u = self.rng.gen::<f64>() * bound;
            let mut acc = 0.0;
            let mut chosen = None;
            for q in 0..m {
                acc += self.mu[q] + self.excitation[q];
                if u < acc {
                    chosen = Some(q);
                    break;
                }
            }
            let Some(node) = chosen else {
                continue; // rejected candidate
            };
            if self.excited {
                let row = &self.alpha[node * m..(node + 1) * m];
                self.excitation.iter_mut().zip(row).for_each(|(x, a)| *x += a);
                self.source[node] += 1.0;
            }
            return Some(Event::new(candidate, node));
        }
    }
}

/// Simulates `model` on `[0, horizon]`; deterministic given `seed`.
pub fn simulate(model: &HawkesModel, horizon: f64, seed: u64) -> Result<EventStream> {
    simulate_with_rng(model, horizon, replicate_rng(seed, 0))
}

pub fn simulate_with_rng(model: &HawkesModel, horizon: f64, rng: ReplicateRng) -> Result<EventStream> {
    let sim = Simulator::new(model, horizon, rng)?;
    EventStream::new(sim.collect(), horizon)
}

/// Simulates a change scenario on `[0, horizon]`.
///
/// Before `tau_star` the pre-change model runs with its full history. After it,
/// intensities use the post-change influence matrix and, unless
/// `carry_history` is set, only events at or after `tau_star` excite.
pub fn simulate_with_change(scn: &ChangeScenario, horizon: f64, seed: u64) -> Result<EventStream> {
    simulate_change_with_rng(scn, horizon, replicate_rng(seed, 0))
}

pub fn simulate_change_with_rng(
    scn: &ChangeScenario,
    horizon: f64,
    rng: ReplicateRng,
) -> Result<EventStream> {
    let sim = Simulator::with_change(scn, horizon, rng)?;
    EventStream::new(sim.collect(), horizon)
}

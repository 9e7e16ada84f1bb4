//! Browser bindings. Every export takes plain numbers and strings and returns a
//! JSON string, so the page needs no glue beyond the generated module.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use hawkscan::calibration::{
    gamma_covariance, tail_probability, threshold_for_alpha, CalibrationModel, TailOptions,
};
use hawkscan::error::Result;
use hawkscan::fixtures::{fig1, fig1_case, Fixture};
use hawkscan::model::ChangeScenario;
use hawkscan::scan::{localize, run_monitor, MonitorConfig};
use hawkscan::score::fisher_closed_form;
use hawkscan::simulate::{simulate, simulate_with_change};

#[derive(Debug, Serialize)]
pub struct Trajectory {
    pub clusters: Vec<String>,
    pub events: usize,
    pub t: Vec<f64>,
    /// One series per cluster.
    pub gamma: Vec<Vec<f64>>,
    pub max_abs: Vec<f64>,
    pub alarm: Option<Alarm>,
}

#[derive(Debug, Serialize)]
pub struct Alarm {
    pub t: f64,
    pub flagged: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct TailCurve {
    pub b: Vec<f64>,
    pub alarm_prob: Vec<f64>,
    pub threshold: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct SigmaView {
    pub clusters: Vec<String>,
    pub sigma: Vec<Vec<f64>>,
}

fn names(fx: &Fixture) -> Vec<String> {
    fx.clusters
        .clusters()
        .iter()
        .map(|c| c.name.clone())
        .collect()
}

fn calibration(fx: &Fixture, w: f64, delta: f64) -> Result<CalibrationModel> {
    let fisher = fisher_closed_form(&fx.model, fx.clusters.union_edges())?;
    Ok(gamma_covariance(&fisher, &fx.clusters)?.with_resolution((w / delta).round() as usize))
}

/// Simulates the example network (`case` "none" keeps it unchanged) and runs
/// the scan monitor over it.
pub fn monitor_fig1(
    case: &str,
    tau: f64,
    horizon: f64,
    w: f64,
    delta: f64,
    b: f64,
    seed: u64,
) -> Result<Trajectory> {
    let fx = fig1();
    let stream = match case {
        "none" => simulate(&fx.model, horizon, seed)?,
        c => simulate_with_change(
            &ChangeScenario::new(fx.model.clone(), fig1_case(c)?, tau)?,
            horizon,
            seed,
        )?,
    };
    let fisher = fisher_closed_form(&fx.model, fx.clusters.union_edges())?;
    let res = run_monitor(
        &stream,
        &fx.model,
        &fx.clusters,
        &fisher,
        MonitorConfig::new(w, delta, b)?,
    )?;
    let labels = names(&fx);
    let alarm = match (res.stop_time, res.trajectory.last()) {
        (Some(t), Some(last)) => Some(Alarm {
            t,
            flagged: localize(last, b)
                .into_iter()
                .map(|i| labels[i].clone())
                .collect(),
        }),
        _ => None,
    };
    let gamma = (0..labels.len())
        .map(|i| res.trajectory.iter().map(|s| s.per_cluster[i]).collect())
        .collect();
    Ok(Trajectory {
        clusters: labels,
        events: stream.len(),
        t: res.trajectory.iter().map(|s| s.t).collect(),
        gamma,
        max_abs: res.trajectory.iter().map(|s| s.max_abs).collect(),
        alarm,
    })
}

/// False-alarm probability per update over a grid of thresholds, plus the
/// threshold matching `alpha`.
pub fn tail_curve_fig1(
    alpha: f64,
    b_min: f64,
    b_max: f64,
    steps: usize,
    samples: usize,
) -> Result<TailCurve> {
    let cal = calibration(&fig1(), 200.0, 10.0)?;
    let opts = TailOptions {
        samples,
        ..TailOptions::default()
    };
    let steps = steps.max(2);
    let grid: Vec<f64> = (0..steps)
        .map(|k| b_min + (b_max - b_min) * k as f64 / (steps - 1) as f64)
        .collect();
    let alarm_prob = grid
        .iter()
        .map(|&b| tail_probability(&cal, b, &opts).map(|t| t.alarm_prob))
        .collect::<Result<_>>()?;
    Ok(TailCurve {
        b: grid,
        alarm_prob,
        threshold: threshold_for_alpha(&cal, alpha, &opts).ok(),
    })
}

/// Correlation between the cluster statistics of the example network.
pub fn sigma_fig1() -> Result<SigmaView> {
    let fx = fig1();
    let cal = calibration(&fx, 200.0, 10.0)?;
    let s = cal.sigma();
    Ok(SigmaView {
        clusters: names(&fx),
        sigma: (0..s.nrows())
            .map(|i| (0..s.ncols()).map(|j| s[(i, j)]).collect())
            .collect(),
    })
}

fn to_js<T: Serialize>(r: Result<T>) -> std::result::Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn monitor(
    case: &str,
    tau: f64,
    horizon: f64,
    w: f64,
    delta: f64,
    b: f64,
    seed: u32,
) -> std::result::Result<String, JsError> {
    to_js(monitor_fig1(case, tau, horizon, w, delta, b, seed as u64))
}

#[wasm_bindgen]
pub fn tail_curve(
    alpha: f64,
    b_min: f64,
    b_max: f64,
    steps: u32,
    samples: u32,
) -> std::result::Result<String, JsError> {
    to_js(tail_curve_fig1(
        alpha,
        b_min,
        b_max,
        steps as usize,
        samples as usize,
    ))
}

#[wasm_bindgen]
pub fn sigma() -> std::result::Result<String, JsError> {
    to_js(sigma_fig1())
}

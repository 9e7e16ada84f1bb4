use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use hawkscan::bench::{run_experiment, ExperimentKind, ExperimentSpec};
use hawkscan::calibration::{calibration_report, fdr_estimate, gamma_covariance, ArlOptions, ThresholdTarget};
use hawkscan::error::{Error, Result};
use hawkscan::fit::{fit_mle, FitOptions};
use hawkscan::fixtures::{fig1_case, fixture};
use hawkscan::io::{read_events, read_json, write_events, write_json, write_trajectory};
use hawkscan::model::{ChangeScenario, HawkesModel};
use hawkscan::scan::{run_monitor, ClusterSet, MonitorConfig};
use hawkscan::score::{fisher_closed_form, fisher_estimate, FisherFile, FisherInfo};
use hawkscan::simulate::{simulate, simulate_with_change};

#[derive(Parser)]
#[command(name = "hawkscan", version, about = "Scan statistics for change detection in networked event streams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (simulate, calibrate, bench) or directory (fixture, fit, detect).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Settings file: monitor settings for calibrate and detect, an experiment
    /// spec for bench.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a built-in network (model, clusters, Fisher information).
    Fixture {
        /// fig1 or line20
        name: String,
    },
    /// Simulate an event stream, optionally with a change.
    Simulate(SimulateArgs),
    /// Fit a model by maximum likelihood and estimate Fisher information.
    Fit(FitArgs),
    /// Choose a threshold and report its false-alarm rates.
    Calibrate(CalibrateArgs),
    /// Run the scan monitor over an event file.
    Detect(DetectArgs),
    /// Run a benchmark experiment.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Built-in network to simulate.
    #[arg(long, conflicts_with = "model")]
    fixture: Option<String>,
    /// Model file.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    horizon: f64,
    /// Named fig1 change case (i..vii) applied at --tau.
    #[arg(long, requires = "tau", conflicts_with = "post")]
    case: Option<String>,
    /// Post-change model file applied at --tau.
    #[arg(long, requires = "tau")]
    post: Option<PathBuf>,
    #[arg(long)]
    tau: Option<f64>,
    /// Let pre-change events keep exciting after the change.
    #[arg(long)]
    carry_history: bool,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    events: PathBuf,
    /// Starting model; also fixes the node count and decay.
    #[arg(long)]
    init: PathBuf,
    /// Observation horizon (defaults to the last event time).
    #[arg(long)]
    horizon: Option<f64>,
    /// Clusters whose edges get a Fisher information estimate.
    #[arg(long)]
    clusters: Option<PathBuf>,
    /// Model at which to evaluate the Fisher information (defaults to the fit).
    #[arg(long, requires = "clusters")]
    reference: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    clusters: PathBuf,
    /// Fisher information file; computed in closed form from --model when absent.
    #[arg(long)]
    fisher: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[command(flatten)]
    threshold: ThresholdArgs,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long)]
    events: PathBuf,
    /// Reference (pre-change) model.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    clusters: PathBuf,
    /// Fisher information file; required unless the reference model has no excitation.
    #[arg(long)]
    fisher: Option<PathBuf>,
    /// Observation horizon (defaults to the last event time).
    #[arg(long)]
    horizon: Option<f64>,
    #[command(flatten)]
    threshold: ThresholdArgs,
}

#[derive(Args)]
struct ThresholdArgs {
    #[arg(long)]
    w: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, conflicts_with_all = ["alpha", "target_arl"])]
    b: Option<f64>,
    #[arg(long, conflicts_with = "target_arl")]
    alpha: Option<f64>,
    #[arg(long)]
    target_arl: Option<f64>,
    #[arg(long)]
    m: Option<usize>,
}

#[derive(Args)]
struct BenchArgs {
    /// Experiment kind when no --config is given (arl, edd, far, fdr, runtime).
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    replicates: Option<usize>,
}

/// Monitor settings file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MonitorSettings {
    #[serde(default = "d_w")]
    w: f64,
    #[serde(default = "d_delta")]
    delta: f64,
    #[serde(default)]
    b: Option<f64>,
    #[serde(default)]
    alpha: Option<f64>,
    #[serde(default)]
    target_arl: Option<f64>,
    #[serde(default = "d_m")]
    m: usize,
    #[serde(default = "d_two_sided")]
    two_sided: bool,
    #[serde(default)]
    sampler: ArlOptions,
}

fn d_w() -> f64 {
    200.0
}
fn d_delta() -> f64 {
    10.0
}
fn d_m() -> usize {
    50
}
fn d_two_sided() -> bool {
    true
}

impl MonitorSettings {
    fn load(path: Option<&Path>, args: &ThresholdArgs, seed: Option<u64>) -> Result<Self> {
        let mut s: MonitorSettings = match path {
            Some(p) => read_json(p)?,
            None => serde_json::from_str("{}")?,
        };
        if let Some(w) = args.w {
            s.w = w;
        }
        if let Some(d) = args.delta {
            s.delta = d;
        }
        if let Some(m) = args.m {
            s.m = m;
        }
        if args.b.is_some() || args.alpha.is_some() || args.target_arl.is_some() {
            s.b = args.b;
            s.alpha = args.alpha;
            s.target_arl = args.target_arl;
        }
        if let Some(seed) = seed {
            s.sampler.seed = seed;
            s.sampler.tail.seed = seed;
        }
        MonitorConfig::new(s.w, s.delta, 1.0)?;
        Ok(s)
    }

    fn target(&self) -> Result<ThresholdTarget> {
        match (self.b, self.alpha, self.target_arl) {
            (Some(b), None, None) => Ok(ThresholdTarget::Fixed(b)),
            (None, Some(a), None) => Ok(ThresholdTarget::Alpha(a)),
            (None, None, Some(arl)) => Ok(ThresholdTarget::Arl(arl)),
            (None, None, None) => Err(Error::Config("set one of b, alpha or target_arl".into())),
            _ => Err(Error::Config("set only one of b, alpha or target_arl".into())),
        }
    }
}

fn load_fisher(fisher: Option<&Path>, model: Option<&HawkesModel>, clusters: &ClusterSet) -> Result<FisherInfo> {
    match (fisher, model) {
        (Some(p), _) => FisherInfo::from_file(read_json::<FisherFile>(p)?),
        (None, Some(m)) if m.is_poisson() => fisher_closed_form(m, clusters.union_edges()),
        (None, Some(_)) => Err(Error::Config(
            "the reference model has excitation; pass --fisher (estimate one with `fit --clusters`)".into(),
        )),
        (None, None) => Err(Error::Config("pass --fisher or --model".into())),
    }
}

fn require_out(out: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    out.clone().ok_or_else(|| Error::Config(format!("--out <{what}> is required")))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Writes to `out` or, when absent, stdout.
fn with_output(out: &Option<PathBuf>, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match out {
        Some(p) => {
            let mut w = create(p)?;
            f(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock)?;
        }
    }
    Ok(())
}

fn no_config(cli: &Cli, command: &str) -> Result<()> {
    if cli.config.is_some() {
        return Err(Error::Config(format!("`{command}` does not take a config file")));
    }
    Ok(())
}

fn cmd_fixture(cli: &Cli, name: &str) -> Result<()> {
    no_config(cli, "fixture")?;
    let fx = fixture(name)?;
    let dir = require_out(&cli.out, "dir")?;
    fs::create_dir_all(&dir)?;
    write_json(&fx.model, create(&dir.join("model.json"))?)?;
    write_json(&fx.clusters, create(&dir.join("clusters.json"))?)?;
    let fisher = fisher_closed_form(&fx.model, fx.clusters.union_edges())?;
    write_json(&fisher.to_file(), create(&dir.join("fisher.json"))?)?;
    eprintln!(
        "{}: {} nodes, {} clusters, written to {}",
        fx.name,
        fx.model.num_nodes(),
        fx.clusters.len(),
        dir.display()
    );
    Ok(())
}

fn cmd_simulate(cli: &Cli, a: &SimulateArgs) -> Result<()> {
    no_config(cli, "simulate")?;
    let seed = cli.seed.unwrap_or(0);
    let model: HawkesModel = match (&a.fixture, &a.model) {
        (Some(name), None) => fixture(name)?.model,
        (None, Some(p)) => read_json(p)?,
        _ => return Err(Error::Config("pass exactly one of --fixture or --model".into())),
    };
    let post = match (&a.case, &a.post) {
        (Some(case), _) => {
            if a.fixture.as_deref() != Some("fig1") {
                return Err(Error::Config("named cases apply to --fixture fig1".into()));
            }
            Some(fig1_case(case)?)
        }
        (None, Some(p)) => Some(read_json(p)?),
        (None, None) => None,
    };
    let stream = match (post, a.tau) {
        (Some(post), Some(tau)) => {
            let scn = ChangeScenario::new(model, post, tau)?.carrying_history(a.carry_history);
            simulate_with_change(&scn, a.horizon, seed)?
        }
        (None, Some(_)) => return Err(Error::Config("--tau needs --case or --post".into())),
        _ => simulate(&model, a.horizon, seed)?,
    };
    with_output(&cli.out, |w| write_events(&stream, w))?;
    eprintln!("{} events over [0, {}]", stream.len(), stream.horizon());
    Ok(())
}

#[derive(Serialize)]
struct FitSummary {
    converged: bool,
    iterations: usize,
    grad_norm: f64,
    log_likelihood: f64,
    events: usize,
    horizon: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    fisher_warning: Option<String>,
}

fn cmd_fit(cli: &Cli, a: &FitArgs) -> Result<()> {
    no_config(cli, "fit")?;
    let dir = require_out(&cli.out, "dir")?;
    let init: HawkesModel = read_json(&a.init)?;
    let stream = read_events(&a.events, a.horizon)?;
    let fit = fit_mle(&stream, init.beta(), &init, &FitOptions::default())?;
    fs::create_dir_all(&dir)?;
    write_json(&fit.model, create(&dir.join("model.json"))?)?;
    let mut fisher_warning = None;
    if let Some(cp) = &a.clusters {
        let clusters: ClusterSet = read_json(cp)?;
        let reference: HawkesModel = match &a.reference {
            Some(p) => read_json(p)?,
            None => fit.model.clone(),
        };
        let est = fisher_estimate(&stream, &reference, clusters.union_edges())?;
        fisher_warning = est.warning.clone();
        write_json(&est.info.to_file(), create(&dir.join("fisher.json"))?)?;
    }
    let summary = FitSummary {
        converged: fit.converged,
        iterations: fit.iterations,
        grad_norm: fit.grad_norm,
        log_likelihood: fit.log_likelihood,
        events: stream.len(),
        horizon: stream.horizon(),
        fisher_warning,
    };
    write_json(&summary, create(&dir.join("fit.json"))?)?;
    if !fit.converged {
        eprintln!("warning: fit did not converge (gradient norm {:e})", fit.grad_norm);
    }
    Ok(())
}

fn cmd_calibrate(cli: &Cli, a: &CalibrateArgs) -> Result<()> {
    let settings = MonitorSettings::load(cli.config.as_deref(), &a.threshold, cli.seed)?;
    let clusters: ClusterSet = read_json(&a.clusters)?;
    let model: Option<HawkesModel> = a.model.as_deref().map(read_json).transpose()?;
    let fisher = load_fisher(a.fisher.as_deref(), model.as_ref(), &clusters)?;
    let cal = gamma_covariance(&fisher, &clusters)?
        .with_resolution((settings.w / settings.delta).round() as usize)
        .with_two_sided(settings.two_sided);
    let report = calibration_report(&cal, settings.target()?, settings.m, settings.delta, &settings.sampler)?;
    with_output(&cli.out, |w| write_json(&report, w))?;
    eprintln!(
        "b = {:.4}: false-alarm probability per update {:.3e}, ARL about {:.0}{}",
        report.b,
        report.tail.alarm_prob,
        report.rates.arl_est1,
        if report.rates.flagged { " (low confidence; raise the sampler budget)" } else { "" }
    );
    Ok(())
}

#[derive(Serialize)]
struct Alarm {
    t: f64,
    max_abs: f64,
    flagged_clusters: Vec<usize>,
    flagged_names: Vec<String>,
    /// Plug-in false discovery rate among the flagged clusters.
    fdr_estimate: f64,
}

#[derive(Serialize)]
struct DetectSummary {
    b: f64,
    w: f64,
    delta: f64,
    horizon: f64,
    events: usize,
    snapshots: usize,
    insufficient_data: bool,
    stopped: bool,
    alarms: Vec<Alarm>,
}

fn cmd_detect(cli: &Cli, a: &DetectArgs) -> Result<()> {
    let settings = MonitorSettings::load(cli.config.as_deref(), &a.threshold, cli.seed)?;
    let dir = require_out(&cli.out, "dir")?;
    let model: HawkesModel = read_json(&a.model)?;
    let clusters: ClusterSet = read_json(&a.clusters)?;
    let fisher = load_fisher(a.fisher.as_deref(), Some(&model), &clusters)?;
    let stream = read_events(&a.events, a.horizon)?;
    let b = match settings.target()? {
        ThresholdTarget::Fixed(b) => b,
        target => {
            let cal = gamma_covariance(&fisher, &clusters)?
                .with_resolution((settings.w / settings.delta).round() as usize)
                .with_two_sided(settings.two_sided);
            calibration_report(&cal, target, settings.m, settings.delta, &settings.sampler)?.b
        }
    };
    let mut cfg = MonitorConfig::new(settings.w, settings.delta, b)?;
    cfg.two_sided = settings.two_sided;
    let result = run_monitor(&stream, &model, &clusters, &fisher, cfg)?;

    fs::create_dir_all(&dir)?;
    let mut traj = create(&dir.join("trajectory.csv"))?;
    write_trajectory(&result.trajectory, clusters.len(), &mut traj)?;
    traj.flush()?;
    let alarms = match (result.stop_time, result.trajectory.last()) {
        (Some(t), Some(snap)) => {
            let kappa = result.flagged_clusters.len();
            vec![Alarm {
                t,
                max_abs: snap.max_abs,
                flagged_names: result.flagged_clusters.iter().map(|&i| clusters.clusters()[i].name.clone()).collect(),
                flagged_clusters: result.flagged_clusters.clone(),
                fdr_estimate: fdr_estimate(kappa, b, clusters.len()),
            }]
        }
        _ => Vec::new(),
    };
    let summary = DetectSummary {
        b,
        w: cfg.w,
        delta: cfg.delta,
        horizon: stream.horizon(),
        events: stream.len(),
        snapshots: result.trajectory.len(),
        insufficient_data: result.insufficient_data(),
        stopped: result.stopped,
        alarms,
    };
    write_json(&summary, create(&dir.join("result.json"))?)?;
    if summary.insufficient_data {
        eprintln!("insufficient data: the stream ends before the first full window (w = {})", cfg.w);
    } else if let Some(alarm) = summary.alarms.first() {
        eprintln!("alarm at t = {} (max |gamma| {:.3} > b = {b:.4}), clusters {:?}", alarm.t, alarm.max_abs, alarm.flagged_names);
    } else {
        eprintln!("no alarm over {} updates (b = {b:.4})", summary.snapshots);
    }
    Ok(())
}

fn timing_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.timing.csv"))
}

fn cmd_bench(cli: &Cli, a: &BenchArgs) -> Result<()> {
    let mut spec: ExperimentSpec = match (&cli.config, &a.kind) {
        (Some(p), None) => read_json(p)?,
        (None, Some(kind)) => {
            let kind: ExperimentKind = kind.parse()?;
            let mut spec = ExperimentSpec::new(kind);
            if kind == ExperimentKind::Fdr {
                spec.fixture = "line20".into();
            }
            spec
        }
        _ => return Err(Error::Config("pass exactly one of --config or --kind".into())),
    };
    if let Some(seed) = cli.seed {
        spec.seed = seed;
    }
    if let Some(r) = a.replicates {
        spec.replicates = r;
    }
    let out = require_out(&cli.out, "file")?;
    let report = run_experiment(&spec)?;
    let mut w = create(&out)?;
    report.table.write_csv(&mut w)?;
    w.flush()?;
    let mut t = create(&timing_path(&out))?;
    report.timing.write_csv(&mut t)?;
    t.flush()?;
    eprintln!("{} rows written to {}", report.table.rows.len(), out.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Fixture { name } => cmd_fixture(cli, name),
        Command::Simulate(a) => cmd_simulate(cli, a),
        Command::Fit(a) => cmd_fit(cli, a),
        Command::Calibrate(a) => cmd_calibrate(cli, a),
        Command::Detect(a) => cmd_detect(cli, a),
        Command::Bench(a) => cmd_bench(cli, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numeric() { 3 } else { 2 })
        }
    }
}

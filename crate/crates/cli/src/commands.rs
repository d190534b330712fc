use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use ces_core::detectors::{detector_by_name, threshold_from_pfa, DetectionReport, MonteCarlo, SteeringVector, Threshold};
use ces_core::hermitian::normalize;
use ces_core::simkit::{
    run_scenario, write_csv, Correlation, Scenario, ScenarioConfig, ScenarioResult, Texture, ThresholdSource,
};
use ces_core::{estimator_by_name, Error, IterationControl, Normalization};

use crate::formats::{read_matrix, render_matrix, SampleFile};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NO_CONVERGENCE: i32 = 2;
pub const EXIT_INSUFFICIENT_TRIALS: i32 = 3;

/// A failed command: exit code plus a diagnostic for standard error.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NoConvergence { .. } => EXIT_NO_CONVERGENCE,
            Error::InsufficientTrials { .. } => EXIT_INSUFFICIENT_TRIALS,
            _ => EXIT_INPUT,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<(), Failure>;

#[derive(Debug, Parser)]
#[command(name = "ces", version, about = "Robust covariance estimation and normalized matched-filter detection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate a covariance matrix from a sample file.
    Estimate(EstimateArgs),
    /// Evaluate a detection statistic on one observation.
    Detect(DetectArgs),
    /// Run a Monte-Carlo detection-probability scenario.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// scm, tyler, burg-tyler, cg, m:<score>, or any other registered estimator.
    #[arg(long)]
    pub method: String,
    #[arg(long)]
    pub input: PathBuf,
    /// det, trace or none (keep the estimator's own scale).
    #[arg(long, default_value = "none")]
    pub normalize: String,
    #[arg(long, default_value_t = 1e-10)]
    pub eps: f64,
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// nmf, nmf-phi, glr-cg or mf.
    #[arg(long)]
    pub detector: String,
    /// Sample file holding the observation.
    #[arg(long)]
    pub signal: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub signal_row: usize,
    /// Sample file holding the steering vector.
    #[arg(long)]
    pub steering: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub steering_row: usize,
    /// Matrix file with the noise covariance.
    #[arg(long)]
    pub cov: PathBuf,
    #[arg(long, conflicts_with = "threshold", required_unless_present = "threshold")]
    pub pfa: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub threshold: Option<f64>,
    /// Seed for Monte-Carlo thresholds (glr-cg, mf).
    #[arg(long, default_value_t = MonteCarlo::default().seed)]
    pub mc_seed: u64,
    #[arg(long, default_value_t = MonteCarlo::default().max_trials)]
    pub mc_max_trials: u64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// known-cov-multichannel or adaptive.
    #[arg(long)]
    pub scenario: String,
    #[arg(long)]
    pub seed: u64,
    /// CSV output path.
    #[arg(long)]
    pub out: PathBuf,
    /// Channel dimensions of the multichannel scenario.
    #[arg(long, value_delimiter = ',', default_value = "2,4,8,16")]
    pub dims: Vec<usize>,
    /// Dimension of the adaptive scenario.
    #[arg(long, default_value_t = 8)]
    pub d: usize,
    #[arg(long, default_value_t = 22)]
    pub n_train: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub pfa: f64,
    #[arg(long, default_value_t = 200_000)]
    pub trials: u64,
    /// Comma-separated SNR values in dB, or start:stop:step.
    #[arg(long, allow_hyphen_values = true)]
    pub snr: Option<String>,
    /// none, inverse-gamma:<shape> or gamma:<shape>.
    #[arg(long, default_value = "none")]
    pub texture: String,
    /// identity, ar:<mu>, or file:<matrix file>.
    #[arg(long, default_value = "identity")]
    pub correlation: String,
    /// Normalized Doppler frequency of the steering vector.
    #[arg(long, default_value_t = 0.1, allow_hyphen_values = true)]
    pub doppler: f64,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
}

pub fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Estimate(a) => estimate(a),
        Command::Detect(a) => detect(a),
        Command::Simulate(a) => simulate(a),
    }
}

#[derive(Serialize)]
struct EstimateLog<'a> {
    method: &'a str,
    input: &'a Path,
    normalize: &'a str,
    eps: f64,
    max_iter: usize,
    converged: bool,
    iterations: usize,
    final_residual: f64,
    wall_time_s: f64,
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write(path: &Path, text: &str) -> CmdResult {
    fs::write(path, text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn estimate(a: EstimateArgs) -> CmdResult {
    let mode: Normalization = a.normalize.parse()?;
    let ctrl = IterationControl::new(a.eps, a.max_iter)?;
    let estimator = estimator_by_name(&a.method, ctrl)?;
    let samples = SampleFile::read(&a.input)
        .map_err(Failure::input)?
        .into_sample_set()?;

    let start = Instant::now();
    let outcome = estimator.estimate(&samples);
    let wall_time_s = start.elapsed().as_secs_f64();
    let (matrix, iterations, residual, failure) = match outcome {
        Ok(e) => {
            let residual = e.residual();
            (e.matrix, e.iterations, residual, None)
        }
        Err(Error::NoConvergence {
            iterations,
            residual,
            partial: Some(p),
        }) => {
            let message = format!("no convergence after {iterations} iterations (last residual {residual:e})");
            (*p, iterations, residual, Some(message))
        }
        Err(e) => return Err(e.into()),
    };
    let matrix = match mode {
        Normalization::None => matrix,
        mode => normalize(&matrix, mode),
    };

    write(&a.output, &render_matrix(matrix.matrix()))?;
    let log = EstimateLog {
        method: &a.method,
        input: &a.input,
        normalize: &a.normalize,
        eps: a.eps,
        max_iter: a.max_iter,
        converged: failure.is_none(),
        iterations,
        final_residual: residual,
        wall_time_s,
    };
    let json = serde_json::to_string_pretty(&log).expect("log serializes");
    write(&with_suffix(&a.output, ".json"), &(json + "\n"))?;
    let marker = with_suffix(&a.output, ".diverged");
    match failure {
        None => {
            if marker.exists() {
                fs::remove_file(&marker).map_err(|e| Failure::input(format!("{}: {e}", marker.display())))?;
            }
            Ok(())
        }
        Some(message) => {
            write(&marker, &format!("{message}\n"))?;
            Err(Failure {
                code: EXIT_NO_CONVERGENCE,
                message: format!("{message}; partial estimate written to {}", a.output.display()),
            })
        }
    }
}

#[derive(Serialize)]
struct DetectOutput<'a> {
    detector: &'a str,
    statistic: f64,
    threshold: f64,
    threshold_source: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pfa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    calibration_trials: Option<u64>,
    detected: bool,
    saturated: bool,
}

fn detect(a: DetectArgs) -> CmdResult {
    let detector = detector_by_name(&a.detector)?;
    let cov = read_matrix(&a.cov).map_err(Failure::input)?;
    let signal = SampleFile::read(&a.signal).map_err(Failure::input)?;
    let steering = SampleFile::read(&a.steering).map_err(Failure::input)?;
    let x = signal.row(a.signal_row).map_err(Failure::input)?;
    let s = SteeringVector::new(steering.row(a.steering_row).map_err(Failure::input)?.clone())?;
    let statistic = detector.statistic(x, &s, &cov)?;

    let (threshold, source, trials) = match (a.threshold, a.pfa) {
        (Some(t), _) => (Threshold::Analytic(t), "given", None),
        (None, Some(pfa)) => {
            let mc = MonteCarlo {
                seed: a.mc_seed,
                max_trials: a.mc_max_trials,
            };
            match threshold_from_pfa(detector, pfa, &[cov.dim()], mc)? {
                t @ Threshold::Analytic(_) => (t, "analytic", None),
                Threshold::Empirical(e) => {
                    let trials = e.trials;
                    (Threshold::Empirical(e), "monte-carlo", Some(trials))
                }
            }
        }
        (None, None) => return Err(Failure::input("one of --pfa or --threshold is required")),
    };
    let report = DetectionReport::new(statistic, threshold.value(), None);
    let out = DetectOutput {
        detector: detector.name(),
        statistic: report.statistic,
        threshold: report.threshold,
        threshold_source: source,
        pfa: a.pfa,
        calibration_trials: trials,
        detected: report.detected,
        saturated: report.saturated,
    };
    println!("{}", serde_json::to_string_pretty(&out).expect("report serializes"));
    Ok(())
}

/// `a,b,c` or `start:stop:step` (inclusive of `stop` up to rounding).
pub fn parse_snr_grid(s: &str) -> Result<Vec<f64>, String> {
    let num = |v: &str| {
        v.trim()
            .parse::<f64>()
            .map_err(|_| format!("bad SNR value '{}'", v.trim()))
    };
    let parts: Vec<&str> = s.split(':').collect();
    match parts[..] {
        [start, stop, step] => {
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if !(step > 0.0) || !start.is_finite() || !stop.is_finite() || stop < start {
                return Err(format!("bad SNR range '{s}'"));
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            Ok((0..=n).map(|i| start + step * i as f64).collect())
        }
        [_] => s.split(',').map(num).collect(),
        _ => Err(format!("bad SNR grid '{s}'")),
    }
}

fn parse_correlation(s: &str) -> Result<Correlation, Failure> {
    match s.split_once(':') {
        None if s == "identity" => Ok(Correlation::Identity),
        Some(("ar", mu)) => mu
            .parse::<f64>()
            .map(Correlation::ArToeplitz)
            .map_err(|_| Failure::input(format!("bad AR coefficient '{mu}'"))),
        Some(("file", path)) => Ok(Correlation::Custom(read_matrix(Path::new(path)).map_err(Failure::input)?)),
        _ => Err(Failure::input(format!("unknown correlation '{s}'"))),
    }
}

fn scenario_config(a: &SimulateArgs) -> Result<ScenarioConfig, Failure> {
    let scenario: Scenario = a.scenario.parse()?;
    let mut cfg = ScenarioConfig::new(scenario, a.seed);
    cfg.channel_dims = a.dims.clone();
    cfg.d = a.d;
    cfg.n_train = a.n_train;
    cfg.pfa = a.pfa;
    cfg.trials = a.trials;
    if let Some(snr) = &a.snr {
        cfg.snr_grid_db = parse_snr_grid(snr).map_err(Failure::input)?;
    }
    cfg.texture = a.texture.parse::<Texture>()?;
    cfg.correlation = parse_correlation(&a.correlation)?;
    cfg.doppler = a.doppler;
    cfg.validate()?;
    Ok(cfg)
}

fn summary(result: &ScenarioResult) -> Vec<String> {
    result
        .curves
        .iter()
        .map(|c| {
            let source = match c.source {
                ThresholdSource::Analytic => "analytic".to_string(),
                ThresholdSource::Empirical { trials, .. } => format!("empirical/{trials}"),
            };
            let pd: Vec<String> = c.points.iter().map(|p| format!("{:.4}", p.pd)).collect();
            format!(
                "{}: threshold {:.6} ({source}), pfa_achieved {:.3e}, pd [{}]",
                c.detector,
                c.threshold,
                c.pfa_achieved,
                pd.join(" ")
            )
        })
        .collect()
}

fn simulate(a: SimulateArgs) -> CmdResult {
    let cfg = scenario_config(&a)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = a.threads {
        if n == 0 {
            return Err(Failure::input("--threads must be at least 1"));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| Failure::input(format!("cannot start worker pool: {e}")))?;
    let result = pool.install(|| run_scenario(&cfg))?;

    let mut csv = Vec::new();
    write_csv(&result, &mut csv).expect("writing to memory");
    fs::write(&a.out, csv).map_err(|e| Failure::input(format!("{}: {e}", a.out.display())))?;
    for line in summary(&result) {
        println!("{line}");
    }
    if result.diverged > 0 {
        eprintln!(
            "warning: {} estimates hit the iteration limit; their last iterate was used",
            result.diverged
        );
    }
    Ok(())
}

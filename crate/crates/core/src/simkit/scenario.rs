//! Monte-Carlo detection-probability experiments.
//!
//! Each trial draws its random inputs from counter-based streams keyed by
//! `(seed, trial, role)`, and the same draws are reused at every SNR point
//! (only the target amplitude changes). Tallies are integer counts, so the
//! result is independent of how trials are scheduled across threads.

use std::io::{self, Write};
use std::str::FromStr;

use rayon::prelude::*;

use crate::detectors::{
    detector_by_name, empirical_threshold, exponential_sum_survival, exponential_sum_threshold, min_trials,
    Detector, Geometry, SteeringVector,
};
use crate::error::{Error, Result};
use crate::estimators::{cg_cov, scm, tyler_fixed_point, Estimate, IterationControl};
use crate::hermitian::{CVector, HermitianPD, Normalization, C64};
use crate::toeplitz::burg_tyler;

use super::generators::{
    compound_gaussian_sample, doppler_steering, standard_complex_normal, target_variance, Correlation, Texture,
};
use super::rng::{stream_rng, Role};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Known noise covariance, several independent channels summed.
    KnownCovMultichannel,
    /// One channel, covariance estimated from fresh training data per trial.
    AdaptiveSingleChannel,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::KnownCovMultichannel => "known-cov-multichannel",
            Scenario::AdaptiveSingleChannel => "adaptive",
        }
    }

    /// Grid spanning the Pd transition at the default settings.
    pub fn default_snr_grid(self) -> Vec<f64> {
        match self {
            Scenario::KnownCovMultichannel => (0..=20).map(|i| -2.0 + 0.25 * i as f64).collect(),
            Scenario::AdaptiveSingleChannel => (0..=15).map(|i| 2.0 * i as f64).collect(),
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "known-cov-multichannel" | "known-cov" => Ok(Scenario::KnownCovMultichannel),
            "adaptive" | "adaptive-single-channel" => Ok(Scenario::AdaptiveSingleChannel),
            _ => Err(Error::UnknownName {
                kind: "scenario",
                name: s.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    /// Channel dimensions of the multichannel scenario.
    pub channel_dims: Vec<usize>,
    /// Dimension of the adaptive scenario.
    pub d: usize,
    pub n_train: usize,
    pub pfa: f64,
    pub snr_grid_db: Vec<f64>,
    pub trials: u64,
    /// Applied to the test noise of the multichannel scenario and to the
    /// training data of the adaptive one.
    pub texture: Texture,
    pub seed: u64,
    pub correlation: Correlation,
    /// Normalized Doppler frequency of the steering vectors.
    pub doppler: f64,
}

impl ScenarioConfig {
    /// Desk-scale defaults: `pfa = 1e-3`, `2·10⁵` trials.
    pub fn new(scenario: Scenario, seed: u64) -> Self {
        ScenarioConfig {
            scenario,
            channel_dims: vec![2, 4, 8, 16],
            d: 8,
            n_train: 22,
            pfa: 1e-3,
            snr_grid_db: scenario.default_snr_grid(),
            trials: 200_000,
            texture: Texture::None,
            seed,
            correlation: Correlation::Identity,
            doppler: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        if !(self.pfa > 0.0 && self.pfa < 1.0) {
            return Err(Error::invalid(format!("pfa must lie in (0, 1), got {}", self.pfa)));
        }
        if self.snr_grid_db.is_empty() || self.snr_grid_db.iter().any(|s| s.is_nan() || *s == f64::INFINITY) {
            return Err(Error::invalid("SNR grid must be non-empty with values below +inf"));
        }
        if !self.doppler.is_finite() {
            return Err(Error::invalid("Doppler frequency must be finite"));
        }
        self.texture.validate()?;
        match self.scenario {
            Scenario::KnownCovMultichannel => {
                if self.channel_dims.is_empty() || self.channel_dims.iter().any(|&d| d < 2) {
                    return Err(Error::invalid("channel dimensions must all be >= 2"));
                }
            }
            Scenario::AdaptiveSingleChannel => {
                if self.d < 2 {
                    return Err(Error::invalid("dimension must be >= 2"));
                }
                if self.n_train < self.d {
                    return Err(Error::invalid(format!(
                        "n_train = {} must be at least d = {}",
                        self.n_train, self.d
                    )));
                }
            }
        }
        for d in self.dims() {
            self.correlation.matrix(d)?;
        }
        Ok(())
    }

    fn dims(&self) -> Vec<usize> {
        match self.scenario {
            Scenario::KnownCovMultichannel => self.channel_dims.clone(),
            Scenario::AdaptiveSingleChannel => vec![self.d],
        }
    }
}

/// One point of a detection-probability curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub snr_db: f64,
    pub pd: f64,
    /// `1.96 √(p(1−p)/trials)`; clamp `pd ± ci` to `[0, 1]` when plotting.
    pub ci_halfwidth: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ThresholdSource {
    Analytic,
    Empirical { trials: u64, pfa_ci: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorCurve {
    pub detector: String,
    pub threshold: f64,
    pub source: ThresholdSource,
    /// Exceedance rate of the null statistics of the test batch.
    pub pfa_achieved: f64,
    pub points: Vec<CurvePoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub trials: u64,
    pub curves: Vec<DetectorCurve>,
    /// Estimates that hit `max_iter`; their last iterate was used.
    pub diverged: u64,
}

impl ScenarioResult {
    pub fn curve(&self, name: &str) -> Option<&DetectorCurve> {
        self.curves.iter().find(|c| c.detector == name)
    }
}

pub const CSV_HEADER: &str = "detector,snr_db,pd,ci,trials,threshold,pfa_achieved";

pub fn write_csv<W: Write>(result: &ScenarioResult, mut out: W) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for curve in &result.curves {
        for p in &curve.points {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                curve.detector, p.snr_db, p.pd, p.ci_halfwidth, result.trials, curve.threshold, curve.pfa_achieved
            )?;
        }
    }
    Ok(())
}

fn ci_halfwidth(p: f64, n: u64) -> f64 {
    1.96 * (p * (1.0 - p) / n as f64).sqrt()
}

/// Which covariance a detector is evaluated with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Source {
    Known,
    Tyler,
    BurgTyler,
    Scm,
    CircularGaussian,
}

struct Entry {
    name: &'static str,
    source: Source,
    detector: &'static dyn Detector,
}

fn entry(name: &'static str, source: Source, detector: &str) -> Entry {
    Entry {
        name,
        source,
        detector: detector_by_name(detector).expect("registered detector"),
    }
}

fn plan(scenario: Scenario) -> Vec<Entry> {
    match scenario {
        Scenario::KnownCovMultichannel => vec![
            entry("nmf", Source::Known, "nmf"),
            entry("nmf-phi", Source::Known, "nmf-phi"),
            entry("mf", Source::Known, "mf"),
            entry("glr-cg", Source::Known, "glr-cg"),
        ],
        Scenario::AdaptiveSingleChannel => vec![
            entry("nmf-known", Source::Known, "nmf"),
            entry("tyler-nmf", Source::Tyler, "nmf"),
            entry("bt-nmf", Source::BurgTyler, "nmf"),
            entry("scm-mf", Source::Scm, "mf"),
            entry("cg-glrcg", Source::CircularGaussian, "glr-cg"),
            entry("known-glrcg", Source::Known, "glr-cg"),
        ],
    }
}

/// Whitened steering `L⁻¹s` and whitened noise `L⁻¹n` for one channel and
/// one covariance.
struct Whitened {
    v: CVector,
    w: CVector,
}

impl Whitened {
    fn null_geometry(&self) -> Result<Geometry> {
        Geometry::from_whitened(&self.w, &self.v)
    }

    fn geometry(&self, amplitude: C64) -> Result<Geometry> {
        Geometry::from_whitened(&(&self.w + &self.v * amplitude), &self.v)
    }
}

/// Per-trial inputs after estimation, one `Whitened` per (entry, channel).
struct TrialData {
    whitened: Vec<Vec<Whitened>>,
    /// Standard complex normal target amplitude per channel.
    zeta: Vec<C64>,
    diverged: u64,
}

struct Model {
    cfg: ScenarioConfig,
    entries: Vec<Entry>,
    dims: Vec<usize>,
    covariances: Vec<HermitianPD>,
    steering: Vec<SteeringVector>,
    /// `L⁻¹s` under the true covariance, per channel.
    known_v: Vec<CVector>,
    ctrl: IterationControl,
}

fn unwrap_estimate(result: Result<Estimate>) -> Result<(HermitianPD, bool)> {
    match result {
        Ok(e) => Ok((e.matrix, false)),
        Err(Error::NoConvergence { partial: Some(p), .. }) => Ok((*p, true)),
        Err(e) => Err(e),
    }
}

impl Model {
    fn new(cfg: &ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let dims = cfg.dims();
        let covariances = dims
            .iter()
            .map(|&d| cfg.correlation.matrix(d))
            .collect::<Result<Vec<_>>>()?;
        let mut steering = Vec::with_capacity(dims.len());
        let mut known_v = Vec::with_capacity(dims.len());
        for (&d, cov) in dims.iter().zip(&covariances) {
            // Scaled so that s†Σ⁻¹s = 1.
            let raw = doppler_steering(d, cfg.doppler)?;
            let norm = cov.inv_quad_form(raw.as_vector())?.sqrt();
            let s = SteeringVector::new(raw.as_vector().unscale(norm))?;
            known_v.push(cov.whiten(s.as_vector())?);
            steering.push(s);
        }
        Ok(Model {
            cfg: cfg.clone(),
            entries: plan(cfg.scenario),
            dims,
            covariances,
            steering,
            known_v,
            ctrl: IterationControl::default(),
        })
    }

    fn estimate(&self, source: Source, train: &crate::sample::SampleSet) -> Result<(HermitianPD, bool)> {
        match source {
            Source::Known => Ok((self.covariances[0].clone(), false)),
            Source::Tyler => unwrap_estimate(tyler_fixed_point(train, &self.ctrl, Normalization::UnitTraceMean)),
            Source::Scm => Ok((scm(train)?, false)),
            Source::CircularGaussian => unwrap_estimate(cg_cov(train, &self.ctrl)),
            Source::BurgTyler => match burg_tyler(train, &self.ctrl, None) {
                Ok(e) => Ok((e.covariance()?.matrix, false)),
                Err(Error::NoConvergence { partial: Some(inv), .. }) => Ok((inv.inverse()?, true)),
                Err(e) => Err(e),
            },
        }
    }

    /// Draws every random input of one trial.
    fn trial_data(&self, trial: u64, calibration: bool) -> Result<TrialData> {
        let seed = self.cfg.seed;
        let (noise_role, train_role) = if calibration {
            (Role::CalibrationNoise, Role::CalibrationTrain)
        } else {
            (Role::Noise, Role::Train)
        };
        let mut noise_rng = stream_rng(seed, trial, noise_role);
        let zeta = if calibration {
            Vec::new()
        } else {
            let mut target_rng = stream_rng(seed, trial, Role::Target);
            self.dims
                .iter()
                .map(|_| standard_complex_normal(&mut target_rng, 1)[0])
                .collect()
        };
        match self.cfg.scenario {
            Scenario::KnownCovMultichannel => {
                // Work directly in the whitened domain: L⁻¹(√τ L z) = √τ z.
                let noise: Vec<CVector> = self
                    .dims
                    .iter()
                    .map(|&d| {
                        let tau = self.cfg.texture.sample(&mut noise_rng);
                        standard_complex_normal(&mut noise_rng, d).scale(tau.sqrt())
                    })
                    .collect();
                let whitened = self
                    .entries
                    .iter()
                    .map(|_| {
                        noise
                            .iter()
                            .zip(&self.known_v)
                            .map(|(w, v)| Whitened { v: v.clone(), w: w.clone() })
                            .collect()
                    })
                    .collect();
                Ok(TrialData {
                    whitened,
                    zeta,
                    diverged: 0,
                })
            }
            Scenario::AdaptiveSingleChannel => {
                let cov = &self.covariances[0];
                let mut train_rng = stream_rng(seed, trial, train_role);
                let columns = (0..self.cfg.n_train)
                    .map(|_| compound_gaussian_sample(cov, &self.cfg.texture, &mut train_rng))
                    .collect();
                let train = crate::sample::SampleSet::new(crate::sample::Field::Complex, columns)?;
                let noise = compound_gaussian_sample(cov, &Texture::None, &mut noise_rng);
                let mut diverged = 0;
                let mut cache: Vec<(Source, HermitianPD)> = Vec::new();
                let mut whitened = Vec::with_capacity(self.entries.len());
                for e in &self.entries {
                    let est = match cache.iter().find(|(s, _)| *s == e.source) {
                        Some((_, m)) => m.clone(),
                        None => {
                            let (m, div) = self.estimate(e.source, &train)?;
                            diverged += div as u64;
                            cache.push((e.source, m.clone()));
                            m
                        }
                    };
                    whitened.push(vec![Whitened {
                        v: est.whiten(self.steering[0].as_vector())?,
                        w: est.whiten(&noise)?,
                    }]);
                }
                Ok(TrialData {
                    whitened,
                    zeta,
                    diverged,
                })
            }
        }
    }

    fn amplitude(&self, channel: usize, snr_db: f64, zeta: C64) -> C64 {
        let dim_k = match self.cfg.scenario {
            Scenario::KnownCovMultichannel => self.dims[channel],
            Scenario::AdaptiveSingleChannel => 1,
        };
        zeta * target_variance(snr_db, dim_k).sqrt()
    }

    fn null_statistics(&self, data: &TrialData) -> Result<Vec<f64>> {
        self.entries
            .iter()
            .zip(&data.whitened)
            .map(|(e, channels)| {
                channels
                    .iter()
                    .map(|c| Ok(e.detector.evaluate(&c.null_geometry()?)?.value))
                    .sum()
            })
            .collect()
    }

    /// Analytic threshold when the null law is a known exponential sum.
    fn analytic_threshold(&self, e: &Entry) -> Result<Option<f64>> {
        if e.source != Source::Known {
            return Ok(None);
        }
        let means: Option<Vec<f64>> = self.dims.iter().map(|&d| e.detector.null_exponential_mean(d)).collect();
        match means {
            Some(m) if exponential_sum_survival(&m, 1.0).is_some() => {
                exponential_sum_threshold(&m, self.cfg.pfa).map(Some)
            }
            _ => Ok(None),
        }
    }
}

#[derive(Clone)]
struct Tally {
    detections: Vec<u64>,
    false_alarms: Vec<u64>,
    diverged: u64,
}

impl Tally {
    fn zero(entries: usize, points: usize) -> Self {
        Tally {
            detections: vec![0; entries * points],
            false_alarms: vec![0; entries],
            diverged: 0,
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        for (a, b) in self.detections.iter_mut().zip(other.detections) {
            *a += b;
        }
        for (a, b) in self.false_alarms.iter_mut().zip(other.false_alarms) {
            *a += b;
        }
        self.diverged += other.diverged;
        self
    }
}

/// Runs a scenario: thresholds first (analytic, or from a separate null
/// calibration batch of `trials` draws), then the detection tally.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioResult> {
    let model = Model::new(cfg)?;
    let entries = &model.entries;
    let grid = &cfg.snr_grid_db;

    let analytic = entries
        .iter()
        .map(|e| model.analytic_threshold(e))
        .collect::<Result<Vec<_>>>()?;
    let mut thresholds: Vec<(f64, ThresholdSource)> = Vec::with_capacity(entries.len());
    let mut calibration_diverged = 0;
    if analytic.iter().any(Option::is_none) {
        let required = min_trials(cfg.pfa);
        if cfg.trials < required {
            return Err(Error::InsufficientTrials {
                required,
                available: cfg.trials,
            });
        }
        let null: Vec<(Vec<f64>, u64)> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let data = model.trial_data(t, true)?;
                Ok((model.null_statistics(&data)?, data.diverged))
            })
            .collect::<Result<_>>()?;
        calibration_diverged = null.iter().map(|(_, d)| d).sum::<u64>();
        for (i, a) in analytic.iter().enumerate() {
            thresholds.push(match a {
                Some(t) => (*t, ThresholdSource::Analytic),
                None => {
                    let stats: Vec<f64> = null.iter().map(|(s, _)| s[i]).collect();
                    let e = empirical_threshold(&stats, cfg.pfa)?;
                    (
                        e.threshold,
                        ThresholdSource::Empirical {
                            trials: e.trials,
                            pfa_ci: e.pfa_ci,
                        },
                    )
                }
            });
        }
    } else {
        thresholds = analytic
            .into_iter()
            .map(|a| (a.expect("all analytic"), ThresholdSource::Analytic))
            .collect();
    }

    let points = grid.len();
    let tally = (0..cfg.trials)
        .into_par_iter()
        .map(|t| -> Result<Tally> {
            let data = model.trial_data(t, false)?;
            let mut tally = Tally::zero(entries.len(), points);
            tally.diverged = data.diverged;
            for (i, (e, channels)) in entries.iter().zip(&data.whitened).enumerate() {
                let threshold = thresholds[i].0;
                let mut h0 = 0.0;
                for c in channels {
                    h0 += e.detector.evaluate(&c.null_geometry()?)?.value;
                }
                tally.false_alarms[i] += (h0 >= threshold) as u64;
                for (j, &snr) in grid.iter().enumerate() {
                    let mut stat = 0.0;
                    for (k, c) in channels.iter().enumerate() {
                        let a = model.amplitude(k, snr, data.zeta[k]);
                        stat += e.detector.evaluate(&c.geometry(a)?)?.value;
                    }
                    tally.detections[i * points + j] += (stat >= threshold) as u64;
                }
            }
            Ok(tally)
        })
        .try_reduce(|| Tally::zero(entries.len(), points), |a, b| Ok(a.merge(b)))?;

    let n = cfg.trials;
    let curves = entries
        .iter()
        .enumerate()
        .map(|(i, e)| DetectorCurve {
            detector: e.name.to_string(),
            threshold: thresholds[i].0,
            source: thresholds[i].1.clone(),
            pfa_achieved: tally.false_alarms[i] as f64 / n as f64,
            points: grid
                .iter()
                .enumerate()
                .map(|(j, &snr_db)| {
                    let pd = tally.detections[i * points + j] as f64 / n as f64;
                    CurvePoint {
                        snr_db,
                        pd,
                        ci_halfwidth: ci_halfwidth(pd, n),
                    }
                })
                .collect(),
        })
        .collect();
    Ok(ScenarioResult {
        trials: n,
        curves,
        diverged: tally.diverged + calibration_diverged,
    })
}

#[cfg(test)]
mod tests;

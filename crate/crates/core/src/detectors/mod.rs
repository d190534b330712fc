//! Detection statistics for a rank-one signal `α s` in elliptical noise.
//!
//! Every statistic here depends on the data only through the whitened
//! energies `τ = x†Σ⁻¹x` and `m = |s†Σ⁻¹x|² / (s†Σ⁻¹s)`, collected in
//! [`Geometry`]. Computing the geometry once and evaluating several
//! detectors on it is how the simulation harness stays cheap.

mod registry;
mod threshold;

pub use registry::{detector_by_name, detector_names, Detector};
pub use threshold::{
    calibrate, empirical_threshold, exponential_sum_survival, exponential_sum_threshold, min_trials,
    threshold_from_pfa, EmpiricalThreshold, MonteCarlo, Threshold,
};

use crate::error::{Error, Result};
use crate::estimators::RadialScore;
use crate::hermitian::{CVector, HermitianPD};

/// Distance from 1 below which a coherence ratio counts as a perfect match.
pub const SATURATION_GAP: f64 = 1e-15;
pub const SATURATION_RATIO: f64 = 1.0 - SATURATION_GAP;

/// Relative slack allowed in `m <= τ` before the geometry is rejected.
const GEOMETRY_TOL: f64 = 1e-12;

/// Nonzero steering vector `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector(CVector);

impl SteeringVector {
    pub fn new(s: CVector) -> Result<Self> {
        if s.is_empty() || s.norm_squared() == 0.0 || !s.norm_squared().is_finite() {
            return Err(Error::invalid("steering vector must be nonzero and finite"));
        }
        Ok(SteeringVector(s))
    }

    pub fn as_vector(&self) -> &CVector {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Whitened energies of one test vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    /// `x†Σ⁻¹x`
    pub tau: f64,
    /// `|s†Σ⁻¹x|² / (s†Σ⁻¹s)`, at most `tau`.
    pub m: f64,
    pub dim: usize,
}

impl Geometry {
    pub fn new(x: &CVector, s: &SteeringVector, cov: &HermitianPD) -> Result<Self> {
        if s.dim() != cov.dim() {
            return Err(Error::DimensionMismatch {
                expected: cov.dim(),
                found: s.dim(),
            });
        }
        let w = cov.whiten(x)?;
        let v = cov.whiten(s.as_vector())?;
        Self::from_whitened(&w, &v)
    }

    /// From `w = L⁻¹x` and `v = L⁻¹s`, where `Σ = L L†`.
    pub fn from_whitened(w: &CVector, v: &CVector) -> Result<Self> {
        if w.len() != v.len() {
            return Err(Error::DimensionMismatch {
                expected: v.len(),
                found: w.len(),
            });
        }
        let tau = w.norm_squared();
        if !(tau > 0.0) {
            return Err(Error::ZeroSample { index: 0 });
        }
        Self::from_parts(tau, v.dotc(w).norm_sqr() / v.norm_squared(), w.len())
    }

    /// Validates `0 <= m <= τ` (up to rounding, then clamps).
    pub fn from_parts(tau: f64, m: f64, dim: usize) -> Result<Self> {
        if !(tau > 0.0) || !(m >= 0.0) || m > tau * (1.0 + GEOMETRY_TOL) || !tau.is_finite() {
            return Err(Error::InvalidGeometry { tau, m });
        }
        Ok(Geometry {
            tau,
            m: m.min(tau),
            dim,
        })
    }

    /// Coherence ratio `m / τ` in `[0, 1]`.
    pub fn ratio(&self) -> f64 {
        self.m / self.tau
    }
}

/// A detector output, flagged when the value was capped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Statistic {
    pub value: f64,
    pub saturated: bool,
}

impl Statistic {
    pub fn plain(value: f64) -> Self {
        Statistic {
            value,
            saturated: false,
        }
    }
}

/// Decision at a given threshold; `detected` is `statistic >= threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionReport {
    pub statistic: f64,
    pub threshold: f64,
    pub detected: bool,
    pub saturated: bool,
    pub per_channel: Option<Vec<f64>>,
}

impl DetectionReport {
    pub fn new(statistic: Statistic, threshold: f64, per_channel: Option<Vec<f64>>) -> Self {
        DetectionReport {
            statistic: statistic.value,
            threshold,
            detected: statistic.value >= threshold,
            saturated: statistic.saturated,
            per_channel,
        }
    }
}

/// `-c · log(1 − m/τ)`, capped at `-c · log(1e-15)` near a perfect match.
fn log_coherence(g: &Geometry, factor: f64) -> Result<Statistic> {
    if g.dim < 2 {
        return Err(Error::invalid("normalized matched filter needs d >= 2"));
    }
    let ratio = g.ratio();
    if ratio > SATURATION_RATIO {
        return Ok(Statistic {
            value: -factor * SATURATION_GAP.ln(),
            saturated: true,
        });
    }
    // ln_1p keeps full precision for small ratios; +0.0 turns -0 into 0.
    Ok(Statistic::plain(-factor * (-ratio).ln_1p() + 0.0))
}

/// Normalized matched filter `-(d−1) log(1 − m/τ)`.
pub fn nmf_geometry(g: &Geometry) -> Result<Statistic> {
    log_coherence(g, g.dim as f64 - 1.0)
}

/// Phase-blind variant with factor `d − ½`.
pub fn nmf_phi_geometry(g: &Geometry) -> Result<Statistic> {
    log_coherence(g, g.dim as f64 - 0.5)
}

pub fn nmf(x: &CVector, s: &SteeringVector, cov: &HermitianPD) -> Result<Statistic> {
    nmf_geometry(&Geometry::new(x, s, cov)?)
}

pub fn nmf_phi(x: &CVector, s: &SteeringVector, cov: &HermitianPD) -> Result<Statistic> {
    nmf_phi_geometry(&Geometry::new(x, s, cov)?)
}

/// Generalized likelihood ratio under a fixed radial template:
/// `g(τ) − min g` over `{τ − m}` and the stationary points of `g` at or
/// beyond `τ − m`.
pub fn glr_g_geometry(g: &Geometry, score: &RadialScore) -> f64 {
    let floor = g.tau - g.m;
    let best = score
        .stationary_points()
        .iter()
        .filter(|&&p| p >= floor)
        .map(|&p| score.g(p))
        .fold(score.g(floor), f64::min);
    score.g(g.tau) - best
}

pub fn glr_g(x: &CVector, s: &SteeringVector, sigma: &HermitianPD, score: &RadialScore) -> Result<f64> {
    Ok(glr_g_geometry(&Geometry::new(x, s, sigma)?, score))
}

/// Circular-Gaussian GLR in closed form: the minimum of `t − ½ log t` over
/// `[τ − m, ∞)` sits at `½` when reachable.
pub fn glr_cg_geometry(g: &Geometry) -> f64 {
    if g.tau - g.m <= 0.5 {
        g.tau - 0.5 * g.tau.ln() - 0.5 * (1.0 + std::f64::consts::LN_2)
    } else {
        g.m + 0.5 * (-g.ratio()).ln_1p()
    }
}

pub fn glr_cg(x: &CVector, s: &SteeringVector, sigma: &HermitianPD) -> Result<f64> {
    Ok(glr_cg_geometry(&Geometry::new(x, s, sigma)?))
}

/// Coherent matched filter `m = |s†Σ⁻¹x|² / (s†Σ⁻¹s)`.
pub fn matched_filter(x: &CVector, s: &SteeringVector, sigma: &HermitianPD) -> Result<f64> {
    Ok(Geometry::new(x, s, sigma)?.m)
}

/// One channel of a multichannel test.
#[derive(Debug, Clone)]
pub struct Channel {
    pub x: CVector,
    pub s: SteeringVector,
    pub cov: HermitianPD,
}

/// Sum of a detector over independent channels, with the per-channel terms.
#[derive(Debug, Clone, PartialEq)]
pub struct MultichannelStatistic {
    pub total: Statistic,
    pub per_channel: Vec<f64>,
}

/// Per-channel errors are wrapped with the channel index.
pub fn multichannel(detector: &dyn Detector, channels: &[Channel]) -> Result<MultichannelStatistic> {
    if channels.is_empty() {
        return Err(Error::invalid("at least one channel is required"));
    }
    let mut per_channel = Vec::with_capacity(channels.len());
    let mut saturated = false;
    for (index, c) in channels.iter().enumerate() {
        let stat = detector.statistic(&c.x, &c.s, &c.cov).map_err(|e| Error::Channel {
            index,
            source: Box::new(e),
        })?;
        saturated |= stat.saturated;
        per_channel.push(stat.value);
    }
    Ok(MultichannelStatistic {
        total: Statistic {
            value: per_channel.iter().sum(),
            saturated,
        },
        per_channel,
    })
}

pub fn nmf_multichannel(channels: &[Channel]) -> Result<MultichannelStatistic> {
    multichannel(&registry::Nmf, channels)
}

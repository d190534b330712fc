//! Detection thresholds: analytic inversion of sums of exponentials, and
//! Monte-Carlo calibration under the null hypothesis.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hermitian::CVector;
use crate::simkit::{standard_complex_normal, stream_rng, Role};

use super::{Detector, Geometry};

/// Relative rate separation below which two exponentials count as equal.
const RATE_TIE: f64 = 1e-6;

/// `P(Σₖ wₖ Eₖ > t)` for independent unit exponentials `Eₖ`.
///
/// Exact when all means are equal (Gamma law) or pairwise distinct
/// (hypoexponential law); `None` for mixed ties.
pub fn exponential_sum_survival(means: &[f64], t: f64) -> Option<f64> {
    if means.is_empty() || means.iter().any(|&w| !(w > 0.0)) {
        return None;
    }
    if t <= 0.0 {
        return Some(1.0);
    }
    let w0 = means[0];
    if means.iter().all(|&w| ((w - w0) / w0).abs() <= RATE_TIE) {
        // Gamma(K, w): e^{-x} Σ_{j<K} x^j / j!
        let x = t / w0;
        let mut term = 1.0;
        let mut sum = 1.0;
        for j in 1..means.len() {
            term *= x / j as f64;
            sum += term;
        }
        return Some(((-x).exp() * sum).clamp(0.0, 1.0));
    }
    let rates: Vec<f64> = means.iter().map(|w| 1.0 / w).collect();
    for i in 0..rates.len() {
        for j in (i + 1)..rates.len() {
            if ((rates[i] - rates[j]) / rates[i].max(rates[j])).abs() <= RATE_TIE {
                return None;
            }
        }
    }
    let s: f64 = rates
        .iter()
        .enumerate()
        .map(|(i, &li)| {
            let coef: f64 = rates
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &lj)| lj / (lj - li))
                .product();
            coef * (-li * t).exp()
        })
        .sum();
    Some(s.clamp(0.0, 1.0))
}

/// Inverse of [`exponential_sum_survival`] at `pfa`, by bisection.
pub fn exponential_sum_threshold(means: &[f64], pfa: f64) -> Result<f64> {
    check_pfa(pfa)?;
    let survival = |t: f64| {
        exponential_sum_survival(means, t)
            .ok_or_else(|| Error::invalid("no closed-form law for these channel weights"))
    };
    let total: f64 = means.iter().sum();
    let mut hi = total * (1.0 - pfa.ln());
    while survival(hi)? > pfa {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if survival(mid)? > pfa {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn check_pfa(pfa: f64) -> Result<()> {
    if !(pfa > 0.0 && pfa < 1.0) {
        return Err(Error::invalid(format!("pfa must lie in (0, 1), got {pfa}")));
    }
    Ok(())
}

/// Smallest Monte-Carlo size whose pfa estimate has relative standard
/// error at most 10%: `n >= 100 (1 − p) / p`.
pub fn min_trials(pfa: f64) -> u64 {
    (100.0 * (1.0 - pfa) / pfa).ceil() as u64
}

/// Threshold read off null-hypothesis statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalThreshold {
    pub threshold: f64,
    pub pfa: f64,
    pub trials: u64,
    /// Half-width of the 95% normal-approximation interval of the pfa.
    pub pfa_ci: f64,
    pub seed: Option<u64>,
}

/// The `round(pfa · n)`-th largest null statistic, so that exactly that
/// many calibration trials reach the threshold (barring ties).
pub fn empirical_threshold(stats: &[f64], pfa: f64) -> Result<EmpiricalThreshold> {
    check_pfa(pfa)?;
    let n = stats.len() as u64;
    let required = min_trials(pfa);
    if n < required {
        return Err(Error::InsufficientTrials {
            required,
            available: n,
        });
    }
    let k = ((pfa * n as f64).round() as usize).max(1);
    let mut sorted = stats.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    Ok(EmpiricalThreshold {
        threshold: sorted[k - 1],
        pfa,
        trials: n,
        pfa_ci: 1.96 * (pfa * (1.0 - pfa) / n as f64).sqrt(),
        seed: None,
    })
}

/// Draws `trials` null statistics in parallel, trial `i` from the stream
/// `(seed, i)`, and returns the empirical threshold.
pub fn calibrate<F>(pfa: f64, trials: u64, seed: u64, sampler: F) -> Result<EmpiricalThreshold>
where
    F: Fn(&mut ChaCha8Rng) -> Result<f64> + Sync,
{
    check_pfa(pfa)?;
    let required = min_trials(pfa);
    if trials < required {
        return Err(Error::InsufficientTrials {
            required,
            available: trials,
        });
    }
    let stats = (0..trials)
        .into_par_iter()
        .map(|i| sampler(&mut stream_rng(seed, i, Role::CalibrationNoise)))
        .collect::<Result<Vec<f64>>>()?;
    let mut out = empirical_threshold(&stats, pfa)?;
    out.seed = Some(seed);
    Ok(out)
}

/// Monte-Carlo budget for thresholds without a closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarlo {
    pub seed: u64,
    /// Upper bound on calibration trials; the count actually used is the
    /// smallest one resolving the requested pfa to 10%.
    pub max_trials: u64,
}

impl Default for MonteCarlo {
    fn default() -> Self {
        MonteCarlo {
            seed: 0x5eed,
            max_trials: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Threshold {
    Analytic(f64),
    Empirical(EmpiricalThreshold),
}

impl Threshold {
    pub fn value(&self) -> f64 {
        match self {
            Threshold::Analytic(t) => *t,
            Threshold::Empirical(e) => e.threshold,
        }
    }
}

/// Threshold of `detector` summed over channels of the given dimensions,
/// with known noise covariance.
///
/// Detectors whose null law is a scaled exponential get the exact inverse
/// survival value (Gamma or hypoexponential law). Others are calibrated by
/// Monte-Carlo under white Gaussian noise, which is exact for Gaussian
/// backgrounds since every statistic here is invariant to whitening.
pub fn threshold_from_pfa(
    detector: &dyn Detector,
    pfa: f64,
    channel_dims: &[usize],
    mc: MonteCarlo,
) -> Result<Threshold> {
    check_pfa(pfa)?;
    if channel_dims.is_empty() || channel_dims.iter().any(|&d| d < 2) {
        return Err(Error::invalid("every channel needs dimension >= 2"));
    }
    let means: Option<Vec<f64>> = channel_dims
        .iter()
        .map(|&d| detector.null_exponential_mean(d))
        .collect();
    if let Some(means) = means {
        if exponential_sum_survival(&means, 1.0).is_some() {
            return exponential_sum_threshold(&means, pfa).map(Threshold::Analytic);
        }
    }
    let trials = min_trials(pfa);
    if trials > mc.max_trials {
        return Err(Error::InsufficientTrials {
            required: trials,
            available: mc.max_trials,
        });
    }
    calibrate(pfa, trials, mc.seed, |rng| {
        let mut total = 0.0;
        for &d in channel_dims {
            let w = standard_complex_normal(rng, d);
            let mut v = CVector::zeros(d);
            v[0] = 1.0.into();
            total += detector.evaluate(&Geometry::from_whitened(&w, &v)?)?.value;
        }
        Ok(total)
    })
    .map(Threshold::Empirical)
}

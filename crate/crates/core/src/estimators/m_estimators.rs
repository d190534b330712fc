use crate::error::{Error, Result};
use crate::hermitian::{eigh, relative_change, symmetrize, CMatrix, CVector, HermitianPD, C64};
use crate::sample::{Field, SampleSet};

use super::{
    no_convergence, quad_forms, require_span, spanning_pd, weighted_scatter, CovarianceEstimator,
    Estimate, IterationControl, RadialScore,
};

fn check_field(score: &RadialScore, samples: &SampleSet) -> Result<()> {
    if score.field() != samples.field() {
        return Err(Error::FieldMismatch(format!(
            "score '{}' is for {} data, samples are {}",
            score.name(),
            score.field().as_str(),
            samples.field().as_str()
        )));
    }
    Ok(())
}

fn m_step(score: &RadialScore, sigma: &HermitianPD, samples: &SampleSet) -> Result<HermitianPD> {
    let weights: Vec<f64> = quad_forms(sigma, samples)?
        .into_iter()
        .map(|t| score.g_prime(t))
        .collect();
    spanning_pd(&weighted_scatter(
        samples.columns(),
        &weights,
        1.0 / samples.len() as f64,
    ))
}

/// Standard M-estimator of the scatter matrix: iterates
/// `Σ ← (1/N) Σ g'(xₙ†Σ⁻¹xₙ) xₙxₙ†` from the identity.
///
/// Requires `g' >= 0`; scores that change sign need [`m_exp_cov`].
pub fn m_cov(score: &RadialScore, samples: &SampleSet, ctrl: &IterationControl) -> Result<Estimate> {
    ctrl.validate()?;
    if !score.nonneg_derivative() {
        return Err(Error::InvalidScore(format!(
            "'{}' has a sign-changing g'; use the geodesic iteration",
            score.name()
        )));
    }
    check_field(score, samples)?;
    require_span(samples)?;
    let mut sigma = HermitianPD::identity(samples.dim());
    let mut history = Vec::new();
    for k in 1..=ctrl.max_iter {
        let next = m_step(score, &sigma, samples)?;
        let change = relative_change(&sigma, &next);
        history.push(change);
        sigma = next;
        if change <= ctrl.eps {
            return Ok(Estimate {
                matrix: sigma,
                iterations: k,
                history,
            });
        }
    }
    Err(no_convergence(ctrl.max_iter, &history, sigma))
}

/// M version of a Gaussian covariance estimator `e`: `Σ ← e(√g'(xₙ†Σ⁻¹xₙ) xₙ)`.
pub fn m_of(
    score: &RadialScore,
    estimator: &dyn CovarianceEstimator,
    samples: &SampleSet,
    ctrl: &IterationControl,
) -> Result<Estimate> {
    ctrl.validate()?;
    if !score.nonneg_derivative() {
        return Err(Error::InvalidScore(format!(
            "'{}' has a sign-changing g'; weights would be imaginary",
            score.name()
        )));
    }
    check_field(score, samples)?;
    require_span(samples)?;
    let mut sigma = HermitianPD::identity(samples.dim());
    let mut history = Vec::new();
    for k in 1..=ctrl.max_iter {
        let weighted: Vec<CVector> = quad_forms(&sigma, samples)?
            .iter()
            .zip(samples.iter())
            .map(|(&t, x)| x.scale(score.g_prime(t).sqrt()))
            .collect();
        let next = estimator.estimate(&samples.with_columns(weighted)?)?.matrix;
        let change = relative_change(&sigma, &next);
        history.push(change);
        sigma = next;
        if change <= ctrl.eps {
            return Ok(Estimate {
                matrix: sigma,
                iterations: k,
                history,
            });
        }
    }
    Err(no_convergence(ctrl.max_iter, &history, sigma))
}

/// Geodesic shooting `Σ ← Σ^½ exp(Σ^-½ S Σ^-½ − I) Σ^½` with
/// `S = scale · (1/N) Σ w(xₙ†Σ⁻¹xₙ) xₙxₙ†`. The whitened scatter is formed
/// directly from `Σ^-½ xₙ`, so each step costs two eigendecompositions.
fn geodesic_shooting(
    weight: impl Fn(f64) -> f64,
    scale: f64,
    init: HermitianPD,
    samples: &SampleSet,
    ctrl: &IterationControl,
) -> Result<Estimate> {
    let d = samples.dim();
    let n = samples.len() as f64;
    let mut sigma = init;
    let mut history = Vec::new();
    for k in 1..=ctrl.max_iter {
        let (values, vectors) = eigh(sigma.matrix());
        if values.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::DegenerateSampleSet {
                reason: "scatter iterate lost definiteness".into(),
            });
        }
        let mut half = vectors.clone();
        let mut inv_half = vectors.clone();
        for (j, &l) in values.iter().enumerate() {
            half.column_mut(j).scale_mut(l.sqrt());
            inv_half.column_mut(j).scale_mut(1.0 / l.sqrt());
        }
        let adj = vectors.adjoint();
        let half = symmetrize(&(half * &adj));
        let inv_half = symmetrize(&(inv_half * &adj));

        let whitened: Vec<CVector> = samples.iter().map(|x| &inv_half * x).collect();
        let weights: Vec<f64> = whitened
            .iter()
            .enumerate()
            .map(|(index, w)| {
                let t = w.norm_squared();
                if t > 0.0 {
                    Ok(weight(t))
                } else {
                    Err(Error::ZeroSample { index })
                }
            })
            .collect::<Result<_>>()?;
        let mut tangent = weighted_scatter(&whitened, &weights, scale / n);
        for i in 0..d {
            tangent[(i, i)] -= C64::new(1.0, 0.0);
        }
        let (tv, tvec) = eigh(&tangent);
        let mut step = tvec.clone();
        for (j, &l) in tv.iter().enumerate() {
            step.column_mut(j).scale_mut(l.exp());
        }
        let step = symmetrize(&(step * tvec.adjoint()));
        // tr((Σ^-½ Σ_new Σ^-½ − I)²) = Σ (e^λ − 1)² over the tangent spectrum.
        let change: f64 = tv.iter().map(|l| l.exp_m1().powi(2)).sum();
        history.push(change);
        let next: CMatrix = &half * step * &half;
        sigma = HermitianPD::from_hermitian_part(&next).map_err(|_| Error::DegenerateSampleSet {
            reason: "scatter iterate lost definiteness".into(),
        })?;
        if change <= ctrl.eps {
            return Ok(Estimate {
                matrix: sigma,
                iterations: k,
                history,
            });
        }
    }
    Err(no_convergence(ctrl.max_iter, &history, sigma))
}

/// M-estimator by geodesic shooting, valid when `g'` takes negative values.
/// Starts from the identity.
pub fn m_exp_cov(
    score: &RadialScore,
    samples: &SampleSet,
    ctrl: &IterationControl,
) -> Result<Estimate> {
    ctrl.validate()?;
    check_field(score, samples)?;
    require_span(samples)?;
    geodesic_shooting(
        |t| score.g_prime(t),
        1.0,
        HermitianPD::identity(samples.dim()),
        samples,
        ctrl,
    )
}

/// `1 / (1 − 1/(2d))`: weight normalization of the circular-Gaussian iteration.
fn cg_scale(d: usize) -> f64 {
    1.0 / (1.0 - 0.5 / d as f64)
}

/// Circular complex Gaussian scatter estimate with the phase symmetry of
/// each sample accounted for. Geodesic shooting from the sample covariance
/// with `S = (1/((1 − 1/(2d))N)) Σ (1 − 1/(2xₙ†Σ⁻¹xₙ)) xₙxₙ†`.
pub fn cg_cov(samples: &SampleSet, ctrl: &IterationControl) -> Result<Estimate> {
    ctrl.validate()?;
    if samples.field() != Field::Complex {
        return Err(Error::FieldMismatch("cg_cov needs complex samples".into()));
    }
    let init = super::scm(samples)?;
    geodesic_shooting(
        |t| 1.0 - 0.5 / t,
        cg_scale(samples.dim()),
        init,
        samples,
        ctrl,
    )
}

/// Log-likelihood of `Σ` under the fixed radial template of `score`:
/// `-(c_K/2) (log|Σ| + (1/N) Σ g(xₙ†Σ⁻¹xₙ))`.
pub fn m_loglik(score: &RadialScore, sigma: &HermitianPD, samples: &SampleSet) -> Result<f64> {
    let n = samples.len() as f64;
    let sum_g: f64 = quad_forms(sigma, samples)?.into_iter().map(|t| score.g(t)).sum();
    Ok(-0.5 * score.c_k() * (sigma.log_det() + sum_g / n))
}

/// Objective whose stationary point `cg_cov` computes:
/// `-(1 − 1/(2d)) log|Σ| − (1/N) Σ (tₙ − ½ log tₙ)`.
pub fn cg_loglik(sigma: &HermitianPD, samples: &SampleSet) -> Result<f64> {
    let n = samples.len() as f64;
    let sum_g: f64 = quad_forms(sigma, samples)?
        .into_iter()
        .map(|t| t - 0.5 * t.ln())
        .sum();
    Ok(-sigma.log_det() / cg_scale(samples.dim()) - sum_g / n)
}

fn frobenius_residual(sigma: &HermitianPD, image: &CMatrix) -> f64 {
    (sigma.matrix() - image).norm() / sigma.matrix().norm()
}

/// `‖Σ − (1/N) Σ g'(xₙ†Σ⁻¹xₙ) xₙxₙ†‖_F / ‖Σ‖_F`.
pub fn m_residual(score: &RadialScore, sigma: &HermitianPD, samples: &SampleSet) -> Result<f64> {
    let weights: Vec<f64> = quad_forms(sigma, samples)?
        .into_iter()
        .map(|t| score.g_prime(t))
        .collect();
    let image = weighted_scatter(samples.columns(), &weights, 1.0 / samples.len() as f64);
    Ok(frobenius_residual(sigma, &image))
}

/// Normalized Frobenius residual of the `cg_cov` stationarity equation.
pub fn cg_residual(sigma: &HermitianPD, samples: &SampleSet) -> Result<f64> {
    let weights: Vec<f64> = quad_forms(sigma, samples)?
        .into_iter()
        .map(|t| 1.0 - 0.5 / t)
        .collect();
    let scale = cg_scale(samples.dim()) / samples.len() as f64;
    let image = weighted_scatter(samples.columns(), &weights, scale);
    Ok(frobenius_residual(sigma, &image))
}

//! Unconstrained maximum-likelihood estimators of the correlation and scatter
//! matrices: sample covariance, Tyler's fixed point, the `tyler_of`
//! normalization wrapper, and the M-estimator family.

mod m_estimators;
mod registry;
mod score;

pub use m_estimators::{
    cg_cov, cg_loglik, cg_residual, m_cov, m_exp_cov, m_loglik, m_of, m_residual,
};
pub use registry::{estimator_by_name, estimator_names, CovarianceEstimator};
pub use score::{RadialScore, ScalarFn};

use crate::error::{Error, Result};
use crate::hermitian::{
    geodesic_dist2, normalize, relative_change, CMatrix, CVector, HermitianPD, Normalization, C64,
};
use crate::sample::SampleSet;

/// Stopping rule shared by every fixed-point iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationControl {
    /// Tolerance on `tr((R_prev⁻¹ R − I)²)` (or the analogous per-method criterion).
    pub eps: f64,
    pub max_iter: usize,
    /// Blend `(1 − ρ) R + ρ I` after each Tyler iterate. Off (`0`) by default;
    /// this is an experimentation knob, not part of the maximum-likelihood
    /// estimator, and it lifts the `N >= d` requirement.
    pub diagonal_loading: f64,
}

impl Default for IterationControl {
    fn default() -> Self {
        IterationControl {
            eps: 1e-10,
            max_iter: 100,
            diagonal_loading: 0.0,
        }
    }
}

impl IterationControl {
    pub fn new(eps: f64, max_iter: usize) -> Result<Self> {
        let ctrl = IterationControl {
            eps,
            max_iter,
            ..Default::default()
        };
        ctrl.validate()?;
        Ok(ctrl)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) {
            return Err(Error::invalid("eps must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.diagonal_loading) {
            return Err(Error::invalid("diagonal loading must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Output of an estimator, with its convergence trace.
#[derive(Debug, Clone)]
pub struct Estimate {
    pub matrix: HermitianPD,
    pub iterations: usize,
    /// Stopping criterion value at each iteration; empty for closed forms.
    pub history: Vec<f64>,
}

impl Estimate {
    pub(crate) fn closed_form(matrix: HermitianPD) -> Self {
        Estimate {
            matrix,
            iterations: 0,
            history: Vec::new(),
        }
    }

    /// Last value of the stopping criterion (0 for closed forms).
    pub fn residual(&self) -> f64 {
        self.history.last().copied().unwrap_or(0.0)
    }
}

pub(crate) fn no_convergence(iterations: usize, history: &[f64], last: HermitianPD) -> Error {
    Error::NoConvergence {
        iterations,
        residual: history.last().copied().unwrap_or(f64::NAN),
        partial: Some(Box::new(last)),
    }
}

/// `scale · Σ wₙ xₙxₙ†`, accumulated in sample order.
pub(crate) fn weighted_scatter(columns: &[CVector], weights: &[f64], scale: f64) -> CMatrix {
    let d = columns[0].len();
    let mut acc = CMatrix::zeros(d, d);
    for (x, &w) in columns.iter().zip(weights) {
        for j in 0..d {
            let xj = x[j].conj() * w;
            for i in j..d {
                acc[(i, j)] += x[i] * xj;
            }
        }
    }
    for j in 0..d {
        acc[(j, j)].im = 0.0;
        for i in (j + 1)..d {
            acc[(j, i)] = acc[(i, j)].conj();
        }
    }
    acc.scale_mut(scale);
    acc
}

/// Wraps an accumulated scatter matrix, reporting rank deficiency.
pub(crate) fn spanning_pd(m: &CMatrix) -> Result<HermitianPD> {
    let max_diag = m.diagonal().iter().fold(0.0f64, |a, z| a.max(z.re));
    let pd = HermitianPD::new(m.clone()).map_err(|e| Error::DegenerateSampleSet {
        reason: e.to_string(),
    })?;
    let min_pivot = pd
        .cholesky()
        .diagonal()
        .iter()
        .fold(f64::INFINITY, |a, z| a.min(z.re * z.re));
    if min_pivot <= 1e-13 * max_diag {
        return Err(Error::DegenerateSampleSet {
            reason: format!("relative pivot {:e}", min_pivot / max_diag),
        });
    }
    Ok(pd)
}

pub(crate) fn require_span(samples: &SampleSet) -> Result<()> {
    if samples.len() < samples.dim() {
        return Err(Error::DegenerateSampleSet {
            reason: format!("N = {} < d = {}", samples.len(), samples.dim()),
        });
    }
    Ok(())
}

/// Quadratic forms `xₙ† M⁻¹ xₙ`, rejecting zero values.
pub(crate) fn quad_forms(m: &HermitianPD, samples: &SampleSet) -> Result<Vec<f64>> {
    samples
        .iter()
        .enumerate()
        .map(|(index, x)| {
            let q = m.inv_quad_form(x)?;
            if q > 0.0 {
                Ok(q)
            } else {
                Err(Error::ZeroSample { index })
            }
        })
        .collect()
}

/// Concentrated log-likelihood of a unit-determinant correlation matrix,
/// with the radial distribution profiled out (additive constants dropped):
/// `-c_K (d-1) / (2N) Σ log(xₙ† R⁻¹ xₙ)`.
pub fn loglik_concentrated(r: &HermitianPD, samples: &SampleSet) -> Result<f64> {
    if r.dim() != samples.dim() {
        return Err(Error::DimensionMismatch {
            expected: r.dim(),
            found: samples.dim(),
        });
    }
    if r.log_det().abs() > 1e-9 {
        return Err(Error::invalid("concentrated likelihood needs a unit-determinant matrix"));
    }
    let d = samples.dim() as f64;
    let n = samples.len() as f64;
    let sum_log: f64 = quad_forms(r, samples)?.iter().map(|q| q.ln()).sum();
    Ok(-samples.field().c_k() * (d - 1.0) / (2.0 * n) * sum_log)
}

/// Radii `sqrt(xₙ† R⁻¹ xₙ)`, ascending: the support of the profiled radial law.
pub fn empirical_radial(r: &HermitianPD, samples: &SampleSet) -> Result<Vec<f64>> {
    let mut radii: Vec<f64> = quad_forms(r, samples)?.into_iter().map(f64::sqrt).collect();
    radii.sort_by(f64::total_cmp);
    Ok(radii)
}

/// Sample covariance `(1/N) Σ xₙxₙ†`.
pub fn scm(samples: &SampleSet) -> Result<HermitianPD> {
    require_span(samples)?;
    let ones = vec![1.0; samples.len()];
    spanning_pd(&weighted_scatter(samples.columns(), &ones, 1.0 / samples.len() as f64))
}

/// One Tyler map `R ↦ d · S / tr S` with `S = Σ xₙxₙ† / (xₙ†R⁻¹xₙ)`.
fn tyler_step(r: &HermitianPD, samples: &SampleSet, loading: f64) -> Result<HermitianPD> {
    let weights: Vec<f64> = quad_forms(r, samples)?.iter().map(|q| 1.0 / q).collect();
    let mut s = weighted_scatter(samples.columns(), &weights, 1.0);
    let d = samples.dim();
    let trace: f64 = s.diagonal().iter().map(|z| z.re).sum();
    s.scale_mut(d as f64 / trace);
    if loading > 0.0 {
        s.scale_mut(1.0 - loading);
        for i in 0..d {
            s[(i, i)] += C64::new(loading, 0.0);
        }
        return HermitianPD::new(s);
    }
    spanning_pd(&s)
}

/// Tyler's fixed point `R ∝ Σ xₙxₙ† / (xₙ†R⁻¹xₙ)`, started from the identity.
///
/// Iterates are kept at unit mean trace (the Lagrange multiplier of the
/// determinant constraint only fixes the scale); the result is rescaled once
/// to `normalization` at the end.
pub fn tyler_fixed_point(
    samples: &SampleSet,
    ctrl: &IterationControl,
    normalization: Normalization,
) -> Result<Estimate> {
    ctrl.validate()?;
    if ctrl.diagonal_loading == 0.0 {
        require_span(samples)?;
    }
    let mut r = HermitianPD::identity(samples.dim());
    let mut history = Vec::new();
    for k in 1..=ctrl.max_iter {
        let next = tyler_step(&r, samples, ctrl.diagonal_loading)?;
        let change = relative_change(&r, &next);
        history.push(change);
        r = next;
        if change <= ctrl.eps {
            return Ok(Estimate {
                matrix: normalize(&r, normalization),
                iterations: k,
                history,
            });
        }
    }
    Err(no_convergence(ctrl.max_iter, &history, normalize(&r, normalization)))
}

/// Fixed-point residual of Tyler's equation: squared geodesic distance
/// between `R` and its image under one Tyler map (both at unit mean trace).
pub fn tyler_residual(r: &HermitianPD, samples: &SampleSet) -> Result<f64> {
    let current = normalize(r, Normalization::UnitTraceMean);
    let image = tyler_step(&current, samples, 0.0)?;
    geodesic_dist2(&current, &image)
}

/// Normalized version of a covariance estimator `e`: alternates radius
/// whitening `yₙ = xₙ / sqrt(xₙ†R⁻¹xₙ)` with `R ← e(y) / tr e(y)`.
///
/// Convergence is not guaranteed for arbitrary `e`; failure is reported as
/// [`Error::NoConvergence`]. The result is returned at unit mean trace.
pub fn tyler_of(
    estimator: &dyn CovarianceEstimator,
    samples: &SampleSet,
    ctrl: &IterationControl,
) -> Result<Estimate> {
    ctrl.validate()?;
    require_span(samples)?;
    let d = samples.dim() as f64;
    let mut r = HermitianPD::identity(samples.dim());
    let mut history = Vec::new();
    for k in 1..=ctrl.max_iter {
        let whitened: Vec<CVector> = quad_forms(&r, samples)?
            .iter()
            .zip(samples.iter())
            .map(|(q, x)| x.unscale(q.sqrt()))
            .collect();
        let s = estimator.estimate(&samples.with_columns(whitened)?)?.matrix;
        let next = s.scaled(d / s.trace())?;
        let change = relative_change(&r, &next);
        history.push(change);
        r = next;
        if change <= ctrl.eps {
            return Ok(Estimate {
                matrix: normalize(&r, Normalization::UnitTraceMean),
                iterations: k,
                history,
            });
        }
    }
    Err(no_convergence(
        ctrl.max_iter,
        &history,
        normalize(&r, Normalization::UnitTraceMean),
    ))
}

#[cfg(test)]
mod tests;

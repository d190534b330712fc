//! Toeplitz-constrained estimation through the lattice (Schur) parametrization
//! of a stationary autoregressive process.
//!
//! Lattice convention used throughout: with forward error `f` and backward
//! error `b`, one stage with reflection coefficient `μ` maps
//! `f' = f + μ b` and `b' = b + μ̄ f`. The order-`m` prediction-error filter is
//! `eₖ = xₖ + Σⱼ aₘ,ⱼ xₖ₋ⱼ`, and the covariance is `T[i][j] = E[xᵢ x̄ⱼ]`.

use crate::error::{Error, Result};
use crate::estimators::{Estimate, IterationControl};
use crate::hermitian::{CMatrix, CVector, HermitianPD, C64};
use crate::sample::SampleSet;

/// Largest admissible reflection-coefficient modulus.
pub const MAX_REFLECTION: f64 = 1.0 - 1e-12;

/// Residual power and reflection coefficients of a stationary AR model.
#[derive(Debug, Clone, PartialEq)]
pub struct SchurModel {
    sigma2: f64,
    mu: Vec<C64>,
}

fn clamp_modulus(z: C64) -> C64 {
    let r = z.norm();
    if r > MAX_REFLECTION {
        z * (MAX_REFLECTION / r)
    } else {
        z
    }
}

impl SchurModel {
    /// Coefficients with modulus in `[1 − 1e-12, 1]` are pulled back inside
    /// the disk; anything outside the closed disk is rejected.
    pub fn new(sigma2: f64, mu: Vec<C64>) -> Result<Self> {
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::invalid(format!("residual power must be positive, got {sigma2}")));
        }
        if let Some(bad) = mu.iter().find(|z| !(z.norm() <= 1.0)) {
            return Err(Error::invalid(format!("reflection coefficient {bad} outside the unit disk")));
        }
        Ok(SchurModel {
            sigma2,
            mu: mu.into_iter().map(clamp_modulus).collect(),
        })
    }

    /// White process of dimension `dim`.
    pub fn white(sigma2: f64, dim: usize) -> Result<Self> {
        Self::new(sigma2, vec![C64::new(0.0, 0.0); dim.saturating_sub(1)])
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn reflection(&self) -> &[C64] {
        &self.mu
    }

    pub fn order(&self) -> usize {
        self.mu.len()
    }

    /// Lag-zero autocovariance `r₀ = σ² / Π(1 − |μₘ|²)`.
    pub fn power(&self) -> f64 {
        self.sigma2 / self.mu.iter().map(|z| 1.0 - z.norm_sqr()).product::<f64>()
    }

    /// Extends the model to dimension `dim` with zero reflection coefficients
    /// (an AR(p) process has vanishing coefficients beyond order p).
    pub fn padded(&self, dim: usize) -> SchurModel {
        let mut mu = self.mu.clone();
        mu.resize(dim.saturating_sub(1).max(mu.len()), C64::new(0.0, 0.0));
        SchurModel {
            sigma2: self.sigma2,
            mu,
        }
    }
}

/// Levinson step-up recursion: prediction-error filters of every order
/// `0..=p`, where entry `m` holds `(aₘ,₁ … aₘ,ₘ)`.
fn step_up_all(mu: &[C64]) -> Vec<Vec<C64>> {
    let mut filters: Vec<Vec<C64>> = Vec::with_capacity(mu.len() + 1);
    filters.push(Vec::new());
    for (idx, &k) in mu.iter().enumerate() {
        let m = idx + 1;
        let prev = &filters[idx];
        let mut next = Vec::with_capacity(m);
        for j in 1..m {
            next.push(prev[j - 1] + k * prev[m - j - 1].conj());
        }
        next.push(k);
        filters.push(next);
    }
    filters
}

/// AR polynomial coefficients `(a₁ … a_p)` of `1 + Σ aₖ z⁻ᵏ`.
pub fn schur_to_ar(model: &SchurModel) -> Vec<C64> {
    step_up_all(&model.mu).pop().unwrap_or_default()
}

/// Inverse of the Hermitian Toeplitz covariance generated by `model`, of
/// dimension `order + 1`.
///
/// The innovations `eₖ` (order-`k` forward errors at time `k`) are
/// uncorrelated with variances `Pₖ`, so with `e = L x` for the unit lower
/// triangular `L` built from the step-up filters, `T⁻¹ = L† diag(1/Pₖ) L`.
pub fn trench_inverse(model: &SchurModel) -> HermitianPD {
    let d = model.order() + 1;
    let filters = step_up_all(&model.mu);
    let mut powers = vec![0.0; d];
    powers[d - 1] = model.sigma2;
    for k in (1..d).rev() {
        powers[k - 1] = powers[k] / (1.0 - model.mu[k - 1].norm_sqr());
    }
    let mut l = CMatrix::zeros(d, d);
    for (k, filter) in filters.iter().enumerate() {
        l[(k, k)] = C64::new(1.0, 0.0);
        for (j, &a) in filter.iter().enumerate() {
            l[(k, k - j - 1)] = a;
        }
    }
    let mut scaled = l.adjoint();
    for (k, &p) in powers.iter().enumerate() {
        scaled.column_mut(k).scale_mut(1.0 / p);
    }
    HermitianPD::from_hermitian_part(&(scaled * l))
        .expect("a model with |μ| < 1 yields a positive-definite inverse")
}

/// The Toeplitz covariance itself (inverse of [`trench_inverse`]).
pub fn toeplitz_covariance(model: &SchurModel) -> Result<HermitianPD> {
    trench_inverse(model).inverse()
}

/// Multisegment Burg estimate of an order-`order` lattice model, each sample
/// being one independent segment of length `d`.
///
/// At each stage the coefficient minimizes the summed forward plus backward
/// residual power over all segments,
/// `μₘ = −2 Σ f b̄ / Σ (|f|² + |b|²)`, so `|μₘ| <= 1` by Cauchy–Schwarz.
/// Segments are reduced in sample order.
pub fn burg_multisegment(samples: &SampleSet, order: usize) -> Result<SchurModel> {
    let d = samples.dim();
    if order + 1 > d {
        return Err(Error::invalid(format!(
            "lattice order {order} exceeds d - 1 = {}",
            d - 1
        )));
    }
    let mut forward: Vec<Vec<C64>> = samples.iter().map(|x| x.iter().copied().collect()).collect();
    let mut backward = forward.clone();
    let energy: f64 = forward.iter().flatten().map(|z| z.norm_sqr()).sum();
    let mut power = energy / (samples.len() * d) as f64;
    let mut mu = Vec::with_capacity(order);
    for m in 1..=order {
        let mut num = C64::new(0.0, 0.0);
        let mut den = 0.0;
        for (f, b) in forward.iter().zip(&backward) {
            for k in m..d {
                num += f[k] * b[k - 1].conj();
                den += f[k].norm_sqr() + b[k - 1].norm_sqr();
            }
        }
        if !(den > 1e-20 * energy) {
            return Err(Error::DegenerateSegment { stage: m });
        }
        let k = clamp_modulus(num * (-2.0 / den));
        for (f, b) in forward.iter_mut().zip(backward.iter_mut()) {
            // Descending so b[k - 1] still holds the previous stage.
            for idx in (m..d).rev() {
                let fo = f[idx];
                let bo = b[idx - 1];
                f[idx] = fo + k * bo;
                b[idx] = bo + k.conj() * fo;
            }
        }
        power *= 1.0 - k.norm_sqr();
        mu.push(k);
    }
    SchurModel::new(power, mu)
}

/// Weighted hyperbolic distance between two coefficient lists,
/// `Σₘ (d − m) atanh²(|(νₘ − μₘ) / (1 − μ̄ₘ νₘ)|)`.
pub fn schur_distance(mu: &[C64], nu: &[C64], dim: usize) -> Result<f64> {
    if mu.len() != nu.len() {
        return Err(Error::DimensionMismatch {
            expected: mu.len(),
            found: nu.len(),
        });
    }
    if mu.len() >= dim.max(1) {
        return Err(Error::invalid("coefficient list longer than d - 1"));
    }
    if mu.iter().chain(nu).any(|z| !(z.norm() < 1.0)) {
        return Err(Error::invalid("reflection coefficients must lie inside the unit disk"));
    }
    Ok(mu
        .iter()
        .zip(nu)
        .enumerate()
        .map(|(idx, (&a, &b))| {
            let weight = (dim - idx - 1) as f64;
            let rho = ((b - a) / (C64::new(1.0, 0.0) - a.conj() * b))
                .norm()
                .min(MAX_REFLECTION);
            weight * rho.atanh().powi(2)
        })
        .sum())
}

/// Burg–Tyler output: the unit-residual-power inverse covariance and the
/// lattice model it was generated from.
#[derive(Debug, Clone)]
pub struct BurgTylerEstimate {
    pub inverse: HermitianPD,
    pub model: SchurModel,
    pub iterations: usize,
    pub history: Vec<f64>,
}

impl BurgTylerEstimate {
    pub fn residual(&self) -> f64 {
        self.history.last().copied().unwrap_or(0.0)
    }

    /// The Toeplitz covariance (unit residual power).
    pub fn covariance(&self) -> Result<Estimate> {
        Ok(Estimate {
            matrix: self.inverse.inverse()?,
            iterations: self.iterations,
            history: self.history.clone(),
        })
    }
}

fn radius_whitened(inverse: &HermitianPD, samples: &SampleSet) -> Result<SampleSet> {
    let columns = samples
        .iter()
        .enumerate()
        .map(|(index, x)| {
            let q = x.dotc(&(inverse.matrix() * x)).re;
            if q > 0.0 {
                Ok(x.unscale(q.sqrt()))
            } else {
                Err(Error::ZeroSample { index })
            }
        })
        .collect::<Result<Vec<CVector>>>()?;
    samples.with_columns(columns)
}

/// One Burg–Tyler map: whiten by the radius under `Trench(1, μ)`, rerun Burg.
fn burg_tyler_step(model: &SchurModel, samples: &SampleSet, order: usize) -> Result<(HermitianPD, SchurModel)> {
    let inverse = trench_inverse(&model.padded(samples.dim()));
    let whitened = radius_whitened(&inverse, samples)?;
    Ok((inverse, burg_multisegment(&whitened, order)?))
}

/// Burg–Tyler: alternates radius whitening under the current Toeplitz shape
/// with a multisegment Burg fit, until successive coefficient lists are
/// within `ctrl.eps` in [`schur_distance`].
///
/// Only the correlation shape is estimated: the returned inverse covariance
/// is `Trench(1, μ̂)`, with the residual power reported by Burg discarded.
pub fn burg_tyler(samples: &SampleSet, ctrl: &IterationControl, order: Option<usize>) -> Result<BurgTylerEstimate> {
    ctrl.validate()?;
    let d = samples.dim();
    if d < 2 {
        return Err(Error::invalid("Burg-Tyler needs d >= 2"));
    }
    let order = order.unwrap_or(d - 1);
    let mut current = SchurModel::white(1.0, order + 1)?;
    let mut history = Vec::new();
    for k in 1..=ctrl.max_iter {
        let (_, fitted) = burg_tyler_step(&current, samples, order)?;
        let change = schur_distance(current.reflection(), fitted.reflection(), d)?;
        history.push(change);
        current = SchurModel::new(1.0, fitted.mu)?;
        if change <= ctrl.eps {
            return Ok(BurgTylerEstimate {
                inverse: trench_inverse(&current.padded(d)),
                model: current,
                iterations: k,
                history,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: ctrl.max_iter,
        residual: history.last().copied().unwrap_or(f64::NAN),
        partial: Some(Box::new(trench_inverse(&current.padded(d)))),
    })
}

/// Fixed-point residual of Burg–Tyler at `model`: distance between `model`
/// and the Burg fit of the data whitened under it.
pub fn burg_tyler_residual(model: &SchurModel, samples: &SampleSet) -> Result<f64> {
    let (_, fitted) = burg_tyler_step(model, samples, model.order())?;
    schur_distance(model.reflection(), fitted.reflection(), samples.dim())
}

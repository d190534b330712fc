use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::detectors::SteeringVector;
use crate::error::{Error, Result};
use crate::hermitian::{CVector, HermitianPD, C64};
use crate::sample::{Field, SampleSet};
use crate::toeplitz::{toeplitz_covariance, SchurModel};

/// Standard circular complex normal vector: real and imaginary parts
/// independent `N(0, ½)`, so `E[z z†] = I`.
pub fn standard_complex_normal<R: Rng + ?Sized>(rng: &mut R, d: usize) -> CVector {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CVector::from_fn(d, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re * s, im * s)
    })
}

/// `n` samples `L z` with `Σ = L L†`.
pub fn gen_circular_gaussian<R: Rng + ?Sized>(sigma: &HermitianPD, n: usize, rng: &mut R) -> Result<SampleSet> {
    gen_compound_gaussian(sigma, &Texture::None, n, rng)
}

/// Real Gaussian samples; `sigma` must have zero imaginary parts.
pub fn gen_real_gaussian<R: Rng + ?Sized>(sigma: &HermitianPD, n: usize, rng: &mut R) -> Result<SampleSet> {
    if sigma.matrix().iter().any(|z| z.im != 0.0) {
        return Err(Error::FieldMismatch("real samples need a real covariance".into()));
    }
    let l = sigma.cholesky();
    let d = sigma.dim();
    let columns = (0..n)
        .map(|_| l * CVector::from_fn(d, |_, _| C64::new(rng.sample(StandardNormal), 0.0)))
        .collect();
    SampleSet::new(Field::Real, columns)
}

/// Law of the per-sample power `τ` of compound-Gaussian noise, all with
/// `E[τ] = 1`.
#[derive(Debug, Clone, PartialEq)]
pub enum Texture {
    /// `τ ≡ 1` (Gaussian noise).
    None,
    /// `τ = (a − 1) / G`, `G ~ Gamma(a, 1)`; needs `a > 1`. Heavy tailed
    /// (Student-t marginals).
    InverseGamma { shape: f64 },
    /// `τ = G / a`, `G ~ Gamma(a, 1)` (K-distributed marginals).
    Gamma { shape: f64 },
}

impl Texture {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Texture::None => Ok(()),
            Texture::InverseGamma { shape } if shape > 1.0 && shape.is_finite() => Ok(()),
            Texture::Gamma { shape } if shape > 0.0 && shape.is_finite() => Ok(()),
            Texture::InverseGamma { shape } => Err(Error::invalid(format!(
                "inverse-gamma texture needs shape > 1 for unit mean, got {shape}"
            ))),
            Texture::Gamma { shape } => Err(Error::invalid(format!("gamma texture needs shape > 0, got {shape}"))),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Texture::None => 1.0,
            Texture::InverseGamma { shape } => {
                let g: f64 = Gamma::new(shape, 1.0).expect("validated shape").sample(rng);
                (shape - 1.0) / g
            }
            Texture::Gamma { shape } => {
                let g: f64 = Gamma::new(shape, 1.0).expect("validated shape").sample(rng);
                g / shape
            }
        }
    }
}

impl FromStr for Texture {
    type Err = Error;

    /// `none`, `inverse-gamma:<shape>` or `gamma:<shape>`.
    fn from_str(s: &str) -> Result<Self> {
        let parse_shape = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| Error::invalid(format!("bad texture shape '{v}'")))
        };
        let texture = match s.split_once(':') {
            None if s == "none" => Texture::None,
            Some(("inverse-gamma", v)) => Texture::InverseGamma { shape: parse_shape(v)? },
            Some(("gamma", v)) => Texture::Gamma { shape: parse_shape(v)? },
            _ => {
                return Err(Error::UnknownName {
                    kind: "texture",
                    name: s.to_string(),
                })
            }
        };
        texture.validate()?;
        Ok(texture)
    }
}

impl std::fmt::Display for Texture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Texture::None => write!(f, "none"),
            Texture::InverseGamma { shape } => write!(f, "inverse-gamma:{shape}"),
            Texture::Gamma { shape } => write!(f, "gamma:{shape}"),
        }
    }
}

/// One compound-Gaussian sample `√τ L z`.
pub fn compound_gaussian_sample<R: Rng + ?Sized>(sigma: &HermitianPD, texture: &Texture, rng: &mut R) -> CVector {
    let tau = texture.sample(rng);
    let mut x = sigma.cholesky() * standard_complex_normal(rng, sigma.dim());
    if tau != 1.0 {
        x.scale_mut(tau.sqrt());
    }
    x
}

/// `n` samples `√τₙ L zₙ` with independent textures.
pub fn gen_compound_gaussian<R: Rng + ?Sized>(
    sigma: &HermitianPD,
    texture: &Texture,
    n: usize,
    rng: &mut R,
) -> Result<SampleSet> {
    texture.validate()?;
    let columns = (0..n).map(|_| compound_gaussian_sample(sigma, texture, rng)).collect();
    SampleSet::new(Field::Complex, columns)
}

/// Target power for a channel of dimension `dim_k`: `10 log₁₀ σ = d_k · SNR`.
/// Single-channel scenarios pass `dim_k = 1`.
pub fn target_variance(snr_db: f64, dim_k: usize) -> f64 {
    10f64.powf(dim_k as f64 * snr_db / 10.0)
}

/// `α s` with `α` circular complex Gaussian of variance [`target_variance`].
pub fn gen_target<R: Rng + ?Sized>(s: &SteeringVector, snr_db: f64, dim_k: usize, rng: &mut R) -> CVector {
    let alpha = standard_complex_normal(rng, 1)[0] * target_variance(snr_db, dim_k).sqrt();
    s.as_vector() * alpha
}

/// Doppler steering vector `sⱼ = exp(2πi f j)`.
pub fn doppler_steering(d: usize, frequency: f64) -> Result<SteeringVector> {
    SteeringVector::new(CVector::from_fn(d, |j, _| {
        C64::from_polar(1.0, std::f64::consts::TAU * frequency * j as f64)
    }))
}

/// Unit-power AR(1) Toeplitz covariance with first reflection coefficient `mu`.
pub fn ar_toeplitz(d: usize, mu: f64) -> Result<HermitianPD> {
    if d < 1 {
        return Err(Error::invalid("dimension must be positive"));
    }
    let mut coeffs = vec![C64::new(0.0, 0.0); d - 1];
    if let Some(first) = coeffs.first_mut() {
        *first = C64::new(mu, 0.0);
    }
    let sigma2 = if d > 1 { 1.0 - mu * mu } else { 1.0 };
    toeplitz_covariance(&SchurModel::new(sigma2, coeffs)?)
}

/// Noise covariance of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub enum Correlation {
    Identity,
    /// Unit-power AR(1), parametrized by its first reflection coefficient.
    ArToeplitz(f64),
    Custom(HermitianPD),
}

impl Correlation {
    pub fn matrix(&self, d: usize) -> Result<HermitianPD> {
        match self {
            Correlation::Identity => Ok(HermitianPD::identity(d)),
            Correlation::ArToeplitz(mu) => {
                if !(mu.abs() < 1.0) {
                    return Err(Error::invalid(format!("AR coefficient must lie in (-1, 1), got {mu}")));
                }
                ar_toeplitz(d, *mu)
            }
            Correlation::Custom(m) if m.dim() == d => Ok(m.clone()),
            Correlation::Custom(m) => Err(Error::DimensionMismatch {
                expected: d,
                found: m.dim(),
            }),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Correlation::Identity => "identity".into(),
            Correlation::ArToeplitz(mu) => format!("ar:{mu}"),
            Correlation::Custom(m) => format!("custom(d={})", m.dim()),
        }
    }
}

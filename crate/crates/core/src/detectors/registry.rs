use crate::error::{Error, Result};
use crate::hermitian::{CVector, HermitianPD};

use super::{glr_cg_geometry, nmf_geometry, nmf_phi_geometry, Geometry, Statistic, SteeringVector};

/// A detection statistic that is a function of the whitened [`Geometry`].
pub trait Detector: Send + Sync {
    fn name(&self) -> &'static str;

    fn evaluate(&self, g: &Geometry) -> Result<Statistic>;

    fn statistic(&self, x: &CVector, s: &SteeringVector, cov: &HermitianPD) -> Result<Statistic> {
        self.evaluate(&Geometry::new(x, s, cov)?)
    }

    /// Mean `w` when the statistic is exactly `w · Exp(1)` under the null
    /// hypothesis for every elliptical noise law with known scatter, so the
    /// threshold can be computed analytically.
    fn null_exponential_mean(&self, dim: usize) -> Option<f64> {
        let _ = dim;
        None
    }
}

pub(crate) struct Nmf;

impl Detector for Nmf {
    fn name(&self) -> &'static str {
        "nmf"
    }

    fn evaluate(&self, g: &Geometry) -> Result<Statistic> {
        nmf_geometry(g)
    }

    fn null_exponential_mean(&self, _dim: usize) -> Option<f64> {
        Some(1.0)
    }
}

struct NmfPhi;

impl Detector for NmfPhi {
    fn name(&self) -> &'static str {
        "nmf-phi"
    }

    fn evaluate(&self, g: &Geometry) -> Result<Statistic> {
        nmf_phi_geometry(g)
    }

    fn null_exponential_mean(&self, dim: usize) -> Option<f64> {
        Some((dim as f64 - 0.5) / (dim as f64 - 1.0))
    }
}

struct GlrCg;

impl Detector for GlrCg {
    fn name(&self) -> &'static str {
        "glr-cg"
    }

    fn evaluate(&self, g: &Geometry) -> Result<Statistic> {
        Ok(Statistic::plain(glr_cg_geometry(g)))
    }
}

struct MatchedFilter;

impl Detector for MatchedFilter {
    fn name(&self) -> &'static str {
        "mf"
    }

    fn evaluate(&self, g: &Geometry) -> Result<Statistic> {
        Ok(Statistic::plain(g.m))
    }
}

static DETECTORS: &[&dyn Detector] = &[&Nmf, &NmfPhi, &GlrCg, &MatchedFilter];

pub fn detector_by_name(name: &str) -> Result<&'static dyn Detector> {
    DETECTORS
        .iter()
        .copied()
        .find(|d| d.name() == name)
        .ok_or_else(|| Error::UnknownName {
            kind: "detector",
            name: name.to_string(),
        })
}

pub fn detector_names() -> Vec<&'static str> {
    DETECTORS.iter().map(|d| d.name()).collect()
}

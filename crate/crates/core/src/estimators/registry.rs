//! Covariance estimators behind a common trait, looked up by name.
//!
//! Names take an optional argument after a colon: `m:t:3` is the M-estimator
//! with the `t:3` radial score, `tyler-of:burg` the normalized Burg estimator.

use crate::error::{Error, Result};
use crate::hermitian::{HermitianPD, Normalization};
use crate::sample::SampleSet;
use crate::toeplitz::{burg_multisegment, burg_tyler, toeplitz_covariance};

use super::{
    cg_cov, m_cov, m_exp_cov, m_of, scm, tyler_fixed_point, tyler_of, Estimate, IterationControl,
    RadialScore,
};

/// A map from a sample set to a Hermitian PD covariance (or scatter) estimate.
pub trait CovarianceEstimator: Send + Sync {
    fn name(&self) -> String;

    fn estimate(&self, samples: &SampleSet) -> Result<Estimate>;
}

impl<F> CovarianceEstimator for F
where
    F: Fn(&SampleSet) -> Result<HermitianPD> + Send + Sync,
{
    fn name(&self) -> String {
        "closure".to_string()
    }

    fn estimate(&self, samples: &SampleSet) -> Result<Estimate> {
        self(samples).map(Estimate::closed_form)
    }
}

struct Scm;

impl CovarianceEstimator for Scm {
    fn name(&self) -> String {
        "scm".into()
    }

    fn estimate(&self, samples: &SampleSet) -> Result<Estimate> {
        scm(samples).map(Estimate::closed_form)
    }
}

struct Tyler(IterationControl);

impl CovarianceEstimator for Tyler {
    fn name(&self) -> String {
        "tyler".into()
    }

    fn estimate(&self, samples: &SampleSet) -> Result<Estimate> {
        tyler_fixed_point(samples, &self.0, Normalization::UnitTraceMean)
    }
}

struct TylerOf {
    inner: Box<dyn CovarianceEstimator>,
    ctrl: IterationControl,
}

impl CovarianceEstimator for TylerOf {
    fn name(&self) -> String {
        format!("tyler-of:{}", self.inner.name())
    }

    fn estimate(&self, samples: &SampleSet) -> Result<Estimate> {
        tyler_of(self.inner.as_ref(), samples, &self.ctrl)
    }
}

/// Plain multisegment Burg followed by the Toeplitz covariance it generates.
struct Burg;

impl CovarianceEstimator for Burg {
    fn name(&self) -> String {
        "burg".into()
    }

    fn estimate(&self, samples: &SampleSet) -> Result<Estimate> {
        let model = burg_multisegment(samples, samples.dim().saturating_sub(1))?;
        toeplitz_covariance(&model).map(Estimate::closed_form)
    }
}

struct BurgTyler(IterationControl);

impl CovarianceEstimator for BurgTyler {
    fn name(&self) -> String {
        "burg-tyler".into()
    }

    fn estimate(&self, samples: &SampleSet) -> Result<Estimate> {
        burg_tyler(samples, &self.0, None)?.covariance()
    }
}

struct CircularGaussian(IterationControl);

impl CovarianceEstimator for CircularGaussian {
    fn name(&self) -> String {
        "cg".into()
    }

    fn estimate(&self, samples: &SampleSet) -> Result<Estimate> {
        cg_cov(samples, &self.0)
    }
}

/// M-estimator for a named radial score; the fixed-point iteration is used
/// when `g' >= 0`, geodesic shooting otherwise. The score is built per call
/// because it may depend on the sample dimension.
struct MEstimator {
    score: String,
    ctrl: IterationControl,
}

impl CovarianceEstimator for MEstimator {
    fn name(&self) -> String {
        format!("m:{}", self.score)
    }

    fn estimate(&self, samples: &SampleSet) -> Result<Estimate> {
        let score = RadialScore::by_name(&self.score, samples.dim(), samples.field())?;
        if score.nonneg_derivative() {
            m_cov(&score, samples, &self.ctrl)
        } else {
            m_exp_cov(&score, samples, &self.ctrl)
        }
    }
}

struct MOf {
    score: String,
    inner: Box<dyn CovarianceEstimator>,
    ctrl: IterationControl,
}

impl CovarianceEstimator for MOf {
    fn name(&self) -> String {
        format!("m-of:{}:{}", self.score, self.inner.name())
    }

    fn estimate(&self, samples: &SampleSet) -> Result<Estimate> {
        let score = RadialScore::by_name(&self.score, samples.dim(), samples.field())?;
        m_of(&score, self.inner.as_ref(), samples, &self.ctrl)
    }
}

type Constructor = fn(Option<&str>, IterationControl) -> Result<Box<dyn CovarianceEstimator>>;

struct Entry {
    name: &'static str,
    usage: &'static str,
    construct: Constructor,
}

fn no_arg(name: &str, arg: Option<&str>) -> Result<()> {
    match arg {
        None => Ok(()),
        Some(a) => Err(Error::invalid(format!("estimator '{name}' takes no argument (got '{a}')"))),
    }
}

fn required<'a>(name: &str, arg: Option<&'a str>) -> Result<&'a str> {
    arg.filter(|a| !a.is_empty())
        .ok_or_else(|| Error::invalid(format!("estimator '{name}' needs an argument")))
}

static REGISTRY: &[Entry] = &[
    Entry {
        name: "scm",
        usage: "scm",
        construct: |arg, _| {
            no_arg("scm", arg)?;
            Ok(Box::new(Scm))
        },
    },
    Entry {
        name: "tyler",
        usage: "tyler",
        construct: |arg, ctrl| {
            no_arg("tyler", arg)?;
            Ok(Box::new(Tyler(ctrl)))
        },
    },
    Entry {
        name: "tyler-of",
        usage: "tyler-of:<estimator>",
        construct: |arg, ctrl| {
            let inner = estimator_by_name(required("tyler-of", arg)?, ctrl)?;
            Ok(Box::new(TylerOf { inner, ctrl }))
        },
    },
    Entry {
        name: "burg",
        usage: "burg",
        construct: |arg, _| {
            no_arg("burg", arg)?;
            Ok(Box::new(Burg))
        },
    },
    Entry {
        name: "burg-tyler",
        usage: "burg-tyler",
        construct: |arg, ctrl| {
            no_arg("burg-tyler", arg)?;
            Ok(Box::new(BurgTyler(ctrl)))
        },
    },
    Entry {
        name: "cg",
        usage: "cg",
        construct: |arg, ctrl| {
            no_arg("cg", arg)?;
            Ok(Box::new(CircularGaussian(ctrl)))
        },
    },
    Entry {
        name: "m",
        usage: "m:<score>",
        construct: |arg, ctrl| {
            let score = required("m", arg)?.to_string();
            Ok(Box::new(MEstimator { score, ctrl }))
        },
    },
    Entry {
        name: "m-of",
        usage: "m-of:<score>:<estimator>",
        construct: |arg, ctrl| {
            let arg = required("m-of", arg)?;
            // Scores may themselves contain a colon (`t:3`), so split at the
            // first registered estimator name.
            let (score, inner) = REGISTRY
                .iter()
                .filter_map(|e| {
                    arg.match_indices(':')
                        .map(|(i, _)| (&arg[..i], &arg[i + 1..]))
                        .find(|(_, rest)| rest.split(':').next() == Some(e.name))
                })
                .next()
                .ok_or_else(|| Error::invalid(format!("cannot parse m-of argument '{arg}'")))?;
            let inner = estimator_by_name(inner, ctrl)?;
            Ok(Box::new(MOf {
                score: score.to_string(),
                inner,
                ctrl,
            }))
        },
    },
];

/// Builds an estimator from its registered name (see [`estimator_names`]).
pub fn estimator_by_name(spec: &str, ctrl: IterationControl) -> Result<Box<dyn CovarianceEstimator>> {
    ctrl.validate()?;
    let (name, arg) = match spec.split_once(':') {
        Some((n, a)) => (n, Some(a)),
        None => (spec, None),
    };
    let entry = REGISTRY
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| Error::UnknownName {
            kind: "estimator",
            name: spec.to_string(),
        })?;
    (entry.construct)(arg, ctrl)
}

/// Usage strings of every registered estimator.
pub fn estimator_names() -> Vec<&'static str> {
    REGISTRY.iter().map(|e| e.usage).collect()
}

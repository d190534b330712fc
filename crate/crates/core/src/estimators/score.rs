//! Radial scores `g` of a fixed radial template, and their derivatives.
//!
//! Per sample, the log-likelihood of the scatter matrix `Σ` under a fixed
//! radial template is `-(c_K / 2) (log|Σ| + g(x†Σ⁻¹x))`, so every score below
//! is normalized so that the maximum-likelihood equation reads
//! `Σ = (1/N) Σ g'(x†Σ⁻¹x) x x†`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::sample::Field;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

const FD_TOL: f64 = 1e-5;
const STATIONARY_TOL: f64 = 1e-9;

#[derive(Clone)]
pub struct RadialScore {
    name: String,
    field: Field,
    g: ScalarFn,
    g_prime: ScalarFn,
    stationary_points: Vec<f64>,
    nonneg_derivative: bool,
}

impl fmt::Debug for RadialScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RadialScore")
            .field("name", &self.name)
            .field("field", &self.field)
            .field("stationary_points", &self.stationary_points)
            .field("nonneg_derivative", &self.nonneg_derivative)
            .finish()
    }
}

/// Log-spaced validation grid on `[1e-2, 1e3]`.
fn validation_grid() -> impl Iterator<Item = f64> {
    (0..=50).map(|i| 10f64.powf(-2.0 + 5.0 * i as f64 / 50.0))
}

impl RadialScore {
    /// Builds a score, checking that `g_prime` is the derivative of `g`, that
    /// the listed stationary points are roots of `g_prime`, and that the
    /// `nonneg_derivative` flag is truthful on the validation grid.
    ///
    /// Only `g' >= 0` and internal consistency are enforced; the further
    /// existence conditions for M-estimators are the caller's responsibility.
    pub fn new(
        name: impl Into<String>,
        field: Field,
        g: ScalarFn,
        g_prime: ScalarFn,
        mut stationary_points: Vec<f64>,
        nonneg_derivative: bool,
    ) -> Result<Self> {
        let name = name.into();
        for t in validation_grid() {
            let h = 1e-5 * t;
            let fd = (g(t + h) - g(t - h)) / (2.0 * h);
            let exact = g_prime(t);
            if !(fd - exact).is_finite() || (fd - exact).abs() > FD_TOL * exact.abs().max(1.0) {
                return Err(Error::InvalidScore(format!(
                    "{name}: g' disagrees with the finite difference of g at t = {t} ({exact} vs {fd})"
                )));
            }
            if nonneg_derivative && exact < 0.0 {
                return Err(Error::InvalidScore(format!(
                    "{name}: declared g' >= 0 but g'({t}) = {exact}"
                )));
            }
        }
        stationary_points.sort_by(f64::total_cmp);
        for &s in &stationary_points {
            if !(s > 0.0) || g_prime(s).abs() > STATIONARY_TOL {
                return Err(Error::InvalidScore(format!(
                    "{name}: {s} is not a stationary point of g"
                )));
            }
        }
        Ok(RadialScore {
            name,
            field,
            g,
            g_prime,
            stationary_points,
            nonneg_derivative,
        })
    }

    /// Real or complex Gaussian: `g(t) = t`, `g' = 1`.
    pub fn gaussian(field: Field) -> Self {
        RadialScore::new(
            "gaussian",
            field,
            Arc::new(|t| t),
            Arc::new(|_| 1.0),
            vec![],
            true,
        )
        .expect("gaussian score is consistent")
    }

    /// Circular complex Gaussian with the phase symmetry of each sample taken
    /// into account: `g(t) = t - ½ log t`, `g'(t) = 1 - 1/(2t)`.
    pub fn circular_gaussian() -> Self {
        RadialScore::new(
            "cg",
            Field::Complex,
            Arc::new(|t| t - 0.5 * t.ln()),
            Arc::new(|t| 1.0 - 0.5 / t),
            vec![0.5],
            false,
        )
        .expect("circular gaussian score is consistent")
    }

    /// Multivariate t with `nu` degrees of freedom in dimension `dim`.
    pub fn student_t(nu: f64, dim: usize, field: Field) -> Result<Self> {
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(Error::InvalidScore(format!("t: degrees of freedom must be positive, got {nu}")));
        }
        let d = dim as f64;
        let (g, g_prime): (ScalarFn, ScalarFn) = match field {
            Field::Real => (
                Arc::new(move |t| (d + nu) * (t / nu).ln_1p()),
                Arc::new(move |t| (d + nu) / (nu + t)),
            ),
            Field::Complex => (
                Arc::new(move |t| (d + nu / 2.0) * (2.0 * t / nu).ln_1p()),
                Arc::new(move |t| (2.0 * d + nu) / (nu + 2.0 * t)),
            ),
        };
        RadialScore::new(format!("t:{nu}"), field, g, g_prime, vec![], true)
    }

    /// Looks a score up by name: `gaussian`, `cg`, or `t:<nu>`.
    pub fn by_name(name: &str, dim: usize, field: Field) -> Result<Self> {
        match name.split_once(':') {
            None if name == "gaussian" => Ok(Self::gaussian(field)),
            None if name == "cg" || name == "circular-gaussian" => {
                if field != Field::Complex {
                    return Err(Error::FieldMismatch("the cg score needs complex samples".into()));
                }
                Ok(Self::circular_gaussian())
            }
            Some(("t", nu)) => {
                let nu: f64 = nu
                    .parse()
                    .map_err(|_| Error::InvalidScore(format!("bad degrees of freedom '{nu}'")))?;
                Self::student_t(nu, dim, field)
            }
            _ => Err(Error::UnknownName {
                kind: "radial score",
                name: name.to_string(),
            }),
        }
    }

    pub fn names() -> &'static [&'static str] {
        &["gaussian", "cg", "t:<nu>"]
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn c_k(&self) -> f64 {
        self.field.c_k()
    }

    pub fn g(&self, t: f64) -> f64 {
        (self.g)(t)
    }

    pub fn g_prime(&self, t: f64) -> f64 {
        (self.g_prime)(t)
    }

    pub fn stationary_points(&self) -> &[f64] {
        &self.stationary_points
    }

    pub fn nonneg_derivative(&self) -> bool {
        self.nonneg_derivative
    }
}

//! Hermitian positive-definite matrices and the matrix functions the
//! estimators and detectors are built on.
//!
//! Real data is carried in the same complex storage with zero imaginary
//! parts; only the field tag of a [`SampleSet`](crate::SampleSet) changes the
//! likelihood constants.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Relative Frobenius tolerance for accepting a matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Tolerance on the declared normalization invariant.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Scale convention carried by a [`HermitianPD`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// `det = 1`.
    UnitDet,
    /// `trace / d = 1`.
    UnitTraceMean,
    #[default]
    None,
}

impl std::str::FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "det" | "unit-det" => Ok(Normalization::UnitDet),
            "trace" | "unit-trace" => Ok(Normalization::UnitTraceMean),
            "none" => Ok(Normalization::None),
            other => Err(Error::UnknownName {
                kind: "normalization",
                name: other.to_string(),
            }),
        }
    }
}

/// A Hermitian positive-definite matrix together with its Cholesky factor.
///
/// Construction validates Hermitian symmetry and positive definiteness; the
/// stored entries are re-symmetrized so that downstream code sees an exactly
/// Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianPD {
    entries: CMatrix,
    factor: CMatrix,
    normalization: Normalization,
}

impl HermitianPD {
    pub fn new(entries: CMatrix) -> Result<Self> {
        Self::with_normalization(entries, Normalization::None)
    }

    /// Wraps `entries`, checking that the declared normalization holds.
    pub fn with_normalization(entries: CMatrix, normalization: Normalization) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::DimensionMismatch {
                expected: entries.nrows(),
                found: entries.ncols(),
            });
        }
        let deviation = hermitian_deviation(&entries);
        if deviation > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation });
        }
        let entries = symmetrize(&entries);
        let factor = cholesky(&entries)?;
        let out = HermitianPD {
            entries,
            factor,
            normalization,
        };
        out.check_normalization()?;
        Ok(out)
    }

    /// Builds from a matrix that is Hermitian up to rounding, symmetrizing first.
    pub(crate) fn from_hermitian_part(entries: &CMatrix) -> Result<Self> {
        let entries = symmetrize(entries);
        let factor = cholesky(&entries)?;
        Ok(HermitianPD {
            entries,
            factor,
            normalization: Normalization::None,
        })
    }

    pub fn identity(dim: usize) -> Self {
        HermitianPD {
            entries: CMatrix::identity(dim, dim),
            factor: CMatrix::identity(dim, dim),
            normalization: Normalization::UnitDet,
        }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Result<Self> {
        let d = DVector::from_iterator(diag.len(), diag.iter().map(|&v| C64::new(v, 0.0)));
        Self::new(CMatrix::from_diagonal(&d))
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        let m = CMatrix::from_fn(n, n, |i, j| C64::new(rows[i][j], 0.0));
        Self::new(m)
    }

    fn check_normalization(&self) -> Result<()> {
        let d = self.dim() as f64;
        let bad = match self.normalization {
            Normalization::UnitDet => (self.log_det().exp() - 1.0).abs() > NORMALIZATION_TOL,
            Normalization::UnitTraceMean => (self.trace() / d - 1.0).abs() > NORMALIZATION_TOL,
            Normalization::None => false,
        };
        if bad {
            return Err(Error::invalid(format!(
                "matrix does not satisfy declared normalization {:?}",
                self.normalization
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_matrix(self) -> CMatrix {
        self.entries
    }

    /// Lower-triangular factor `L` with `M = L L†`.
    pub fn cholesky(&self) -> &CMatrix {
        &self.factor
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn trace(&self) -> f64 {
        self.entries.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.factor.diagonal().iter().map(|z| z.re.ln()).sum::<f64>()
    }

    pub fn det(&self) -> f64 {
        self.log_det().exp()
    }

    /// `L⁻¹ x`; the whitened vector satisfies `‖L⁻¹x‖² = x†M⁻¹x`.
    pub fn whiten(&self, x: &CVector) -> Result<CVector> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(solve_lower(&self.factor, x))
    }

    /// `x† M⁻¹ x`.
    pub fn inv_quad_form(&self, x: &CVector) -> Result<f64> {
        Ok(self.whiten(x)?.norm_squared())
    }

    /// `L⁻¹ B L⁻†` for a square `B` of matching size.
    pub fn congruence_inv(&self, b: &CMatrix) -> CMatrix {
        let linv = lower_inverse(&self.factor);
        &linv * b * linv.adjoint()
    }

    /// `M⁻¹ = L⁻† L⁻¹`; only fails if rounding destroys definiteness.
    pub fn inverse(&self) -> Result<HermitianPD> {
        let linv = lower_inverse(&self.factor);
        HermitianPD::from_hermitian_part(&(linv.adjoint() * &linv))
    }

    /// `A M A†`, for invertible `A`.
    pub fn congruence(&self, a: &CMatrix) -> Result<HermitianPD> {
        if a.ncols() != self.dim() || a.nrows() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: a.ncols(),
            });
        }
        HermitianPD::from_hermitian_part(&(a * &self.entries * a.adjoint()))
    }

    pub fn scaled(&self, c: f64) -> Result<HermitianPD> {
        if !(c > 0.0) {
            return Err(Error::invalid("scale factor must be positive"));
        }
        Ok(HermitianPD {
            entries: self.entries.scale(c),
            factor: self.factor.scale(c.sqrt()),
            normalization: Normalization::None,
        })
    }
}

/// `‖M − M†‖_F / ‖M‖_F` (absolute when `M = 0`).
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let diff = (m - m.adjoint()).norm();
    let scale = m.norm();
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// `(M + M†) / 2`.
pub fn symmetrize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Cholesky factorization of a Hermitian matrix; fails on any pivot `<= 0`.
pub fn cholesky(m: &CMatrix) -> Result<CMatrix> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: m.ncols(),
        });
    }
    let mut l = CMatrix::zeros(n, n);
    for j in 0..n {
        let mut pivot = m[(j, j)].re;
        for k in 0..j {
            pivot -= l[(j, k)].norm_sqr();
        }
        if !(pivot > 0.0) || !pivot.is_finite() {
            return Err(Error::NotPositiveDefinite { index: j, pivot });
        }
        let ljj = pivot.sqrt();
        l[(j, j)] = C64::new(ljj, 0.0);
        for i in (j + 1)..n {
            let mut acc = m[(i, j)];
            for k in 0..j {
                acc -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = acc / ljj;
        }
    }
    Ok(l)
}

/// Forward substitution `L y = b` for lower-triangular `L`.
pub(crate) fn solve_lower(l: &CMatrix, b: &CVector) -> CVector {
    let n = l.nrows();
    let mut y = b.clone();
    for i in 0..n {
        let mut acc = y[i];
        for j in 0..i {
            acc -= l[(i, j)] * y[j];
        }
        y[i] = acc / l[(i, i)];
    }
    y
}

pub(crate) fn lower_inverse(l: &CMatrix) -> CMatrix {
    let n = l.nrows();
    let mut inv = CMatrix::zeros(n, n);
    for col in 0..n {
        inv[(col, col)] = C64::new(1.0, 0.0) / l[(col, col)];
        for i in (col + 1)..n {
            let mut acc = C64::new(0.0, 0.0);
            for j in col..i {
                acc -= l[(i, j)] * inv[(j, col)];
            }
            inv[(i, col)] = acc / l[(i, i)];
        }
    }
    inv
}

/// `x† M⁻¹ x`, where `m` is the matrix whose inverse defines the metric.
pub fn quad_form(m: &HermitianPD, x: &CVector) -> Result<f64> {
    m.inv_quad_form(x)
}

/// Eigendecomposition of a Hermitian matrix: real eigenvalues and unitary
/// eigenvectors (columns).
pub fn eigh(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = SymmetricEigen::new(symmetrize(m));
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

/// `V f(Λ) V†`, re-symmetrized.
pub fn spectral_map(m: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let (values, vectors) = eigh(m);
    let mut scaled = vectors.clone();
    for (j, &lambda) in values.iter().enumerate() {
        let fl = f(lambda);
        scaled.column_mut(j).scale_mut(fl);
    }
    symmetrize(&(scaled * vectors.adjoint()))
}

fn require_hermitian(m: &CMatrix) -> Result<()> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    let deviation = hermitian_deviation(m);
    if deviation > 1e-10 {
        return Err(Error::NotHermitian { deviation });
    }
    Ok(())
}

/// Unique positive-definite square root.
pub fn matrix_sqrt(m: &HermitianPD) -> Result<HermitianPD> {
    HermitianPD::from_hermitian_part(&spectral_map(m.matrix(), |l| l.max(0.0).sqrt()))
}

/// Principal logarithm of a PD matrix (Hermitian, not necessarily PD).
pub fn matrix_log(m: &HermitianPD) -> CMatrix {
    spectral_map(m.matrix(), f64::ln)
}

/// Exponential of a Hermitian matrix, which is always PD.
pub fn matrix_exp(m: &CMatrix) -> Result<HermitianPD> {
    require_hermitian(m)?;
    HermitianPD::from_hermitian_part(&spectral_map(m, f64::exp))
}

/// Squared affine-invariant distance `tr(log²(R1⁻¹ R2))`.
pub fn geodesic_dist2(r1: &HermitianPD, r2: &HermitianPD) -> Result<f64> {
    if r1.dim() != r2.dim() {
        return Err(Error::DimensionMismatch {
            expected: r1.dim(),
            found: r2.dim(),
        });
    }
    // R1⁻¹R2 is similar to L1⁻¹ R2 L1⁻†, which is Hermitian PD.
    let (values, _) = eigh(&r1.congruence_inv(r2.matrix()));
    Ok(values.iter().map(|&l| l.ln().powi(2)).sum())
}

/// Rescales `m` to the requested normalization.
pub fn normalize(m: &HermitianPD, mode: Normalization) -> HermitianPD {
    let d = m.dim() as f64;
    let scale = match mode {
        Normalization::UnitDet => (-m.log_det() / d).exp(),
        Normalization::UnitTraceMean => d / m.trace(),
        Normalization::None => 1.0,
    };
    let mut out = m.scaled(scale).expect("normalizing scale is positive");
    out.normalization = mode;
    out
}

/// `tr((A⁻¹B − I)²)`, the stopping criterion of the fixed-point listings.
pub fn relative_change(prev: &HermitianPD, next: &HermitianPD) -> f64 {
    let mut c = prev.congruence_inv(next.matrix());
    for i in 0..c.nrows() {
        c[(i, i)] -= C64::new(1.0, 0.0);
    }
    c.norm_squared()
}

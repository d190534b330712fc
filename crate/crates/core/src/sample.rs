use crate::error::{Error, Result};
use crate::hermitian::{CMatrix, CVector, C64};

/// Scalar field of the observations; fixes the likelihood constant `c_K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Real,
    Complex,
}

impl Field {
    /// `c_K`: 1 for real data, 2 for complex data.
    pub fn c_k(self) -> f64 {
        match self {
            Field::Real => 1.0,
            Field::Complex => 2.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Field::Real => "real",
            Field::Complex => "complex",
        }
    }
}

impl std::str::FromStr for Field {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "real" | "r" => Ok(Field::Real),
            "complex" | "c" => Ok(Field::Complex),
            other => Err(Error::UnknownName {
                kind: "field",
                name: other.to_string(),
            }),
        }
    }
}

/// `N` observations of dimension `d`, none of them zero.
#[derive(Debug, Clone)]
pub struct SampleSet {
    field: Field,
    dim: usize,
    columns: Vec<CVector>,
}

impl SampleSet {
    pub fn new(field: Field, columns: Vec<CVector>) -> Result<Self> {
        let dim = match columns.first() {
            Some(c) => c.len(),
            None => return Err(Error::invalid("sample set is empty")),
        };
        if dim == 0 {
            return Err(Error::invalid("samples must have positive dimension"));
        }
        for (index, col) in columns.iter().enumerate() {
            if col.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: col.len(),
                });
            }
            if col.iter().all(|z| *z == C64::new(0.0, 0.0)) {
                return Err(Error::ZeroSample { index });
            }
            if field == Field::Real && col.iter().any(|z| z.im != 0.0) {
                return Err(Error::FieldMismatch(format!(
                    "sample {index} has a nonzero imaginary part in a real sample set"
                )));
            }
        }
        Ok(SampleSet {
            field,
            dim,
            columns,
        })
    }

    pub fn from_real(rows: &[Vec<f64>]) -> Result<Self> {
        let columns = rows
            .iter()
            .map(|r| CVector::from_iterator(r.len(), r.iter().map(|&v| C64::new(v, 0.0))))
            .collect();
        Self::new(Field::Real, columns)
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn columns(&self) -> &[CVector] {
        &self.columns
    }

    pub fn iter(&self) -> std::slice::Iter<'_, CVector> {
        self.columns.iter()
    }

    pub fn into_columns(self) -> Vec<CVector> {
        self.columns
    }

    /// Multiplies every sample by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<SampleSet> {
        if !(c > 0.0) {
            return Err(Error::invalid("scale factor must be positive"));
        }
        Ok(SampleSet {
            field: self.field,
            dim: self.dim,
            columns: self.columns.iter().map(|x| x.scale(c)).collect(),
        })
    }

    /// Applies `x -> A x` to every sample; `A` must be invertible.
    pub fn transformed(&self, a: &CMatrix) -> Result<SampleSet> {
        if a.ncols() != self.dim || a.nrows() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: a.ncols(),
            });
        }
        let field = if a.iter().any(|z| z.im != 0.0) {
            Field::Complex
        } else {
            self.field
        };
        SampleSet::new(field, self.columns.iter().map(|x| a * x).collect())
    }

    /// Replaces samples, keeping the field tag (used for reweighting).
    pub(crate) fn with_columns(&self, columns: Vec<CVector>) -> Result<SampleSet> {
        SampleSet::new(self.field, columns)
    }
}

impl<'a> IntoIterator for &'a SampleSet {
    type Item = &'a CVector;
    type IntoIter = std::slice::Iter<'a, CVector>;

    fn into_iter(self) -> Self::IntoIter {
        self.columns.iter()
    }
}

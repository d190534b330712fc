//! Plain-text sample and matrix files.
//!
//! Sample file: a header line `d,N,field` (`field` is `real` or `complex`)
//! followed by `N` rows of `d` reals or `2d` interleaved `re,im` values.
//!
//! Matrix file: a header line `d` followed by `d` rows of `2d` interleaved
//! `re,im` values, row-major.
//!
//! Values are written with 17 significant digits, which round-trips every
//! `f64` exactly.

use std::fmt::Write as _;
use std::path::Path;

use ces_core::{CMatrix, CVector, Field, HermitianPD, SampleSet, C64};

/// A parse failure pointing at a 1-based line of the input.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for ParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for ParseError {}

fn err(line: usize, message: impl Into<String>) -> ParseError {
    ParseError {
        line,
        message: message.into(),
    }
}

/// Non-blank lines with their 1-based line numbers.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_row(line: usize, row: &str, width: usize) -> Result<Vec<f64>, ParseError> {
    let values = row
        .split(',')
        .enumerate()
        .map(|(col, v)| {
            v.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| err(line, format!("column {}: '{}' is not a finite number", col + 1, v.trim())))
        })
        .collect::<Result<Vec<f64>, _>>()?;
    if values.len() != width {
        return Err(err(line, format!("expected {width} columns, found {}", values.len())));
    }
    Ok(values)
}

fn interleaved(values: &[f64]) -> CVector {
    CVector::from_iterator(values.len() / 2, values.chunks(2).map(|p| C64::new(p[0], p[1])))
}

fn parse_field(line: usize, s: &str) -> Result<Field, ParseError> {
    match s {
        "real" => Ok(Field::Real),
        "complex" => Ok(Field::Complex),
        other => Err(err(line, format!("field must be 'real' or 'complex', got '{other}'"))),
    }
}

fn parse_count(line: usize, what: &str, s: &str) -> Result<usize, ParseError> {
    s.trim()
        .parse::<usize>()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| err(line, format!("{what} must be a positive integer, got '{}'", s.trim())))
}

/// Raw rows of a sample file, before any sample-set validation.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleFile {
    pub field: Field,
    pub rows: Vec<CVector>,
}

impl SampleFile {
    pub fn parse(text: &str) -> Result<SampleFile, ParseError> {
        let mut it = lines(text);
        let (hl, header) = it.next().ok_or_else(|| err(1, "empty file, expected header 'd,N,field'"))?;
        let parts: Vec<&str> = header.split(',').map(str::trim).collect();
        let [d, n, field] = parts[..] else {
            return Err(err(hl, "header must be 'd,N,field'"));
        };
        let d = parse_count(hl, "d", d)?;
        let n = parse_count(hl, "N", n)?;
        let field = parse_field(hl, field)?;
        let mut rows = Vec::with_capacity(n);
        let mut last = hl;
        for (line, row) in it {
            if rows.len() == n {
                return Err(err(line, format!("more than the {n} rows declared in the header")));
            }
            last = line;
            rows.push(match field {
                Field::Complex => interleaved(&parse_row(line, row, 2 * d)?),
                Field::Real => CVector::from_iterator(d, parse_row(line, row, d)?.into_iter().map(C64::from)),
            });
        }
        if rows.len() != n {
            return Err(err(last, format!("header declares {n} rows, found {}", rows.len())));
        }
        Ok(SampleFile { field, rows })
    }

    pub fn read(path: &Path) -> Result<SampleFile, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        SampleFile::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn dim(&self) -> usize {
        self.rows[0].len()
    }

    pub fn row(&self, index: usize) -> Result<&CVector, String> {
        self.rows
            .get(index)
            .ok_or_else(|| format!("row {index} requested but the file has {} rows", self.rows.len()))
    }

    pub fn into_sample_set(self) -> ces_core::Result<SampleSet> {
        SampleSet::new(self.field, self.rows)
    }

    pub fn render(&self) -> String {
        let mut out = format!("{},{},{}\n", self.dim(), self.rows.len(), self.field.as_str());
        for row in &self.rows {
            let cells: Vec<String> = match self.field {
                Field::Complex => row.iter().flat_map(|z| [num(z.re), num(z.im)]).collect(),
                Field::Real => row.iter().map(|z| num(z.re)).collect(),
            };
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn parse_matrix(text: &str) -> Result<CMatrix, ParseError> {
    let mut it = lines(text);
    let (hl, header) = it.next().ok_or_else(|| err(1, "empty file, expected header 'd'"))?;
    let d = parse_count(hl, "d", header)?;
    let mut m = CMatrix::zeros(d, d);
    let mut count = 0;
    let mut last = hl;
    for (line, row) in it {
        if count == d {
            return Err(err(line, format!("more than the {d} rows declared in the header")));
        }
        last = line;
        let v = interleaved(&parse_row(line, row, 2 * d)?);
        m.set_row(count, &v.transpose());
        count += 1;
    }
    if count != d {
        return Err(err(last, format!("header declares {d} rows, found {count}")));
    }
    Ok(m)
}

pub fn read_matrix(path: &Path) -> Result<HermitianPD, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let m = parse_matrix(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    HermitianPD::new(m).map_err(|e| format!("{}: {e}", path.display()))
}

pub fn render_matrix(m: &CMatrix) -> String {
    let mut out = format!("{}\n", m.nrows());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            let sep = if j == 0 { "" } else { "," };
            write!(out, "{sep}{},{}", num(z.re), num(z.im)).expect("writing to a String");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_real_and_complex_samples() {
        let f = SampleFile::parse("2,2,real\n1,0\n0,2\n").unwrap();
        assert_eq!(f.field, Field::Real);
        assert_eq!(f.rows[1][1], C64::new(2.0, 0.0));
        let f = SampleFile::parse("1,1,complex\n\n 0.5, -1.5 \n").unwrap();
        assert_eq!(f.rows[0][0], C64::new(0.5, -1.5));
    }

    #[test]
    fn reports_line_numbers() {
        let e = SampleFile::parse("2,3,real\n1,0\n0,x\n1,1\n").unwrap_err();
        assert_eq!(e.line, 3);
        assert!(e.message.contains("column 2"), "{}", e.message);
        assert_eq!(SampleFile::parse("2,2,real\n1,0\n1,2,3\n").unwrap_err().line, 3);
        assert_eq!(SampleFile::parse("2,3,real\n1,0\n0,1\n").unwrap_err().line, 3);
        assert_eq!(SampleFile::parse("2,1,real\n1,0\n0,1\n").unwrap_err().line, 3);
        assert_eq!(SampleFile::parse("2,1,quaternion\n1,0\n").unwrap_err().line, 1);
        assert_eq!(SampleFile::parse("2,1,real\n1,nan\n").unwrap_err().line, 2);
        assert_eq!(parse_matrix("2\n1,0,0,0\n").unwrap_err().line, 2);
    }

    #[test]
    fn samples_round_trip() {
        let f = SampleFile {
            field: Field::Complex,
            rows: vec![CVector::from_vec(vec![C64::new(0.1, 1.0 / 3.0), C64::new(-1e-300, 7.0)])],
        };
        assert_eq!(SampleFile::parse(&f.render()).unwrap(), f);
    }

    #[test]
    fn matrices_round_trip_exactly() {
        let m = CMatrix::from_fn(3, 3, |i, j| {
            let v = 1.0 / (1.0 + i as f64 + j as f64);
            C64::new(v + if i == j { 1.0 } else { 0.0 }, (i as f64 - j as f64) / 7.0)
        });
        assert_eq!(parse_matrix(&render_matrix(&m)).unwrap(), m);
    }
}

//! File formats: the matrix JSON document, the factors document, and the CSV
//! fallback for matrix input.
//!
//! Floats are written with serde_json's shortest round-trip formatting, so a
//! matrix survives `matrix → JSON → matrix` bit for bit.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix};

/// `{"n": int, "data": [[[re, im], …], …], "label": str?}`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixDocument {
    pub n: usize,
    pub data: Vec<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl MatrixDocument {
    pub fn from_matrix(m: &CMatrix, label: Option<&str>) -> Self {
        let n = m.n();
        MatrixDocument {
            n,
            data: (0..n)
                .map(|i| (0..n).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
                .collect(),
            label: label.map(str::to_owned),
        }
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        if self.n == 0 {
            return Err(Error::InvalidInput("n must be positive".into()));
        }
        if self.data.len() != self.n || self.data.iter().any(|r| r.len() != self.n) {
            return Err(Error::InvalidInput(format!(
                "data shape does not match n = {}",
                self.n
            )));
        }
        CMatrix::new(DMatrix::from_fn(self.n, self.n, |i, j| {
            c(self.data[i][j][0], self.data[i][j][1])
        }))
        .map_err(|e| Error::InvalidInput(e.to_string()))
    }
}

/// `{"factors": [matrix…], "method": str, "residual": float}`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorsDocument {
    pub factors: Vec<MatrixDocument>,
    #[serde(default)]
    pub method: String,
    #[serde(default)]
    pub residual: f64,
}

impl FactorsDocument {
    pub fn to_matrices(&self) -> Result<Vec<CMatrix>> {
        if self.factors.is_empty() {
            return Err(Error::InvalidInput("factor list is empty".into()));
        }
        self.factors.iter().map(MatrixDocument::to_matrix).collect()
    }
}

/// Reads a matrix from JSON, or from CSV cells such as `1`, `-2.5`, `3i`,
/// `1-0.5i` when the text does not look like JSON.
pub fn parse_matrix(text: &str) -> Result<CMatrix> {
    if text.trim_start().starts_with('{') {
        let doc: MatrixDocument =
            serde_json::from_str(text).map_err(|e| Error::InvalidInput(e.to_string()))?;
        doc.to_matrix()
    } else {
        parse_csv_matrix(text)
    }
}

pub fn parse_factors(text: &str) -> Result<Vec<CMatrix>> {
    let doc: FactorsDocument =
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(e.to_string()))?;
    doc.to_matrices()
}

fn parse_csv_matrix(text: &str) -> Result<CMatrix> {
    let rows: Vec<Vec<Complex64>> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.split(',').map(parse_complex_cell).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    if rows.is_empty() {
        return Err(Error::InvalidInput("no matrix rows".into()));
    }
    CMatrix::from_rows(&rows).map_err(|e| Error::InvalidInput(e.to_string()))
}

/// Parses `a`, `bi`, `a+bi`, `a-bi` (whitespace ignored, `j` accepted for `i`).
pub fn parse_complex_cell(cell: &str) -> Result<Complex64> {
    let s: String = cell.chars().filter(|ch| !ch.is_whitespace()).collect();
    let bad = || Error::InvalidInput(format!("cannot parse complex number `{cell}`"));
    if s.is_empty() {
        return Err(bad());
    }
    let num = |t: &str| t.parse::<f64>().map_err(|_| bad());
    let Some(body) = s.strip_suffix('i').or_else(|| s.strip_suffix('j')) else {
        return Ok(c(num(&s)?, 0.0));
    };
    // Split at the last sign that is not part of an exponent.
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(k) => (num(&body[..k])?, &body[k..]),
        None => (0.0, body),
    };
    let im = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        t => num(t)?,
    };
    Ok(c(re, im))
}

pub(crate) mod complex_serde {
    use num_complex::Complex64;
    use serde::ser::SerializeSeq;
    use serde::Serializer;

    pub fn one<S: Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        serde::Serialize::serialize(&[z.re, z.im], s)
    }

    pub fn option<S: Serializer>(z: &Option<Complex64>, s: S) -> Result<S::Ok, S::Error> {
        match z {
            Some(z) => one(z, s),
            None => s.serialize_none(),
        }
    }

    pub fn many<S: Serializer>(zs: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(zs.len()))?;
        for z in zs {
            seq.serialize_element(&[z.re, z.im])?;
        }
        seq.end()
    }
}

//! JSON exchange format for pencils and matrices.
//!
//! ```json
//! {"n": 2, "field": "complex", "A": [[1, [0, 1]], [0, 2]], "B": [[0, 0], [0, 1]]}
//! ```
//!
//! Entries are numbers or `[re, im]` pairs; rows are row-major.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{NspError, Result};
use crate::linalg::{c64, CMat};
use crate::pencil::{Field, Pencil};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum JsonScalar {
    Real(f64),
    Complex([f64; 2]),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PencilJson {
    pub n: usize,
    pub field: Field,
    #[serde(rename = "A")]
    pub a: Vec<Vec<JsonScalar>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<JsonScalar>>,
}

pub fn matrix_to_rows(m: &CMat, field: Field) -> Vec<Vec<JsonScalar>> {
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| {
                    let z = m[(i, j)];
                    if field.is_real() {
                        JsonScalar::Real(z.re)
                    } else {
                        JsonScalar::Complex([z.re, z.im])
                    }
                })
                .collect()
        })
        .collect()
}

pub fn matrix_from_rows(rows: &[Vec<JsonScalar>], n: usize, name: &str) -> Result<CMat> {
    if rows.len() != n {
        return Err(NspError::Parse(format!("{name} has {} rows, expected {n}", rows.len())));
    }
    let mut m = CMat::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(NspError::Parse(format!(
                "{name} row {i} has {} entries, expected {n}",
                row.len()
            )));
        }
        for (j, entry) in row.iter().enumerate() {
            m[(i, j)] = match *entry {
                JsonScalar::Real(x) => c64(x, 0.0),
                JsonScalar::Complex([re, im]) => c64(re, im),
            };
        }
    }
    Ok(m)
}

impl From<&Pencil> for PencilJson {
    fn from(p: &Pencil) -> PencilJson {
        PencilJson {
            n: p.n(),
            field: p.field(),
            a: matrix_to_rows(p.a(), p.field()),
            b: matrix_to_rows(p.b(), p.field()),
        }
    }
}

impl TryFrom<PencilJson> for Pencil {
    type Error = NspError;

    fn try_from(j: PencilJson) -> Result<Pencil> {
        let a = matrix_from_rows(&j.a, j.n, "A")?;
        let b = matrix_from_rows(&j.b, j.n, "B")?;
        Pencil::new(j.field, a, b)
    }
}

impl Pencil {
    pub fn to_json_value(&self) -> Value {
        serde_json::to_value(PencilJson::from(self)).expect("pencil serializes")
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&PencilJson::from(self)).expect("pencil serializes")
    }

    pub fn from_json_str(s: &str) -> Result<Pencil> {
        let j: PencilJson = serde_json::from_str(s).map_err(|e| NspError::Parse(e.to_string()))?;
        Pencil::try_from(j)
    }
}

/// Matrix as JSON rows of `[re, im]` pairs.
pub fn matrix_to_json(m: &CMat, field: Field) -> Value {
    serde_json::to_value(matrix_to_rows(m, field)).expect("matrix serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_mixed_entries() {
        let s = r#"{"n":2,"field":"complex","A":[[1,[0,1]],[0,2]],"B":[[0,0],[0,1]]}"#;
        let p = Pencil::from_json_str(s).unwrap();
        assert_eq!(p.a()[(0, 1)], c64(0.0, 1.0));
        assert_eq!(p.b()[(1, 1)], c64(1.0, 0.0));
    }

    #[test]
    fn rejects_ragged_rows_and_imaginary_real_input() {
        let ragged = r#"{"n":2,"field":"real","A":[[1,2],[3]],"B":[[0,0],[0,1]]}"#;
        assert!(matches!(Pencil::from_json_str(ragged), Err(NspError::Parse(_))));
        let imag = r#"{"n":1,"field":"real","A":[[[1,1]]],"B":[[0]]}"#;
        assert!(matches!(
            Pencil::from_json_str(imag),
            Err(NspError::NonRealEntry { .. })
        ));
    }

    #[test]
    fn round_trips() {
        for field in [Field::Real, Field::Complex] {
            let p = Pencil::random(4, field, 9).unwrap();
            let back = Pencil::from_json_str(&p.to_json_string()).unwrap();
            assert_eq!(back, p);
        }
    }
}

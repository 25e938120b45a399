use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Where a batch came from: the generator descriptor and its seed.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct Provenance {
    pub generator: String,
    pub seed: u64,
}

/// An `n x d` matrix of observations; rows are i.i.d. draws.
///
/// Stored column-major since every consumer works column by column.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    n: usize,
    d: usize,
    data: Vec<f64>,
    provenance: Option<Provenance>,
}

impl SampleBatch {
    pub fn from_columns(columns: Vec<Vec<f64>>) -> Result<Self> {
        let d = columns.len();
        if d == 0 {
            return Err(Error::Parameter("a batch needs at least one column".into()));
        }
        let n = columns[0].len();
        let mut data = Vec::with_capacity(n * d);
        for col in &columns {
            if col.len() != n {
                return Err(Error::LengthMismatch {
                    left: n,
                    right: col.len(),
                });
            }
            data.extend_from_slice(col);
        }
        Self::from_column_major(n, d, data)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if d == 0 {
            return Err(Error::Parameter("a batch needs at least one column".into()));
        }
        let mut data = alloc::vec![0.0; n * d];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                data[j * n + i] = v;
            }
        }
        Self::from_column_major(n, d, data)
    }

    pub(crate) fn from_column_major(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        debug_assert_eq!(data.len(), n * d);
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Evaluation {
                index: pos % n.max(1),
                context: alloc::format!("non-finite value in column {}", pos / n.max(1)),
            });
        }
        Ok(Self {
            n,
            d,
            data,
            provenance: None,
        })
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = Some(provenance);
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.d).map(|j| self.data[j * self.n + i]).collect()
    }

    /// Each column sorted ascending with a stable sort.
    pub fn sorted_columns(&self) -> Vec<Vec<f64>> {
        (0..self.d)
            .map(|j| {
                let mut c = self.column(j).to_vec();
                c.sort_by(f64::total_cmp);
                c
            })
            .collect()
    }

    /// The first `rows` rows as a new batch (nested prefix).
    pub fn prefix(&self, rows: usize) -> Self {
        let rows = rows.min(self.n);
        let mut data = Vec::with_capacity(rows * self.d);
        for j in 0..self.d {
            data.extend_from_slice(&self.column(j)[..rows]);
        }
        Self {
            n: rows,
            d: self.d,
            data,
            provenance: self.provenance.clone(),
        }
    }

    /// Applies `f(j, value)` to every cell.
    pub fn map_cells<F: Fn(usize, f64) -> f64>(&self, f: F) -> Result<Self> {
        let n = self.n;
        let data = self
            .data
            .iter()
            .enumerate()
            .map(|(p, &v)| f(p / n, v))
            .collect();
        let mut out = Self::from_column_major(n, self.d, data)?;
        out.provenance = self.provenance.clone();
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn rows_and_columns_agree() {
        let b = SampleBatch::from_rows(&[vec![1.0, 4.0], vec![3.0, 2.0], vec![2.0, 9.0]]).unwrap();
        assert_eq!(b.column(0), &[1.0, 3.0, 2.0]);
        assert_eq!(b.row(1), vec![3.0, 2.0]);
        let s = b.sorted_columns();
        assert_eq!(s[0], vec![1.0, 2.0, 3.0]);
        assert_eq!(s[1], vec![2.0, 4.0, 9.0]);
        assert_eq!(b.prefix(2).column(1), &[4.0, 2.0]);
    }

    #[test]
    fn rejects_bad_shapes_and_values() {
        assert!(SampleBatch::from_rows(&[vec![1.0, 2.0], vec![1.0]]).is_err());
        assert!(SampleBatch::from_columns(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(SampleBatch::from_columns(vec![vec![1.0, f64::NAN]]).is_err());
    }
}

//! Row-major sample-by-feature storage.
//!
//! Every pairwise computation in the crate walks whole sample rows, so rows are kept
//! contiguous instead of using a column-major `DMatrix`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Features {
    n: usize,
    dim: usize,
    values: Vec<f64>,
}

impl Features {
    pub fn from_rows(n: usize, dim: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), n * dim, "feature buffer length");
        Features { n, dim, values }
    }

    pub fn from_row_slices<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let dim = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(dim * rows.len());
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), dim, "ragged feature rows");
            values.extend_from_slice(r);
        }
        Features {
            n: rows.len(),
            dim,
            values,
        }
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        let mut values = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            values.extend(m.row(i).iter());
        }
        Features {
            n: m.nrows(),
            dim: m.ncols(),
            values,
        }
    }

    /// Number of samples.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Length of each flattened sample.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.n).map(move |i| self.row(i))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn select(&self, indices: &[usize]) -> Features {
        let mut values = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Features {
            n: indices.len(),
            dim: self.dim,
            values,
        }
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.dim, &self.values)
    }
}

/// Squared Euclidean distance, summed in index order.
#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

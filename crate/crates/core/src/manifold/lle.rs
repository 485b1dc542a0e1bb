//! Locally linear embedding.

use nalgebra::{DMatrix, DVector};

use super::graph::{knn_lists, nearest, require_connected, symmetric_adjacency};
use crate::error::{Error, Result};
use crate::features::Features;
use crate::kernel::{pairwise_sq_distances, query_sq_distances};
use crate::linalg::symmetric_eigen;
use crate::par::map_indices;

/// Gram matrix regularization as a fraction of its trace.
pub const REGULARIZATION: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct LleSpace {
    train: Features,
    neighbors: usize,
    weights: Vec<Vec<(usize, f64)>>,
    coords: DMatrix<f64>,
}

/// Affine weights reconstructing `point` from `neighbor_rows`, summing to one.
///
/// A neighbour at distance zero reconstructs the point exactly, so it takes all the weight.
pub fn reconstruction_weights(point: &[f64], neighbor_rows: &[&[f64]]) -> Vec<f64> {
    let count = neighbor_rows.len();
    if let Some(pos) = neighbor_rows.iter().position(|r| r.iter().zip(point).all(|(a, b)| a == b)) {
        let mut w = vec![0.0; count];
        w[pos] = 1.0;
        return w;
    }
    let diffs: Vec<Vec<f64>> = neighbor_rows
        .iter()
        .map(|r| r.iter().zip(point).map(|(a, b)| a - b).collect())
        .collect();
    let mut gram = DMatrix::from_fn(count, count, |a, b| {
        diffs[a].iter().zip(&diffs[b]).map(|(x, y)| x * y).sum::<f64>()
    });
    let trace = gram.trace();
    let reg = if trace > 0.0 { REGULARIZATION * trace } else { REGULARIZATION };
    for a in 0..count {
        gram[(a, a)] += reg;
    }
    let ones = DVector::from_element(count, 1.0);
    let solved = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&ones),
        None => gram.lu().solve(&ones).unwrap_or_else(|| ones.clone()),
    };
    let total = solved.sum();
    solved.iter().map(|w| w / total).collect()
}

impl LleSpace {
    pub fn fit(train: Features, k: usize, neighbors: usize) -> Result<Self> {
        let n = train.n();
        if neighbors == 0 || neighbors >= n {
            return Err(Error::Config(format!(
                "LLE needs 1 <= neighbors < n, got {neighbors} for {n} samples"
            )));
        }
        if k == 0 || k >= n {
            return Err(Error::DimensionTooLarge { k, n });
        }
        let d = pairwise_sq_distances(&train);
        let lists = knn_lists(&d, neighbors);
        require_connected(&symmetric_adjacency(&lists))?;

        let weights: Vec<Vec<(usize, f64)>> = map_indices(n, |i| {
            let rows: Vec<&[f64]> = lists[i].iter().map(|&j| train.row(j)).collect();
            let w = reconstruction_weights(train.row(i), &rows);
            lists[i].iter().copied().zip(w).collect()
        });

        let mut i_minus_w = DMatrix::<f64>::identity(n, n);
        for (i, ws) in weights.iter().enumerate() {
            for &(j, w) in ws {
                i_minus_w[(i, j)] -= w;
            }
        }
        let m = i_minus_w.transpose() * &i_minus_w;
        let eig = symmetric_eigen(m);
        // bottom k + 1 eigenvectors, smallest (the constant vector) dropped
        let coords = DMatrix::from_fn(n, k, |i, l| eig.vectors[(i, n - 2 - l)]);
        Ok(LleSpace {
            train,
            neighbors,
            weights,
            coords,
        })
    }

    pub fn coords(&self) -> &DMatrix<f64> {
        &self.coords
    }

    /// Per training point, its neighbours and reconstruction weights.
    pub fn weights(&self) -> &[Vec<(usize, f64)>] {
        &self.weights
    }

    pub fn train(&self) -> &Features {
        &self.train
    }

    pub fn extend_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.train.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.train.dim(),
                found: row.len(),
            });
        }
        let d = query_sq_distances(row, &self.train);
        let nbrs = nearest(&d, self.neighbors, None);
        let rows: Vec<&[f64]> = nbrs.iter().map(|&j| self.train.row(j)).collect();
        let w = reconstruction_weights(row, &rows);
        let k = self.coords.ncols();
        let mut out = vec![0.0; k];
        for (&j, wj) in nbrs.iter().zip(&w) {
            for (l, o) in out.iter_mut().enumerate() {
                *o += wj * self.coords[(j, l)];
            }
        }
        Ok(out)
    }
}

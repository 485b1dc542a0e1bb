//! Isomap: classical MDS on k-NN graph geodesics, with landmark-MDS extension.

use nalgebra::DMatrix;

use super::graph::{all_pairs_geodesic, knn_lists, nearest, require_connected, symmetric_adjacency};
use crate::error::{Error, Result};
use crate::features::Features;
use crate::kernel::{pairwise_sq_distances, query_sq_distances};
use crate::linalg::{double_center, symmetric_eigen};

/// Components whose MDS eigenvalue is not above this carry no coordinate.
pub const MIN_MDS_EIGENVALUE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct IsomapSpace {
    train: Features,
    neighbors: usize,
    geodesic: DMatrix<f64>,
    mean_sq_geodesic: Vec<f64>,
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
    coords: DMatrix<f64>,
}

impl IsomapSpace {
    pub fn fit(train: Features, k: usize, neighbors: usize) -> Result<Self> {
        let n = train.n();
        if neighbors == 0 || neighbors >= n {
            return Err(Error::Config(format!(
                "Isomap needs 1 <= neighbors < n, got {neighbors} for {n} samples"
            )));
        }
        if k == 0 || k >= n {
            return Err(Error::DimensionTooLarge { k, n });
        }
        let d = pairwise_sq_distances(&train);
        let adj = symmetric_adjacency(&knn_lists(&d, neighbors));
        require_connected(&adj)?;
        let weighted: Vec<Vec<(usize, f64)>> = adj
            .iter()
            .enumerate()
            .map(|(i, nbrs)| nbrs.iter().map(|&j| (j, d[(i, j)].sqrt())).collect())
            .collect();
        let geodesic = all_pairs_geodesic(&weighted);

        let sq = geodesic.map(|g| g * g);
        let mean_sq_geodesic: Vec<f64> = (0..n).map(|j| sq.column(j).sum() / n as f64).collect();
        let b = double_center(&sq) * -0.5;
        let eig = symmetric_eigen(b);
        let eigenvalues: Vec<f64> = eig.values[..k].to_vec();
        let eigenvectors = eig.vectors.columns(0, k).into_owned();
        let coords = DMatrix::from_fn(n, k, |i, l| eigenvalues[l].max(0.0).sqrt() * eigenvectors[(i, l)]);
        Ok(IsomapSpace {
            train,
            neighbors,
            geodesic,
            mean_sq_geodesic,
            eigenvalues,
            eigenvectors,
            coords,
        })
    }

    pub fn coords(&self) -> &DMatrix<f64> {
        &self.coords
    }

    pub fn geodesic(&self) -> &DMatrix<f64> {
        &self.geodesic
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Geodesic distances from a query through its nearest training points.
    pub fn query_geodesic(&self, row: &[f64]) -> Vec<f64> {
        let d = query_sq_distances(row, &self.train);
        let nbrs = nearest(&d, self.neighbors, None);
        let n = self.train.n();
        (0..n)
            .map(|j| {
                nbrs.iter()
                    .map(|&i| d[i].sqrt() + self.geodesic[(i, j)])
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    pub fn extend_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.train.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.train.dim(),
                found: row.len(),
            });
        }
        let g = self.query_geodesic(row);
        let k = self.eigenvalues.len();
        Ok((0..k)
            .map(|l| {
                let lambda = self.eigenvalues[l];
                if lambda <= MIN_MDS_EIGENVALUE {
                    return 0.0;
                }
                let s: f64 = g
                    .iter()
                    .enumerate()
                    .map(|(j, gj)| self.eigenvectors[(j, l)] * (self.mean_sq_geodesic[j] - gj * gj))
                    .sum();
                0.5 * s / lambda.sqrt()
            })
            .collect())
    }
}

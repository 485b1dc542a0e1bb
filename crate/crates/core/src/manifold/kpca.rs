//! Gaussian kernel PCA.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::features::Features;
use crate::kernel::{build_kernel, pairwise_sq_distances, query_sq_distances, KernelConfig};
use crate::linalg::{double_center, symmetric_eigen};
use crate::nystrom::MIN_EIGENVALUE;

#[derive(Debug, Clone, PartialEq)]
pub struct KpcaSpace {
    train: Features,
    config: KernelConfig,
    column_means: Vec<f64>,
    grand_mean: f64,
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
    coords: DMatrix<f64>,
}

impl KpcaSpace {
    pub fn fit(train: Features, k: usize, alpha: f64) -> Result<Self> {
        let n = train.n();
        if k == 0 || k >= n {
            return Err(Error::DimensionTooLarge { k, n });
        }
        let config = KernelConfig::new(alpha, 1)?;
        let kern = build_kernel(&pairwise_sq_distances(&train), config);
        let kv = kern.values();
        let column_means: Vec<f64> = (0..n).map(|j| kv.column(j).sum() / n as f64).collect();
        let grand_mean = column_means.iter().sum::<f64>() / n as f64;
        let eig = symmetric_eigen(double_center(kv));
        let eigenvalues: Vec<f64> = eig.values[..k].to_vec();
        for (l, &lambda) in eigenvalues.iter().enumerate() {
            if !(lambda > MIN_EIGENVALUE) {
                return Err(Error::SmallEigenvalue { index: l + 1, value: lambda });
            }
        }
        let eigenvectors = eig.vectors.columns(0, k).into_owned();
        let coords = DMatrix::from_fn(n, k, |i, l| eigenvalues[l].sqrt() * eigenvectors[(i, l)]);
        Ok(KpcaSpace {
            train,
            config,
            column_means,
            grand_mean,
            eigenvalues,
            eigenvectors,
            coords,
        })
    }

    pub fn coords(&self) -> &DMatrix<f64> {
        &self.coords
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Projects the centred kernel row of a query onto the training eigenvectors.
    pub fn extend_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.train.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.train.dim(),
                found: row.len(),
            });
        }
        let n = self.train.n();
        let kr: Vec<f64> = query_sq_distances(row, &self.train)
            .into_iter()
            .map(|d| self.config.affinity(d))
            .collect();
        let row_mean = kr.iter().sum::<f64>() / n as f64;
        let centred: Vec<f64> = kr
            .iter()
            .zip(&self.column_means)
            .map(|(k, c)| k - row_mean - c + self.grand_mean)
            .collect();
        Ok((0..self.eigenvalues.len())
            .map(|l| {
                let s: f64 = centred.iter().enumerate().map(|(j, c)| c * self.eigenvectors[(j, l)]).sum();
                s / self.eigenvalues[l].sqrt()
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_points_give_one_symmetric_component() {
        let f = Features::from_row_slices(&[vec![0.0, 1.0], vec![1.0, 3.0]]);
        for alpha in [0.5, 8.0, 100.0] {
            let kp = KpcaSpace::fit(f.clone(), 1, alpha).unwrap();
            let c = (-5.0f64 / alpha).exp();
            assert!((kp.eigenvalues()[0] - (1.0 - c)).abs() < 1e-12);
            let a = kp.coords()[(0, 0)];
            let b = kp.coords()[(1, 0)];
            assert!((a + b).abs() < 1e-12);
            assert!((a.abs() - ((1.0 - c) / 2.0).sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn training_copies_are_exact() {
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.91).cos(), i as f64 * 0.05])
            .collect();
        let f = Features::from_row_slices(&rows);
        let kp = KpcaSpace::fit(f.clone(), 5, 1.0).unwrap();
        for i in 0..20 {
            let y = kp.extend_row(f.row(i)).unwrap();
            for l in 0..5 {
                assert!((y[l] - kp.coords()[(i, l)]).abs() < 1e-10);
            }
        }
    }
}

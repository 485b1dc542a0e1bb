//! Diffusion coordinates from the spectrum of the Markov matrix.
//!
//! `P = D^-1 K` is similar to the symmetric `A = D^-1/2 K D^-1/2`, so the right
//! eigenvectors of `P` are `psi = D^-1/2 v` for the eigenvectors `v` of `A`, with the
//! same (real) eigenvalues. Diffusion time is applied by raising eigenvalues to `t`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernel::MarkovGraph;
use crate::linalg::{fix_sign, order_degenerate_blocks, symmetric_eigen};

/// The `k + 1` leading eigenpairs of `P`, including the trivial pair at index 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBasis {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
    t: u32,
}

impl SpectralBasis {
    pub(crate) fn from_parts(eigenvalues: Vec<f64>, eigenvectors: DMatrix<f64>, t: u32) -> Self {
        assert_eq!(eigenvalues.len(), eigenvectors.ncols());
        SpectralBasis {
            eigenvalues,
            eigenvectors,
            t,
        }
    }

    /// `lambda_0 >= lambda_1 >= ... >= lambda_k`.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Column `l` is `psi_l`, unit 2-norm.
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn k(&self) -> usize {
        self.eigenvalues.len() - 1
    }

    pub fn n(&self) -> usize {
        self.eigenvectors.nrows()
    }

    pub fn t(&self) -> u32 {
        self.t
    }

    /// `lambda_l^t`, the weight of coordinate `l`.
    pub fn scale(&self, l: usize) -> f64 {
        self.eigenvalues[l].powi(self.t as i32)
    }
}

/// Top `k + 1` eigenpairs of the graph's one-step transition matrix.
pub fn decompose(graph: &MarkovGraph, k: usize) -> Result<SpectralBasis> {
    let n = graph.n();
    if k == 0 || k >= n {
        return Err(Error::DimensionTooLarge { k, n });
    }
    let kern = graph.kernel().values();
    let root: Vec<f64> = graph.degrees().iter().map(|d| d.sqrt()).collect();
    let sym = DMatrix::from_fn(n, n, |i, j| kern[(i, j)] / (root[i] * root[j]));
    let eig = symmetric_eigen(sym);

    let values: Vec<f64> = eig.values[..=k].to_vec();
    let mut columns: Vec<DVector<f64>> = (0..=k)
        .map(|l| {
            let v = eig.vectors.column(l);
            let mut psi = DVector::from_iterator(n, (0..n).map(|i| v[i] / root[i]));
            fix_sign(&mut psi);
            psi
        })
        .collect();
    order_degenerate_blocks(&values, &mut columns);
    Ok(SpectralBasis {
        eigenvalues: values,
        eigenvectors: DMatrix::from_columns(&columns),
        t: graph.config().t,
    })
}

/// Row `i` is `(lambda_1^t psi_1(i), ..., lambda_k^t psi_k(i))`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingCoords {
    pub coords: DMatrix<f64>,
}

impl EmbeddingCoords {
    pub fn n(&self) -> usize {
        self.coords.nrows()
    }

    pub fn k(&self) -> usize {
        self.coords.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.coords.row(i).iter().copied().collect()
    }
}

pub fn embed(basis: &SpectralBasis) -> EmbeddingCoords {
    let n = basis.n();
    let k = basis.k();
    let coords = DMatrix::from_fn(n, k, |i, l| basis.scale(l + 1) * basis.eigenvectors[(i, l + 1)]);
    EmbeddingCoords { coords }
}

/// Writes `id,coord_1,...,coord_k` with shortest round-trip float formatting.
pub fn write_embedding_csv<S: AsRef<str>>(path: &Path, ids: &[S], coords: &DMatrix<f64>) -> Result<()> {
    if ids.len() != coords.nrows() {
        return Err(Error::LengthMismatch {
            left: ids.len(),
            right: coords.nrows(),
        });
    }
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["id".to_string()];
    header.extend((1..=coords.ncols()).map(|l| format!("coord_{l}")));
    w.write_record(&header)?;
    for (i, id) in ids.iter().enumerate() {
        let mut rec = vec![id.as_ref().to_string()];
        rec.extend(coords.row(i).iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{build_markov, KernelConfig, KernelMatrix};
    use approx::assert_abs_diff_eq;

    fn two_point(t: u32) -> MarkovGraph {
        let k = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        build_markov(KernelMatrix::from_values(k, KernelConfig::new(8.0, t).unwrap()).unwrap())
    }

    #[test]
    fn two_point_spectrum() {
        let basis = decompose(&two_point(1), 1).unwrap();
        assert_abs_diff_eq!(basis.eigenvalues()[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(basis.eigenvalues()[1], 1.0 / 3.0, epsilon = 1e-12);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        // equal degrees, so psi_1 is (1, -1)/sqrt(2); tie on magnitude goes to the first entry
        assert_abs_diff_eq!(basis.eigenvectors()[(0, 1)], h, epsilon = 1e-12);
        assert_abs_diff_eq!(basis.eigenvectors()[(1, 1)], -h, epsilon = 1e-12);
        let coords = embed(&basis);
        assert_eq!(coords.k(), 1);
        assert_abs_diff_eq!(coords.coords[(0, 0)], h / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(coords.coords[(1, 0)], -h / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn time_step_scales_coordinates() {
        let one = embed(&decompose(&two_point(1), 1).unwrap());
        let two = embed(&decompose(&two_point(2), 1).unwrap());
        assert_abs_diff_eq!(two.coords[(0, 0)], one.coords[(0, 0)] / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn dimension_bounds() {
        let g = two_point(1);
        assert!(matches!(decompose(&g, 2), Err(Error::DimensionTooLarge { k: 2, n: 2 })));
        assert!(decompose(&g, 0).is_err());
    }

    #[test]
    fn csv_export() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.csv");
        let coords = DMatrix::from_row_slice(2, 2, &[0.5, -1.0, 0.25, 2.0]);
        write_embedding_csv(&path, &["a", "b"], &coords).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert_eq!(text, "id,coord_1,coord_2\na,0.5,-1\nb,0.25,2\n");
    }
}

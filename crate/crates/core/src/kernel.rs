//! Gaussian kernel graph over standardized samples and its Markov transition matrix.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{sq_dist, Features};
use crate::par::map_indices;

/// Kernel scale and diffusion time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub alpha: f64,
    pub t: u32,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig { alpha: 8.0, t: 1 }
    }
}

impl KernelConfig {
    pub fn new(alpha: f64, t: u32) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be positive, got {alpha}")));
        }
        if t == 0 {
            return Err(Error::Config("diffusion time t must be at least 1".into()));
        }
        Ok(KernelConfig { alpha, t })
    }

    #[inline]
    pub fn affinity(&self, sq_distance: f64) -> f64 {
        (-sq_distance / self.alpha).exp()
    }
}

/// Symmetric matrix of squared Euclidean distances between sample rows.
///
/// Each entry is summed in feature order, exactly as [`sq_dist`] does for a single
/// query, so a training sample presented again as a query sees identical distances.
pub fn pairwise_sq_distances(features: &Features) -> DMatrix<f64> {
    let n = features.n();
    let upper: Vec<Vec<f64>> = map_indices(n, |i| {
        let xi = features.row(i);
        ((i + 1)..n).map(|j| sq_dist(xi, features.row(j))).collect()
    });
    let mut d = DMatrix::zeros(n, n);
    for (i, row) in upper.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            let j = i + 1 + off;
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}

/// Squared distances from one query row to every training row.
pub fn query_sq_distances(query: &[f64], train: &Features) -> Vec<f64> {
    train.rows().map(|row| sq_dist(query, row)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    values: DMatrix<f64>,
    config: KernelConfig,
}

impl KernelMatrix {
    /// Wraps a precomputed kernel, checking symmetry, unit diagonal and the (0, 1] range.
    pub fn from_values(values: DMatrix<f64>, config: KernelConfig) -> Result<Self> {
        let n = values.nrows();
        if values.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: values.ncols(),
            });
        }
        for i in 0..n {
            if values[(i, i)] != 1.0 {
                return Err(Error::Config(format!("kernel diagonal at {i} is not 1")));
            }
            for j in 0..i {
                let v = values[(i, j)];
                if v != values[(j, i)] || !(v > 0.0 && v <= 1.0) {
                    return Err(Error::Config(format!(
                        "kernel entry ({i}, {j}) is not symmetric or not in (0, 1]"
                    )));
                }
            }
        }
        Ok(KernelMatrix { values, config })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn config(&self) -> KernelConfig {
        self.config
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }
}

/// `K_ij = exp(-d_ij / alpha)`.
pub fn build_kernel(sq_dists: &DMatrix<f64>, config: KernelConfig) -> KernelMatrix {
    let values = sq_dists.map(|d| config.affinity(d));
    KernelMatrix { values, config }
}

/// Row-normalized kernel `P = D^-1 K`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovGraph {
    kernel: KernelMatrix,
    degrees: DVector<f64>,
    step: DMatrix<f64>,
    powered: Option<DMatrix<f64>>,
}

pub fn build_markov(kernel: KernelMatrix) -> MarkovGraph {
    let n = kernel.n();
    let k = &kernel.values;
    let degrees = DVector::from_iterator(n, (0..n).map(|i| row_sum(k, i)));
    let mut step = k.clone();
    for i in 0..n {
        let d = degrees[i];
        for j in 0..n {
            step[(i, j)] = k[(i, j)] / d;
        }
    }
    let powered = (kernel.config.t > 1).then(|| matrix_power(&step, kernel.config.t));
    MarkovGraph {
        kernel,
        degrees,
        step,
        powered,
    }
}

// Summed in column order; the out-of-sample row sum must match this order.
fn row_sum(m: &DMatrix<f64>, i: usize) -> f64 {
    (0..m.ncols()).map(|j| m[(i, j)]).sum()
}

/// `m^power` by repeated squaring.
pub fn matrix_power(m: &DMatrix<f64>, power: u32) -> DMatrix<f64> {
    assert!(power >= 1);
    let mut result: Option<DMatrix<f64>> = None;
    let mut base = m.clone();
    let mut e = power;
    loop {
        if e & 1 == 1 {
            result = Some(match result {
                None => base.clone(),
                Some(r) => &r * &base,
            });
        }
        e >>= 1;
        if e == 0 {
            break;
        }
        base = &base * &base;
    }
    result.expect("power >= 1")
}

impl MarkovGraph {
    pub fn kernel(&self) -> &KernelMatrix {
        &self.kernel
    }

    pub fn config(&self) -> KernelConfig {
        self.kernel.config
    }

    pub fn degrees(&self) -> &DVector<f64> {
        &self.degrees
    }

    /// One-step transition matrix `D^-1 K`.
    pub fn step(&self) -> &DMatrix<f64> {
        &self.step
    }

    /// `P^t` for the configured diffusion time.
    pub fn transition(&self) -> &DMatrix<f64> {
        self.powered.as_ref().unwrap_or(&self.step)
    }

    pub fn n(&self) -> usize {
        self.step.nrows()
    }

    /// Euclidean distance between rows `i` and `j` of `P^t`.
    pub fn diffusion_distance(&self, i: usize, j: usize) -> Result<f64> {
        let n = self.n();
        for idx in [i, j] {
            if idx >= n {
                return Err(Error::IndexOutOfRange { index: idx, len: n });
            }
        }
        let p = self.transition();
        let d2: f64 = (0..n)
            .map(|k| {
                let d = p[(i, k)] - p[(j, k)];
                d * d
            })
            .sum();
        Ok(d2.sqrt())
    }

    /// Writes `K` and `P^t` as CSV with 17 significant digits.
    pub fn dump_csv(&self, kernel_path: &Path, transition_path: &Path) -> Result<()> {
        write_matrix_csv(kernel_path, self.kernel.values())?;
        write_matrix_csv(transition_path, self.transition())?;
        Ok(())
    }
}

pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for i in 0..m.nrows() {
        let line = (0..m.ncols())
            .map(|j| format!("{:.16e}", m[(i, j)]))
            .collect::<Vec<_>>()
            .join(",");
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

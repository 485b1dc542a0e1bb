//! Nyström out-of-sample extension into a frozen diffusion-map embedding.
//!
//! A query `x` gets the kernel row `k_j = exp(-|x - x_j|^2 / alpha)` against the
//! training set, is row-normalized to `p = k / sum(k)`, and lands at
//! `psi_l(x) = (1 / lambda_l) sum_j p_j psi_l(j)`, scaled by `lambda_l^t` like the
//! training coordinates. For a training sample `p` is its own row of `P`, so the
//! eigenvector identity reproduces its coordinates.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::io::{read_tensor, write_tensor, Precision};
use crate::data::{Dataset, SampleTensor, Shape};
use crate::error::{Error, Result};
use crate::features::Features;
use crate::kernel::{build_kernel, build_markov, pairwise_sq_distances, query_sq_distances, KernelConfig};
use crate::par::map_indices;
use crate::spectral::{decompose, embed, EmbeddingCoords, SpectralBasis};

/// Eigenvalues at or below this magnitude cannot be divided by safely.
pub const MIN_EIGENVALUE: f64 = 1e-12;

/// Kernel row sums below this mean the query is disconnected from the training set.
pub const MIN_ROW_SUM: f64 = 1e-300;

const SPACE_MAGIC: &[u8; 4] = b"DMSP";
const SPACE_VERSION: u32 = 1;

/// Everything needed to place new samples in a trained embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedSpace {
    ids: Vec<String>,
    shape: Shape,
    train: Features,
    basis: SpectralBasis,
    config: KernelConfig,
    degrees: Vec<f64>,
    coords: EmbeddingCoords,
}

impl TrainedSpace {
    /// Builds the kernel graph on standardized samples and keeps `k` diffusion coordinates.
    pub fn fit(dataset: &Dataset, config: KernelConfig, k: usize) -> Result<Self> {
        let shape = dataset
            .shape()
            .ok_or_else(|| Error::TooFewSamples("cannot train on an empty dataset".into()))?;
        let ids = dataset.ids().into_iter().map(String::from).collect();
        Self::fit_features(ids, shape, dataset.features(), config, k)
    }

    pub fn fit_features(
        ids: Vec<String>,
        shape: Shape,
        train: Features,
        config: KernelConfig,
        k: usize,
    ) -> Result<Self> {
        let graph = build_markov(build_kernel(&pairwise_sq_distances(&train), config));
        let basis = decompose(&graph, k)?;
        let degrees = graph.degrees().iter().copied().collect();
        Self::from_parts(ids, shape, train, basis, config, degrees)
    }

    fn from_parts(
        ids: Vec<String>,
        shape: Shape,
        train: Features,
        basis: SpectralBasis,
        config: KernelConfig,
        degrees: Vec<f64>,
    ) -> Result<Self> {
        if basis.n() != train.n() || degrees.len() != train.n() || ids.len() != train.n() {
            return Err(Error::LengthMismatch {
                left: basis.n(),
                right: train.n(),
            });
        }
        if train.dim() != shape.len() {
            return Err(Error::DimensionMismatch {
                expected: shape.len(),
                found: train.dim(),
            });
        }
        for (l, &lambda) in basis.eigenvalues().iter().enumerate().skip(1) {
            if !(lambda.abs() > MIN_EIGENVALUE) {
                return Err(Error::SmallEigenvalue { index: l, value: lambda });
            }
        }
        let coords = embed(&basis);
        Ok(TrainedSpace {
            ids,
            shape,
            train,
            basis,
            config,
            degrees,
            coords,
        })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn train(&self) -> &Features {
        &self.train
    }

    pub fn basis(&self) -> &SpectralBasis {
        &self.basis
    }

    pub fn config(&self) -> KernelConfig {
        self.config
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    /// Training coordinates, `n x k`.
    pub fn coords(&self) -> &EmbeddingCoords {
        &self.coords
    }

    pub fn n(&self) -> usize {
        self.train.n()
    }

    pub fn k(&self) -> usize {
        self.basis.k()
    }

    /// Extends one standardized flattened sample.
    pub fn extend_row(&self, row: &[f64]) -> Result<ExtensionVector> {
        if row.len() != self.train.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.train.dim(),
                found: row.len(),
            });
        }
        let kernel_row: Vec<f64> = query_sq_distances(row, &self.train)
            .into_iter()
            .map(|d| self.config.affinity(d))
            .collect();
        let row_sum: f64 = kernel_row.iter().sum();
        if !(row_sum >= MIN_ROW_SUM) {
            return Err(Error::NumericalUnderflow(row_sum));
        }
        let p_row: Vec<f64> = kernel_row.iter().map(|v| v / row_sum).collect();
        let psi = self.basis.eigenvectors();
        let coords = (1..=self.k())
            .map(|l| {
                let lambda = self.basis.eigenvalues()[l];
                let sum: f64 = p_row.iter().enumerate().map(|(j, p)| p * psi[(j, l)]).sum();
                self.basis.scale(l) * sum / lambda
            })
            .collect();
        Ok(ExtensionVector {
            kernel_row,
            row_sum,
            p_row,
            coords,
        })
    }

    /// Extends a standardized sample of the training shape.
    pub fn extend(&self, sample: &SampleTensor) -> Result<ExtensionVector> {
        if sample.shape() != self.shape {
            return Err(Error::ShapeMismatch {
                expected: self.shape.dims().to_vec(),
                found: sample.shape().dims().to_vec(),
                context: Some(format!("sample `{}`", sample.id)),
            });
        }
        self.extend_row(sample.data())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let header = SpaceHeader {
            format: "dmap-trained-space".into(),
            version: SPACE_VERSION,
            alpha: self.config.alpha,
            t: self.config.t,
            k: self.k(),
            n: self.n(),
            m: self.train.dim(),
            shape: self.shape.dims(),
            ids: self.ids.clone(),
        };
        let header = serde_json::to_vec(&header)?;
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(SPACE_MAGIC)?;
        w.write_all(&SPACE_VERSION.to_le_bytes())?;
        w.write_all(&(header.len() as u32).to_le_bytes())?;
        w.write_all(&header)?;
        let (n, m, k1) = (self.n(), self.train.dim(), self.k() + 1);
        write_tensor(&mut w, &[n, m], self.train.as_slice(), Precision::F64)?;
        write_tensor(&mut w, &[k1], self.basis.eigenvalues(), Precision::F64)?;
        let psi = self.basis.eigenvectors();
        let psi_rows: Vec<f64> = (0..n).flat_map(|i| (0..k1).map(move |l| psi[(i, l)])).collect();
        write_tensor(&mut w, &[n, k1], &psi_rows, Precision::F64)?;
        write_tensor(&mut w, &[n], &self.degrees, Precision::F64)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bad = |reason: String| Error::TensorParse {
            path: path.to_path_buf(),
            reason,
        };
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|e| bad(e.to_string()))?;
        if &magic != SPACE_MAGIC {
            return Err(Error::VersionMismatch(format!(
                "{} is not a trained-space file",
                path.display()
            )));
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word).map_err(|e| bad(e.to_string()))?;
        let version = u32::from_le_bytes(word);
        if version != SPACE_VERSION {
            return Err(Error::VersionMismatch(format!(
                "trained-space version {version}, this build reads {SPACE_VERSION}"
            )));
        }
        r.read_exact(&mut word).map_err(|e| bad(e.to_string()))?;
        let mut header = vec![0u8; u32::from_le_bytes(word) as usize];
        r.read_exact(&mut header).map_err(|e| bad(e.to_string()))?;
        let header: SpaceHeader = serde_json::from_slice(&header)?;
        if header.version != SPACE_VERSION {
            return Err(Error::VersionMismatch(format!("header version {}", header.version)));
        }
        let (n, m, k1) = (header.n, header.m, header.k + 1);
        let mut block = |dims: &[usize]| -> Result<Vec<f64>> {
            let (found, data) = read_tensor(&mut r).map_err(bad)?;
            if found != dims {
                return Err(bad(format!("block extents {found:?}, expected {dims:?}")));
            }
            Ok(data)
        };
        let train = Features::from_rows(n, m, block(&[n, m])?);
        let eigenvalues = block(&[k1])?;
        let psi_rows = block(&[n, k1])?;
        let degrees = block(&[n])?;
        let eigenvectors = DMatrix::from_row_slice(n, k1, &psi_rows);
        let config = KernelConfig::new(header.alpha, header.t)?;
        let basis = SpectralBasis::from_parts(eigenvalues, eigenvectors, header.t);
        let shape = Shape::from_dims(&header.shape)?;
        Self::from_parts(header.ids, shape, train, basis, config, degrees)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SpaceHeader {
    format: String,
    version: u32,
    alpha: f64,
    t: u32,
    k: usize,
    n: usize,
    m: usize,
    shape: [usize; 4],
    ids: Vec<String>,
}

/// Intermediate quantities of one extension.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtensionVector {
    pub kernel_row: Vec<f64>,
    pub row_sum: f64,
    pub p_row: Vec<f64>,
    pub coords: Vec<f64>,
}

/// Extends every sample of a standardized dataset, preserving order.
pub fn batch_extend(space: &TrainedSpace, samples: &Dataset) -> Result<DMatrix<f64>> {
    let rows = map_indices(samples.len(), |i| {
        let s = &samples.samples()[i];
        space.extend(s).map_err(|e| e.for_sample(&s.id))
    });
    let mut out = DMatrix::zeros(samples.len(), space.k());
    for (i, ext) in rows.into_iter().enumerate() {
        let ext = ext?;
        for (l, v) in ext.coords.iter().enumerate() {
            out[(i, l)] = *v;
        }
    }
    Ok(out)
}

/// Frobenius norm between extended coordinates of `samples` and their coordinates when
/// the whole augmented set is decomposed again.
///
/// Each recomputed column is first matched to the original embedding on the training rows
/// by a least-squares scale factor. That absorbs the sign ambiguity and the change in unit
/// normalization caused by adding rows, so a perfect extension scores zero.
pub fn embedding_distortion(space: &TrainedSpace, samples: &Dataset) -> Result<f64> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    let extended = batch_extend(space, samples)?;
    let n = space.n();
    let mut rows: Vec<&[f64]> = space.train.rows().collect();
    rows.extend(samples.samples().iter().map(|s| s.data()));
    let augmented = Features::from_row_slices(&rows);
    let graph = build_markov(build_kernel(&pairwise_sq_distances(&augmented), space.config));
    let recomputed = embed(&decompose(&graph, space.k())?);

    let old = &space.coords.coords;
    let new = &recomputed.coords;
    let mut total = 0.0;
    for l in 0..space.k() {
        let cross: f64 = (0..n).map(|i| old[(i, l)] * new[(i, l)]).sum();
        let norm: f64 = (0..n).map(|i| new[(i, l)] * new[(i, l)]).sum();
        let scale = if norm > 0.0 { cross / norm } else { 0.0 };
        for q in 0..samples.len() {
            let d = extended[(q, l)] - scale * new[(n + q, l)];
            total += d * d;
        }
    }
    Ok(total.sqrt())
}

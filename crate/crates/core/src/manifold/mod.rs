//! Common train/extend interface over diffusion maps and the comparison embedders.

pub mod graph;
pub mod isomap;
pub mod kpca;
pub mod lle;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Shape};
use crate::error::{Error, Result};
use crate::features::Features;
use crate::kernel::KernelConfig;
use crate::nystrom::TrainedSpace;
use crate::par::map_indices;

pub use isomap::IsomapSpace;
pub use kpca::KpcaSpace;
pub use lle::LleSpace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dm,
    Lle,
    Isomap,
    Kpca,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Dm, Method::Lle, Method::Isomap, Method::Kpca];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Dm => "dm",
            Method::Lle => "lle",
            Method::Isomap => "isomap",
            Method::Kpca => "kpca",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dm" | "diffusion" => Ok(Method::Dm),
            "lle" => Ok(Method::Lle),
            "isomap" => Ok(Method::Isomap),
            "kpca" | "kernel-pca" => Ok(Method::Kpca),
            other => Err(Error::Config(format!("unknown embedding method `{other}`"))),
        }
    }
}

/// Which embedder to fit and with what parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbedderSpec {
    pub method: Method,
    pub k: usize,
    pub neighbors: usize,
    pub alpha: f64,
    pub t: u32,
}

impl Default for EmbedderSpec {
    fn default() -> Self {
        EmbedderSpec {
            method: Method::Dm,
            k: 200,
            neighbors: 10,
            alpha: 8.0,
            t: 1,
        }
    }
}

impl EmbedderSpec {
    pub fn with_method(self, method: Method) -> Self {
        EmbedderSpec { method, ..self }
    }
}

/// A fitted LLE, Isomap or kernel PCA embedding.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainedAltSpace {
    Lle(LleSpace),
    Isomap(IsomapSpace),
    Kpca(KpcaSpace),
}

impl TrainedAltSpace {
    pub fn coords(&self) -> &DMatrix<f64> {
        match self {
            TrainedAltSpace::Lle(s) => s.coords(),
            TrainedAltSpace::Isomap(s) => s.coords(),
            TrainedAltSpace::Kpca(s) => s.coords(),
        }
    }

    pub fn extend_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        match self {
            TrainedAltSpace::Lle(s) => s.extend_row(row),
            TrainedAltSpace::Isomap(s) => s.extend_row(row),
            TrainedAltSpace::Kpca(s) => s.extend_row(row),
        }
    }
}

/// Fits one of the comparison embedders on standardized, flattened samples.
pub fn fit_alt(spec: &EmbedderSpec, train: Features) -> Result<TrainedAltSpace> {
    Ok(match spec.method {
        Method::Lle => TrainedAltSpace::Lle(LleSpace::fit(train, spec.k, spec.neighbors)?),
        Method::Isomap => TrainedAltSpace::Isomap(IsomapSpace::fit(train, spec.k, spec.neighbors)?),
        Method::Kpca => TrainedAltSpace::Kpca(KpcaSpace::fit(train, spec.k, spec.alpha)?),
        Method::Dm => {
            return Err(Error::Config(
                "diffusion maps are fitted through TrainedSpace".into(),
            ))
        }
    })
}

/// Any fitted embedder behind one interface.
#[derive(Debug, Clone, PartialEq)]
pub enum FittedEmbedder {
    Diffusion(TrainedSpace),
    Alt(TrainedAltSpace),
}

impl FittedEmbedder {
    pub fn coords(&self) -> &DMatrix<f64> {
        match self {
            FittedEmbedder::Diffusion(s) => &s.coords().coords,
            FittedEmbedder::Alt(s) => s.coords(),
        }
    }

    pub fn extend_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        match self {
            FittedEmbedder::Diffusion(s) => s.extend_row(row).map(|e| e.coords),
            FittedEmbedder::Alt(s) => s.extend_row(row),
        }
    }

    /// Extends every standardized sample, preserving order.
    pub fn extend_dataset(&self, samples: &Dataset) -> Result<DMatrix<f64>> {
        let rows = map_indices(samples.len(), |i| {
            let s = &samples.samples()[i];
            self.extend_row(s.data()).map_err(|e| e.for_sample(&s.id))
        });
        let k = self.coords().ncols();
        let mut out = DMatrix::zeros(samples.len(), k);
        for (i, r) in rows.into_iter().enumerate() {
            for (l, v) in r?.into_iter().enumerate() {
                out[(i, l)] = v;
            }
        }
        Ok(out)
    }
}

/// Fits the embedder named by `spec` on a standardized dataset.
pub fn fit(spec: &EmbedderSpec, dataset: &Dataset) -> Result<FittedEmbedder> {
    let shape: Shape = dataset
        .shape()
        .ok_or_else(|| Error::TooFewSamples("cannot fit an embedding on no samples".into()))?;
    match spec.method {
        Method::Dm => {
            let config = KernelConfig::new(spec.alpha, spec.t)?;
            let ids = dataset.ids().into_iter().map(String::from).collect();
            Ok(FittedEmbedder::Diffusion(TrainedSpace::fit_features(
                ids,
                shape,
                dataset.features(),
                config,
                spec.k,
            )?))
        }
        _ => Ok(FittedEmbedder::Alt(fit_alt(spec, dataset.features())?)),
    }
}

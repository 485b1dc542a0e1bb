//! Diffusion-map embedding of image tensors, Nyström extension of unseen samples,
//! comparison manifold embedders, linear classifiers and a 25-combination
//! cross-validation ensemble with per-subject voting.

pub mod classify;
pub mod data;
pub mod ensemble;
pub mod error;
pub mod features;
pub mod kernel;
pub mod linalg;
pub mod manifold;
pub mod nystrom;
mod par;
pub mod spectral;

pub use error::{Error, Result};

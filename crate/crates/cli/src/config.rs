use std::path::{Path, PathBuf};

use clap::Args;
use dmap_core::classify::ClassifierKind;
use dmap_core::ensemble::{TestSelection, DEFAULT_THRESHOLD};
use dmap_core::manifold::{EmbedderSpec, Method};
use serde::Deserialize;

use crate::CliError;

pub const DEFAULT_TEST_FRACTION: f64 = 0.2;

/// Model and experiment settings shared by `crossval` and `train`.
/// Any flag left unset falls back to the JSON config file, then to the built-in default.
#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    /// JSON file with any of the settings below
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Embedding method: dm, lle, isomap or kpca
    #[arg(long)]
    pub method: Option<String>,
    /// Classifier: lda or logistic
    #[arg(long)]
    pub classifier: Option<String>,
    /// Embedding dimension
    #[arg(long)]
    pub k: Option<usize>,
    /// Gaussian kernel scale
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Diffusion time
    #[arg(long)]
    pub t: Option<u32>,
    /// Neighbourhood size for LLE and Isomap
    #[arg(long)]
    pub neighbors: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Vote proportion above which a subject is called abnormal
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub method: Option<String>,
    pub classifier: Option<String>,
    pub k: Option<usize>,
    pub alpha: Option<f64>,
    pub t: Option<u32>,
    pub neighbors: Option<usize>,
    pub seed: Option<u64>,
    pub threshold: Option<f64>,
    pub test_fraction: Option<f64>,
    pub test_count: Option<usize>,
    pub compare: Option<String>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(ConfigFile::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub spec: EmbedderSpec,
    pub classifier: ClassifierKind,
    pub seed: u64,
    pub threshold: f64,
}

fn usage<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Usage(e.to_string())
}

pub fn parse_method(s: &str) -> Result<Method, CliError> {
    s.parse().map_err(usage)
}

impl RunConfig {
    pub fn resolve(args: &ModelArgs, file: &ConfigFile) -> Result<Self, CliError> {
        let defaults = EmbedderSpec::default();
        let method = match args.method.as_deref().or(file.method.as_deref()) {
            Some(m) => parse_method(m)?,
            None => defaults.method,
        };
        let classifier = match args.classifier.as_deref().or(file.classifier.as_deref()) {
            Some(c) => c.parse().map_err(usage)?,
            None => ClassifierKind::Lda,
        };
        let spec = EmbedderSpec {
            method,
            k: args.k.or(file.k).unwrap_or(defaults.k),
            neighbors: args.neighbors.or(file.neighbors).unwrap_or(defaults.neighbors),
            alpha: args.alpha.or(file.alpha).unwrap_or(defaults.alpha),
            t: args.t.or(file.t).unwrap_or(defaults.t),
        };
        let config = RunConfig {
            spec,
            classifier,
            seed: args.seed.or(file.seed).unwrap_or(0),
            threshold: args.threshold.or(file.threshold).unwrap_or(DEFAULT_THRESHOLD),
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), CliError> {
        let s = &self.spec;
        if s.k == 0 {
            return Err(usage("--k must be at least 1"));
        }
        if s.neighbors == 0 {
            return Err(usage("--neighbors must be at least 1"));
        }
        if !(s.alpha > 0.0 && s.alpha.is_finite()) {
            return Err(usage(format!("--alpha must be positive, got {}", s.alpha)));
        }
        if s.t == 0 {
            return Err(usage("--t must be at least 1"));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(usage(format!("--threshold must lie in (0, 1), got {}", self.threshold)));
        }
        Ok(())
    }
}

/// Resolves the held-out test set from flags and config, defaulting to a stratified 20%.
pub fn resolve_test(
    count: Option<usize>,
    fraction: Option<f64>,
    ids_file: Option<&Path>,
    file: &ConfigFile,
) -> Result<TestSelection, CliError> {
    if let Some(path) = ids_file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
        let ids = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect();
        return Ok(TestSelection::Ids(ids));
    }
    if let Some(c) = count {
        return Ok(TestSelection::Count(c));
    }
    let fraction = match fraction {
        Some(f) => f,
        None => match file.test_count {
            Some(c) => return Ok(TestSelection::Count(c)),
            None => file.test_fraction.unwrap_or(DEFAULT_TEST_FRACTION),
        },
    };
    if !(0.0..1.0).contains(&fraction) {
        return Err(usage(format!("--test-fraction must lie in [0, 1), got {fraction}")));
    }
    Ok(TestSelection::Fraction(fraction))
}

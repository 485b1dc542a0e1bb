use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Features;

/// Threshold below which a sample's standard deviation counts as zero.
pub const MIN_SDEV: f64 = 1e-12;

/// Tensor extent as (slices, height, width, channels).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub slices: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl Shape {
    pub fn new(slices: usize, height: usize, width: usize, channels: usize) -> Result<Self> {
        let shape = Shape {
            slices,
            height,
            width,
            channels,
        };
        if shape.dims().iter().any(|&d| d == 0) {
            return Err(Error::InvalidShape {
                dims: shape.dims().to_vec(),
                reason: "every dimension must be at least 1".into(),
            });
        }
        Ok(shape)
    }

    /// Interprets 2-d `(h, w)`, 3-d `(s, h, w)` and 4-d `(s, h, w, c)` extents.
    pub fn from_dims(dims: &[usize]) -> Result<Self> {
        match *dims {
            [h, w] => Shape::new(1, h, w, 1),
            [s, h, w] => Shape::new(s, h, w, 1),
            [s, h, w, c] => Shape::new(s, h, w, c),
            _ => Err(Error::InvalidShape {
                dims: dims.to_vec(),
                reason: "expected 2, 3 or 4 dimensions".into(),
            }),
        }
    }

    pub fn dims(&self) -> [usize; 4] {
        [self.slices, self.height, self.width, self.channels]
    }

    pub fn len(&self) -> usize {
        self.slices * self.height * self.width * self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}x{}x{}x{}",
            self.slices, self.height, self.width, self.channels
        )
    }
}

impl std::str::FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let dims = s
            .split(['x', 'X', ','])
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::InvalidShape {
                dims: vec![],
                reason: format!("cannot parse `{s}`: {e}"),
            })?;
        Shape::from_dims(&dims)
    }
}

/// Binary class tag: 0 is normal, 1 is abnormal.
pub type Label = u8;

/// One subject's image stack, stored row-major in (slice, row, column, channel) order.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleTensor {
    pub id: String,
    shape: Shape,
    data: Vec<f64>,
    pub label: Option<Label>,
    pub age: Option<f64>,
}

impl SampleTensor {
    pub fn new(id: impl Into<String>, shape: Shape, data: Vec<f64>) -> Result<Self> {
        let id = id.into();
        if data.len() != shape.len() {
            return Err(Error::InvalidShape {
                dims: shape.dims().to_vec(),
                reason: format!("{} elements for sample `{id}`", data.len()),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { id });
        }
        Ok(SampleTensor {
            id,
            shape,
            data,
            label: None,
            age: None,
        })
    }

    pub fn with_label(mut self, label: Option<Label>) -> Self {
        self.label = label;
        self
    }

    pub fn with_age(mut self, age: Option<f64>) -> Self {
        self.age = age;
        self
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Per-sample grand mean and standard deviation used for z-scoring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub mean: f64,
    pub sdev: f64,
}

impl NormalizationStats {
    /// Mean over all elements; standard deviation with the `len - 1` denominator.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        if n < 2 {
            return NormalizationStats { mean, sdev: 0.0 };
        }
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        NormalizationStats {
            mean,
            sdev: (ss / (n - 1) as f64).sqrt(),
        }
    }
}

/// Z-scores a whole sample tensor with its own statistics. All slices share one mean and deviation.
pub fn standardize(sample: &SampleTensor) -> Result<(SampleTensor, NormalizationStats)> {
    if sample.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            id: sample.id.clone(),
        });
    }
    let stats = NormalizationStats::of(&sample.data);
    if !(stats.sdev >= MIN_SDEV) {
        return Err(Error::DegenerateSample {
            id: sample.id.clone(),
        });
    }
    let data = sample
        .data
        .iter()
        .map(|v| (v - stats.mean) / stats.sdev)
        .collect();
    let out = SampleTensor {
        id: sample.id.clone(),
        shape: sample.shape,
        data,
        label: sample.label,
        age: sample.age,
    };
    Ok((out, stats))
}

/// An ordered collection of equally shaped samples with unique ids.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    samples: Vec<SampleTensor>,
}

impl Dataset {
    pub fn new(samples: Vec<SampleTensor>) -> Result<Self> {
        if let Some(first) = samples.first() {
            let shape = first.shape;
            let mut seen = HashSet::with_capacity(samples.len());
            for s in &samples {
                if s.shape != shape {
                    return Err(Error::ShapeMismatch {
                        expected: shape.dims().to_vec(),
                        found: s.shape.dims().to_vec(),
                        context: Some(format!("sample `{}`", s.id)),
                    });
                }
                if !seen.insert(s.id.as_str()) {
                    return Err(Error::DuplicateId(s.id.clone()));
                }
            }
        }
        Ok(Dataset { samples })
    }

    pub fn empty() -> Self {
        Dataset::default()
    }

    pub fn samples(&self) -> &[SampleTensor] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<SampleTensor> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn shape(&self) -> Option<Shape> {
        self.samples.first().map(|s| s.shape)
    }

    pub fn get(&self, index: usize) -> Option<&SampleTensor> {
        self.samples.get(index)
    }

    /// Count of samples per label; unlabeled samples are not counted.
    pub fn class_counts(&self) -> BTreeMap<Label, usize> {
        let mut counts = BTreeMap::new();
        for s in &self.samples {
            if let Some(l) = s.label {
                *counts.entry(l).or_insert(0) += 1;
            }
        }
        counts
    }

    /// Labels of every sample, failing on the first unlabeled one.
    pub fn labels(&self) -> Result<Vec<Label>> {
        self.samples
            .iter()
            .map(|s| s.label.ok_or_else(|| Error::MissingLabel(s.id.clone())))
            .collect()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.samples.iter().map(|s| s.id.as_str()).collect()
    }

    /// Standardizes every sample independently.
    pub fn standardized(&self) -> Result<Dataset> {
        let samples = self
            .samples
            .iter()
            .map(|s| standardize(s).map(|(t, _)| t))
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset { samples })
    }

    /// Sub-dataset in the order given by `indices`.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
        }
    }

    /// Flattened sample rows, one row per sample.
    pub fn features(&self) -> Features {
        let dim = self.samples.first().map_or(0, |s| s.len());
        let mut values = Vec::with_capacity(dim * self.samples.len());
        for s in &self.samples {
            values.extend_from_slice(&s.data);
        }
        Features::from_rows(self.samples.len(), dim, values)
    }
}

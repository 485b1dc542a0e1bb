//! Synthetic striatum phantoms.
//!
//! Normal subjects show two bright comma-shaped regions mirrored about the vertical
//! midline. Abnormal subjects show shrunken, dimmer circular or oval spots, often with
//! one side weaker than the other. A per-subject severity interpolates between the two
//! looks, and a per-subject noise gain mimics acquisition on different scanners.
//!
//! Each subject draws its geometry and its noise from two separate ChaCha streams, so the
//! noise level never changes the underlying shape.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::tensor::{Dataset, Label, SampleTensor, Shape};
use crate::error::{Error, Result};

const BACKGROUND: f64 = 1.0;
const NORMAL_PEAK: f64 = 10.0;
const ABNORMAL_PEAK: f64 = 6.0;
const TAIL_POINTS: usize = 12;

/// Per-subject multiplier on `noise_sigma`, standing in for scanner-to-scanner variation.
const NOISE_GAIN: (f64, f64) = (0.5, 2.0);

/// Mean ages of the two cohorts, used to draw synthetic ages.
const MEAN_AGE: [f64; 2] = [68.4, 68.2];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhantomConfig {
    pub n_per_class: usize,
    pub shape: Shape,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl PhantomConfig {
    /// 1 slice of 12x12 pixels, one channel.
    pub fn default_shape() -> Shape {
        Shape {
            slices: 1,
            height: 12,
            width: 12,
            channels: 1,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_per_class == 0 {
            return Err(Error::Config("n_per_class must be at least 1".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config(format!(
                "noise_sigma must be a finite non-negative number, got {}",
                self.noise_sigma
            )));
        }
        Ok(())
    }
}

/// Geometry of one hemisphere's bright region.
#[derive(Debug, Clone, Copy)]
struct Lobe {
    head_x: f64,
    head_y: f64,
    length: f64,
    bend: f64,
    width: f64,
    stretch: f64,
    peak: f64,
}

impl Lobe {
    /// Comma: bright head with a tail that curves down and outward while fading.
    /// A zero-length tail collapses to an oval spot.
    fn intensity(&self, side: f64, x: f64, y: f64) -> f64 {
        let mut best: f64 = 0.0;
        for p in 0..TAIL_POINTS {
            let u = p as f64 / (TAIL_POINTS - 1) as f64;
            let cx = side * (self.head_x + self.bend * u * u);
            let cy = self.head_y + self.length * u;
            let a = self.peak * (1.0 - 0.4 * u);
            let dx = (x - cx) / self.stretch;
            let d2 = dx * dx + (y - cy).powi(2);
            best = best.max(a * (-d2 / (2.0 * self.width * self.width)).exp());
        }
        best
    }
}

fn jitter<R: Rng>(rng: &mut R, scale: f64) -> f64 {
    rng.random_range(-scale..=scale)
}

/// Disease severity ranges per class; noise and jitter blur the narrow gap between them.
const SEVERITY: [(f64, f64); 2] = [(0.0, 0.2), (0.35, 1.0)];

/// Draws the geometry of both lobes for one subject.
///
/// Severity 0 is a full comma at normal brightness; severity 1 is a dim, stretched
/// spot with no tail and a markedly weaker side.
fn draw_lobes<R: Rng>(rng: &mut R, label: Label) -> [Lobe; 2] {
    let (lo, hi) = SEVERITY[label as usize];
    let severity = rng.random_range(lo..hi);
    let base_head_x = 0.3 + jitter(rng, 0.03);
    let base_head_y = -0.3 + 0.05 * severity + jitter(rng, 0.04);
    let length = 0.6 * (1.0 - severity) * (1.0 + jitter(rng, 0.08));
    let width = 0.14 * (1.0 - 0.1 * severity) * (1.0 + jitter(rng, 0.08));
    let peak = (NORMAL_PEAK + (ABNORMAL_PEAK - NORMAL_PEAK) * severity) * (1.0 + jitter(rng, 0.08));
    let weak_side = rng.random_range(0..2usize);
    let asymmetry = 1.0 - severity * rng.random_range(0.0..0.3);
    let mut lobes = [Lobe {
        head_x: 0.0,
        head_y: 0.0,
        length: 0.0,
        bend: 0.0,
        width: 0.0,
        stretch: 1.0,
        peak: 0.0,
    }; 2];
    for (side, lobe) in lobes.iter_mut().enumerate() {
        *lobe = Lobe {
            head_x: base_head_x + jitter(rng, 0.015),
            head_y: base_head_y + jitter(rng, 0.015),
            length,
            bend: (0.25 + jitter(rng, 0.03)) * (1.0 - severity),
            width: width * (1.0 + jitter(rng, 0.05)),
            stretch: 1.0 + severity * rng.random_range(0.0..0.3),
            peak: peak * if side == weak_side { asymmetry } else { 1.0 },
        };
    }
    lobes
}

fn render(shape: Shape, lobes: &[Lobe; 2]) -> Vec<f64> {
    let mut out = Vec::with_capacity(shape.len());
    let mid = (shape.slices as f64 - 1.0) / 2.0;
    for s in 0..shape.slices {
        let slice_gain = 1.0 - 0.15 * (s as f64 - mid).abs();
        for r in 0..shape.height {
            let y = -1.0 + 2.0 * (r as f64 + 0.5) / shape.height as f64;
            for c in 0..shape.width {
                let x = -1.0 + 2.0 * (c as f64 + 0.5) / shape.width as f64;
                let mut v: f64 = 0.0;
                for (lobe, side) in lobes.iter().zip([-1.0, 1.0]) {
                    v = v.max(lobe.intensity(side, x, y));
                }
                let v = BACKGROUND + slice_gain * v;
                for ch in 0..shape.channels {
                    out.push(v * (1.0 - 0.2 * ch as f64));
                }
            }
        }
    }
    out
}

fn subject_streams(seed: u64, global_index: usize) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut geometry = ChaCha8Rng::seed_from_u64(seed);
    geometry.set_stream(2 * global_index as u64);
    let mut noise = ChaCha8Rng::seed_from_u64(seed);
    noise.set_stream(2 * global_index as u64 + 1);
    (geometry, noise)
}

/// The additive noise field of subject `index` within `label`'s block, before f32 rounding.
pub fn noise_field(config: &PhantomConfig, label: Label, index: usize) -> Vec<f64> {
    let (_, mut rng) = subject_streams(config.seed, stream_index(label, index));
    draw_noise(&mut rng, config.shape.len(), config.noise_sigma)
}

fn draw_noise(rng: &mut ChaCha8Rng, len: usize, sigma: f64) -> Vec<f64> {
    if sigma == 0.0 {
        return vec![0.0; len];
    }
    let gain = rng.random_range(NOISE_GAIN.0..NOISE_GAIN.1);
    let normal = Normal::new(0.0, sigma * gain).expect("sigma validated");
    (0..len).map(|_| normal.sample(rng)).collect()
}

// Streams never depend on n_per_class, so subject i looks the same in any dataset size.
fn stream_index(label: Label, index: usize) -> usize {
    2 * index + label as usize
}

/// The noise-free image of subject `index` of class `label`.
pub fn clean_phantom(config: &PhantomConfig, label: Label, index: usize) -> Vec<f64> {
    let (mut rng, _) = subject_streams(config.seed, stream_index(label, index));
    let lobes = draw_lobes(&mut rng, label);
    render(config.shape, &lobes)
}

/// Subject `index` of class `label`, exactly as it appears in any generated dataset that
/// contains it. Indices past `n_per_class` give fresh subjects from the same population.
pub fn phantom_subject(config: &PhantomConfig, label: Label, index: usize) -> Result<SampleTensor> {
    config.validate()?;
    if label > 1 {
        return Err(Error::Config(format!("label {label} is not binary")));
    }
    let (mut geometry, mut noise_rng) = subject_streams(config.seed, stream_index(label, index));
    let lobes = draw_lobes(&mut geometry, label);
    let age_dist = Normal::new(MEAN_AGE[label as usize], 8.0).expect("positive sdev");
    let age = (age_dist.sample(&mut geometry) * 10.0).round() / 10.0;
    let clean = render(config.shape, &lobes);
    let noise = draw_noise(&mut noise_rng, clean.len(), config.noise_sigma);
    let data = clean
        .iter()
        .zip(&noise)
        .map(|(c, n)| (c + n) as f32 as f64)
        .collect();
    let prefix = if label == 0 { "n" } else { "a" };
    Ok(SampleTensor::new(format!("{prefix}{index:04}"), config.shape, data)?
        .with_label(Some(label))
        .with_age(Some(age)))
}

/// Generates `n_per_class` normal subjects followed by `n_per_class` abnormal subjects.
pub fn generate_phantoms(config: &PhantomConfig) -> Result<Dataset> {
    config.validate()?;
    let mut samples = Vec::with_capacity(2 * config.n_per_class);
    for label in [0, 1] {
        for i in 0..config.n_per_class {
            samples.push(phantom_subject(config, label, i)?);
        }
    }
    Dataset::new(samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(noise: f64) -> PhantomConfig {
        PhantomConfig {
            n_per_class: 1,
            shape: PhantomConfig::default_shape(),
            noise_sigma: noise,
            seed: 42,
        }
    }

    fn above_half_max(values: &[f64]) -> usize {
        let max = values.iter().cloned().fold(f64::MIN, f64::max);
        values.iter().filter(|&&v| v > max / 2.0).count()
    }

    #[test]
    fn normal_has_larger_bright_area() {
        let ds = generate_phantoms(&config(0.0)).unwrap();
        let normal = above_half_max(ds.samples()[0].data());
        let abnormal = above_half_max(ds.samples()[1].data());
        assert!(normal > abnormal, "{normal} vs {abnormal}");
        assert_eq!(ds.samples()[0].label, Some(0));
        assert_eq!(ds.samples()[1].label, Some(1));
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_phantoms(&config(0.3)).unwrap();
        let b = generate_phantoms(&config(0.3)).unwrap();
        assert_eq!(a, b);
        let mut other = config(0.3);
        other.seed = 43;
        assert_ne!(a, generate_phantoms(&other).unwrap());
    }

    #[test]
    fn noise_only_changes_the_noise_field() {
        let clean = generate_phantoms(&config(0.0)).unwrap();
        let noisy_cfg = config(0.5);
        let noisy = generate_phantoms(&noisy_cfg).unwrap();
        for (i, (c, n)) in clean.samples().iter().zip(noisy.samples()).enumerate() {
            let label = c.label.unwrap();
            let index = if label == 0 { i } else { i - noisy_cfg.n_per_class };
            let field = noise_field(&noisy_cfg, label, index);
            for ((cv, nv), f) in c.data().iter().zip(n.data()).zip(&field) {
                // both sides were rounded to f32 once
                assert!((nv - cv - f).abs() < 1e-5, "{nv} - {cv} != {f}");
            }
            assert_eq!(c.age, n.age);
        }
    }

    #[test]
    fn larger_datasets_extend_smaller_ones() {
        let small = generate_phantoms(&config(0.3)).unwrap();
        let mut cfg = config(0.3);
        cfg.n_per_class = 3;
        let big = generate_phantoms(&cfg).unwrap();
        assert_eq!(small.samples()[0], big.samples()[0]);
        assert_eq!(small.samples()[1], big.samples()[3]);
    }

    #[test]
    fn multi_slice_multi_channel_shapes() {
        let mut cfg = config(0.1);
        cfg.shape = Shape::new(3, 10, 8, 3).unwrap();
        let ds = generate_phantoms(&cfg).unwrap();
        assert_eq!(ds.samples()[0].len(), 3 * 10 * 8 * 3);
    }

    #[test]
    fn rejects_bad_arguments() {
        let mut cfg = config(0.1);
        cfg.n_per_class = 0;
        assert!(generate_phantoms(&cfg).is_err());
        let mut cfg = config(-1.0);
        cfg.n_per_class = 1;
        assert!(generate_phantoms(&cfg).is_err());
    }
}

//! WebAssembly bindings for the browser demo.
//!
//! [`Explorer`] holds the plain-Rust logic so it can be tested natively; the
//! `#[wasm_bindgen]` types are thin wrappers that turn errors into JS exceptions.

use dmap_core::data::{generate_phantoms, phantom_subject, standardize, Dataset, Label, PhantomConfig};
use dmap_core::kernel::KernelConfig;
use dmap_core::nystrom::TrainedSpace;
use wasm_bindgen::prelude::*;

/// Side length of the square phantoms shown in the demo.
pub const SIDE: usize = 12;

fn config(n_per_class: usize, noise: f64, seed: u32) -> PhantomConfig {
    PhantomConfig {
        n_per_class: n_per_class.max(1),
        shape: PhantomConfig::default_shape(),
        noise_sigma: noise,
        seed: seed as u64,
    }
}

/// Raw pixels of one phantom, row-major, `SIDE * SIDE` values.
pub fn phantom_pixels(label: Label, index: usize, noise: f64, seed: u32) -> Result<Vec<f64>, String> {
    phantom_subject(&config(1, noise, seed), label, index)
        .map(|s| s.data().to_vec())
        .map_err(|e| e.to_string())
}

/// A diffusion-map embedding of a phantom cohort plus what is needed to place new subjects.
pub struct Explorer {
    config: PhantomConfig,
    space: TrainedSpace,
    labels: Vec<Label>,
}

impl Explorer {
    pub fn new(n_per_class: usize, noise: f64, alpha: f64, k: usize, seed: u32) -> Result<Self, String> {
        let run = || -> dmap_core::Result<Self> {
            let config = config(n_per_class, noise, seed);
            let ds: Dataset = generate_phantoms(&config)?;
            let labels = ds.labels()?;
            let space = TrainedSpace::fit(&ds.standardized()?, KernelConfig::new(alpha, 1)?, k)?;
            Ok(Explorer { config, space, labels })
        };
        run().map_err(|e| e.to_string())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// First two diffusion coordinates of every training subject, interleaved `x0, y0, x1, ...`.
    /// With `k = 1` the second coordinate is zero.
    pub fn scatter(&self) -> Vec<f64> {
        let c = &self.space.coords().coords;
        (0..c.nrows())
            .flat_map(|i| [c[(i, 0)], if c.ncols() > 1 { c[(i, 1)] } else { 0.0 }])
            .collect()
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    /// Non-trivial eigenvalues, largest first.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.space.basis().eigenvalues()[1..].to_vec()
    }

    /// Pixels of training subject `i` (normals first, then abnormals).
    pub fn training_image(&self, i: usize) -> Result<Vec<f64>, String> {
        let n = self.config.n_per_class;
        if i >= 2 * n {
            return Err(format!("subject {i} out of range"));
        }
        let (label, index) = if i < n { (0, i) } else { (1, i - n) };
        phantom_pixels(label, index, self.config.noise_sigma, self.config.seed as u32)
    }

    /// Draws a subject that is not in the training set and places it by Nyström extension.
    /// Returns `[x, y]` followed by the subject's pixels.
    pub fn place_new(&self, label: Label, nth: usize) -> Result<Vec<f64>, String> {
        let index = self.config.n_per_class + nth;
        let run = || -> dmap_core::Result<Vec<f64>> {
            let subject = phantom_subject(&self.config, label, index)?;
            let (z, _) = standardize(&subject)?;
            let ext = self.space.extend(&z)?;
            let y = ext.coords.get(1).copied().unwrap_or(0.0);
            let mut out = vec![ext.coords[0], y];
            out.extend_from_slice(subject.data());
            Ok(out)
        };
        run().map_err(|e| e.to_string())
    }
}

fn js_err(msg: String) -> JsValue {
    JsValue::from_str(&msg)
}

/// Pixels of one phantom for the viewer.
#[wasm_bindgen(js_name = phantomImage)]
pub fn phantom_image(label: u8, index: u32, noise: f64, seed: u32) -> Result<Vec<f64>, JsValue> {
    phantom_pixels(label, index as usize, noise, seed).map_err(js_err)
}

#[wasm_bindgen(js_name = Embedding)]
pub struct JsEmbedding {
    inner: Explorer,
}

#[wasm_bindgen(js_class = Embedding)]
impl JsEmbedding {
    #[wasm_bindgen(constructor)]
    pub fn new(n_per_class: u32, noise: f64, alpha: f64, k: u32, seed: u32) -> Result<JsEmbedding, JsValue> {
        Explorer::new(n_per_class as usize, noise, alpha, k as usize, seed)
            .map(|inner| JsEmbedding { inner })
            .map_err(js_err)
    }

    pub fn scatter(&self) -> Vec<f64> {
        self.inner.scatter()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.inner.labels().to_vec()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.inner.eigenvalues()
    }

    #[wasm_bindgen(js_name = trainingImage)]
    pub fn training_image(&self, i: u32) -> Result<Vec<f64>, JsValue> {
        self.inner.training_image(i as usize).map_err(js_err)
    }

    #[wasm_bindgen(js_name = placeNew)]
    pub fn place_new(&self, label: u8, nth: u32) -> Result<Vec<f64>, JsValue> {
        self.inner.place_new(label, nth as usize).map_err(js_err)
    }
}

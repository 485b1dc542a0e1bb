//! Sample tensors, datasets, file formats and synthetic phantoms.

pub mod io;
pub mod phantom;
pub mod tensor;

pub use io::{load_dataset, save_dataset};
pub use phantom::{generate_phantoms, phantom_subject, PhantomConfig};
pub use tensor::{standardize, Dataset, Label, NormalizationStats, SampleTensor, Shape};

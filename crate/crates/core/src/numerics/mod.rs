//! Seeded randomness, dense linear algebra, datasets and synthetic generators.

mod dataset;
mod matrix;
mod rng;
mod synth;

pub use dataset::{load_csv, prepare, standardize, write_csv, Dataset, LabelColumn, StandardizeParams};
pub use matrix::{axpy, dot, norm, squared_distance, Matrix};
pub use rng::{derive_seed, RngStream};
pub use synth::{synth_anomaly, synth_blobs};

pub mod audio;
pub mod classifiers;
pub mod dataset;
pub mod embeddings;
pub mod eval;
pub mod features;
pub mod fusion;
pub mod store;
pub mod synthetic;
pub mod error;

pub use error::{Error, Result};

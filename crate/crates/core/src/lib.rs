//! Tensor algebra, HOSVD subspace classification, a small CNN feature
//! extractor, data ingestion and a cross-validation harness.

pub mod api;
pub mod classifier;
pub mod cnn;
pub mod container;
pub mod data;
pub mod eval;
pub mod pipeline;
pub mod rng;
pub mod tensor;

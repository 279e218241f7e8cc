//! Citadel: a continual anomaly-detection laboratory.
//!
//! The pipeline turns tabular intrusion records into grayscale grids, trains a
//! masked autoencoder on benign traffic, and scores novelty with a local
//! outlier factor over the latent space. A drift-aware hierarchical replay
//! memory keeps the detector current across a stream of concepts without
//! forgetting earlier ones, and a scenario runner replays whole streams to
//! report lifelong metrics.

pub mod concepts;
pub mod data;
pub mod error;
pub mod features;
pub mod imaging;
pub mod kmeans;
pub mod mae;
pub mod memory;
pub mod metrics;
pub mod novelty;
pub mod runner;
pub mod seeding;

pub use error::{Error, Result};

//! STaR knowledge graph embeddings: a bilinear model whose relation matrix
//! combines scaling, rotation and translation in homogeneous coordinates.
//!
//! The crate covers triple ingestion, the score kernel and its gradients,
//! regularizers, full-softmax training, filtered ranking, executable checks
//! of the model's relation-pattern algebra, two-path imbalance statistics
//! and synthetic knowledge graph generation.

pub mod analysis;
pub mod checkpoint;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod model;
pub mod patterns;
pub mod regularization;
pub mod synth;
pub mod training;

pub use error::{Error, Result};

//! QoS-aware graph contrastive learning for web-service recommendation.
//!
//! The pipeline: threshold a WSDream response-time matrix into a bipartite
//! interaction graph, derive two augmented graph views (geodesic distance
//! filtering and random edge dropout), propagate one shared embedding
//! table through all three graphs with a linear graph convolution, and
//! train it with a joint pairwise-ranking plus contrastive objective.
//! Evaluation ranks every unseen service per user and reports Recall@K
//! and NDCG@K against mean-value and collaborative-filtering baselines.
//!
//! Start with the `examples/` directory: each file is a runnable tour of
//! one capability, from parsing through full experiments.

pub mod augment;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod experiments;
pub mod graph;
pub mod manifest;
pub mod synthetic;
pub mod training;

pub use error::{Error, Result};

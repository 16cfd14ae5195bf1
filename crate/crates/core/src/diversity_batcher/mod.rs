//! k-means clustering of temporal features and cluster-diverse batch plans.

mod batches;
mod kmeans;

pub use batches::{build_diverse_batches, build_random_batches, mean_pairwise_distance, Batch, BatchPlan};
pub use kmeans::{kmeans_fit, KMeansConfig, KMeansModel};

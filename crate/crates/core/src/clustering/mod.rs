//! Clustering engines: exact weighted K-Means on the line, and weighted
//! Lloyd iteration for vectors.

mod kmeans1d;
mod lloyd;

pub use kmeans1d::{kmeans1d_weighted, Clustering1D};
pub use lloyd::{lloyd_from, weighted_lloyd, LloydResult, DEFAULT_MAX_ITERS, DEFAULT_RESTARTS};

//! Multiresolution analysis and compression of graph signals with samplet forests.
//!
//! The graph is split into connected patches, every patch is embedded into a
//! low-dimensional Euclidean space by landmark Isomap, and on each embedded
//! patch an orthonormal samplet basis with vanishing moments is built from QR
//! factorizations of moment matrices. The resulting block-diagonal transform
//! is used to compress signals by adaptive tree coarsening or by norm-based
//! (best-k-term) thresholding.

pub mod cluster_tree;
pub mod compress;
pub mod datasets;
pub mod embed;
pub mod error;
pub mod graph;
pub mod io;
pub mod linalg;
pub mod partition;
pub mod pipeline;
pub mod samplets;
pub mod verify;

pub use error::{Error, Result};
pub use graph::{PointCloud, WeightedGraph};

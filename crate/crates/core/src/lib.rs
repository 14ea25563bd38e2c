//! Few-shot learning on graphs via local subgraphs.
//!
//! The crate has six pieces that build on each other:
//!
//! - [`graph`]: immutable undirected graphs, h-hop subgraph extraction,
//!   shortest paths, degree features and negative-edge sampling.
//! - [`synth`]: the Cycle and Barabási–Albert benchmark generators with
//!   structural-role labels (graphlet orbit counts + spectral clustering).
//! - [`autodiff`]: a tape-based reverse-mode engine over dense `f64`
//!   matrices, including meta-gradients through chains of inner SGD steps.
//! - [`gnn`]: a GCN encoder over subgraphs with a centroid readout.
//! - [`meta`]: episode sampling for the node-classification and
//!   link-prediction problems, prototype heads, the meta-training loop and
//!   the subgraph-level baselines.
//! - [`influence`]: node/graph influence computations and executable
//!   geometric-mean-degree decay bounds.

pub mod autodiff;
pub mod error;
pub mod gnn;
pub mod graph;
pub mod influence;
pub mod meta;
pub mod synth;

pub use error::{Error, Result};

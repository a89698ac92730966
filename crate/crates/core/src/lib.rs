//! Long-range iris verification over component graphs.
//!
//! The pipeline converts preprocessed iris images into attributed graphs
//! (one node per connected component of each intensity bin) and trains a
//! graph siamese network that decides whether two graphs come from the
//! same person.
//!
//! - [`imaging`]: netpbm I/O and preprocessing.
//! - [`graph_extract`]: image to graph conversion and the graph record format.
//! - [`dataset`]: manifests, splits, node caps, padding, pair generation.
//! - [`gsnn`]: the siamese network, its gradients, training and metrics.
//! - [`experiments`]: synthetic corpora and the three experiment protocols.
//! - [`config`]: the merged run configuration.

mod binio;
pub mod error;
pub mod imaging;
pub mod graph_extract;
pub mod dataset;
pub mod seed;
pub mod gsnn;
pub mod experiments;
pub mod config;

pub use error::{Error, Result};
pub use graph_extract::{extract_graph, ComponentNode, Edge, ExtractOptions, IrisGraph, SourceId};
pub use imaging::{Image, Mask, SpectralFilter};
pub use gsnn::{Architecture, Metrics, ModelParams, TrainConfig};
pub use dataset::{PaddedGraph, PairDataset};
pub use config::RunConfig;

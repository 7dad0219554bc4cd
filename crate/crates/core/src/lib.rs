//! Relational-graph MLPs: graph generators and metrics, graph-masked
//! multilayer perceptrons, training, and experiment sweeps.

pub mod connectome;
pub mod data;
pub mod error;
pub mod generate;
pub mod graph;
pub mod mlp;
pub mod rng;
pub mod sweep;
pub mod train;

pub use connectome::{import_connectome, matched_er, sample_subgraph, ConnectomeSource};
pub use data::{synthetic_blobs, Dataset, Normalization};
pub use error::{Error, Result};
pub use generate::{generate, Family, GeneratorSpec, Generated};
pub use graph::{Graph, GraphMetrics};
pub use mlp::{Checkpoint, MlpModel, ModelConfig, Scalar};
pub use sweep::{run_sweep, ExperimentRecord, SweepSpec};
pub use train::{evaluate, train, EvalResult, Precision, TrainConfig};

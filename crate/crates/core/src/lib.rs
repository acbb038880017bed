//! Deterministic single-process simulator of the FedGL and SpreadFGL
//! federated graph-learning protocols: Louvain subgraph partitioning,
//! GraphSAGE node classifiers on disjoint client subgraphs, an adversarial
//! graph-imputation generator with a negative-sampling assessor, and
//! FedAvg / neighbor-topology parameter aggregation across edge servers.
//!
//! Everything is seeded and reproducible: the same configuration and seed
//! produce bit-identical round logs regardless of thread count.

pub mod config;
pub mod error;
pub mod federation;
pub mod gnn;
pub mod gradsuite;
pub mod graph;
pub mod imputation;
pub mod metrics;
pub mod nn;
pub mod optim;
pub mod partition;
pub mod presets;
pub mod report;
pub mod rng;
pub mod synthetic;
pub mod tensor;

pub use error::{Error, Result};
pub use federation::{run_experiment, ExperimentOutput, FederationConfig, Mode, RoundLog, Topology};
pub use graph::{Graph, Split};
pub use partition::Partition;
pub use rng::Rng;
pub use tensor::Matrix;

//! Minimal dense-tensor reverse-mode automatic differentiation, the network
//! architectures, SGD with momentum, and checkpointing.

pub mod checkpoint;
pub mod graph;
pub mod model;
pub mod optim;
pub mod tensor;

pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use graph::{topo_embedding_batch, Graph, NodeId};
pub use model::{ForwardPass, Model, ModelKind, ModelSpec, NamedParam};
pub use optim::OptimizerState;
pub use tensor::Tensor;

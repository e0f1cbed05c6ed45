//! Topology-aware federated learning at desk scale.
//!
//! The crate covers the full pipeline: cubical persistent homology of 2-D
//! activation maps ([`cubical`], [`persistence`]), persistence-image
//! embeddings and diagram distances ([`pimage`], [`distance`]), ROC-AUC
//! block screening ([`screening`]), a from-scratch reverse-mode autodiff
//! stack with a differentiable topology node ([`nn`]), the federated
//! training loop with topological alignment ([`federation`]), non-I.I.D.
//! partition generators ([`partitions`]), and dataset ingestion ([`data`]).
//!
//! See the crate examples for one runnable program per capability, and the
//! `fedtopo` binary for the `ph` / `screen` / `partition` / `train` /
//! `report` commands.

pub mod config;
pub mod cubical;
pub mod data;
pub mod distance;
pub mod error;
pub mod federation;
pub mod field;
pub mod nn;
pub mod partitions;
pub mod persistence;
pub mod pimage;
pub mod report;
pub mod screening;

pub use error::{Error, Result};
pub use field::ScalarField;

//! Set-theoretic embeddings of item-attribute data.
//!
//! Learns vector and box (region) embeddings from noisy, incomplete
//! item-attribute observations, answers compositional conjunction/negation
//! queries over them, generates query benchmarks from co-occurrence
//! statistics, and evaluates every method with precision@k.

pub mod benchmark;
pub mod boxgeom;
pub mod boxmodel;
pub mod catalog;
pub mod checkpoint;
pub mod error;
pub mod eval;
pub mod hierarchy;
pub mod observations;
pub mod query;
pub mod rank;
pub mod table;
pub mod training;
pub mod vecmodel;

pub use boxgeom::{BoxTensor, GumbelParams};
pub use boxmodel::{BoxModel, BoxTable};
pub use catalog::EntityCatalog;
pub use error::{Error, Result};
pub use observations::{MatrixKind, ObservationMatrix};
pub use query::{format_query, ground_truth_match, parse_query, rho, Literal, Query};
pub use table::EmbeddingTable;
pub use vecmodel::{Transform, VecStrategy, VectorModel};

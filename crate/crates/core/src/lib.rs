//! Link recommendation under edge differential privacy: graph utilities,
//! private recommenders, accuracy/privacy trade-off bounds and exhaustive
//! audits on small graphs.

// `!(x > 0.0)` is used deliberately so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audit;
pub mod bounds;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod mechanisms;
mod quadrature;
pub mod utility;

pub use error::{Error, Result};
pub use graph::{load_edge_list, write_edge_list, Direction, EdgeEdit, EditKind, Graph, LoadedGraph, NodeId};
pub use mechanisms::{PrivacyParams, RecommendationDistribution};
pub use utility::{UtilityConfig, UtilityKind, UtilityVector};

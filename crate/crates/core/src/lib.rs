//! Position-aware graph structure learning for topology-imbalanced node
//! classification, with reaching/squashing diagnostics, a minimal GCN and
//! synthetic SBM benchmarks.

pub mod cli;
pub mod error;
pub mod gnn;
pub mod gpr;
pub mod graph;
pub mod metrics;
pub mod numerics;
pub mod position;
pub mod seed;
pub mod structure;
pub mod trainer;

pub use error::{PastelError, Result};

//! Label-aware sliding-window sketch for weighted graph streams.
//!
//! Each stream item is a directed edge between two labeled vertices, with an
//! edge label, a weight and a timestamp. [`LSketch`] maps vertex labels to
//! blocks of a compressed adjacency matrix, keeps per-subwindow counts and
//! prime products in each cell, and answers weight, reachability and
//! subgraph queries over the most recent window. [`oracle::ExactStore`] is
//! the exact reference used for evaluation.

pub mod analysis;
pub mod bench;
pub mod config;
pub mod counters;
pub mod error;
pub mod hashing;
pub mod matrix;
pub mod oracle;
pub mod pool;
pub mod sketch;
pub mod snapshot;
pub mod stats;
pub mod stream;
pub mod synth;

pub use config::SketchConfig;
pub use error::{Error, Result};
pub use oracle::ExactStore;
pub use sketch::{EdgeItem, InsertReceipt, LSketch, PatternEdge, Placement, QueryResult};

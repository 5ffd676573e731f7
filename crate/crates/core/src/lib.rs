//! Graph self-training with calibrated confidence, personalized-PageRank
//! logit propagation, and Banzhaf-value candidate ranking.

pub mod banzhaf;
pub mod calibration;
pub mod config;
pub mod error;
pub mod gcn;
pub mod graph;
pub mod numeric;
pub mod objective;
pub mod propagation;
pub mod report;
pub mod rng;
pub mod selftrain;
pub mod sweep;

pub use config::{RunConfig, Strategy};
pub use error::{Error, Result};

//! Detection of communication-protection policy anomalies.

pub mod anomaly;
pub mod bench;
pub mod error;
pub mod ingest;
pub mod network;
pub mod path;
pub mod policy;
pub mod relation;
pub mod report;
pub mod resolution;
pub mod scenario;

pub use anomaly::{run_analysis, Analysis, AnalysisOptions, Anomaly, AnomalyKind};
pub use error::{Error, Result};
pub use scenario::Scenario;

//! Corpus-auditing library for detecting demographic-predictive language
//! patterns in exam item banks.
//!
//! The pipeline clusters similar item stems, trains classifiers to predict
//! patient gender and age range from stem language alone within each
//! cluster, and compares accuracy against prevalence baselines. Clusters
//! where language predicts demographics get explained via topic modeling,
//! gazetteer entity frequencies, and metadata distribution checks, then
//! everything is assembled into one deterministic audit report.
//!
//! Stages are exposed individually in [`pipeline`]; [`pipeline::run_audit`]
//! composes them end to end.

pub mod analysis;
pub mod classify;
pub mod cluster;
pub mod config;
pub mod corpus;
pub mod error;
pub mod ner;
pub mod pipeline;
pub mod preprocess;
pub mod report;
pub mod seed;
pub mod stem;
pub mod topics;
pub mod vectorize;

pub use config::PipelineConfig;
pub use corpus::{Corpus, Item};
pub use error::{AuditError, Result};
pub use pipeline::run_audit;
pub use report::AuditReport;

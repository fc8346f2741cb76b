//! Deterministic regulatory compliance analysis.
//!
//! The crate covers the full path from regulatory text to a gap report:
//!
//! * [`corpus`]: documents, tokenization, chunking, hashed embeddings
//! * [`rkg`]: the regulatory knowledge graph and its update lifecycle
//! * [`retrieval`]: BM25 + dense hybrid retrieval with KG re-ranking
//! * [`extraction`]: rule-based entity, modality and cross-reference extraction
//! * [`gap`]: obligation/policy alignment, severity, grounding, reports
//! * [`specdec`]: speculative-decoding acceptance simulator
//! * [`eval`]: metrics, paired bootstrap, sweeps, ablations, cost model
//!
//! [`config::PipelineConfig`] gathers every knob and [`fixture`] builds
//! synthetic corpora with planted ground truth.

pub mod config;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod extraction;
pub mod fixture;
pub mod gap;
pub mod parallel;
pub mod retrieval;
pub mod rkg;
pub mod specdec;

pub use error::{Error, Result};
pub use parallel::Execution;

//! Top-level configuration file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::EmbedderConfig;
use crate::error::{Error, Result};
use crate::extraction::ExtractionConfig;
use crate::gap::{GapConfig, Pipeline, PipelineOptions};
use crate::parallel::Execution;
use crate::retrieval::RetrievalConfig;
use crate::rkg::GraphConfig;
use crate::specdec::SpecDecConfig;

pub const DEFAULT_SEED: u64 = 20_240_601;

/// Every knob of the pipeline. Missing sections take their defaults, so a
/// config file only needs the values it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub embedder: EmbedderConfig,
    pub retrieval: RetrievalConfig,
    pub extraction: ExtractionConfig,
    pub gap: GapConfig,
    pub specdec: SpecDecConfig,
    pub graph: GraphConfig,
    pub options: PipelineOptions,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            embedder: EmbedderConfig::default(),
            retrieval: RetrievalConfig::default(),
            extraction: ExtractionConfig::default(),
            gap: GapConfig::default(),
            specdec: SpecDecConfig::default(),
            graph: GraphConfig::default(),
            options: PipelineOptions::default(),
            seed: DEFAULT_SEED,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.embedder.validate()?;
        self.retrieval.validate()?;
        self.extraction.validate()?;
        self.gap.validate()?;
        self.specdec.validate()?;
        if self.graph.max_traversal_depth == 0 {
            return Err(Error::InvalidConfig("max_traversal_depth must be positive".into()));
        }
        Ok(())
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(json)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let body = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&body)
    }

    pub fn pipeline(&self, exec: Execution) -> Result<Pipeline> {
        Ok(
            Pipeline::new(self.embedder, self.retrieval, self.extraction.clone(), self.gap.clone())?
                .with_options(self.options)
                .with_execution(exec),
        )
    }
}

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::types::EntityType;
use crate::error::{Error, Result};

/// Weights of the bilinear cross-reference linker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LinkerWeights {
    Identity,
    /// Row-major `dim x dim` matrix.
    Dense {
        dim: usize,
        values: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractionConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    /// Phrases per entity type; matched longest-first on token sequences.
    pub gazetteer: BTreeMap<EntityType, Vec<String>>,
    pub obligation_cues: Vec<String>,
    pub permission_cues: Vec<String>,
    pub prohibition_cues: Vec<String>,
    pub recommendation_cues: Vec<String>,
    /// Words opening a subordinate clause for deontic confidence.
    pub subordinators: Vec<String>,
    /// Words opening an obligation's condition clause.
    pub condition_markers: Vec<String>,
    /// Words that turn a currency amount into a penalty.
    pub penalty_context: Vec<String>,
    pub citation_patterns: Vec<String>,
    pub link_threshold: f64,
    pub linker: LinkerWeights,
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

pub const DEFAULT_CITATION_PATTERNS: &[&str] = &[
    r"(?i)\bArticles?\s+\d+[a-z]?(?:\(\w+\))*(?:\s+of\s+(?:Delegated\s+)?(?:Directive|Regulation)(?:\s+\(EU\))?\s+(?:No\.?\s*)?\d+/\d+(?:/\w+)?)?",
    r"\bArt\.\s*\d+[a-z]?(?:\(\w+\))*",
    r"\b\d+\s+CFR\s+§+\s*\d+(?:\.\d+)*(?:\([a-z0-9]+\))*",
    r"(?:\b(?:BCBS\s+)?d\d{3}\s*)?¶+\s*\d+",
    r"\bItem\s+\d+(?:\([a-z0-9]+\))*",
    r"\bRule\s+\d+[a-z]?-\d+[a-z]?",
    r"\b(?:BCBS\s+)?d\d{3}\b",
    r"\b(?:Directive|Regulation)\s+(?:\(EU\)\s+)?(?:No\.?\s*)?\d{4}/\d+(?:/\w+)?",
    r"§\s*\d+(?:\.\d+)*",
];

impl Default for ExtractionConfig {
    fn default() -> Self {
        use EntityType::*;
        let mut gazetteer = BTreeMap::new();
        gazetteer.insert(
            RegulatedEntity,
            strings(&[
                "investment firm",
                "investment firms",
                "credit institution",
                "credit institutions",
                "bank",
                "banks",
                "internationally active bank",
                "internationally active banks",
                "institution",
                "institutions",
                "broker dealer",
                "investment adviser",
                "firm",
                "firms",
            ]),
        );
        gazetteer.insert(
            ReportingEntity,
            strings(&[
                "registrant",
                "registrants",
                "issuer",
                "issuers",
                "reporting entity",
                "filer",
            ]),
        );
        gazetteer.insert(
            RegulatoryBody,
            strings(&[
                "securities and exchange commission",
                "commission",
                "esma",
                "european securities and markets authority",
                "basel committee",
                "basel committee on banking supervision",
                "central bank",
            ]),
        );
        gazetteer.insert(
            SupervisoryAuthority,
            strings(&[
                "competent authority",
                "competent authorities",
                "national competent authority",
                "supervisory authority",
                "supervisor",
                "jurisdictional supervisor",
            ]),
        );
        gazetteer.insert(
            CapitalRequirement,
            strings(&[
                "common equity tier 1",
                "cet1",
                "capital ratio",
                "leverage ratio",
                "liquidity coverage ratio",
                "lcr",
                "high quality liquid assets",
                "hqla",
                "level 1 hqla",
            ]),
        );
        gazetteer.insert(
            FinancialInstrument,
            strings(&[
                "financial instrument",
                "financial instruments",
                "derivative",
                "derivatives",
                "central bank reserves",
            ]),
        );
        gazetteer.insert(
            ReportingFrequency,
            strings(&["annually", "quarterly", "monthly", "daily", "semi annually"]),
        );
        gazetteer.insert(
            DisclosureItem,
            strings(&[
                "executive compensation",
                "total shareholder return",
                "net income",
                "pay versus performance",
            ]),
        );
        gazetteer.insert(
            FilingType,
            strings(&["proxy statement", "information statement", "annual report", "form 10 k"]),
        );
        gazetteer.insert(
            Jurisdiction,
            strings(&["european union", "united states", "member state", "member states"]),
        );
        gazetteer.insert(
            Counterparty,
            strings(&[
                "client",
                "clients",
                "counterparty",
                "counterparties",
                "customer",
                "customers",
            ]),
        );
        gazetteer.insert(
            GovernanceRole,
            strings(&[
                "board of directors",
                "management body",
                "compliance officer",
                "chief risk officer",
            ]),
        );
        gazetteer.insert(
            RiskCategory,
            strings(&["credit risk", "market risk", "operational risk", "liquidity risk"]),
        );
        gazetteer.insert(
            CompliancePeriod,
            strings(&["business day", "business days", "calendar year", "financial year"]),
        );
        gazetteer.insert(
            AuditRequirement,
            strings(&["internal audit", "external audit", "independent audit"]),
        );
        gazetteer.insert(
            MarketType,
            strings(&["regulated market", "trading venue", "multilateral trading facility"]),
        );
        gazetteer.insert(
            TransactionType,
            strings(&[
                "portfolio management",
                "investment advice",
                "securities financing transaction",
            ]),
        );

        Self {
            lambda1: 0.4,
            lambda2: 0.3,
            lambda3: 0.3,
            gazetteer,
            obligation_cues: strings(&["shall", "must"]),
            permission_cues: strings(&["may"]),
            prohibition_cues: strings(&["may not", "shall not", "must not"]),
            recommendation_cues: strings(&["should"]),
            subordinators: strings(&["if", "when", "unless"]),
            condition_markers: strings(&["if", "when", "where", "unless", "subject to"]),
            penalty_context: strings(&[
                "penalty",
                "penalties",
                "fine",
                "fines",
                "sanction",
                "sanctions",
                "fined",
            ]),
            citation_patterns: strings(DEFAULT_CITATION_PATTERNS),
            link_threshold: 0.6,
            linker: LinkerWeights::Identity,
        }
    }
}

impl ExtractionConfig {
    pub fn validate(&self) -> Result<()> {
        if [self.lambda1, self.lambda2, self.lambda3].iter().any(|l| *l < 0.0) {
            return Err(Error::InvalidConfig("loss weights must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.link_threshold) {
            return Err(Error::InvalidConfig("link_threshold must lie in [0, 1]".into()));
        }
        if let LinkerWeights::Dense { dim, values } = &self.linker {
            if values.len() != dim * dim {
                return Err(Error::InvalidConfig(format!(
                    "linker matrix has {} values, expected {}",
                    values.len(),
                    dim * dim
                )));
            }
        }
        Ok(())
    }
}

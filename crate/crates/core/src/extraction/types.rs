use std::fmt;

use serde::{Deserialize, Serialize};

macro_rules! entity_types {
    ($($variant:ident => $name:literal),+ $(,)?) => {
        /// Closed inventory of regulatory entity types.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum EntityType {
            $(#[serde(rename = $name)] $variant,)+
        }

        impl EntityType {
            pub const ALL: &'static [EntityType] = &[$(EntityType::$variant,)+];

            pub fn name(self) -> &'static str {
                match self {
                    $(EntityType::$variant => $name,)+
                }
            }
        }
    };
}

entity_types! {
    RegulatoryBody => "Regulatory_Body",
    ReportingEntity => "Reporting_Entity",
    EffectiveDate => "Effective_Date",
    ThresholdValue => "Threshold_Value",
    FinancialInstrument => "Financial_Instrument",
    ObligationAction => "Obligation_Action",
    CompliancePeriod => "Compliance_Period",
    Jurisdiction => "Jurisdiction",
    PenaltyAmount => "Penalty_Amount",
    RiskCategory => "Risk_Category",
    CapitalRequirement => "Capital_Requirement",
    DisclosureItem => "Disclosure_Item",
    FilingType => "Filing_Type",
    Counterparty => "Counterparty",
    SupervisoryAuthority => "Supervisory_Authority",
    MarketType => "Market_Type",
    TransactionType => "Transaction_Type",
    GovernanceRole => "Governance_Role",
    AuditRequirement => "Audit_Requirement",
    ReportingFrequency => "Reporting_Frequency",
    LegalReference => "Legal_Reference",
    CrossBorderProvision => "Cross_Border_Provision",
    ExemptionClause => "Exemption_Clause",
    RegulatedEntity => "Regulated_Entity",
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DeonticModality {
    Obligation,
    Permission,
    Prohibition,
    Recommendation,
}

impl DeonticModality {
    /// Obligations and prohibitions are the records gap analysis consumes.
    pub fn is_gap_relevant(self) -> bool {
        matches!(self, DeonticModality::Obligation | DeonticModality::Prohibition)
    }
}

/// Half-open token range `[start, end)` within a sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityMention {
    pub span: Span,
    pub etype: EntityType,
    pub surface: String,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CitationSpan {
    pub text: String,
    /// Byte offsets into the sentence text.
    pub byte_start: usize,
    pub byte_end: usize,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossRef {
    pub source_span: Span,
    pub citation_text: String,
    pub target: Option<String>,
    pub link_confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obligation {
    pub obligation_id: String,
    pub entity: String,
    pub entity_type: EntityType,
    pub action: String,
    pub modality: DeonticModality,
    pub condition: Option<String>,
    pub source_provision: String,
    #[serde(default)]
    pub crossrefs: Vec<CrossRef>,
    pub confidence: f64,
    #[serde(default)]
    pub mentions: Vec<EntityMention>,
}

impl Obligation {
    /// Action followed by the condition, the text aligned against policies.
    pub fn requirement_text(&self) -> String {
        match &self.condition {
            Some(c) => format!("{} {}", self.action, c),
            None => self.action.clone(),
        }
    }

    pub fn carries_type(&self, etype: EntityType) -> bool {
        self.entity_type == etype || self.mentions.iter().any(|m| m.etype == etype)
    }

    pub fn resolved_targets(&self) -> impl Iterator<Item = &str> {
        self.crossrefs.iter().filter_map(|c| c.target.as_deref())
    }
}
